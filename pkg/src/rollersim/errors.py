"""Exception hierarchy shared across the package."""


class RollerSimError(Exception):
    """Base class for all rollersim errors."""


class ValidationError(RollerSimError):
    """An input value violates a documented invariant."""


class ParseError(RollerSimError):
    """Malformed scenario/schedule text.

    ``position`` is the byte offset of the first offending character when
    known, else None.
    """

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class DegenerateContact(ValidationError):
    """Contact position has zero norm."""


class NonTangentVelocity(ValidationError):
    """Belt velocity has a radial component at the contact."""


class NoContacts(ValidationError):
    """An operation that needs at least one contact got none."""


class SolverError(RollerSimError):
    """Base class for solver failures."""


class NonConvergence(SolverError):
    """Iteration budget exhausted with residual above tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class RotationNotCancelled(SolverError):
    """Translation solve requested while the rotation equilibrium is nonzero."""


class DegenerateDirection(ValidationError):
    """Direction-balance diagnostic has no usable direction (v* ~ 0)."""


class SurfaceMismatch(ValidationError):
    """Mount contact point does not lie on the object surface."""


class ParallelAxis(ValidationError):
    """Finger axis is parallel to the surface normal; no tangent projection."""


class PlanningError(RollerSimError):
    """Base class for planner failures."""


class Unreachable(PlanningError):
    """No belt command realizes the requested motion within tolerance."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class PlanInfeasible(PlanningError):
    """Scenario cannot support the requested plan (e.g. colinear axes only)."""


class BudgetExhausted(PlanningError):
    """Segment budget hit before the goal tolerance was reached.

    ``partial_plan`` carries whatever progress was made, for diagnostics.
    """

    def __init__(self, message, partial_plan=None):
        super().__init__(message)
        self.partial_plan = partial_plan


class SolverFailure(SolverError):
    """A simulation step could not solve the contact equilibrium."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class Escaped(RollerSimError):
    """Object center left the workspace sphere."""

    def __init__(self, message, t=None, position=None):
        super().__init__(message)
        self.t = t
        self.position = position


class TeleopError(RollerSimError):
    """Base class for teleoperation service errors."""

    code = "teleop_error"


class UnknownSession(TeleopError):
    code = "unknown_session"


class BadLength(TeleopError):
    code = "bad_length"


class CapacityExceeded(TeleopError):
    code = "capacity_exceeded"


class SessionPaused(TeleopError):
    code = "session_paused"
