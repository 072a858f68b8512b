"""Object-twist equilibria under active-surface Coulomb friction.

Two rotation solvers are exposed on purpose:

* ``equilibrium_omega`` finds the angular velocity at which the slipping
  friction torques balance, by minimizing the convex weighted-slip potential
  D(w) = sum_i r_i*mu_i*|Fn_i|*|v_i - w x p_i|. Its stationarity condition
  is exactly the torque balance, it handles sticking kinks via subgradients,
  and it is what the simulator and planner use.
* ``paper_weighted_omega`` iterates the closed-form weighted-mean motion
  model w = sum(r_i k_i w_i)/sum(r_i k_i) verbatim. The closed form drops
  the component of (w_i - w) along p_i, so the two agree only when that
  orthogonality holds; ``solver_divergence`` reports the gap per scenario.

Both treat belt speeds as inputs and contact normal forces as given.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core import (
    DEFAULT_EPS_SLIP,
    BeltCommand,
    ContactKinematics,
    ContactState,
    RollerContact,
    command_speeds,
    contact_arrays,
    contact_kinematics,
    induced_omega,
)
from .errors import (
    DegenerateDirection,
    NoContacts,
    NonConvergence,
    RotationNotCancelled,
    ValidationError,
)
from .geometry import as_vec3

logger = logging.getLogger(__name__)

_EYE3 = np.eye(3)


class SolverMode(enum.Enum):
    PINNED_CENTER = "pinned_center"
    FREE_TRANSLATION = "free_translation"


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances and iteration limits for the IRLS equilibrium solvers.

    tol_omega is the rotation-cancellation gate used by the translation
    solve (rad/s).
    """

    tol_torque: float = 1e-8
    tol_step: float = 1e-10
    max_iters: int = 500
    damping: float = 1.0
    eps_reg: float = 1e-9
    mode: SolverMode = SolverMode.PINNED_CENTER
    eps_slip: float = DEFAULT_EPS_SLIP
    tol_omega: float = 1e-6

    def __post_init__(self):
        if not (self.tol_torque > 0 and self.tol_step > 0 and self.eps_reg > 0):
            raise ValidationError("solver tolerances must be positive")
        if not (0 < self.damping <= 1.0):
            raise ValidationError(f"damping must be in (0, 1], got {self.damping}")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")


DEFAULT_OPTIONS = SolverOptions()


@dataclass(frozen=True)
class EquilibriumSolution:
    """Solved object twist plus per-contact slip state and residuals."""

    omega: np.ndarray
    v_obj: np.ndarray
    per_contact: tuple[ContactKinematics, ...]
    torque_residual: np.ndarray
    force_residual: np.ndarray
    dissipation: float
    converged: bool
    iterations: int

    @property
    def all_slipping(self) -> bool:
        return all(k.state is ContactState.SLIPPING for k in self.per_contact)


# ---------------------------------------------------------------------------
# Array-level rotation solve (positions may be off the nominal tangent pose)

def _cross_vec_rows(omega, p):
    """cross(omega, p_i) for each row p_i, without np.cross overhead."""
    out = np.empty_like(p)
    out[:, 0] = omega[1] * p[:, 2] - omega[2] * p[:, 1]
    out[:, 1] = omega[2] * p[:, 0] - omega[0] * p[:, 2]
    out[:, 2] = omega[0] * p[:, 1] - omega[1] * p[:, 0]
    return out


def _cross_rows(a, b):
    """Row-wise cross product of two (N, 3) arrays."""
    out = np.empty_like(a)
    out[:, 0] = a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]
    out[:, 1] = a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2]
    out[:, 2] = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    return out


def _row_norms(m):
    return np.sqrt(np.einsum("ij,ij->i", m, m))


def _potential(p, w, vels, omega) -> float:
    slips = vels - _cross_vec_rows(omega, p)
    return float(np.dot(w, _row_norms(slips)))


def _slip_norms(p, vels, omega):
    slips = vels - _cross_vec_rows(omega, p)
    return slips, _row_norms(slips)


def _torque_and_capacity(p, w, slips, norms, eps_slip):
    """Total slipping torque and the static capacity of sticking contacts."""
    slipping = norms > eps_slip
    tau = np.zeros(3)
    if np.any(slipping):
        unit = slips[slipping] / norms[slipping, None]
        tau = (w[slipping, None] * _cross_rows(p[slipping], unit)).sum(axis=0)
    if np.all(slipping):
        cap = 0.0
    else:
        cap = float(np.dot(w[~slipping], _row_norms(p[~slipping])))
    return tau, cap


def _irls_init(p, vels):
    # Unweighted mean of the per-contact induced rotations, projecting out
    # any radial velocity component so the init is defined off-tangent too.
    r2 = np.maximum((p * p).sum(axis=1), 1e-300)
    return (_cross_rows(p, vels) / r2[:, None]).mean(axis=0)


def solve_omega_arrays(
    p: np.ndarray,
    d: np.ndarray,
    w: np.ndarray,
    speeds: np.ndarray,
    opts: SolverOptions = DEFAULT_OPTIONS,
    omega0: np.ndarray | None = None,
    raise_on_fail: bool = True,
    polish: bool = True,
    vels: np.ndarray | None = None,
) -> tuple[np.ndarray, int, bool, float]:
    """Minimize the weighted-slip potential over omega (center pinned).

    Iteratively reweighted least squares: each pass solves the 3x3 normal
    system of min sum_i u_i |v_i - w x p_i|^2 with u_i = w_i/max(|slip_i|,
    eps_reg), taking the minimal-norm solution when the system is singular
    (all-sticking families). A smoothed-Newton continuation finishes the
    nonsmooth tail that Weiszfeld iterations crawl through. Returns
    (omega, iterations, converged, torque_residual_norm).

    polish=False skips the continuation/verification phases and returns the
    raw IRLS iterate: cheap and a little loose, for search loops that only
    need approximate directions.
    """
    n = p.shape[0]
    if n == 0:
        raise NoContacts("equilibrium solve requires at least one contact")
    if not np.any(w > 0.0):
        return np.zeros(3), 0, True, 0.0

    vels = speeds[:, None] * d if vels is None else np.asarray(vels, dtype=float)

    # All-sticking fast path: if the stacked no-slip system is consistent,
    # its minimal-norm solution is the global minimum (D = 0, zero torque).
    stick = _sticking_solution(p, w, vels, opts.eps_slip)
    if stick is not None:
        return stick, 0, True, 0.0

    omega = _irls_init(p, vels) if omega0 is None else np.array(omega0, dtype=float)
    dval = _potential(p, w, vels, omega)
    pxv = _cross_rows(p, vels)
    r2 = (p * p).sum(axis=1)
    iters = 0

    def criterion(x):
        slips, norms = _slip_norms(p, vels, x)
        tau, cap = _torque_and_capacity(p, w, slips, norms, opts.eps_slip)
        res = float(np.linalg.norm(tau))
        mixed = bool(np.any(norms <= opts.eps_slip))
        return res <= opts.tol_torque + cap, res, mixed

    def irls(budget):
        nonlocal omega, dval, iters
        prev_step = np.inf
        slow = 0
        for _ in range(budget):
            iters += 1
            slips, norms = _slip_norms(p, vels, omega)
            tau, cap = _torque_and_capacity(p, w, slips, norms, opts.eps_slip)
            if float(np.linalg.norm(tau)) <= opts.tol_torque + cap:
                return True
            u = w / np.maximum(norms, opts.eps_reg)
            a_mat = _EYE3 * np.dot(u, r2) - (p.T * u) @ p
            b = (u[:, None] * pxv).sum(axis=0)
            if np.linalg.det(a_mat) > 1e-12 * (np.trace(a_mat) / 3.0) ** 3:
                target = np.linalg.solve(a_mat, b)
            else:
                target, *_ = np.linalg.lstsq(a_mat, b, rcond=None)
            lam = opts.damping
            step = target - omega
            for _ in range(12):
                cand = omega + lam * step
                cval = _potential(p, w, vels, cand)
                if cval <= dval + 1e-15:
                    break
                lam *= 0.5
            if cval > dval + 1e-15:
                return False  # IRLS direction is dead; polish takes over
            omega, dval = cand, cval
            step_norm = np.linalg.norm(lam * step)
            if step_norm <= opts.tol_step:
                return False
            # Weiszfeld's tail is linear and can crawl; once steps shrink
            # slowly, second-order polish is cheaper than more sweeps.
            slow = slow + 1 if step_norm > 0.5 * prev_step else 0
            prev_step = step_norm
            if slow >= 4:
                return False

    def settle_phase():
        # The line Newton sharpens a single-stick rest to the restricted
        # optimum (where the capacity test is exact) and probes guard
        # against false rests at multi-stick vertices; the smoothed-Newton
        # continuation does the heavy lifting whenever those find the
        # iterate is not actually settled.
        nonlocal omega, dval
        for _ in range(4):
            _, omega, dval = _kink_descent(p, w, vels, omega, dval, opts)
            ok, res, mixed = criterion(omega)
            if ok:
                if not (mixed and dval > 1e-12):
                    return ok, res
                probe = _probe_optimal(p, w, vels, omega, dval, opts)
                if probe is None:
                    return ok, res
                omega, dval = probe
            omega = _smoothed_newton(p, w, vels, omega, opts)
            dval = _potential(p, w, vels, omega)
        return criterion(omega)[:2]

    if not polish:
        irls(min(30, opts.max_iters))
        ok, res, _ = criterion(omega)
        return omega, iters, ok, res

    done = irls(min(8, opts.max_iters))
    ok, res, mixed = criterion(omega)
    if done and not (mixed and dval > 1e-12):
        return omega, iters, True, res
    converged, residual = settle_phase()
    if not converged and iters < opts.max_iters:
        irls(opts.max_iters - iters)
        converged, residual = settle_phase()
    if not converged:
        # Derivative-free last resort before reporting failure.
        omega, dval, _, _ = _pattern_descent(p, w, vels, omega, dval, opts)
        _, omega, dval = _kink_descent(p, w, vels, omega, dval, opts)
        converged, residual, _ = criterion(omega)
    if not converged and raise_on_fail:
        raise NonConvergence(
            f"torque residual {residual:.3e} N*m after {iters} IRLS iterations "
            "and refinement",
            residual=residual,
            iterations=iters,
        )
    return omega, iters, converged, residual


def _sticking_solution(p, w, vels, eps_slip):
    """Minimal-norm solution of the stacked no-slip system over the
    positive-weight contacts, or None when rolling everywhere is impossible."""
    active = w > 0.0
    pa = p[active]
    va = vels[active]
    k = pa.shape[0]
    a_stack = np.zeros((3 * k, 3))
    for i, pi in enumerate(pa):
        a_stack[3 * i:3 * i + 3] = [
            [0.0, -pi[2], pi[1]],
            [pi[2], 0.0, -pi[0]],
            [-pi[1], pi[0], 0.0],
        ]
    omega, *_ = np.linalg.lstsq(a_stack, -va.ravel(), rcond=None)
    slips = va - _cross_vec_rows(omega, pa)
    if float(np.max(_row_norms(slips))) <= eps_slip:
        return omega
    return None


def _smoothed_newton(p, w, vels, omega, opts):
    """Newton continuation on D_eps = sum w*sqrt(|slip|^2 + eps^2).

    The smoothing removes the Coulomb kinks so Newton converges through
    mixed sticking/slipping minima; shrinking eps recovers the true
    potential to far below the solver tolerances.
    """
    r2 = (p * p).sum(axis=1)
    scale = max(float(np.max(np.abs(vels))), 1e-9)
    omega = np.array(omega, dtype=float)
    for eps in (1e-4 * scale, 1e-8 * scale, 1e-12 * scale):
        e2 = eps * eps
        s = vels - _cross_vec_rows(omega, p)
        nn = np.sqrt(np.einsum("ij,ij->i", s, s) + e2)
        val = float(np.dot(w, nn))
        for _ in range(15):
            cr = _cross_rows(p, s)
            invn = w / nn
            g = -(invn[:, None] * cr).sum(axis=0)
            gn = float(np.linalg.norm(g))
            if gn <= 0.05 * opts.tol_torque:
                break
            h = (
                _EYE3 * np.dot(invn, r2)
                - (p.T * invn) @ p
                - (cr.T * (invn / (nn * nn))) @ cr
            )
            h = h + (1e-12 * max(np.trace(h), 1e-30)) * _EYE3
            try:
                delta = np.linalg.solve(h, -g)
            except np.linalg.LinAlgError:
                delta, *_ = np.linalg.lstsq(h, -g, rcond=None)
            lam = 1.0
            accepted = False
            for _ in range(25):
                cand = omega + lam * delta
                s_c = vels - _cross_vec_rows(cand, p)
                nn_c = np.sqrt(np.einsum("ij,ij->i", s_c, s_c) + e2)
                val_c = float(np.dot(w, nn_c))
                if val_c <= val + 1e-16:
                    accepted = True
                    break
                lam *= 0.5
            if not accepted or np.linalg.norm(lam * delta) <= 1e-16:
                break
            omega, s, nn, val = cand, s_c, nn_c, val_c
    return omega




def _line_newton(p, w, vels, omega, dval, u, opts, max_iter=12):
    """1-d Newton along direction u (smooth there when u is the tangent of
    the single sticking contact's kink line). Returns (omega, value, moved)."""
    moved = False
    for _ in range(max_iter):
        slips, norms = _slip_norms(p, vels, omega)
        slipping = norms > opts.eps_slip
        if not np.any(slipping):
            break
        unit = slips[slipping] / norms[slipping, None]
        # dD/dt = -sum w_i (p_i x s_hat_i) . u over slipping contacts
        g = -float(
            np.dot((w[slipping, None] * _cross_rows(p[slipping], unit)).sum(axis=0), u)
        )
        c = _cross_rows(p[slipping], np.broadcast_to(u, (int(slipping.sum()), 3)))
        cs = np.einsum("ij,ij->i", c, unit)
        h = float(np.dot(w[slipping] / norms[slipping],
                         np.einsum("ij,ij->i", c, c) - cs * cs))
        if h <= 0.0 or abs(g) <= 1e-16:
            break
        t = -g / h
        cand = omega + t * u
        cval = _potential(p, w, vels, cand)
        if cval > dval + 1e-15:
            t *= 0.5
            cand = omega + t * u
            cval = _potential(p, w, vels, cand)
            if cval > dval + 1e-15:
                break
        omega, dval = cand, cval
        moved = True
        if abs(t) <= 1e-14:
            break
    return omega, dval, moved


def _cross_batch(points, p):
    """cross(point_g, p_j) for every (g, j) pair, shape (G, N, 3)."""
    g = points[:, None, :]
    out = np.empty((points.shape[0], p.shape[0], 3))
    out[..., 0] = g[..., 1] * p[None, :, 2] - g[..., 2] * p[None, :, 1]
    out[..., 1] = g[..., 2] * p[None, :, 0] - g[..., 0] * p[None, :, 2]
    out[..., 2] = g[..., 0] * p[None, :, 1] - g[..., 1] * p[None, :, 0]
    return out


def _pattern_descent(p, w, vels, omega, dval, opts,
                     start=3e-2, floor=1e-11, max_sweeps=400):
    """Batched shrinking-step descent over axes, diagonals and kink
    tangents; the derivative-free last resort. Returns
    (omega, value, moved, at_floor)."""
    p_unit = p / np.linalg.norm(p, axis=1, keepdims=True)
    dirs = np.vstack([_CD_DIRECTIONS, p_unit, -p_unit])

    def batch(points):
        s = vels[None, :, :] - _cross_batch(points, p)
        return np.einsum("j,gj->g", w, np.sqrt(np.einsum("gjk,gjk->gj", s, s)))

    x, fx = omega, dval
    step = start * max(1.0, float(np.linalg.norm(omega)))
    moved = False
    sweeps = 0
    at_floor = False
    while sweeps < max_sweeps:
        sweeps += 1
        cands = x[None, :] + step * dirs
        fc = batch(cands)
        k = int(np.argmin(fc))
        if fc[k] < fx - 1e-15:
            x, fx = cands[k], float(fc[k])
            moved = True
        else:
            if step <= floor:
                at_floor = True
                break
            step *= 0.5
    return x, fx, moved, at_floor


def _kink_descent(p, w, vels, omega, dval, opts):
    """Single-stick sharpener: Newton along the sticking contact's kink
    line reaches the restricted optimum, where the capacity criterion is
    exact. Returns (moved, omega, value)."""
    if dval <= 1e-12:
        return False, omega, dval
    _, norms = _slip_norms(p, vels, omega)
    stick = np.nonzero(norms <= opts.eps_slip)[0]
    if stick.size != 1:
        return False, omega, dval
    u = p[stick[0]] / np.linalg.norm(p[stick[0]])
    omega, dval, moved = _line_newton(p, w, vels, omega, dval, u, opts)
    return moved, omega, dval


def _probe_optimal(p, w, vels, omega, dval, opts):
    """Two-scale batched probe: None when no direction improves, else the
    improving point. Cheap escape hatch for false kink rests."""
    p_unit = p / np.linalg.norm(p, axis=1, keepdims=True)
    dirs = np.vstack([_CD_DIRECTIONS, p_unit, -p_unit])
    scale = max(1.0, float(np.linalg.norm(omega)))
    for h in (1e-6 * scale, 1e-4 * scale):
        cands = omega[None, :] + h * dirs
        s = vels[None, :, :] - _cross_batch(cands, p)
        fc = np.einsum("j,gj->g", w, np.sqrt(np.einsum("gjk,gjk->gj", s, s)))
        k = int(np.argmin(fc))
        if fc[k] < dval - 1e-15:
            return cands[k], float(fc[k])
    return None


def _solution_from_omega(
    contacts, speeds, omega, v_obj, weights, opts
) -> EquilibriumSolution:
    per = tuple(
        contact_kinematics(c, s, omega, v_obj, opts.eps_slip)
        for c, s in zip(contacts, speeds)
    )
    p, d, w = contact_arrays(contacts, weights)
    slips = speeds[:, None] * d - np.asarray(v_obj)[None, :] - np.cross(omega, p)
    norms = np.linalg.norm(slips, axis=1)
    tau, _cap = _torque_and_capacity(p, w, slips, norms, opts.eps_slip)
    slipping = norms > opts.eps_slip
    strengths = np.array([c.strength for c in contacts])
    force = np.zeros(3)
    if np.any(slipping):
        unit = slips[slipping] / norms[slipping, None]
        force = (strengths[slipping, None] * unit).sum(axis=0)
    dval = float(np.dot(w, norms))
    return EquilibriumSolution(
        omega=np.asarray(omega, dtype=float),
        v_obj=np.asarray(v_obj, dtype=float),
        per_contact=per,
        torque_residual=tau,
        force_residual=force,
        dissipation=dval,
        converged=True,
        iterations=0,
    )


def equilibrium_omega(
    contacts: Sequence[RollerContact],
    command,
    radius_weights=None,
    opts: SolverOptions = DEFAULT_OPTIONS,
) -> EquilibriumSolution:
    """Torque-balance angular velocity of the object, center pinned.

    Minimizes the weighted-slip potential; on all-sticking families returns
    the minimal-norm member (zero-spin convention).
    """
    if not contacts:
        raise NoContacts("equilibrium_omega requires at least one contact")
    if opts.mode is not SolverMode.PINNED_CENTER:
        raise ValidationError("equilibrium_omega requires mode=PINNED_CENTER")
    speeds = command_speeds(command)
    if len(speeds) != len(contacts):
        raise ValidationError(f"{len(speeds)} speeds for {len(contacts)} contacts")
    p, d, w = contact_arrays(contacts, radius_weights)
    omega, iters, converged, _residual = solve_omega_arrays(p, d, w, speeds, opts)
    sol = _solution_from_omega(contacts, speeds, omega, np.zeros(3), radius_weights, opts)
    return replace(sol, converged=converged, iterations=iters)


def paper_weighted_omega(
    contacts: Sequence[RollerContact],
    command,
    radius_weights=None,
    opts: SolverOptions = DEFAULT_OPTIONS,
) -> np.ndarray:
    """Fixed point of the literal weighted-mean motion model.

    w = sum(r_i k_i w_i) / sum(r_i k_i) with w_i the per-contact induced
    rotation and k_i = mu_i|Fn_i| / max(|v_i - w x p_i|, eps_reg), iterated
    with damping from the unweighted mean. Every iterate stays in the convex
    hull of the w_i.
    """
    if not contacts:
        raise NoContacts("paper_weighted_omega requires at least one contact")
    speeds = command_speeds(command)
    if len(speeds) != len(contacts):
        raise ValidationError(f"{len(speeds)} speeds for {len(contacts)} contacts")
    p, d, _ = contact_arrays(contacts, None)
    strengths = np.array([c.strength for c in contacts])
    if radius_weights is None:
        radius_weights = np.ones(len(contacts))
    r = np.asarray(radius_weights, dtype=float)

    omegas = np.array([induced_omega(c, s) for c, s in zip(contacts, speeds)])
    omega = omegas.mean(axis=0)
    if len(contacts) == 1:
        return omegas[0]

    vels = speeds[:, None] * d

    def weighted_mean(x):
        _, norms = _slip_norms(p, vels, x)
        k = strengths / np.maximum(norms, opts.eps_reg)
        rk = r * k
        total = rk.sum()
        if total <= 0.0:
            return x
        return (rk[:, None] * omegas).sum(axis=0) / total

    lam = opts.damping
    prev_step = None
    for _ in range(min(100, opts.max_iters)):
        target = weighted_mean(omega)
        step = target - omega
        if np.linalg.norm(step) <= max(opts.tol_step, 1e-12):
            return target
        if prev_step is not None and np.dot(step, prev_step) < 0.0:
            lam *= 0.5  # 2-cycling near a slip kink; settle by averaging
        omega = omega + lam * step
        if np.linalg.norm(lam * step) <= opts.tol_step:
            break
        prev_step = step

    # The plain iteration can creep or orbit; the fixed point still exists
    # (continuous self-map of the convex hull of the induced rotations) and
    # lies inside that hull, so solve for the combination weights directly.
    if len(contacts) == 2:
        # The hull is a segment: 1-d bisection on the blend parameter.
        def blend_gap(t):
            x = (1.0 - t) * omegas[0] + t * omegas[1]
            _, norms = _slip_norms(p, vels, x)
            k = strengths / np.maximum(norms, opts.eps_reg)
            rk = r * k
            return t - rk[1] / rk.sum()

        lo, hi = 0.0, 1.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if blend_gap(mid) <= 0.0:
                lo = mid
            else:
                hi = mid
        t = 0.5 * (lo + hi)
        return (1.0 - t) * omegas[0] + t * omegas[1]

    from scipy.optimize import minimize as _minimize

    def simplex_residual(lmb):
        lmb = np.abs(lmb)
        lmb = lmb / lmb.sum()
        x = lmb @ omegas
        diff = weighted_mean(x) - x
        return float(diff @ diff)

    res = _minimize(
        simplex_residual,
        np.full(len(contacts), 1.0 / len(contacts)),
        method="Nelder-Mead",
        options={"xatol": 1e-12, "fatol": 1e-24, "maxfev": 4000},
    )
    lmb = np.abs(res.x)
    lmb = lmb / lmb.sum()
    omega = lmb @ omegas
    for _ in range(30):
        target = weighted_mean(omega)
        if np.linalg.norm(target - omega) <= opts.tol_step:
            return target
        omega = omega + 0.5 * (target - omega)

    from scipy.optimize import root as _root

    sol = _root(lambda x: weighted_mean(x) - x, omega, method="hybr", tol=1e-14)
    cand = weighted_mean(sol.x)
    if np.linalg.norm(weighted_mean(cand) - cand) < np.linalg.norm(
        weighted_mean(omega) - omega
    ):
        omega = cand
    resid = float(np.linalg.norm(weighted_mean(omega) - omega))
    # Near-neutral map directions bound the attainable residual; a few
    # 1e-6 rad/s is far below any downstream use of this diagnostic form.
    if resid <= 1e-5 * max(1.0, float(np.linalg.norm(omega))):
        return weighted_mean(omega)
    raise NonConvergence(
        f"weighted-mean fixed point residual {resid:.3e} rad/s",
        residual=resid,
        iterations=opts.max_iters,
    )


# ---------------------------------------------------------------------------
# Translation

def geometric_median(points: np.ndarray, weights: np.ndarray, opts: SolverOptions):
    """Weiszfeld iteration for the weighted geometric median of 3-d points.

    Returns (median, iterations). Deterministic; starts at the unweighted
    mean and damps on objective increase.
    """
    pts = np.asarray(points, dtype=float)
    w = np.asarray(weights, dtype=float)
    if not np.any(w > 0.0):
        return pts.mean(axis=0), 0
    v = pts.mean(axis=0)

    def obj(x):
        return float(np.dot(w, np.linalg.norm(pts - x, axis=1)))

    val = obj(v)
    iters = 0
    for iters in range(1, opts.max_iters + 1):
        dist = np.linalg.norm(pts - v, axis=1)
        u = w / np.maximum(dist, opts.eps_reg)
        target = (u[:, None] * pts).sum(axis=0) / u.sum()
        lam = opts.damping
        step = target - v
        for _ in range(30):
            cand = v + lam * step
            cval = obj(cand)
            if cval <= val + 1e-15:
                break
            lam *= 0.5
        v, val = cand, cval
        if np.linalg.norm(lam * step) <= opts.tol_step:
            break
    return v, iters


def drift_velocity(
    contacts: Sequence[RollerContact], command, omega, opts: SolverOptions = DEFAULT_OPTIONS
) -> np.ndarray:
    """Quasi-static translation response: the weighted geometric median of
    the effective contact velocities v_i - omega x p_i under force weights
    mu_i|Fn_i|. With omega = 0 this is the pure-translation force balance."""
    speeds = command_speeds(command)
    p = np.array([c.position for c in contacts])
    d = np.array([c.belt_dir for c in contacts])
    strengths = np.array([c.strength for c in contacts])
    eff = speeds[:, None] * d - np.cross(as_vec3(omega), p)
    v, _ = geometric_median(eff, strengths, opts)
    return v


def translation_equilibrium(
    contacts: Sequence[RollerContact],
    command,
    opts: SolverOptions | None = None,
) -> EquilibriumSolution:
    """Pure-translation velocity v* from the tangential force balance.

    Requires the rotation equilibrium to vanish first (checked against
    opts.tol_omega); then v* is the weighted geometric median of the belt
    velocities, which zeroes the net slipping force at smooth minimizers and
    implies the orthogonal-direction balance diagnostic.
    """
    if not contacts:
        raise NoContacts("translation_equilibrium requires at least one contact")
    if opts is None:
        opts = replace(DEFAULT_OPTIONS, mode=SolverMode.FREE_TRANSLATION)
    if opts.mode is not SolverMode.FREE_TRANSLATION:
        raise ValidationError("translation_equilibrium requires mode=FREE_TRANSLATION")
    speeds = command_speeds(command)
    if len(speeds) != len(contacts):
        raise ValidationError(f"{len(speeds)} speeds for {len(contacts)} contacts")

    rot_opts = replace(opts, mode=SolverMode.PINNED_CENTER)
    p, d, w = contact_arrays(contacts, None)
    strengths = np.array([c.strength for c in contacts])
    vels = speeds[:, None] * d

    # Joint quasi-static equilibrium by block descent: the v-step is the
    # weighted geometric median of the effective contact velocities, the
    # omega-step re-solves the rotation in the translating frame. Contacts
    # that translate with their belts have omega = 0 jointly even when the
    # pinned-center rotation would not vanish (e.g. a single contact).
    v_star, iters = geometric_median(vels, strengths, opts)
    omega = np.zeros(3)
    for _ in range(8):
        omega, _, _, _ = solve_omega_arrays(
            p, d, w, speeds, rot_opts, vels=vels - v_star
        )
        eff = vels - np.cross(omega, p)
        v_new, it_v = geometric_median(eff, strengths, opts)
        iters += it_v + 1
        if np.linalg.norm(v_new - v_star) <= opts.tol_step:
            v_star = v_new
            break
        v_star = v_new

    wnorm = float(np.linalg.norm(omega))
    if wnorm > opts.tol_omega:
        raise RotationNotCancelled(
            f"joint rotation equilibrium |omega| = {wnorm:.3e} rad/s exceeds "
            f"tol_omega = {opts.tol_omega:.1e}; cancel rotation first"
        )
    sol = _solution_from_omega(contacts, speeds, np.zeros(3), v_star, None, opts)
    return replace(sol, iterations=iters)


def eq9_residual(contacts: Sequence[RollerContact], command, v_star) -> float:
    """Orthogonal-direction force balance diagnostic for pure translation.

    Each slipping contact contributes its Coulomb force magnitude along the
    unit vector v_i x v* / |v_i x v*|; the norm of the vector sum is
    returned. Sticking contacts and contacts with v_i parallel to v*
    contribute zero (no orthogonal component to balance).
    """
    v_star = as_vec3(v_star)
    vn = np.linalg.norm(v_star)
    if vn <= 1e-12:
        raise DegenerateDirection("v* is zero; no translation direction to check")
    speeds = command_speeds(command)
    if len(speeds) != len(contacts):
        raise ValidationError(f"{len(speeds)} speeds for {len(contacts)} contacts")
    total = np.zeros(3)
    for c, s in zip(contacts, speeds):
        v_i = s * c.belt_dir
        slip = v_i - v_star
        slip_n = np.linalg.norm(slip)
        if slip_n <= DEFAULT_EPS_SLIP:
            continue
        cross = np.cross(v_i, v_star)
        cross_n = np.linalg.norm(cross)
        if cross_n <= 1e-12 * max(1.0, np.linalg.norm(v_i) * vn):
            continue
        tangential = c.strength * (slip / slip_n)
        total += float(np.dot(tangential, slip / slip_n)) * (cross / cross_n)
    return float(np.linalg.norm(total))


# ---------------------------------------------------------------------------
# Independent oracle

_CD_DIRECTIONS = np.vstack(
    [
        np.eye(3),
        -np.eye(3),
        np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
            dtype=float,
        )
        / np.sqrt(3.0),
    ]
)


def brute_force_omega(
    contacts: Sequence[RollerContact],
    command,
    radius_weights=None,
    box_halfwidth: float = 2.0,
    grid_n: int = 15,
) -> np.ndarray:
    """Grid search + shrinking-step pattern descent on the slip potential.

    A deliberately independent check on the IRLS path. When the descent
    bottoms out at zero dissipation the minimizing set is the affine
    solution family of the no-slip system, and the minimal-norm member is
    returned via a direct stacked least-squares solve.
    """
    if grid_n < 11:
        raise ValidationError(f"grid_n must be >= 11, got {grid_n}")
    if not contacts:
        raise NoContacts("brute_force_omega requires at least one contact")
    speeds = command_speeds(command)
    p, d, w = contact_arrays(contacts, radius_weights)

    vels = speeds[:, None] * d

    axis = np.linspace(-box_halfwidth, box_halfwidth, grid_n)
    gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
    grid = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    # D over the whole grid, vectorized: (G, N, 3) slip tensor.
    slips = vels[None, :, :] - np.cross(grid[:, None, :], p[None, :, :])
    dvals = np.einsum("j,gj->g", w, np.linalg.norm(slips, axis=2))
    best = int(np.argmin(dvals))
    x, fx = grid[best].copy(), float(dvals[best])

    # The potential has conical kinks along the per-contact sticking lines,
    # whose tangents are the p_i directions; include those so the descent
    # can slide along a kink instead of stalling on it. Random probes
    # (seeded, deterministic) cover the remaining stall geometries.
    p_unit = p / np.linalg.norm(p, axis=1, keepdims=True)
    directions = np.vstack([_CD_DIRECTIONS, p_unit, -p_unit])
    probe_rng = np.random.default_rng(0)

    def batch_d(points):
        s = vels[None, :, :] - np.cross(points[:, None, :], p[None, :, :])
        return np.einsum("j,gj->g", w, np.linalg.norm(s, axis=2))

    step = axis[1] - axis[0]
    sweeps = 0
    while step > 1e-6 and sweeps < 4000:
        sweeps += 1
        cands = x[None, :] + step * directions
        fc = batch_d(cands)
        k = int(np.argmin(fc))
        if fc[k] < fx - 1e-18:
            x, fx = cands[k], float(fc[k])
            continue
        probes = probe_rng.normal(size=(24, 3))
        probes /= np.linalg.norm(probes, axis=1, keepdims=True)
        cands = x[None, :] + step * probes
        fc = batch_d(cands)
        k = int(np.argmin(fc))
        if fc[k] < fx - 1e-18:
            x, fx = cands[k], float(fc[k])
        else:
            step *= 0.5

    # Minimal-norm tie-break on all-sticking families: solve the stacked
    # no-slip system directly (independent of the IRLS normal equations).
    active = w > 0.0
    if np.any(active):
        rows = []
        rhs = []
        for pi, vi in zip(p[active], vels[active]):
            px = np.array(
                [[0.0, -pi[2], pi[1]], [pi[2], 0.0, -pi[0]], [-pi[1], pi[0], 0.0]]
            )
            rows.append(px)
            rhs.append(-vi)
        a_stack = np.vstack(rows)
        b_stack = np.concatenate(rhs)
        omega_stick, *_ = np.linalg.lstsq(a_stack, b_stack, rcond=None)
        stick_slips = vels[active] - np.cross(omega_stick, p[active])
        if np.max(np.linalg.norm(stick_slips, axis=1)) <= 1e-8:
            return omega_stick
    return x


def solver_divergence(
    contacts: Sequence[RollerContact],
    command,
    radius_weights=None,
    opts: SolverOptions = DEFAULT_OPTIONS,
) -> float:
    """|equilibrium_omega - paper_weighted_omega| for a scenario (rad/s).

    Zero when every contact sticks or when the closed form's dropped radial
    terms vanish; nonzero otherwise. Reported as a per-scenario diagnostic.
    """
    eq = equilibrium_omega(contacts, command, radius_weights, opts).omega
    pw = paper_weighted_omega(contacts, command, radius_weights, opts)
    return float(np.linalg.norm(eq - pw))
