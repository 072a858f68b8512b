"""3-vector and unit-quaternion primitives.

Vectors are plain numpy float64 arrays of shape (3,). Orientations are unit
quaternions stored scalar-first as shape (4,) arrays [w, x, y, z], kept in
the canonical half-space w >= 0. All angles are radians, all lengths meters.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ValidationError

UNIT_TOL = 1e-9

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def vec3(x, y, z) -> np.ndarray:
    return np.array([x, y, z], dtype=np.float64)


def as_vec3(v) -> np.ndarray:
    """Coerce to a finite float64 3-vector."""
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (3,):
        raise ValidationError(f"expected a 3-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"vector has non-finite components: {a}")
    return a


def as_unit_vec3(v, tol: float = UNIT_TOL) -> np.ndarray:
    a = as_vec3(v)
    n = np.linalg.norm(a)
    if abs(n - 1.0) > tol:
        raise ValidationError(f"expected a unit vector, got norm {n!r}")
    return a


def normalized(v) -> np.ndarray:
    a = as_vec3(v)
    n = np.linalg.norm(a)
    if n == 0.0:
        raise ValidationError("cannot normalize the zero vector")
    return a / n


# ---------------------------------------------------------------------------
# Quaternions (scalar-first, canonical w >= 0)

def quat_canonical(q) -> np.ndarray:
    """Normalize and sign-canonicalize a quaternion."""
    a = np.asarray(q, dtype=np.float64)
    if a.shape != (4,):
        raise ValidationError(f"expected a quaternion [w,x,y,z], got shape {a.shape}")
    n = np.linalg.norm(a)
    if not np.isfinite(n) or n == 0.0:
        raise ValidationError(f"quaternion is not normalizable: {a}")
    a = a / n
    # w >= 0; on the w == 0 boundary pick the first nonzero component positive
    # so the representative is unique.
    if a[0] < 0.0:
        a = -a
    elif a[0] == 0.0:
        nz = np.nonzero(a)[0]
        if nz.size and a[nz[0]] < 0.0:
            a = -a
    return a


def as_orientation(q, tol: float = UNIT_TOL) -> np.ndarray:
    """Validate a quaternion (unit within tol) and canonicalize its sign.

    Does not renormalize: values already within tolerance pass through
    bit-identical, which keeps serialization round-trips lossless.
    """
    a = np.asarray(q, dtype=np.float64)
    if a.shape != (4,):
        raise ValidationError(f"expected a quaternion [w,x,y,z], got shape {a.shape}")
    n = np.linalg.norm(a)
    if abs(n - 1.0) > tol:
        raise ValidationError(f"orientation quaternion has norm {n!r}")
    if a[0] < 0.0:
        a = -a
    elif a[0] == 0.0:
        nz = np.nonzero(a)[0]
        if nz.size and a[nz[0]] < 0.0:
            a = -a
    return a


def quat_mul(q1, q2) -> np.ndarray:
    """Hamilton product q1 * q2 (apply q2 first when composing rotations)."""
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_conj(q) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q, v) -> np.ndarray:
    """Rotate vector v by quaternion q."""
    w = q[0]
    u = np.asarray(q[1:], dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    # q v q* expanded; avoids building intermediate quaternions.
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def quat_from_rotvec(r) -> np.ndarray:
    """Exact exponential map: rotation vector (axis * angle) to quaternion."""
    r = np.asarray(r, dtype=np.float64)
    angle = np.linalg.norm(r)
    # sin(angle/2)/angle, stable at angle -> 0 via sinc.
    half_sinc = 0.5 * np.sinc(angle / (2.0 * np.pi))
    return quat_canonical(
        np.array([math.cos(angle / 2.0), *(r * half_sinc)])
    )


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    return quat_from_rotvec(normalized(axis) * float(angle))


def quat_to_axis_angle(q) -> tuple[np.ndarray, float]:
    """Return (unit axis, angle in [0, pi]). Axis is +z for zero rotation."""
    q = quat_canonical(q)
    s = np.linalg.norm(q[1:])
    angle = 2.0 * math.atan2(s, q[0])
    if s < 1e-300:
        return vec3(0.0, 0.0, 1.0), 0.0
    return q[1:] / s, angle


def quat_angle(q) -> float:
    """Rotation angle of q, in [0, pi]."""
    q = np.asarray(q, dtype=np.float64)
    return 2.0 * math.atan2(np.linalg.norm(q[1:]), abs(q[0]))


def geodesic_angle(q1, q2) -> float:
    """Minimal rotation angle carrying orientation q1 to q2, in [0, pi]."""
    d = abs(float(np.dot(q1, q2)))
    return 2.0 * math.acos(min(1.0, d))


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotate_about_axis(v, axis, angle: float) -> np.ndarray:
    """Rodrigues rotation of v about a unit axis by angle (right-handed)."""
    k = as_unit_vec3(axis, tol=1e-6)
    v = as_vec3(v)
    c, s = math.cos(angle), math.sin(angle)
    return v * c + np.cross(k, v) * s + k * np.dot(k, v) * (1.0 - c)


def random_quat(rng: np.random.Generator) -> np.ndarray:
    """Uniform random orientation (normalized 4-Gaussian)."""
    q = rng.normal(size=4)
    return quat_canonical(q)
