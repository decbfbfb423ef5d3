"""Geometric primitives, random sampling and camera math.

Vectors are plain float64 numpy arrays of shape (3,), quaternions are
arrays of shape (4,) in scalar-first order (qw, qx, qy, qz).  All sampling
routines draw from an explicit :class:`RngStream` so that every downstream
artifact (scenes, renders, datasets) is reproducible from a single seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Module-wide tolerance for geometric predicates.
GEOM_EPS = 1e-9

# Rejection loops are probabilistically total; the cap turns "hangs with
# probability 0" into a loud failure.
MAX_REJECTION_ATTEMPTS = 10**6


class RejectionSamplingError(RuntimeError):
    """A rejection-sampling loop exceeded MAX_REJECTION_ATTEMPTS draws."""


class DegenerateLookAt(ValueError):
    """look_at called with a view direction parallel to the up hint."""


class RngStream:
    """Deterministic random stream backed by numpy's PCG64.

    The generator is fixed by name (PCG64) so that a given ``seed`` produces
    the identical sample sequence on every platform.  Derived streams
    (per attempt, per view) come from :meth:`child`, which maps a key tuple
    through ``numpy.random.SeedSequence`` spawn keys.
    """

    def __init__(self, seed: int, spawn_key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.spawn_key = tuple(int(k) for k in spawn_key)
        seq = np.random.SeedSequence(self.seed, spawn_key=self.spawn_key)
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def child(self, *key: int) -> "RngStream":
        """Independent stream addressed by (seed, spawn_key + key)."""
        return RngStream(self.seed, self.spawn_key + tuple(key))

    def uniform(self, low: float, high: float, size=None):
        return self._gen.uniform(low, high, size)

    def random(self, size=None):
        return self._gen.random(size)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size)

    def token_hex(self, nbytes: int = 16) -> str:
        """Opaque hex token of ``nbytes`` bytes drawn from the stream."""
        return bytes(self._gen.integers(0, 256, nbytes, dtype=np.uint8)).hex()


def vec3(x: float, y: float, z: float) -> np.ndarray:
    return np.array([x, y, z], dtype=np.float64)


def norm(v: np.ndarray) -> float:
    return float(np.linalg.norm(v))


def normalize(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n < GEOM_EPS:
        raise ValueError("cannot normalize a near-zero vector")
    return v / n


@dataclass(frozen=True)
class Plane:
    """Plane through ``point`` with unit ``normal``; x is on the plane iff
    normal . x == offset."""

    point: np.ndarray
    normal: np.ndarray
    offset: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=np.float64))
        object.__setattr__(self, "normal", np.asarray(self.normal, dtype=np.float64))
        object.__setattr__(self, "offset", float(np.dot(self.normal, self.point)))

    def signed_distance(self, p: np.ndarray) -> float:
        return float(np.dot(self.normal, p) - self.offset)


@dataclass(frozen=True)
class Line:
    point: np.ndarray
    direction: np.ndarray


def sample_point_in_ball(rng: RngStream) -> np.ndarray:
    """Uniform point in the unit ball by rejection from the [-1, 1]^3 cube.

    Consumes exactly 3 uniforms per attempt; the acceptance probability is
    the ball/cube volume ratio pi/6.
    """
    for _ in range(MAX_REJECTION_ATTEMPTS):
        p = rng.uniform(-1.0, 1.0, 3)
        if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= 1.0:
            return p
    raise RejectionSamplingError("unit-ball rejection loop did not terminate")


def sample_unit_direction(rng: RngStream) -> np.ndarray:
    """Uniform direction on the unit sphere via the arccos-elevation recipe.

    The azimuth is uniform in [0, 2*pi); the elevation is arccos of a
    uniform draw in [-1, 1], which removes the pole bias a uniform angle
    would introduce.
    """
    phi = rng.uniform(0.0, 2.0 * math.pi)
    u = rng.uniform(-1.0, 1.0)
    theta = math.acos(u)
    st = math.sin(theta)
    return vec3(st * math.cos(phi), st * math.sin(phi), math.cos(theta))


def naive_sphere_point(rng: RngStream) -> np.ndarray:
    """Pole-biased sphere point from uniform (theta, phi) angles.

    Kept as a counterexample: uniform elevation angle over-samples the
    poles, which the statistical test suite demonstrates.
    """
    phi = rng.uniform(0.0, 2.0 * math.pi)
    theta = rng.uniform(0.0, math.pi)
    st = math.sin(theta)
    return vec3(st * math.cos(phi), st * math.sin(phi), math.cos(theta))


def marsaglia_sphere_point(rng: RngStream) -> np.ndarray:
    """Uniform sphere point via Marsaglia's two-variate rejection method.

    Draw (x1, x2) uniform in (-1, 1)^2 until s = x1^2 + x2^2 < 1, then map
    to (2*x1*sqrt(1-s), 2*x2*sqrt(1-s), 1-2*s).
    """
    for _ in range(MAX_REJECTION_ATTEMPTS):
        x1 = rng.uniform(-1.0, 1.0)
        x2 = rng.uniform(-1.0, 1.0)
        s = x1 * x1 + x2 * x2
        if s < 1.0:
            root = math.sqrt(1.0 - s)
            return vec3(2.0 * x1 * root, 2.0 * x2 * root, 1.0 - 2.0 * s)
    raise RejectionSamplingError("Marsaglia rejection loop did not terminate")


def sample_plane(rng: RngStream) -> Plane:
    """Random plane: anchor uniform in the unit ball, normal uniform on the
    sphere (arccos elevation)."""
    point = sample_point_in_ball(rng)
    normal = sample_unit_direction(rng)
    return Plane(point, normal)


def plane_plane_line(a: Plane, b: Plane, tol: float = GEOM_EPS) -> Line | None:
    """Intersection line of two planes, or None when they are parallel.

    The returned point is the one closest to the span of both anchors in
    the standard two-plane formula; it satisfies both plane equations.
    """
    direction = np.cross(a.normal, b.normal)
    d2 = float(np.dot(direction, direction))
    if math.sqrt(d2) <= tol:
        return None
    point = (a.offset * np.cross(b.normal, direction)
             + b.offset * np.cross(direction, a.normal)) / d2
    return Line(point, direction / math.sqrt(d2))


def three_plane_point(a: Plane, b: Plane, c: Plane, tol: float = GEOM_EPS) -> np.ndarray | None:
    """Common point of three planes, or None for a (near-)degenerate triple."""
    m = np.array([a.normal, b.normal, c.normal])
    det = float(np.linalg.det(m))
    if abs(det) <= tol:
        return None
    rhs = np.array([a.offset, b.offset, c.offset])
    return np.linalg.solve(m, rhs)


# --- quaternions (scalar first, right handed) --------------------------------

def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if n < GEOM_EPS:
        raise ValueError("degenerate quaternion")
    return q / n


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_from_matrix(m: np.ndarray) -> np.ndarray:
    """Unit quaternion for a proper rotation matrix (Shepperd's method)."""
    t = m[0, 0] + m[1, 1] + m[2, 2]
    if t > 0:
        s = math.sqrt(t + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s,
                      (m[1, 0] - m[0, 1]) / s])
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array([(m[2, 1] - m[1, 2]) / s,
                      0.25 * s,
                      (m[0, 1] + m[1, 0]) / s,
                      (m[0, 2] + m[2, 0]) / s])
    elif m[1, 1] >= m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array([(m[0, 2] - m[2, 0]) / s,
                      (m[0, 1] + m[1, 0]) / s,
                      0.25 * s,
                      (m[1, 2] + m[2, 1]) / s])
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array([(m[1, 0] - m[0, 1]) / s,
                      (m[0, 2] + m[2, 0]) / s,
                      (m[1, 2] + m[2, 1]) / s,
                      0.25 * s])
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector(s) ``v`` by quaternion ``q``; v may be (3,) or (N, 3)."""
    return np.asarray(v, dtype=np.float64) @ quat_to_matrix(q).T


def look_at(position: np.ndarray, target: np.ndarray,
            up: np.ndarray = None, tol: float = GEOM_EPS) -> np.ndarray:
    """Quaternion aiming a -z-forward / +y-up camera at ``target``.

    Raises DegenerateLookAt when the view direction is parallel to the up
    hint; callers at the poles should retry with an alternate up vector.
    """
    if up is None:
        up = vec3(0.0, 1.0, 0.0)
    forward = np.asarray(target, dtype=np.float64) - np.asarray(position, dtype=np.float64)
    fn = np.linalg.norm(forward)
    if fn < tol:
        raise DegenerateLookAt("position equals target")
    forward = forward / fn
    z_cam = -forward
    x_cam = np.cross(up, z_cam)
    xn = np.linalg.norm(x_cam)
    if xn < tol:
        raise DegenerateLookAt("view direction parallel to up hint")
    x_cam = x_cam / xn
    y_cam = np.cross(z_cam, x_cam)
    return quat_from_matrix(np.column_stack([x_cam, y_cam, z_cam]))
