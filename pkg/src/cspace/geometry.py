"""Workspace primitives: balls, ball unions, cores, offsets and the object frame."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import EmptyCore


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")
        if len(self.center) not in (2, 3):
            raise ValueError(f"ball center must be 2D or 3D, got {len(self.center)} coordinates")
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dimension(self) -> int:
        return len(self.center)


@dataclass(frozen=True, eq=False)
class BallUnion:
    """A nonempty union of balls stored as ``(m, n)`` centers and ``(m,)`` radii."""

    centers: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        centers = np.array(self.centers, dtype=float, ndmin=2)
        radii = np.array(self.radii, dtype=float).reshape(-1)
        if centers.shape[0] == 0:
            raise ValueError("ball union must contain at least one ball")
        if centers.shape[1] not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {centers.shape[1]}")
        if radii.shape[0] != centers.shape[0]:
            raise ValueError("centers and radii disagree in length")
        if not np.all(radii > 0):
            raise ValueError("all radii must be positive")
        centers.setflags(write=False)
        radii.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radii", radii)

    @classmethod
    def from_balls(cls, balls: Iterable[Ball]) -> BallUnion:
        balls = list(balls)
        if not balls:
            raise ValueError("ball union must contain at least one ball")
        dims = {b.dimension for b in balls}
        if len(dims) != 1:
            raise ValueError("all balls must share the same dimension")
        return cls(np.array([b.center for b in balls]), np.array([b.radius for b in balls]))

    @property
    def dimension(self) -> int:
        return self.centers.shape[1]

    @property
    def balls(self) -> list[Ball]:
        return [Ball(tuple(c), float(r)) for c, r in zip(self.centers, self.radii)]

    def __len__(self) -> int:
        return self.radii.shape[0]

    def __eq__(self, other):
        if not isinstance(other, BallUnion):
            return NotImplemented
        return (self.centers.shape == other.centers.shape
                and np.array_equal(self.centers, other.centers)
                and np.array_equal(self.radii, other.radii))

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return ((self.centers - self.radii[:, None]).min(axis=0),
                (self.centers + self.radii[:, None]).max(axis=0))


@dataclass(frozen=True, eq=False)
class RigidObjectModel:
    """An object shape together with its rotation center and radius about it."""

    shape: BallUnion
    reference_point: np.ndarray = field(default=None)
    radius: float = field(default=None)

    def __post_init__(self):
        if self.reference_point is None:
            g, rad = reference_and_radius(self.shape)
        else:
            g = np.asarray(self.reference_point, dtype=float)
            rad = _radius_about(self.shape, g)
        object.__setattr__(self, "reference_point", g)
        object.__setattr__(self, "radius", float(rad))

    @property
    def offsets(self) -> np.ndarray:
        """Ball centers relative to the reference point (object frame)."""
        return self.shape.centers - self.reference_point


@dataclass(frozen=True, eq=False)
class Configuration:
    """Position of the reference point plus an orientation.

    The orientation is an angle in radians for planar scenes and a unit
    quaternion ``(w, x, y, z)`` for spatial scenes.
    """

    position: np.ndarray
    orientation: float | np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(-1)
        if pos.shape[0] not in (2, 3):
            raise ValueError(f"position must have 2 or 3 coordinates, got {pos.shape[0]}")
        object.__setattr__(self, "position", pos)
        if pos.shape[0] == 2:
            theta = float(np.asarray(self.orientation).reshape(-1)[0])
            object.__setattr__(self, "orientation", theta % (2 * np.pi))
        else:
            q = np.asarray(self.orientation, dtype=float).reshape(-1)
            if q.shape[0] != 4:
                raise ValueError("3D orientation must be a quaternion (w, x, y, z)")
            if abs(np.linalg.norm(q) - 1.0) > 1e-9:
                raise ValueError(f"quaternion is not unit length (norm={np.linalg.norm(q):.12g})")
            object.__setattr__(self, "orientation", q / np.linalg.norm(q))

    @property
    def dimension(self) -> int:
        return self.position.shape[0]


def epsilon_core(obj: BallUnion, eps: float) -> BallUnion:
    """Shrink every ball by ``eps``; balls that vanish are dropped."""
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    keep = obj.radii > eps
    if not np.any(keep):
        raise EmptyCore(
            f"eps={eps:.6g} removes every object ball (largest radius {obj.radii.max():.6g}); "
            "use a finer orientation grid or a smaller object radius")
    return BallUnion(obj.centers[keep], obj.radii[keep] - eps)


def offset(obj: BallUnion, delta: float) -> BallUnion:
    if delta < 0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    return BallUnion(obj.centers, obj.radii + delta)


def power_distance(x, center, radius) -> np.ndarray | float:
    """Power of point(s) ``x`` with respect to ball(s): ``|x - c|^2 - r^2``."""
    x = np.asarray(x, dtype=float)
    c = np.asarray(center, dtype=float)
    if x.shape[-1] != c.shape[-1]:
        raise ValueError("dimension mismatch between point and ball")
    d = x - c
    return np.einsum("...i,...i->...", d, d) - np.asarray(radius, dtype=float) ** 2


def _radius_about(shape: BallUnion, g: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(shape.centers - g, axis=1) + shape.radii))


def reference_and_radius(shape: BallUnion, tol: float = 1e-9) -> tuple[np.ndarray, float]:
    """Center and radius of the smallest sphere enclosing a ball union.

    The radius returned is always recomputed at the returned center, so it
    bounds every ball even if the optimizer stops short of the optimum.
    """
    c, r = shape.centers, shape.radii
    # one ball already encloses all others
    d = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=2) + r[None, :]
    enclosing = np.where(np.all(d <= r[:, None] * (1 + 1e-15), axis=1))[0]
    if enclosing.size:
        k = int(enclosing[np.argmax(r[enclosing])])
        return c[k].copy(), float(r[k])

    lo, hi = shape.bounding_box()
    scale = float(np.max(hi - lo))
    g = _refine_enclosing_center(c, r, 0.5 * (lo + hi))
    g = _solve_enclosing(c, r, g, scale, tol)
    return g, _radius_about(shape, g)


def _refine_enclosing_center(c: np.ndarray, r: np.ndarray, g: np.ndarray, iters: int = 200) -> np.ndarray:
    # Badoiu-Clarkson style step toward the farthest ball; a coarse warm start
    for k in range(1, iters + 1):
        dist = np.linalg.norm(c - g, axis=1) + r
        i = int(np.argmax(dist))
        v = c[i] - g
        nv = np.linalg.norm(v)
        if nv == 0:
            break
        far = c[i] + v / nv * r[i]
        g = g + (far - g) / (k + 1)
    return g


def _solve_enclosing(c: np.ndarray, r: np.ndarray, g0: np.ndarray, scale: float, tol: float) -> np.ndarray:
    n = c.shape[1]
    s = scale if scale > 0 else 1.0
    cs, rs = c / s, r / s
    t0 = float(np.max(np.linalg.norm(cs - g0 / s, axis=1) + rs))
    x0 = np.append(g0 / s, t0)

    def cons(x):
        return x[n] - rs - np.sqrt(np.sum((cs - x[:n]) ** 2, axis=1) + 1e-30)

    res = minimize(lambda x: x[n], x0, jac=lambda x: np.eye(n + 1)[n],
                   constraints=[{"type": "ineq", "fun": cons}],
                   method="SLSQP", options={"ftol": tol * 1e-3, "maxiter": 500})
    g = res.x[:n] * s
    # never return something worse than the warm start
    if _radius_about_arrays(c, r, g) <= _radius_about_arrays(c, r, g0):
        return g
    return g0


def _radius_about_arrays(c, r, g) -> float:
    return float(np.max(np.linalg.norm(c - g, axis=1) + r))


def rotation_matrix(orientation, dimension: int) -> np.ndarray:
    """Rotation matrix for an angle (2D) or a ``(w, x, y, z)`` quaternion (3D)."""
    if dimension == 2:
        t = float(orientation)
        ct, st = np.cos(t), np.sin(t)
        return np.array([[ct, -st], [st, ct]])
    w, x, y, z = np.asarray(orientation, dtype=float) / np.linalg.norm(orientation)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def placed_object(obj: RigidObjectModel, config: Configuration) -> BallUnion:
    """The object's balls in world coordinates at ``config``."""
    rot = rotation_matrix(config.orientation, obj.shape.dimension)
    return BallUnion(config.position + obj.offsets @ rot.T, obj.shape.radii)


def bounds_for(obstacles: BallUnion, obj: RigidObjectModel, inflate: float = 4.0) -> tuple[np.ndarray, np.ndarray]:
    """Default query domain: obstacle bounding box grown by ``inflate*rad + max R``."""
    lo, hi = obstacles.bounding_box()
    pad = inflate * obj.radius + float(obstacles.radii.max())
    return lo - pad, hi + pad


def as_ball_union(balls: Sequence[Ball] | BallUnion) -> BallUnion:
    return balls if isinstance(balls, BallUnion) else BallUnion.from_balls(balls)
