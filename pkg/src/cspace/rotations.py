"""Orientation space: distances, displacement bounds, grids and their adjacency.

Quaternions are stored ``(w, x, y, z)``. Rotations are compared with the
angular distance ``arccos |<p, q>|`` which identifies ``q`` with ``-q``.
Planar grids store angles; their dispersion is the largest rotation angle
from any orientation to the nearest sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateGrid, EpsilonExceedsObject, ParseError, TargetUnreachable


# generated grids aim this fraction below the requested dispersion, since a
# fresh estimate with other restarts can land slightly above the one that stopped
GENERATE_MARGIN = 0.02


# --------------------------------------------------------------------------
# quaternion helpers


def quat_multiply(p, q) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pw, px, py, pz = np.moveaxis(p, -1, 0)
    qw, qx, qy, qz = np.moveaxis(q, -1, 0)
    return np.stack([
        pw * qw - px * qx - py * qy - pz * qz,
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
    ], axis=-1)


def quat_conjugate(q) -> np.ndarray:
    q = np.array(q, dtype=float)
    q[..., 1:] *= -1
    return q


def random_quaternions(n: int, rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=(n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def canonicalize(q) -> np.ndarray:
    """Map each quaternion to the representative with ``w >= 0``.

    Ties (``w == 0``) are broken by making the first nonzero coordinate positive.
    """
    q = np.array(q, dtype=float, ndmin=2)
    q = q / np.linalg.norm(q, axis=1, keepdims=True)
    nz = np.abs(q) > 1e-15
    first = np.argmax(nz, axis=1)
    sign = np.sign(q[np.arange(q.shape[0]), first])
    sign[sign == 0] = 1.0
    return q * sign[:, None]


def angular_distance(p, q) -> np.ndarray | float:
    """``arccos |<p, q>|`` in ``[0, pi/2]``; broadcasts over leading axes."""
    dot = np.abs(np.sum(np.asarray(p, dtype=float) * np.asarray(q, dtype=float), axis=-1))
    return np.arccos(np.clip(dot, 0.0, 1.0))


def displacement(p, q, rad: float) -> np.ndarray | float:
    """Largest point displacement of an object of radius ``rad`` rotated from ``q`` to ``p``."""
    return 2.0 * np.sin(angular_distance(p, q)) * rad


def displacement_2d(theta1, theta2, rad: float) -> np.ndarray | float:
    return 2.0 * np.abs(np.sin((np.asarray(theta1) - np.asarray(theta2)) / 2.0)) * rad


def rotation_displacement_bound(dimension: int, dispersion: float, rad: float) -> float:
    """Displacement bound for rotating anywhere within ``dispersion`` of a sample."""
    if dimension == 2:
        return 2.0 * math.sin(dispersion / 2.0) * rad
    return 2.0 * math.sin(dispersion) * rad


# --------------------------------------------------------------------------
# grids


@dataclass(frozen=True, eq=False)
class OrientationGrid:
    """Orientation samples with a symmetric patch-adjacency edge list.

    ``samples`` holds angles (shape ``(s,)``) for planar grids and canonical
    quaternions (shape ``(s, 4)``) for spatial ones.
    """

    dimension: int
    samples: np.ndarray
    edges: np.ndarray
    dispersion: float

    def __post_init__(self):
        if not self.dispersion > 0:
            raise ValueError("dispersion must be positive")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError("adjacency contains self-loops")
        edges = np.sort(edges, axis=1)
        edges = np.unique(edges, axis=0) if edges.size else edges
        object.__setattr__(self, "edges", edges)
        n = len(self)
        order = np.argsort(np.concatenate([edges[:, 0], edges[:, 1]]), kind="stable")
        nbr = np.concatenate([edges[:, 1], edges[:, 0]])[order]
        counts = np.bincount(np.concatenate([edges[:, 0], edges[:, 1]]), minlength=n)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        object.__setattr__(self, "_nbr", nbr)
        object.__setattr__(self, "_offsets", offsets)

    def __len__(self) -> int:
        return self.samples.shape[0]

    def neighbors(self, i: int) -> np.ndarray:
        return self._nbr[self._offsets[i]:self._offsets[i + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self._offsets)

    def nearest(self, orientation) -> int:
        """Index of the sample closest to ``orientation``; ties go to the lowest index."""
        if self.dimension == 2:
            d = np.abs((self.samples - float(orientation) + np.pi) % (2 * np.pi) - np.pi)
            return int(np.argmin(d))
        q = np.asarray(orientation, dtype=float)
        return int(np.argmax(np.abs(self.samples @ q)))

    def distance(self, i: int, orientation) -> float:
        if self.dimension == 2:
            return float(abs((self.samples[i] - float(orientation) + np.pi) % (2 * np.pi) - np.pi))
        return float(angular_distance(self.samples[i], orientation))

    def sample(self, i: int):
        return float(self.samples[i]) if self.dimension == 2 else self.samples[i]


def so2_grid(s: int) -> OrientationGrid:
    """``s`` equally spaced angles on a ring; each sample covers ``pi/s`` either side."""
    if s < 3:
        raise ValueError(f"an SO(2) grid needs at least 3 samples, got {s}")
    angles = 2 * np.pi * np.arange(s) / s
    i = np.arange(s)
    edges = np.column_stack([i, (i + 1) % s])
    return OrientationGrid(2, angles, edges, math.pi / s)


def build_adjacency(samples, dispersion: float) -> OrientationGrid:
    """Connect samples whose patches of radius ``dispersion`` can overlap.

    An edge joins ``p`` and ``q`` iff ``rho(p, q) < 2 * dispersion``. Candidates
    come from a 4D k-d tree queried around both ``p`` and ``-p`` with chord
    radius ``2 sin(dispersion)``; every candidate is then checked exactly.
    """
    if not dispersion > 0:
        raise ValueError("dispersion must be positive")
    S = canonicalize(samples)
    n = S.shape[0]
    if n > 1:
        close = cKDTree(np.vstack([S, -S])).query_pairs(1e-9, output_type="ndarray")
        close = close[(close[:, 0] % n) != (close[:, 1] % n)]
        if close.size:
            i, j = close[0] % n
            raise DegenerateGrid(f"samples {i} and {j} describe the same rotation")
    thr = 2.0 * dispersion
    if thr >= np.pi / 2:
        i, j = np.triu_indices(n, 1)
        keep = angular_distance(S[i], S[j]) < thr
        return OrientationGrid(3, S, np.column_stack([i[keep], j[keep]]), dispersion)
    radius = 2.0 * math.sin(dispersion) * (1 + 1e-9)
    pairs = cKDTree(np.vstack([S, -S])).query_pairs(radius, output_type="ndarray")
    if pairs.size == 0:
        return OrientationGrid(3, S, np.empty((0, 2), dtype=np.int64), dispersion)
    i, j = pairs[:, 0] % n, pairs[:, 1] % n
    keep = i != j
    i, j = i[keep], j[keep]
    keep = angular_distance(S[i], S[j]) < thr
    edges = np.unique(np.sort(np.column_stack([i[keep], j[keep]]), axis=1), axis=0)
    return OrientationGrid(3, S, edges, dispersion)


def estimate_dispersion(samples, restarts: int = 1000, rng: np.random.Generator | None = None,
                        iterations: int = 50) -> float:
    """Lower estimate of the dispersion of a quaternion sample set.

    Each restart draws a uniform random rotation and climbs the distance to
    the sample set by projected gradient steps on the unit 3-sphere (halving
    the step whenever it fails to improve). The final nearest-sample chord
    ``c`` is converted to an angle with ``2 asin(c / 2)``.
    """
    rng = rng if rng is not None else np.random.default_rng()
    _, dist = _farthest_points(canonicalize(samples), restarts, rng, iterations)
    return float(np.max(dist))


def _farthest_points(samples: np.ndarray, restarts: int, rng, iterations: int = 50):
    """Locally farthest rotations from ``samples`` and their angular distances."""
    pts = np.vstack([samples, -samples])
    tree = cKDTree(pts)
    w = random_quaternions(restarts, rng)
    d, _ = tree.query(w)
    step = np.full(restarts, max(float(np.max(d)), 1e-3))
    k = min(5, pts.shape[0])
    for _ in range(iterations):
        dk, ik = tree.query(w, k=k)
        dk = dk.reshape(restarts, k)
        ik = ik.reshape(restarts, k)
        # push away from every sample that is (nearly) tied for nearest
        near = dk <= dk[:, :1] * 1.05 + 1e-12
        g = np.sum((w[:, None, :] - pts[ik]) / np.maximum(dk[..., None], 1e-15) * near[..., None], axis=1)
        g -= np.sum(g * w, axis=1, keepdims=True) * w
        g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-15)
        cand = w + step[:, None] * g
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        dc, _ = tree.query(cand)
        better = dc > d
        w[better] = cand[better]
        d[better] = dc[better]
        step[~better] *= 0.5
    return w, 2.0 * np.arcsin(np.clip(d / 2.0, 0.0, 1.0))


def super_fibonacci(n: int) -> np.ndarray:
    """Deterministic spiral of ``n`` well spread unit quaternions (Alexa, CVPR 2022)."""
    phi = math.sqrt(2.0)
    psi = 1.533751168755204288118041
    s = np.arange(n) + 0.5
    t = s / n
    r, big_r = np.sqrt(t), np.sqrt(1.0 - t)
    a, b = 2 * np.pi * s / phi, 2 * np.pi * s / psi
    return canonicalize(np.column_stack([r * np.sin(a), r * np.cos(a), big_r * np.sin(b), big_r * np.cos(b)]))


def _cap_volume(angle: float) -> float:
    # volume of a geodesic ball of radius ``angle`` on the unit 3-sphere
    return math.pi * (2 * angle - math.sin(2 * angle))


def generate_grid(target: float, budget: int = 1_000_000, restarts: int = 1000,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Quaternion samples whose estimated dispersion does not exceed ``target``.

    Starts from a super-Fibonacci spiral, resized until its estimated
    dispersion is close to ``target`` (dispersion scales like ``n**(-1/3)``),
    then greedily inserts the farthest rotations found by the dispersion
    estimator until no restart finds a rotation beyond ``target``.
    """
    if not 0 < target < math.pi / 2:
        raise ValueError(f"target dispersion must lie in (0, pi/2), got {target}")
    rng = rng if rng is not None else np.random.default_rng()
    aim = target * (1.0 - GENERATE_MARGIN)
    # SO(3) is half the 3-sphere; the spiral covers it about 3 times over
    n = max(1, int(math.ceil(3.0 * math.pi ** 2 / _cap_volume(aim))))
    for _ in range(10):
        if n > budget:
            raise TargetUnreachable(f"target {target} needs about {n} samples, budget is {budget}")
        S = super_fibonacci(n)
        d = estimate_dispersion(S, restarts, rng)
        if d <= aim:
            break
        n = int(math.ceil(n * (d / aim) ** 3 * 1.02))
    for _ in range(200):
        w, dist = _farthest_points(S, restarts, rng)
        far = dist > aim
        if not np.any(far):
            if estimate_dispersion(S, restarts, rng) <= aim:
                return S
            continue
        # farthest first; skip candidates already served by an earlier insert
        cand = canonicalize(w[far][np.argsort(-dist[far])])
        chosen: list[np.ndarray] = []
        for q in cand:
            if chosen and np.max(np.abs(np.asarray(chosen) @ q)) > math.cos(aim):
                continue
            chosen.append(q)
        if S.shape[0] + len(chosen) > budget:
            raise TargetUnreachable(f"sample budget {budget} exhausted before reaching {target}")
        S = np.vstack([S, chosen])
    raise TargetUnreachable(f"no convergence to target dispersion {target}")


def load_grid(path) -> np.ndarray:
    """Read ``w x y z`` rows (``#`` starts a comment line) into canonical unit quaternions."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        parts = text.split()
        if len(parts) != 4:
            raise ParseError(f"{path}:{lineno}: expected 4 numbers, got {len(parts)}")
        try:
            q = [float(v) for v in parts]
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
        norm = math.sqrt(sum(v * v for v in q))
        if not np.isfinite(norm) or norm == 0:
            raise ParseError(f"{path}:{lineno}: zero or non-finite quaternion")
        rows.append(q)
    if not rows:
        raise ParseError(f"{path}: no quaternions found")
    return canonicalize(np.array(rows))


def save_grid(path, samples) -> None:
    S = canonicalize(samples)
    lines = ["# w x y z"] + [" ".join(f"{v:.17g}" for v in q) for q in S]
    Path(path).write_text("\n".join(lines) + "\n")


def quaternion_grid(samples, dispersion: float | None = None, restarts: int = 1000,
                    rng: np.random.Generator | None = None) -> OrientationGrid:
    """Estimate dispersion (unless given) and build the adjacency graph."""
    if dispersion is None:
        dispersion = estimate_dispersion(samples, restarts, rng)
    return build_adjacency(samples, dispersion)


# --------------------------------------------------------------------------
# eps selection


@dataclass(frozen=True)
class EpsilonPlan:
    epsilon: float
    delta: float
    dispersion: float
    rad: float
    margin: float
    variant: str


def choose_epsilon(grid: OrientationGrid, rad: float, delta: float = 0.0, *, margin: float = 0.05,
                   variant: str = "conservative", max_ball_radius: float | None = None) -> EpsilonPlan:
    """Pick eps just above the rotation displacement bound of the grid.

    ``variant="conservative"`` uses ``2 sin(D) rad`` for quaternion grids,
    which is exact for rotations within angular distance ``D``. ``"half"``
    uses ``2 sin(D/2) rad`` instead; it is only offered for timing comparisons.
    Planar grids always use the exact ``2 sin(D/2) rad`` with ``D`` the
    largest rotation angle to a sample.
    """
    if variant not in ("conservative", "half"):
        raise ValueError(f"unknown eps variant {variant!r}")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if grid.dimension == 3 and variant == "half":
        bound = 2.0 * math.sin(grid.dispersion / 2.0) * rad
    else:
        bound = rotation_displacement_bound(grid.dimension, grid.dispersion, rad)
    eps = (1.0 + margin) * bound
    if not eps > 0:
        raise EpsilonExceedsObject(
            f"eps={eps:.6g} is not positive (object radius {rad:.6g}); a point object cannot be shrunk")
    if max_ball_radius is not None and eps >= max_ball_radius + delta:
        raise EpsilonExceedsObject(
            f"eps={eps:.6g} is not below the largest object ball radius plus delta "
            f"({max_ball_radius + delta:.6g}); use a finer orientation grid")
    return EpsilonPlan(eps, delta, grid.dispersion, rad, margin, variant)
