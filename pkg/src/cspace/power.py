"""Power diagrams of ball sets and their dual ball diagrams.

The regular triangulation is read off the lower convex hull of the lifted
points ``(z, |z|^2 - r^2)`` (Qhull). Each full-dimensional simplex yields a
power-diagram vertex (its orthocenter); each boundary facet of the
triangulation yields an unbounded power edge. The dual diagram places a ball
of radius ``sqrt(power)`` at every vertex with nonnegative power, and an open
half-space beyond every boundary facet. Points outside all dual shapes are
covered by the input balls.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import BoundsTooSmall

# relative |det| below which a simplex is treated as flat
FLAT_SIMPLEX_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class PowerDiagram:
    """Vertices, generators and unbounded edges of a power diagram.

    ``generators[k]`` lists the ``n+1`` ball indices whose power distances
    agree at ``vertices[k]``. Each unbounded edge starts at the vertex of the
    simplex owning boundary facet ``facets[e]`` and runs along ``directions[e]``.
    ``hidden`` lists balls with an empty power cell. ``flat`` marks inputs
    whose centers are affinely dependent; those have no vertices.
    """

    dimension: int
    centers: np.ndarray
    radii: np.ndarray
    vertices: np.ndarray
    powers: np.ndarray
    generators: np.ndarray
    facets: np.ndarray
    directions: np.ndarray
    ray_origins: np.ndarray
    hidden: np.ndarray
    flat: bool = False
    radical_pairs: np.ndarray = field(default_factory=lambda: np.empty((0, 2), dtype=np.int64))


def _dedupe(centers: np.ndarray, radii: np.ndarray):
    key = np.column_stack([centers, radii])
    _, first = np.unique(key, axis=0, return_index=True)
    keep = np.zeros(len(radii), dtype=bool)
    keep[first] = True
    return keep


def _affine_rank(points: np.ndarray, scale: float) -> int:
    if points.shape[0] < 2:
        return 0
    d = points[1:] - points[0]
    s = np.linalg.svd(d, compute_uv=False)
    return int(np.sum(s > 1e-12 * max(scale, 1e-300)))


def _orthocenters(z: np.ndarray, w: np.ndarray, simplices: np.ndarray):
    """Orthocenters ``y`` and powers of each simplex; ``ok`` is False for flat ones."""
    p0 = z[simplices[:, 0]]
    a = z[simplices[:, 1:]] - p0[:, None, :]
    # 2 (z_k - z_0) . y' = |z_k - z_0|^2 - (w_k - w_0), with y' = y - z_0
    rhs = np.einsum("skn,skn->sk", a, a) - (w[simplices[:, 1:]] - w[simplices[:, :1]])
    det = np.linalg.det(a)
    norms = np.prod(np.linalg.norm(a, axis=2), axis=1)
    ok = np.abs(det) > FLAT_SIMPLEX_TOL * np.maximum(norms, 1e-300)
    y = np.full(p0.shape, np.nan)
    if np.any(ok):
        y[ok] = p0[ok] + np.linalg.solve(2.0 * a[ok], rhs[ok][..., None])[..., 0]
    power = np.full(len(simplices), np.nan)
    power[ok] = np.sum((y[ok] - p0[ok]) ** 2, axis=1) - w[simplices[ok, 0]]
    return y, power, ok


def _boundary_facets(z: np.ndarray, simplices: np.ndarray):
    """Facets of the centers' convex hull, their outward normals and owning simplex.

    Reading them off the projected hull keeps the orientation exact even when
    flat simplices sit in the triangulation. The owner is -1 when Qhull split a
    coplanar hull face differently from the triangulation.
    """
    hull = ConvexHull(z, qhull_options="Qt")
    faces = np.sort(hull.simplices, axis=1)
    normals = hull.equations[:, :-1] / np.linalg.norm(hull.equations[:, :-1], axis=1, keepdims=True)
    n = z.shape[1]
    base = np.int64(len(z)) ** np.arange(n, dtype=np.int64)
    ridges = np.vstack([np.sort(np.delete(simplices, drop, axis=1), axis=1) for drop in range(n + 1)])
    ridge_keys = ridges.astype(np.int64) @ base
    ridge_owner = np.tile(np.arange(len(simplices)), n + 1)
    order = np.argsort(ridge_keys, kind="stable")
    face_keys = faces.astype(np.int64) @ base
    pos = np.searchsorted(ridge_keys[order], face_keys).clip(max=len(order) - 1)
    found = ridge_keys[order][pos] == face_keys
    owner = np.where(found, ridge_owner[order][pos], -1)
    return faces, normals, owner


def _facet_sizes(z: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Length (2D) or doubled area (3D) of boundary facets."""
    e1 = z[faces[:, 1]] - z[faces[:, 0]]
    if z.shape[1] == 2:
        return np.linalg.norm(e1, axis=1)
    return np.linalg.norm(np.cross(e1, z[faces[:, 2]] - z[faces[:, 0]]), axis=1)


def weighted_voronoi(centers, radii) -> PowerDiagram:
    """Power diagram of the balls ``B(centers[i], radii[i])``.

    Duplicated balls keep their first occurrence and the rest are reported
    hidden. Cospherical degeneracies are resolved by Qhull's triangulated
    output, which is deterministic for a given input order.
    """
    z_all = np.asarray(centers, dtype=float)
    r_all = np.asarray(radii, dtype=float)
    n = z_all.shape[1]
    m = r_all.shape[0]
    keep = _dedupe(z_all, r_all) if m else np.zeros(0, dtype=bool)
    idx = np.flatnonzero(keep)
    z, r = z_all[idx], r_all[idx]
    empty = np.empty((0, n))
    scale = float(np.ptp(z, axis=0).max()) if len(z) else 0.0

    def flat_diagram(hidden_local):
        hidden = np.setdiff1d(np.arange(m), idx[np.setdiff1d(np.arange(len(idx)), hidden_local)])
        return PowerDiagram(n, z_all, r_all, empty, np.empty(0), np.empty((0, n + 1), dtype=np.int64),
                            np.empty((0, n), dtype=np.int64), empty, empty, hidden, True,
                            _collinear_radical_pairs(z, r, idx))

    if len(z) < n + 1 or _affine_rank(z, scale) < n:
        hidden_local = _collinear_hidden(z, r)
        return flat_diagram(hidden_local)

    origin = z.mean(axis=0)
    zc = z - origin
    w = r ** 2
    lifted = np.column_stack([zc, np.einsum("ij,ij->i", zc, zc) - w])
    # a point far above keeps the hull full-dimensional; it only touches upper facets
    top = lifted[:, n].max() + 4.0 * (lifted[:, n].max() - lifted[:, n].min() + scale ** 2 + 1.0)
    ceiling = len(z)
    try:
        hull = ConvexHull(np.vstack([lifted, np.append(np.zeros(n), top)]), qhull_options="Qt Qbb Qc")
    except QhullError:
        return flat_diagram(np.array([], dtype=np.int64))
    eq = hull.equations
    lower = eq[:, n] < -1e-12 * np.linalg.norm(eq[:, :n], axis=1).clip(min=1.0)
    lower &= ~np.any(hull.simplices == ceiling, axis=1)
    simplices = hull.simplices[lower]
    if simplices.shape[0] == 0:
        return flat_diagram(np.array([], dtype=np.int64))

    y, power, ok = _orthocenters(zc, w, simplices)
    faces, normals, owner = _boundary_facets(zc, simplices)
    # zero-area facets bound nothing: the proper facets already cut out the hull
    proper = _facet_sizes(zc, faces) > FLAT_SIMPLEX_TOL * max(scale, 1e-300) ** (n - 1)
    faces, owner, normals = faces[proper], owner[proper], normals[proper]
    used = np.unique(simplices)
    hidden_local = np.setdiff1d(np.arange(len(z)), used)
    hidden = np.sort(np.concatenate([np.flatnonzero(~keep), idx[hidden_local]]))
    good = (owner >= 0) & ok[np.maximum(owner, 0)]
    return PowerDiagram(
        dimension=n,
        centers=z_all,
        radii=r_all,
        vertices=y[ok] + origin,
        powers=power[ok],
        generators=idx[simplices[ok]],
        facets=idx[faces],
        directions=normals,
        ray_origins=np.where(good[:, None], y[np.maximum(owner, 0)], zc[faces[:, 0]]) + origin,
        hidden=hidden,
    )


def _collinear_hidden(z: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Hidden balls of a collinear set (1D power diagram along the common line)."""
    if len(z) < 2:
        return np.array([], dtype=np.int64)
    d = z[1:] - z[0]
    s = np.linalg.svd(d, full_matrices=False)
    u = s[2][0]
    t = (z - z[0]) @ u
    if np.max(np.abs((z - z[0]) - np.outer(t, u))) > 1e-9 * max(np.ptp(t), 1.0):
        return np.array([], dtype=np.int64)
    # ball i is visible iff power_i(x) <= power_j(x) for all j at some x on the line
    hidden = []
    w = r ** 2
    for i in range(len(t)):
        lo, hi = -np.inf, np.inf
        for j in range(len(t)):
            if j == i:
                continue
            a = -2.0 * (t[i] - t[j])
            b = t[i] ** 2 - t[j] ** 2 - w[i] + w[j]
            if a > 0:
                hi = min(hi, -b / a)
            elif a < 0:
                lo = max(lo, -b / a)
            elif b > 0:
                lo, hi = np.inf, -np.inf
        if not lo < hi:
            hidden.append(i)
    return np.array(hidden, dtype=np.int64)


def _collinear_radical_pairs(z: np.ndarray, r: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Neighbouring visible cells along a line; each pair bounds one radical hyperplane."""
    if len(z) < 2:
        return np.empty((0, 2), dtype=np.int64)
    hidden = set(_collinear_hidden(z, r).tolist())
    d = z - z[0]
    u = np.linalg.svd(d[1:], full_matrices=False)[2][0]
    t = d @ u
    if np.max(np.abs(d - np.outer(t, u))) > 1e-9 * max(np.ptp(t), 1.0):
        return np.empty((0, 2), dtype=np.int64)
    vis = [i for i in np.argsort(t, kind="stable") if i not in hidden]
    return np.array([[idx[a], idx[b]] for a, b in zip(vis, vis[1:])], dtype=np.int64).reshape(-1, 2)


@dataclass(frozen=True, eq=False)
class DualDiagram:
    """Finite balls plus open half-spaces ``{x : normal . x > offset}``.

    ``everywhere`` marks the degenerate case in which the whole space is a
    single unbounded shape (input centers affinely dependent, or no balls).
    """

    ball_centers: np.ndarray
    ball_radii: np.ndarray
    half_normals: np.ndarray
    half_offsets: np.ndarray
    everywhere: bool = False

    @property
    def dimension(self) -> int:
        return self.ball_centers.shape[1]

    @property
    def shapes(self) -> list:
        out: list = [FiniteBall(tuple(c), float(r)) for c, r in zip(self.ball_centers, self.ball_radii)]
        out += [HalfSpace(tuple(nv), float(o)) for nv, o in zip(self.half_normals, self.half_offsets)]
        if self.everywhere:
            out.append(EntireSpace(self.dimension))
        return out

    def contains(self, x) -> np.ndarray:
        """Per-shape membership of point ``x`` (balls first, then half-spaces)."""
        x = np.asarray(x, dtype=float)
        inb = np.sum((self.ball_centers - x) ** 2, axis=1) <= self.ball_radii ** 2
        inh = self.half_normals @ x >= self.half_offsets
        return np.concatenate([inb, inh])


@dataclass(frozen=True)
class FiniteBall:
    center: tuple
    radius: float
    unbounded: bool = False


@dataclass(frozen=True)
class HalfSpace:
    normal: tuple
    offset: float
    unbounded: bool = True


@dataclass(frozen=True)
class EntireSpace:
    dimension: int
    unbounded: bool = True


def dual_diagram(diagram: PowerDiagram, bounds=None) -> DualDiagram:
    """Dual ball diagram of a power diagram.

    If ``bounds`` (``(lo, hi)`` corners) is given, every input ball must lie
    inside it, otherwise :class:`BoundsTooSmall` is raised.
    """
    n = diagram.dimension
    if bounds is not None and len(diagram.radii):
        lo, hi = (np.asarray(b, dtype=float) for b in bounds)
        blo = diagram.centers - diagram.radii[:, None]
        bhi = diagram.centers + diagram.radii[:, None]
        if np.any(blo < lo) or np.any(bhi > hi):
            raise BoundsTooSmall("a collision ball reaches outside the query bounds; enlarge them")
    if diagram.flat:
        return DualDiagram(np.empty((0, n)), np.empty(0), np.empty((0, n)), np.empty(0), everywhere=True)
    keep = diagram.powers >= 0
    normals = diagram.directions
    offsets = np.sum(normals * diagram.centers[diagram.facets[:, 0]], axis=1)
    return DualDiagram(diagram.vertices[keep], np.sqrt(diagram.powers[keep]), normals, offsets)


def empty_dual(dimension: int) -> DualDiagram:
    """Dual diagram of an empty ball set: everything is free."""
    return DualDiagram(np.empty((0, dimension)), np.empty(0), np.empty((0, dimension)), np.empty(0),
                       everywhere=True)
