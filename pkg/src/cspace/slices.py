"""Free-space approximation of a single orientation slice."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TextIO

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .geometry import BallUnion, rotation_matrix
from .overlap import balls_meet_halfspaces, self_pairs
from .power import DualDiagram, EntireSpace, FiniteBall, HalfSpace, dual_diagram, empty_dual, weighted_voronoi

# overlap tolerance relative to the bounds diagonal
OVERLAP_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class CollisionBallSet:
    """Collision balls of one slice, core-ball major: index ``i * n_obstacles + j``."""

    orientation_id: int
    centers: np.ndarray
    radii: np.ndarray

    def __len__(self) -> int:
        return len(self.radii)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Whether each point lies in the open union of the balls."""
        points = np.atleast_2d(points)
        inside = np.zeros(len(points), dtype=bool)
        for c, r in zip(self.centers, self.radii):
            inside |= np.einsum("ij,ij->i", points - c, points - c) < r * r
        return inside


def collision_balls(obstacles: BallUnion, core: BallUnion, reference_point, orientation,
                    orientation_id: int = -1) -> CollisionBallSet:
    """Balls ``B(X_j - R(Y_i - G), R_j + r_i)`` for core balls ``i`` and obstacles ``j``.

    ``core`` already carries the eps shrink and any delta inflation.
    """
    n = obstacles.dimension
    rot = rotation_matrix(orientation, n)
    arms = (core.centers - np.asarray(reference_point, dtype=float)) @ rot.T
    centers = (obstacles.centers[None, :, :] - arms[:, None, :]).reshape(-1, n)
    radii = (obstacles.radii[None, :] + core.radii[:, None]).reshape(-1)
    return CollisionBallSet(orientation_id, centers, radii)


@dataclass(frozen=True)
class SliceComponent:
    shapes: list
    is_infinite: bool


@dataclass(frozen=True, eq=False)
class SliceFreeSpace:
    """Dual shapes of one slice with component labels.

    Label 0 is the infinite component; it owns every half-space (and the
    whole-space pseudo-shape if present). Finite labels ``1..k`` are ordered
    by their smallest ball index.
    """

    orientation_id: int
    dual: DualDiagram
    ball_labels: np.ndarray
    n_components: int
    tol: float

    @property
    def dimension(self) -> int:
        return self.dual.dimension

    @property
    def everywhere(self) -> bool:
        return self.dual.everywhere

    @property
    def components(self) -> list[SliceComponent]:
        out = []
        for label in range(self.n_components):
            sel = np.flatnonzero(self.ball_labels == label)
            shapes: list = [FiniteBall(tuple(self.dual.ball_centers[k]), float(self.dual.ball_radii[k]))
                            for k in sel]
            if label == 0:
                shapes += [HalfSpace(tuple(nv), float(d))
                           for nv, d in zip(self.dual.half_normals, self.dual.half_offsets)]
                if self.dual.everywhere:
                    shapes.append(EntireSpace(self.dimension))
            out.append(SliceComponent(shapes, label == 0))
        return out

    @property
    def bounded_count(self) -> int:
        return self.n_components - 1

    def locate(self, point) -> int | None:
        """Label of a shape containing ``point`` (closed shapes), or None."""
        x = np.asarray(point, dtype=float)
        if self.dual.everywhere:
            return 0
        if len(self.dual.half_offsets) and np.any(self.dual.half_normals @ x > self.dual.half_offsets):
            return 0
        d2 = np.sum((self.dual.ball_centers - x) ** 2, axis=1)
        hit = np.flatnonzero(d2 <= self.dual.ball_radii ** 2)
        if hit.size == 0:
            return None
        # prefer the infinite label, then the smallest, so the answer is order independent
        return int(np.min(self.ball_labels[hit]))


def slice_components(dual: DualDiagram, tol: float = 0.0, orientation_id: int = -1) -> SliceFreeSpace:
    """Connected components of the shape-overlap graph of a dual diagram."""
    k = len(dual.ball_radii)
    if dual.everywhere:
        return SliceFreeSpace(orientation_id, dual, np.zeros(k, dtype=np.int64), 1, tol)
    pairs = self_pairs(dual.ball_centers, dual.ball_radii, tol)
    # node k stands for the union of all half-spaces (pairwise they always meet)
    touch = balls_meet_halfspaces(dual.ball_centers, dual.ball_radii, dual.half_normals,
                                  dual.half_offsets, tol).any(axis=1)
    inf_balls = np.flatnonzero(touch)
    rows = np.concatenate([pairs[:, 0], inf_balls])
    cols = np.concatenate([pairs[:, 1], np.full(len(inf_balls), k)])
    graph = coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(k + 1, k + 1))
    _, raw = connected_components(graph, directed=False)
    labels = _canonical_labels(raw, infinite_node=k)
    return SliceFreeSpace(orientation_id, dual, labels[:k], int(labels.max()) + 1, tol)


def _canonical_labels(raw: np.ndarray, infinite_node: int) -> np.ndarray:
    """Relabel so the infinite node gets 0 and the rest follow first appearance."""
    first = {raw[infinite_node]: 0}
    out = np.empty_like(raw)
    for idx, r in enumerate(raw):
        if r not in first:
            first[r] = len(first)
        out[idx] = first[r]
    return out


def compute_slice(obstacles: BallUnion, core: BallUnion, reference_point, orientation,
                  bounds=None, orientation_id: int = -1) -> SliceFreeSpace:
    """Collision balls, power diagram, dual diagram and components of one slice."""
    col = collision_balls(obstacles, core, reference_point, orientation, orientation_id)
    return slice_from_collision(col, obstacles.dimension, bounds)


def overlap_tolerance(bounds, fallback_scale: float) -> float:
    if bounds is None:
        return OVERLAP_RTOL * fallback_scale
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    return OVERLAP_RTOL * float(np.linalg.norm(hi - lo))


def slice_from_collision(col: CollisionBallSet, dimension: int, bounds=None) -> SliceFreeSpace:
    if len(col) == 0:
        return slice_components(empty_dual(dimension), 0.0, col.orientation_id)
    diagram = weighted_voronoi(col.centers, col.radii)
    dual = dual_diagram(diagram, bounds)
    scale = float(np.ptp(col.centers, axis=0).max() + 2 * col.radii.max())
    return slice_components(dual, overlap_tolerance(bounds, scale), col.orientation_id)


def dump_slice(free: SliceFreeSpace, col: CollisionBallSet | None, out: TextIO) -> None:
    """Plain-text listing of collision balls, dual shapes and their labels."""
    fmt = " ".join
    print(f"slice {free.orientation_id} dimension {free.dimension} components {free.n_components}", file=out)
    if col is not None:
        print(f"collision {len(col)}", file=out)
        for c, r in zip(col.centers, col.radii):
            print(f"  ball {fmt(f'{v:.9g}' for v in c)} {r:.9g}", file=out)
    d = free.dual
    print(f"dual balls {len(d.ball_radii)}", file=out)
    for c, r, lab in zip(d.ball_centers, d.ball_radii, free.ball_labels):
        print(f"  ball {fmt(f'{v:.9g}' for v in c)} {r:.9g} label {lab}", file=out)
    print(f"dual halfspaces {len(d.half_offsets)}", file=out)
    for nv, off in zip(d.half_normals, d.half_offsets):
        print(f"  half {fmt(f'{v:.9g}' for v in nv)} {off:.9g} label 0", file=out)
    if d.everywhere:
        print("  everywhere label 0", file=out)
