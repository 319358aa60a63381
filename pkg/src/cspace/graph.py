"""Connectivity graph over orientation slices: sequential and threaded builds."""

from __future__ import annotations

import json
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .errors import BuildError, ParseError
from .geometry import BallUnion, epsilon_core, offset
from .overlap import balls_meet_halfspaces, cross_pairs
from .rotations import EpsilonPlan, OrientationGrid
from .scene import Scene
from .slices import CollisionBallSet, SliceFreeSpace, collision_balls, slice_from_collision

# strict edge check: initial cells per axis and subdivision limits
_STRICT_START = {2: 8, 3: 5}
_STRICT_DEPTH = 7
_STRICT_MAX_CELLS = 50_000
# rows of the ball distance matrix handled at once when reducing to label pairs
_LABEL_CHUNK = 2048


# --------------------------------------------------------------------------- edges

def _finite(free: SliceFreeSpace) -> np.ndarray:
    return np.flatnonzero(free.ball_labels > 0)


def _shape_pairs(a: SliceFreeSpace, b: SliceFreeSpace):
    """Overlapping shape pairs that involve at least one finite component.

    Yields ``(label_a, label_b, kind, i, j)`` arrays where ``kind`` is 0 for
    ball/ball, 1 for ball_a/half_b and 2 for half_a/ball_b. With a whole-space
    shape on one side the partner index is -1.
    """
    tol = max(a.tol, b.tol)
    la, lb = a.ball_labels, b.ball_labels
    fa, fb = _finite(a), _finite(b)
    out = []

    if a.everywhere or b.everywhere:
        if a.everywhere and b.everywhere:
            return out
        if a.everywhere:
            out.append((np.zeros(len(fb), np.int64), lb[fb], np.full(len(fb), 3), np.full(len(fb), -1), fb))
        else:
            out.append((la[fa], np.zeros(len(fa), np.int64), np.full(len(fa), 4), fa, np.full(len(fa), -1)))
        return out

    ca, ra = a.dual.ball_centers, a.dual.ball_radii
    cb, rb = b.dual.ball_centers, b.dual.ball_radii
    # finite balls of a against every ball of b
    p = cross_pairs(ca[fa], ra[fa], cb, rb, tol)
    i, j = fa[p[:, 0]], p[:, 1]
    out.append((la[i], lb[j], np.zeros(len(i), np.int64), i, j))
    # finite balls of b against infinite balls of a
    ia = np.flatnonzero(la == 0)
    p = cross_pairs(ca[ia], ra[ia], cb[fb], rb[fb], tol)
    i, j = ia[p[:, 0]], fb[p[:, 1]]
    out.append((la[i], lb[j], np.zeros(len(i), np.int64), i, j))
    # finite balls against the other side's half-spaces
    if len(b.dual.half_offsets) and len(fa):
        hit = balls_meet_halfspaces(ca[fa], ra[fa], b.dual.half_normals, b.dual.half_offsets, tol)
        r, c = np.nonzero(hit)
        out.append((la[fa[r]], np.zeros(len(r), np.int64), np.ones(len(r), np.int64), fa[r], c))
    if len(a.dual.half_offsets) and len(fb):
        hit = balls_meet_halfspaces(cb[fb], rb[fb], a.dual.half_normals, a.dual.half_offsets, tol)
        r, c = np.nonzero(hit)
        out.append((np.zeros(len(r), np.int64), lb[fb[r]], np.full(len(r), 2), c, fb[r]))
    return out


def _label_pairs(a: SliceFreeSpace, b: SliceFreeSpace) -> np.ndarray:
    """Label pairs with overlapping shapes, reduced per label without listing ball pairs."""
    if a.everywhere or b.everywhere:
        keys = [(0, 0)]
        if not b.everywhere:
            keys += [(0, int(l)) for l in np.unique(b.ball_labels[_finite(b)])]
        if not a.everywhere:
            keys += [(int(l), 0) for l in np.unique(a.ball_labels[_finite(a)])]
        return np.unique(np.array(keys, dtype=np.int64), axis=0)
    tol = max(a.tol, b.tol)
    la, lb = a.ball_labels, b.ball_labels
    fa, fb = _finite(a), _finite(b)
    hit = np.zeros((a.n_components, b.n_components), dtype=bool)
    hit[0, 0] = True
    ca, ra = a.dual.ball_centers, a.dual.ball_radii
    cb, rb = b.dual.ball_centers, b.dual.ball_radii
    if len(fa) or len(fb):
        # rows are balls of a that are finite or could meet a finite ball of b
        rows = np.arange(len(ra)) if len(fb) else fa
        onehot_b = np.zeros((len(rb), b.n_components), dtype=np.float32)
        onehot_b[np.arange(len(rb)), lb] = 1.0
        for s in range(0, len(rows), _LABEL_CHUNK):
            r = rows[s:s + _LABEL_CHUNK]
            meet = cdist(ca[r], cb) <= ra[r, None] + rb[None, :] + tol
            # pairs of infinite balls say nothing new
            meet[la[r] == 0] &= (lb > 0)[None, :]
            onehot_a = np.zeros((a.n_components, len(r)), dtype=np.float32)
            onehot_a[la[r], np.arange(len(r))] = 1.0
            hit |= (onehot_a @ meet.astype(np.float32) @ onehot_b) > 0
    if len(b.dual.half_offsets) and len(fa):
        m = balls_meet_halfspaces(ca[fa], ra[fa], b.dual.half_normals, b.dual.half_offsets, tol)
        hit[la[fa[np.any(m, axis=1)]], 0] = True
    if len(a.dual.half_offsets) and len(fb):
        m = balls_meet_halfspaces(cb[fb], rb[fb], a.dual.half_normals, a.dual.half_offsets, tol)
        hit[0, lb[fb[np.any(m, axis=1)]]] = True
    return np.argwhere(hit).astype(np.int64)


def add_edges(a: SliceFreeSpace, b: SliceFreeSpace, *, strict: bool = False,
              col_a: CollisionBallSet | None = None, col_b: CollisionBallSet | None = None) -> np.ndarray:
    """Component pairs ``(label_a, label_b)`` joined between two adjacent slices.

    The two infinite components are always joined. Other pairs are joined
    when some shape of one overlaps some shape of the other; with ``strict``
    the overlap must also contain a point outside both collision sets (or the
    check must fail to rule that out).
    """
    if not strict:
        return _label_pairs(a, b)
    parts = _shape_pairs(a, b)
    if not parts:
        return np.array([[0, 0]], dtype=np.int64)
    la = np.concatenate([p[0] for p in parts])
    lb = np.concatenate([p[1] for p in parts])
    if col_a is None or col_b is None:
        raise ValueError("strict edge checks need the collision sets of both slices")
    kind = np.concatenate([p[2] for p in parts])
    si = np.concatenate([p[3] for p in parts])
    sj = np.concatenate([p[4] for p in parts])
    keys = np.column_stack([la, lb])
    uniq, inv = np.unique(keys, axis=0, return_inverse=True) if len(keys) else (np.empty((0, 2), np.int64), [])
    inv = np.asarray(inv).reshape(-1)
    kept = [[0, 0]]
    for g, (ga, gb) in enumerate(uniq):
        if ga == 0 and gb == 0:
            continue
        sel = np.flatnonzero(inv == g)
        lenses = [_lens(a, b, kind[k], si[k], sj[k]) for k in sel]
        if not _all_lenses_covered(lenses, col_a, col_b):
            kept.append([int(ga), int(gb)])
    return np.unique(np.array(kept, dtype=np.int64), axis=0)


# ----------------------------------------------------------------- strict check

@dataclass(frozen=True)
class _Lens:
    """Intersection of up to two balls and up to one half-space."""

    balls: tuple       # tuple of (center, radius)
    halfspaces: tuple  # tuple of (normal, offset)

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.max([c - r for c, r in self.balls], axis=0)
        hi = np.min([c + r for c, r in self.balls], axis=0)
        return lo, hi

    def contains(self, x: np.ndarray) -> np.ndarray:
        ok = np.ones(len(x), dtype=bool)
        for c, r in self.balls:
            ok &= np.sum((x - c) ** 2, axis=1) <= r * r
        for nv, d in self.halfspaces:
            ok &= x @ nv > d
        return ok

    def may_meet(self, x: np.ndarray, h: np.ndarray) -> np.ndarray:
        """Conservative test whether ball ``B(x, h)`` meets the lens."""
        ok = np.ones(len(x), dtype=bool)
        for c, r in self.balls:
            ok &= np.sqrt(np.sum((x - c) ** 2, axis=1)) <= r + h
        for nv, d in self.halfspaces:
            ok &= x @ nv + h > d
        return ok


def _lens(a: SliceFreeSpace, b: SliceFreeSpace, kind: int, i: int, j: int) -> _Lens:
    ba = (a.dual.ball_centers[i], float(a.dual.ball_radii[i])) if i >= 0 else None
    bb = (b.dual.ball_centers[j], float(b.dual.ball_radii[j])) if j >= 0 else None
    if kind == 0:
        return _Lens((ba, bb), ())
    if kind == 1:
        return _Lens((ba,), ((b.dual.half_normals[j], float(b.dual.half_offsets[j])),))
    if kind == 2:
        return _Lens((bb,), ((a.dual.half_normals[i], float(a.dual.half_offsets[i])),))
    if kind == 3:
        return _Lens((bb,), ())
    return _Lens((ba,), ())


def _all_lenses_covered(lenses, col_a: CollisionBallSet, col_b: CollisionBallSet) -> bool:
    centers = np.vstack([col_a.centers, col_b.centers])
    radii = np.concatenate([col_a.radii, col_b.radii])
    return all(lens_covered(lens, centers, radii) for lens in lenses)


def lens_covered(lens: _Lens, centers: np.ndarray, radii: np.ndarray) -> bool:
    """True only if the lens is proven to lie inside the union of the given balls.

    A regular grid of ``8x8`` (2D) or ``5x5x5`` (3D) cells covers the lens box.
    A cell whose center is a free lens point disproves coverage; a cell whose
    circumscribed ball sits inside one collision ball is settled; the rest are
    split in half along every axis up to a depth limit. Undecided cells count
    as not covered.
    """
    n = centers.shape[1]
    lo, hi = lens.box()
    if np.any(lo > hi):
        return True
    near = np.all((centers - radii[:, None] <= hi) & (centers + radii[:, None] >= lo), axis=1)
    centers, radii = centers[near], radii[near]
    if len(radii) == 0:
        return False
    k = _STRICT_START[n]
    size = (hi - lo) / k
    axes = [lo[d] + size[d] * (np.arange(k) + 0.5) for d in range(n)]
    x = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    children = np.array(np.meshgrid(*([[-0.25, 0.25]] * n), indexing="ij")).reshape(n, -1).T
    for _ in range(_STRICT_DEPTH + 1):
        h = np.full(len(x), 0.5 * float(np.linalg.norm(size)))
        live = lens.may_meet(x, h)
        x, h = x[live], h[live]
        if len(x) == 0:
            return True
        d = np.sqrt(np.maximum(np.sum((x[:, None, :] - centers[None]) ** 2, axis=2), 0.0))
        inside_lens = lens.contains(x)
        free = np.all(d >= radii[None], axis=1)
        if np.any(inside_lens & free):
            return False
        settled = np.any(d + h[:, None] <= radii[None], axis=1)
        x = x[~settled]
        if len(x) == 0:
            return True
        if len(x) * len(children) > _STRICT_MAX_CELLS:
            return False
        x = (x[:, None, :] + children[None] * size).reshape(-1, n)
        size = size / 2
    return False


def strict_edge_check(a: SliceFreeSpace, label_a: int, b: SliceFreeSpace, label_b: int,
                      col_a: CollisionBallSet, col_b: CollisionBallSet) -> bool:
    """Whether the edge between two overlapping components survives the strict check."""
    if label_a == 0 and label_b == 0:
        return True
    keep = add_edges(a, b, strict=True, col_a=col_a, col_b=col_b)
    return bool(np.any((keep[:, 0] == label_a) & (keep[:, 1] == label_b)))


# -------------------------------------------------------------- union-find

class UnionFind:
    def __init__(self, n: int):
        self.parent = np.arange(n)

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return int(root)

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # smaller index becomes root so labels do not depend on union order
            if ra < rb:
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb

    def labels(self) -> np.ndarray:
        return np.array([self.find(i) for i in range(len(self.parent))], dtype=np.int64)


# --------------------------------------------------------------- graph object

@dataclass(frozen=True)
class GraphVertex:
    slice: int
    component: int
    is_infinite: bool


@dataclass(eq=False)
class ConnectivityGraph:
    """Vertices are ``(slice, component)`` pairs numbered slice-major.

    ``classes[v]`` is the partition class of vertex ``v``; classes are
    numbered by their smallest vertex. ``bounded[c]`` is True when class ``c``
    contains no infinite component.
    """

    component_counts: np.ndarray
    edges: np.ndarray
    stats: dict = field(default_factory=dict)
    context: BuildContext | None = None

    def __post_init__(self):
        self.component_counts = np.asarray(self.component_counts, dtype=np.int64)
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        e = np.sort(e, axis=1)
        self.edges = np.unique(e, axis=0) if len(e) else e
        self.offsets = np.concatenate([[0], np.cumsum(self.component_counts)])
        uf = UnionFind(self.n_vertices)
        for u, v in self.edges:
            uf.union(int(u), int(v))
        roots = uf.labels()
        _, first, inv = np.unique(roots, return_index=True, return_inverse=True)
        rank = np.argsort(np.argsort(first))
        self.classes = rank[inv.reshape(-1)]
        infinite = np.zeros(self.n_vertices, dtype=bool)
        infinite[self.offsets[:-1]] = True
        self.infinite = infinite
        n_classes = int(self.classes.max()) + 1 if self.n_vertices else 0
        unbounded = np.zeros(n_classes, dtype=bool)
        unbounded[self.classes[infinite]] = True
        self.bounded = ~unbounded

    @property
    def n_vertices(self) -> int:
        return int(self.component_counts.sum())

    @property
    def n_classes(self) -> int:
        return len(self.bounded)

    @property
    def bounded_classes(self) -> int:
        return int(self.bounded.sum())

    def vertex_id(self, slice_id: int, component: int) -> int:
        if not 0 <= component < self.component_counts[slice_id]:
            raise IndexError(f"slice {slice_id} has no component {component}")
        return int(self.offsets[slice_id] + component)

    @property
    def vertices(self) -> list[GraphVertex]:
        out = []
        for s, count in enumerate(self.component_counts):
            out.extend(GraphVertex(s, c, c == 0) for c in range(int(count)))
        return out

    def class_of(self, slice_id: int, component: int) -> int:
        return int(self.classes[self.vertex_id(slice_id, component)])

    def components(self) -> list[tuple[np.ndarray, bool]]:
        """Partition classes as ``(vertex ids, is_bounded)``."""
        order = np.argsort(self.classes, kind="stable")
        cuts = np.flatnonzero(np.diff(self.classes[order])) + 1
        return [(grp, bool(self.bounded[self.classes[grp[0]]])) for grp in np.split(order, cuts)]

    def same_as(self, other: ConnectivityGraph) -> bool:
        return (np.array_equal(self.component_counts, other.component_counts)
                and np.array_equal(self.edges, other.edges))

    def canonical_partition(self) -> np.ndarray:
        return self.classes.copy()

    # export -----------------------------------------------------------
    def to_dict(self) -> dict:
        verts = [{"slice": s, "component": c, "infinite": c == 0}
                 for s, count in enumerate(self.component_counts.tolist()) for c in range(count)]
        return {"vertices": verts, "edges": self.edges.tolist(),
                "classes": self.classes.tolist(), "bounded": self.bounded.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    def to_dot(self) -> str:
        lines = ["graph cspace {"]
        for v, vert in enumerate(self.vertices):
            shape = "doublecircle" if vert.is_infinite else "circle"
            lines.append(f'  {v} [label="{vert.slice}:{vert.component}" shape={shape} '
                         f'class={self.classes[v]}];')
        lines += [f"  {u} -- {v};" for u, v in self.edges]
        lines.append("}")
        return "\n".join(lines) + "\n"

    def save(self, path, fmt: str = "json") -> None:
        Path(path).write_text(self.to_json() if fmt == "json" else self.to_dot())


def graph_from_dict(data: dict) -> ConnectivityGraph:
    try:
        verts = data["vertices"]
        edges = data["edges"]
    except (KeyError, TypeError):
        raise ParseError("graph: expected 'vertices' and 'edges'") from None
    counts: dict[int, int] = {}
    for k, v in enumerate(verts):
        s, c = int(v["slice"]), int(v["component"])
        if c != counts.get(s, 0):
            raise ParseError(f"graph: vertices[{k}] out of slice-major order")
        counts[s] = c + 1
    n = max(counts) + 1 if counts else 0
    return ConnectivityGraph(np.array([counts.get(s, 0) for s in range(n)]), np.array(edges).reshape(-1, 2))


def load_graph(path) -> ConnectivityGraph:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"graph: cannot read {path}: {exc}") from None
    return graph_from_dict(data)


# ------------------------------------------------------------------- builds

@dataclass(frozen=True, eq=False)
class BuildContext:
    """Everything a worker needs to recompute any slice from scratch."""

    scene: Scene
    grid: OrientationGrid
    plan: EpsilonPlan
    bounds: tuple | None
    core: BallUnion
    strict: bool = False

    @classmethod
    def prepare(cls, scene: Scene, grid: OrientationGrid, plan: EpsilonPlan, bounds=None,
                strict: bool = False) -> BuildContext:
        if grid.dimension != scene.dimension:
            raise ValueError(f"grid is {grid.dimension}D but the scene is {scene.dimension}D")
        shape = offset(scene.object.shape, plan.delta) if plan.delta > 0 else scene.object.shape
        core = epsilon_core(shape, plan.epsilon)
        if bounds is not None:
            bounds = tuple(np.asarray(b, dtype=float) for b in bounds)
        return cls(scene, grid, plan, bounds, core, strict)

    def collision(self, i: int) -> CollisionBallSet:
        return collision_balls(self.scene.obstacles, self.core, self.scene.object.reference_point,
                               self.grid.sample(i), i)

    def compute(self, i: int) -> tuple[SliceFreeSpace, CollisionBallSet | None]:
        col = self.collision(i)
        free = slice_from_collision(col, self.scene.dimension, self.bounds)
        return free, (col if self.strict else None)

    def edges_between(self, i: int, si, j: int, sj) -> np.ndarray:
        pairs = add_edges(si[0], sj[0], strict=self.strict, col_a=si[1], col_b=sj[1])
        return pairs


class _Timer:
    def __init__(self):
        self.lock = threading.Lock()
        self.slice_time = 0.0
        self.edge_time = 0.0

    def add(self, name: str, dt: float):
        with self.lock:
            setattr(self, name, getattr(self, name) + dt)


def _finalize(ctx: BuildContext, counts: np.ndarray, edge_rows: list, stats: dict) -> ConnectivityGraph:
    offsets = np.concatenate([[0], np.cumsum(counts)])
    rows = [np.column_stack([offsets[i] + p[:, 0], offsets[j] + p[:, 1]]) for i, j, p in edge_rows]
    edges = np.vstack(rows) if rows else np.empty((0, 2), dtype=np.int64)
    t0 = time.perf_counter()
    graph = ConnectivityGraph(counts, edges, stats, ctx)
    stats["phase_union_find_s"] = time.perf_counter() - t0
    stats.update(slices=len(counts), total_components=int(counts.sum()), edges=int(len(graph.edges)),
                 classes=graph.n_classes, bounded_classes=graph.bounded_classes)
    return graph


def build_sequential(scene: Scene, grid: OrientationGrid, plan: EpsilonPlan, bounds=None, *,
                     strict: bool = False) -> ConnectivityGraph:
    """Breadth-first build; each slice is computed once and evicted when done."""
    ctx = BuildContext.prepare(scene, grid, plan, bounds, strict)
    return _build_sequential(ctx)


def _build_sequential(ctx: BuildContext) -> ConnectivityGraph:
    t_start = time.perf_counter()
    grid = ctx.grid
    n = len(grid)
    status = np.zeros(n, dtype=np.int8)
    counts = np.zeros(n, dtype=np.int64)
    resident: dict[int, tuple] = {}
    peak = 0
    edge_rows = []
    timer = _Timer()

    def load(i):
        t0 = time.perf_counter()
        resident[i] = ctx.compute(i)
        counts[i] = resident[i][0].n_components
        timer.add("slice_time", time.perf_counter() - t0)

    for root in range(n):
        if status[root]:
            continue
        status[root] = 1
        load(root)
        queue = deque([root])
        while queue:
            cur = queue.popleft()
            for adj in grid.neighbors(cur):
                adj = int(adj)
                if status[adj] == 2:
                    continue
                if status[adj] == 0:
                    status[adj] = 1
                    load(adj)
                    queue.append(adj)
                peak = max(peak, len(resident))
                t0 = time.perf_counter()
                edge_rows.append((cur, adj, ctx.edges_between(cur, resident[cur], adj, resident[adj])))
                timer.add("edge_time", time.perf_counter() - t0)
            peak = max(peak, len(resident))
            status[cur] = 2
            del resident[cur]

    stats = {"workers": 1, "peak_resident": peak, "phase_slices_s": timer.slice_time,
             "phase_edges_s": timer.edge_time}
    graph = _finalize(ctx, counts, edge_rows, stats)
    stats["wall_time_s"] = time.perf_counter() - t_start
    return graph


def build_parallel(scene: Scene, grid: OrientationGrid, plan: EpsilonPlan, bounds=None, *,
                   workers: int = 1, strict: bool = False, seed: int | None = None) -> ConnectivityGraph:
    """Threaded build with per-slice locks and try-lock access to neighbours.

    Each worker repeatedly claims a random unseen orientation and runs a BFS
    from it. A worker only ever blocks on the claim lock while holding no
    slice lock, and neighbour slices are only try-locked, so no cycle of
    waits can form. Grid edges skipped because a neighbour was busy are
    finished by a sequential sweep after all workers stop.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    ctx = BuildContext.prepare(scene, grid, plan, bounds, strict)
    return _Parallel(ctx, workers, seed).run()


class _Parallel:
    def __init__(self, ctx: BuildContext, workers: int, seed: int | None):
        self.ctx = ctx
        self.workers = workers
        n = len(ctx.grid)
        self.n = n
        self.status = np.zeros(n, dtype=np.int8)
        self.counts = np.zeros(n, dtype=np.int64)
        self.locks = [threading.Lock() for _ in range(n)]
        self.claim_lock = threading.Lock()
        self.edge_lock = threading.Lock()
        self.resident: dict[int, tuple] = {}
        self.peak = 0
        self.done_pairs: set[tuple[int, int]] = set()
        self.edge_rows: list = []
        self.errors: list[BaseException] = []
        self.abort = threading.Event()
        self.timer = _Timer()
        self.seeds = np.random.SeedSequence(seed).spawn(workers)
        self.next_unseen = 0

    # slice storage, always called while holding the slice's own lock
    def _load(self, i: int):
        t0 = time.perf_counter()
        data = self.ctx.compute(i)
        with self.edge_lock:
            self.resident[i] = data
            self.counts[i] = data[0].n_components
            self.peak = max(self.peak, len(self.resident))
        self.timer.add("slice_time", time.perf_counter() - t0)

    def _evict(self, i: int):
        with self.edge_lock:
            self.resident.pop(i, None)

    def _record(self, i: int, j: int):
        key = (min(i, j), max(i, j))
        with self.edge_lock:
            if key in self.done_pairs:
                return
            a, b = self.resident[i], self.resident[j]
        t0 = time.perf_counter()
        pairs = self.ctx.edges_between(i, a, j, b)
        self.timer.add("edge_time", time.perf_counter() - t0)
        with self.edge_lock:
            if key not in self.done_pairs:
                self.done_pairs.add(key)
                self.edge_rows.append((i, j, pairs))

    def _claim(self, rng: np.random.Generator) -> int | None:
        """Random index, then the first unseen orientation at or after it."""
        with self.claim_lock:
            if self.next_unseen >= self.n:
                return None
            start = int(rng.integers(self.n))
            for k in range(self.n):
                i = (start + k) % self.n
                if self.status[i] != 0:
                    continue
                with self.locks[i]:
                    if self.status[i] != 0:
                        continue
                    self.status[i] = 1
                    self._load(i)
                    return i
            self.next_unseen = self.n
            return None

    def _worker(self, k: int):
        rng = np.random.default_rng(self.seeds[k])
        grid = self.ctx.grid
        try:
            while not self.abort.is_set():
                root = self._claim(rng)
                if root is None:
                    return
                queue = deque([root])
                while queue and not self.abort.is_set():
                    cur = queue.popleft()
                    with self.locks[cur]:
                        finished = True
                        for adj in grid.neighbors(cur):
                            adj = int(adj)
                            if not self.locks[adj].acquire(blocking=False):
                                finished = False
                                continue
                            try:
                                if self.status[adj] == 2:
                                    continue
                                if self.status[adj] == 0:
                                    self.status[adj] = 1
                                    self._load(adj)
                                    queue.append(adj)
                                self._record(cur, adj)
                            finally:
                                self.locks[adj].release()
                        if finished:
                            self.status[cur] = 2
                            self._evict(cur)
        except BaseException as exc:  # noqa: BLE001 - reported through BuildError
            with self.edge_lock:
                self.errors.append(exc)
            self.abort.set()

    def run(self) -> ConnectivityGraph:
        t_start = time.perf_counter()
        threads = [threading.Thread(target=self._worker, args=(k,), name=f"cspace-worker-{k}")
                   for k in range(self.workers)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if self.errors:
            exc = self.errors[0]
            raise BuildError(f"worker failed: {type(exc).__name__}: {exc}") from exc

        # pairs skipped because a neighbour was busy; both ends are still resident
        t0 = time.perf_counter()
        swept = 0
        for i, j in self.ctx.grid.edges:
            i, j = int(i), int(j)
            if (i, j) not in self.done_pairs:
                self._record(i, j)
                swept += 1
        self.status[:] = 2
        self.resident.clear()
        stats = {"workers": self.workers, "peak_resident": self.peak,
                 "phase_slices_s": self.timer.slice_time, "phase_edges_s": self.timer.edge_time,
                 "final_sweep_pairs": swept, "phase_final_sweep_s": time.perf_counter() - t0}
        graph = _finalize(self.ctx, self.counts, sorted(self.edge_rows, key=lambda r: (r[0], r[1])), stats)
        stats["wall_time_s"] = time.perf_counter() - t_start
        return graph


def build(scene: Scene, grid: OrientationGrid, plan: EpsilonPlan, bounds=None, *,
          workers: int = 1, strict: bool = False, seed: int | None = None,
          parallel: bool | None = None) -> ConnectivityGraph:
    """Sequential build for one worker unless ``parallel`` is forced."""
    if parallel or (parallel is None and workers > 1):
        return build_parallel(scene, grid, plan, bounds, workers=workers, strict=strict, seed=seed)
    return build_sequential(scene, grid, plan, bounds, strict=strict)
