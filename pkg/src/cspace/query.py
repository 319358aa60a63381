"""Point location and connectivity verdicts on a built graph."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import OutOfBounds
from .geometry import Configuration
from .graph import ConnectivityGraph, GraphVertex, build
from .rotations import EpsilonPlan, OrientationGrid
from .scene import Scene


class VerdictKind(enum.Enum):
    DISCONNECTED = "DISCONNECTED"
    POSSIBLY_CONNECTED = "POSSIBLY_CONNECTED"
    IN_COLLISION_APPROX = "IN_COLLISION_APPROX"
    PASSAGE_AT_MOST_DELTA = "PASSAGE_AT_MOST_DELTA"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    delta: float | None = None

    def __str__(self) -> str:
        if self.kind is VerdictKind.PASSAGE_AT_MOST_DELTA:
            return f"PASSAGE<={self.delta:g}"
        return self.kind.value

    @property
    def disconnected(self) -> bool:
        return self.kind is VerdictKind.DISCONNECTED


@dataclass(frozen=True)
class InCollisionApprox:
    """The configuration lies in no dual shape of its slice."""

    slice: int


def locate(graph: ConnectivityGraph, c: Configuration) -> GraphVertex | InCollisionApprox:
    """Vertex of the component containing ``c`` in the nearest slice.

    The slice is recomputed from the graph's build context, so no slice data
    has to be kept after the build.
    """
    ctx = graph.context
    if ctx is None:
        raise ValueError("graph has no build context; locate needs the scene and grid it was built from")
    if c.dimension != ctx.scene.dimension:
        raise ValueError(f"configuration is {c.dimension}D but the scene is {ctx.scene.dimension}D")
    if ctx.bounds is not None:
        lo, hi = ctx.bounds
        if np.any(c.position < lo) or np.any(c.position > hi):
            raise OutOfBounds(f"position {c.position.tolist()} lies outside the bounds "
                              f"{lo.tolist()} .. {hi.tolist()}")
    s = ctx.grid.nearest(c.orientation)
    free, _ = ctx.compute(s)
    label = free.locate(c.position)
    if label is None:
        return InCollisionApprox(s)
    return GraphVertex(s, label, label == 0)


def _class(graph: ConnectivityGraph, v: GraphVertex) -> int:
    return graph.class_of(v.slice, v.component)


def path_nonexistence(graph: ConnectivityGraph, c1: Configuration, c2: Configuration) -> Verdict:
    v1, v2 = locate(graph, c1), locate(graph, c2)
    if isinstance(v1, InCollisionApprox) or isinstance(v2, InCollisionApprox):
        return Verdict(VerdictKind.IN_COLLISION_APPROX)
    if _class(graph, v1) != _class(graph, v2):
        return Verdict(VerdictKind.DISCONNECTED, graph.context.plan.delta or None)
    return Verdict(VerdictKind.POSSIBLY_CONNECTED, graph.context.plan.delta or None)


def is_caged(graph: ConnectivityGraph, c: Configuration) -> bool:
    v = locate(graph, c)
    if isinstance(v, InCollisionApprox):
        raise ValueError(f"configuration lies inside the collision approximation of slice {v.slice}")
    return bool(graph.bounded[_class(graph, v)])


def narrow_passage(scene: Scene, grid: OrientationGrid, plan: EpsilonPlan, c1: Configuration,
                   c2: Configuration, delta: float, bounds=None, *, workers: int = 1,
                   strict: bool = False, graphs: dict | None = None) -> Verdict:
    """Compare connectivity with the object grown by ``delta`` and without.

    ``plan`` fixes eps; its own delta is ignored. ``graphs`` may carry
    prebuilt graphs keyed by delta and receives the ones built here.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    graphs = {} if graphs is None else graphs
    verdicts = {}
    for d in (delta, 0.0):
        if d not in graphs:
            graphs[d] = build(scene, grid, replace(plan, delta=d), bounds, workers=workers, strict=strict)
        verdicts[d] = path_nonexistence(graphs[d], c1, c2)
    at_delta, at_zero = verdicts[delta], verdicts[0.0]
    if at_zero.kind is VerdictKind.IN_COLLISION_APPROX:
        return Verdict(VerdictKind.IN_COLLISION_APPROX)
    if at_zero.disconnected:
        return Verdict(VerdictKind.DISCONNECTED)
    if at_delta.kind is VerdictKind.IN_COLLISION_APPROX:
        # the grown object already collides at an endpoint; nothing to say about passages
        return Verdict(VerdictKind.IN_COLLISION_APPROX, delta)
    if at_delta.disconnected:
        return Verdict(VerdictKind.PASSAGE_AT_MOST_DELTA, delta)
    return Verdict(VerdictKind.POSSIBLY_CONNECTED, delta)
