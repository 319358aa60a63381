"""Broad and narrow phase for ball-ball and ball-half-space overlap."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

# up to this many candidate pairs a dense distance matrix beats the sweep
DENSE_LIMIT = 1_000_000


def _ranges(starts: np.ndarray, stops: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Flattened ``(owner, j)`` for every ``j`` in ``range(starts[k], stops[k])``."""
    counts = np.maximum(stops - starts, 0)
    total = int(counts.sum())
    owner = np.repeat(np.arange(len(starts)), counts)
    if total == 0:
        return owner, np.empty(0, dtype=np.int64)
    first = np.cumsum(counts) - counts
    j = np.arange(total) - np.repeat(first, counts) + np.repeat(starts, counts)
    return owner, j


def _boxes_meet(lo_a, hi_a, lo_b, hi_b) -> np.ndarray:
    return np.all((lo_a <= hi_b) & (lo_b <= hi_a), axis=1)


def _balls_meet(ca, ra, cb, rb, tol: float) -> np.ndarray:
    d2 = np.sum((ca - cb) ** 2, axis=1)
    s = ra + rb + tol
    return d2 <= s * s


def self_pairs(centers: np.ndarray, radii: np.ndarray, tol: float = 0.0,
               dense_limit: int = DENSE_LIMIT) -> np.ndarray:
    """All index pairs ``(i, j)``, ``i < j``, of overlapping balls.

    Sort-and-sweep on the first axis, box test on the rest, exact check last.
    """
    m = len(radii)
    if m < 2:
        return np.empty((0, 2), dtype=np.int64)
    if m * m <= dense_limit:
        meet = cdist(centers, centers) <= radii[:, None] + radii[None, :] + tol
        return np.argwhere(np.triu(meet, 1))
    pad = radii + 0.5 * tol
    lo = centers - pad[:, None]
    hi = centers + pad[:, None]
    order = np.argsort(lo[:, 0], kind="stable")
    lo_sorted = lo[order, 0]
    stops = np.searchsorted(lo_sorted, hi[order, 0], side="right")
    a, b = _ranges(np.arange(1, m + 1), stops)
    a, b = order[a], order[b]
    keep = _boxes_meet(lo[a], hi[a], lo[b], hi[b])
    a, b = a[keep], b[keep]
    keep = _balls_meet(centers[a], radii[a], centers[b], radii[b], tol)
    pairs = np.column_stack([np.minimum(a, b), np.maximum(a, b)])[keep]
    return pairs


def cross_pairs(ca: np.ndarray, ra: np.ndarray, cb: np.ndarray, rb: np.ndarray,
                tol: float = 0.0, dense_limit: int = DENSE_LIMIT) -> np.ndarray:
    """All pairs ``(i, j)`` with ball ``i`` of the first set meeting ball ``j`` of the second."""
    if len(ra) == 0 or len(rb) == 0:
        return np.empty((0, 2), dtype=np.int64)
    if len(ra) * len(rb) <= dense_limit:
        return np.argwhere(cdist(ca, cb) <= ra[:, None] + rb[None, :] + tol)
    pa, pb = ra + 0.5 * tol, rb + 0.5 * tol
    lo_a, hi_a = ca - pa[:, None], ca + pa[:, None]
    lo_b, hi_b = cb - pb[:, None], cb + pb[:, None]
    # two one-sided sweeps: b starting inside a's interval, then a starting inside b's
    ob = np.argsort(lo_b[:, 0], kind="stable")
    sb = lo_b[ob, 0]
    a1, k1 = _ranges(np.searchsorted(sb, lo_a[:, 0], side="left"),
                     np.searchsorted(sb, hi_a[:, 0], side="right"))
    b1 = ob[k1]
    oa = np.argsort(lo_a[:, 0], kind="stable")
    sa = lo_a[oa, 0]
    b2, k2 = _ranges(np.searchsorted(sa, lo_b[:, 0], side="right"),
                     np.searchsorted(sa, hi_b[:, 0], side="right"))
    a2 = oa[k2]
    a = np.concatenate([a1, a2])
    b = np.concatenate([b1, b2])
    keep = _boxes_meet(lo_a[a], hi_a[a], lo_b[b], hi_b[b])
    a, b = a[keep], b[keep]
    keep = _balls_meet(ca[a], ra[a], cb[b], rb[b], tol)
    return np.column_stack([a[keep], b[keep]])


def balls_meet_halfspaces(centers: np.ndarray, radii: np.ndarray, normals: np.ndarray,
                          offsets: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Boolean ``(balls, halfspaces)`` matrix: closed ball meets ``{n.x > d}`` up to ``tol``."""
    return centers @ normals.T + radii[:, None] + tol >= offsets[None, :]
