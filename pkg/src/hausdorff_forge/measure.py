"""The natural self-similar measure and certified enclosures of mu(U).

The measure of a convex candidate is bracketed by classifying cylinder
bounding balls: certified-inside cylinders contribute their full weight to
the lower end, unresolved (straddling) mass widens the upper end, and
refinement proceeds in decreasing weight order until the enclosure width
reaches the tolerance or the node budget runs out.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import BudgetExceeded
from .geometry import Ball, ConvexCandidate, classify_balls
from .ifs import IFS, CylinderWord, invariant_ball, similarity_dimension


@dataclass(frozen=True)
class MeasureInterval:
    """Certified enclosure [lo, hi] of a probability mass."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (0.0 <= self.lo <= self.hi <= 1.0):
            raise ValueError(f"invalid measure interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True, eq=False)
class NaturalMeasure:
    """Self-similar measure with weights ratio_i^s, s the similarity dim."""

    ifs: IFS
    s: float
    weights: np.ndarray

    @classmethod
    def for_ifs(cls, ifs: IFS) -> "NaturalMeasure":
        s = similarity_dimension(ifs)
        w = ifs.ratios ** s
        total = float(w.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"natural weights sum to {total}, expected 1")
        return cls(ifs=ifs, s=s, weights=w)

    @cached_property
    def root_ball(self) -> Ball:
        return invariant_ball(self.ifs)

    @property
    def dimension(self) -> int:
        return self.ifs.dimension


def pushforward_weight(word: CylinderWord, m: NaturalMeasure) -> float:
    """Exact cylinder mass: the product of per-map weights along the word."""
    if not word.indices:
        return 1.0
    return float(np.prod(m.weights[np.asarray(word.indices)]))


def measure_of(candidate: ConvexCandidate, m: NaturalMeasure,
               tol: float = 1e-6, node_cap: int = 500_000) -> MeasureInterval:
    """Certified enclosure of mu(candidate).

    Raises BudgetExceeded (carrying the best enclosure so far) when the node
    budget is spent before the width reaches ``tol``.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if candidate.dim != m.dimension:
        raise ValueError("candidate dimension does not match the measure")

    root = m.root_ball
    r_map = m.ifs.ratios
    a_map = m.ifs.translations
    w_map = m.weights

    # frontier buckets keyed by exact cylinder weight; max-heap of weights
    buckets: dict[float, list[tuple[np.ndarray, np.ndarray]]] = {
        1.0: [(root.center[None, :], np.array([root.radius]))]}
    heap = [-1.0]
    lo = 0.0
    straddle = 1.0
    nodes = 0

    while straddle > tol and heap:
        w = -heapq.heappop(heap)
        chunks = buckets.pop(w, None)
        if chunks is None:
            continue
        C = np.concatenate([c for c, _ in chunks])
        R = np.concatenate([r for _, r in chunks])
        nodes += C.shape[0]
        codes = classify_balls(candidate, C, R)
        n_in = int((codes == 1).sum())
        n_out = int((codes == -1).sum())
        lo += w * n_in
        straddle -= w * (n_in + n_out)
        if nodes > node_cap:
            # mass of the popped straddlers is still unresolved; it stays in
            # the reported upper end
            raise BudgetExceeded(
                f"measure refinement exceeded {node_cap} nodes",
                enclosure=MeasureInterval(min(lo, 1.0), min(lo + straddle, 1.0)),
                nodes=nodes)
        mask = codes == 0
        if not np.any(mask):
            continue
        Cs, Rs = C[mask], R[mask]
        for i in range(len(r_map)):
            cw = w * float(w_map[i])
            chunk = (r_map[i] * Cs + a_map[i][None, :], r_map[i] * Rs)
            if cw in buckets:
                buckets[cw].append(chunk)
            else:
                buckets[cw] = [chunk]
                heapq.heappush(heap, -cw)

    lo = min(lo, 1.0)
    return MeasureInterval(lo, min(lo + max(straddle, 0.0), 1.0))
