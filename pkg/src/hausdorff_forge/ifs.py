"""Iterated function systems of contracting homotheties.

Similarity dimension, an invariant ball, certification of the strong
separation condition with an explicit gap, and cylinder-set enumeration.
Maps are homotheties x -> r*x + a only; no rotational parts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import BudgetExceeded
from .geometry import DELTA_GEO, Ball, as_point

DEFAULT_NODE_CAP = 50_000_000


@dataclass(frozen=True, eq=False)
class Similitude:
    """Contracting homothety x -> ratio*x + translation."""

    ratio: float
    translation: np.ndarray

    def __post_init__(self):
        if not (0.0 < self.ratio < 1.0):
            raise ValueError(f"ratio must lie in (0,1), got {self.ratio}")
        object.__setattr__(self, "translation", as_point(self.translation))

    @property
    def fixed_point(self) -> np.ndarray:
        return self.translation / (1.0 - self.ratio)

    def __call__(self, x):
        return self.ratio * np.asarray(x, dtype=float) + self.translation

    def map_ball(self, ball: Ball) -> Ball:
        return Ball(self(ball.center), self.ratio * ball.radius)


@dataclass(frozen=True, eq=False)
class IFS:
    """A finite list of contracting homotheties on R^d."""

    dimension: int
    maps: tuple[Similitude, ...]

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if len(self.maps) < 2:
            raise ValueError("an IFS needs at least 2 maps")
        for m in self.maps:
            if m.translation.shape[0] != self.dimension:
                raise ValueError("translation dimension mismatch")

    def __len__(self) -> int:
        return len(self.maps)

    @cached_property
    def ratios(self) -> np.ndarray:
        return np.array([m.ratio for m in self.maps])

    @cached_property
    def translations(self) -> np.ndarray:
        return np.stack([m.translation for m in self.maps])

    @cached_property
    def fixed_points(self) -> np.ndarray:
        return self.translations / (1.0 - self.ratios[:, None])


@dataclass(frozen=True, eq=False)
class CylinderWord:
    """A finite composition word with its derived affine data.

    ``ratio`` and ``translation`` describe the composed map
    x -> ratio*x + translation; ``weight`` is the natural-measure mass of
    the cylinder (product of per-map weights).
    """

    indices: tuple[int, ...]
    ratio: float
    translation: np.ndarray
    weight: float

    @property
    def fixed_point(self) -> np.ndarray:
        return self.translation / (1.0 - self.ratio)

    def bounding_ball(self, root: Ball) -> Ball:
        return Ball(self.ratio * root.center + self.translation,
                    self.ratio * root.radius)


def similarity_dimension(ifs: IFS) -> float:
    """The unique s > 0 with sum_i ratio_i^s = 1.

    Closed form log(ell)/log(1/r) when all ratios agree; otherwise bisection
    to absolute tolerance 1e-12 on the strictly decreasing gap function.
    """
    r = ifs.ratios
    ell = len(r)
    if np.all(r == r[0]):
        return math.log(ell) / -math.log(float(r[0]))

    def gap(s: float) -> float:
        return float(np.sum(r ** s)) - 1.0

    lo, hi = 0.0, 1.0
    while gap(hi) > 0.0:
        hi *= 2.0
        if hi > 1e6:
            raise RuntimeError("similarity dimension bracket failed")
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def invariant_ball(ifs: IFS) -> Ball:
    """A ball mapped into itself by every map of the system.

    The center is the fixed point of the barycenter map x -> mean_i phi_i(x)
    (a contraction with ratio mean(r_i)); the radius
    max_i |phi_i(c) - c| / (1 - r_i) is valid for any center, so the fixed
    point only serves to make it near-minimal.  Inflated by DELTA_GEO to
    absorb rounding.
    """
    r = ifs.ratios[:, None]
    a = ifs.translations
    x = ifs.fixed_points.mean(axis=0)
    for _ in range(100_000):
        nxt = (r * x[None, :] + a).mean(axis=0)
        if float(np.linalg.norm(nxt - x)) <= 1e-12:
            x = nxt
            break
        x = nxt
    radius = float((np.linalg.norm(r * x[None, :] + a - x[None, :], axis=1)
                    / (1.0 - ifs.ratios)).max())
    return Ball(x, radius + DELTA_GEO)


def check_ssc(ifs: IFS, depth_cap: int = 8,
              pair_cap: int = 5_000_000) -> float | None:
    """Certify the strong separation condition.

    Returns a certified positive lower bound on the minimum distance between
    distinct first-level images of the attractor, or None when some pair of
    first-level bounding sets cannot be separated within ``depth_cap``
    refinement levels (or the system is too large to attempt; None is always
    a safe answer).

    Refinement expands whichever ball of a blocking pair is larger, so
    touching pairs stay cheap while the bound tightens only where needed.
    """
    ell = len(ifs)
    if ell * (ell - 1) // 2 > pair_cap:
        return None
    root = invariant_ball(ifs)
    centers = ifs.ratios[:, None] * root.center[None, :] + ifs.translations
    radii = ifs.ratios * root.radius

    overall = math.inf
    for i in range(ell):
        for j in range(i + 1, ell):
            bound = _pair_separation(ifs, centers[i], radii[i], centers[j],
                                     radii[j], depth_cap)
            if bound is None:
                return None
            overall = min(overall, bound)
    return overall


def _pair_separation(ifs: IFS, ca, ra, cb, rb, depth_cap: int) -> float | None:
    """Certified lower bound on dist between two refined ball covers."""
    r = ifs.ratios
    a = ifs.translations
    # blocking pairs as parallel arrays: centers/radii/depths of both sides
    CA = ca[None, :]; RA = np.array([ra]); DA = np.array([0])
    CB = cb[None, :]; RB = np.array([rb]); DB = np.array([0])
    best = math.inf
    while CA.shape[0]:
        gap = np.linalg.norm(CA - CB, axis=1) - RA - RB - 2 * DELTA_GEO
        ok = gap > 0.0
        if np.any(ok):
            best = min(best, float(gap[ok].min()))
        blocked = ~ok
        if not np.any(blocked):
            return best
        CA, RA, DA = CA[blocked], RA[blocked], DA[blocked]
        CB, RB, DB = CB[blocked], RB[blocked], DB[blocked]
        expand_a = RA >= RB
        if np.any((np.where(expand_a, DA, DB)) >= depth_cap):
            return None
        parts = []
        for mask, swap in ((expand_a, False), (~expand_a, True)):
            if not np.any(mask):
                continue
            ca_, ra_, da_ = CA[mask], RA[mask], DA[mask]
            cb_, rb_, db_ = CB[mask], RB[mask], DB[mask]
            if swap:
                ca_, ra_, da_, cb_, rb_, db_ = cb_, rb_, db_, ca_, ra_, da_
            m = ca_.shape[0]
            kids_c = (r[None, :, None] * ca_[:, None, :]
                      + a[None, :, :]).reshape(m * len(r), -1)
            kids_r = (r[None, :] * ra_[:, None]).reshape(-1)
            kids_d = np.repeat(da_ + 1, len(r))
            ob_c = np.repeat(cb_, len(r), axis=0)
            ob_r = np.repeat(rb_, len(r))
            ob_d = np.repeat(db_, len(r))
            if swap:
                parts.append((ob_c, ob_r, ob_d, kids_c, kids_r, kids_d))
            else:
                parts.append((kids_c, kids_r, kids_d, ob_c, ob_r, ob_d))
        CA = np.concatenate([p[0] for p in parts])
        RA = np.concatenate([p[1] for p in parts])
        DA = np.concatenate([p[2] for p in parts])
        CB = np.concatenate([p[3] for p in parts])
        RB = np.concatenate([p[4] for p in parts])
        DB = np.concatenate([p[5] for p in parts])
    return best


def cylinders(ifs: IFS, max_diam: float,
              node_cap: int = DEFAULT_NODE_CAP) -> list[CylinderWord]:
    """Minimal prefix-free family of words with bounding-ball diameters
    <= max_diam, in lexicographic word order.  Weights sum to 1.
    """
    if max_diam <= 0.0:
        raise ValueError("max_diam must be positive")
    root = invariant_ball(ifs)
    s = similarity_dimension(ifs)
    weights = ifs.ratios ** s
    out: list[CylinderWord] = []
    # DFS with children pushed in reverse index order -> lexicographic pops
    stack: list[tuple[tuple[int, ...], float, np.ndarray, float]] = [
        ((), 1.0, np.zeros(ifs.dimension), 1.0)]
    nodes = 0
    while stack:
        word, ratio, trans, w = stack.pop()
        nodes += 1
        if nodes > node_cap:
            raise BudgetExceeded(f"cylinder enumeration exceeded {node_cap} nodes",
                                 nodes=nodes)
        if ratio * root.radius * 2.0 <= max_diam:
            out.append(CylinderWord(word, ratio, trans, w))
            continue
        for i in range(len(ifs) - 1, -1, -1):
            m = ifs.maps[i]
            stack.append((word + (i,), ratio * m.ratio,
                          ratio * m.translation + trans, w * weights[i]))
    return out


def cylinder_arrays(ifs: IFS, max_diam: float,
                    node_cap: int = DEFAULT_NODE_CAP
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized variant of :func:`cylinders`.

    Returns (ratios, translations, weights) arrays for the same prefix-free
    family, in breadth-first deterministic order.
    """
    if max_diam <= 0.0:
        raise ValueError("max_diam must be positive")
    root = invariant_ball(ifs)
    s = similarity_dimension(ifs)
    w_map = ifs.ratios ** s
    r_map = ifs.ratios
    a_map = ifs.translations

    ratios = np.array([1.0])
    trans = np.zeros((1, ifs.dimension))
    weights = np.array([1.0])
    done_r, done_t, done_w = [], [], []
    nodes = 0
    while ratios.size:
        nodes += ratios.size
        if nodes > node_cap:
            raise BudgetExceeded(f"cylinder enumeration exceeded {node_cap} nodes",
                                 nodes=nodes)
        small = ratios * root.radius * 2.0 <= max_diam
        if np.any(small):
            done_r.append(ratios[small])
            done_t.append(trans[small])
            done_w.append(weights[small])
        big = ~small
        m = int(big.sum())
        if m == 0:
            break
        ratios_b, trans_b, weights_b = ratios[big], trans[big], weights[big]
        ratios = (ratios_b[:, None] * r_map[None, :]).reshape(-1)
        trans = (ratios_b[:, None, None] * a_map[None, :, :]
                 + trans_b[:, None, :]).reshape(m * len(r_map), -1)
        weights = (weights_b[:, None] * w_map[None, :]).reshape(-1)
    return (np.concatenate(done_r), np.concatenate(done_t),
            np.concatenate(done_w))


def diameter_interval(ifs: IFS, tol: float = 1e-3,
                      node_cap: int = 200_000) -> tuple[float, float]:
    """Certified enclosure of the attractor diameter.

    Lower bound: diameter of composed-map fixed points (all lie in the
    attractor).  Upper bound: diameter of the cylinder bounding-ball union.
    Both tighten as the refinement scale shrinks; stops once the width
    reaches ``tol`` or the node budget is spent.
    """
    root = invariant_ball(ifs)
    if root.radius <= DELTA_GEO:
        return 0.0, 2.0 * root.radius
    hi = 2.0 * root.radius
    lo = 0.0
    scale = root.radius  # forces at least one refinement level
    for _ in range(24):
        try:
            ratios, trans, _ = cylinder_arrays(ifs, scale, node_cap=node_cap)
        except BudgetExceeded:
            break
        fixed = trans / (1.0 - ratios[:, None])
        lo = max(lo, _point_set_diameter(fixed))
        centers = ratios[:, None] * root.center[None, :] + trans
        max_r = float((ratios * root.radius).max())
        hi = min(hi, _point_set_diameter(centers) + 2.0 * max_r)
        if hi - lo <= tol:
            break
        scale *= 0.25
    return lo, max(hi, lo)


def _point_set_diameter(pts: np.ndarray) -> float:
    """Max pairwise distance, reducing to hull vertices when large."""
    m, d = pts.shape
    if m > 2048 and d >= 2:
        try:
            from scipy.spatial import ConvexHull, QhullError

            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            pass
    if d == 1:
        return float(pts.max() - pts.min())
    if pts.shape[0] > 8192:
        # chunk the pairwise pass to bound memory
        best = 0.0
        for i in range(0, pts.shape[0], 1024):
            chunk = pts[i:i + 1024]
            diff = chunk[:, None, :] - pts[None, :, :]
            best = max(best, float(np.sqrt((diff ** 2).sum(axis=2)).max()))
        return best
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=2)).max())
