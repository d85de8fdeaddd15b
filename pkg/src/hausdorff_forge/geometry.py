"""Exact low-dimensional convex geometry.

Candidate convex test sets (balls, axis-aligned cubes, finite-point hulls),
their diameters, conservative ball-vs-candidate classification, lattice
enumeration, and the isodiametric volume bound.

All comparisons carry a directed slack ``DELTA_GEO`` in the conservative
direction: a certified INSIDE/OUTSIDE answer is exactly true, STRADDLE is
always a safe fallback.  Everything here is immutable and pure.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import Union

import numpy as np

# Directed-rounding slack added to every comparison in the conservative
# direction; keeps certificates sound without full interval arithmetic.
DELTA_GEO = 1e-12


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Validate and return a point as a 1-d float array."""
    p = np.asarray(x, dtype=float)
    if p.ndim == 0:
        p = p.reshape(1)
    if p.ndim != 1:
        raise ValueError(f"point must be 1-d, got shape {p.shape}")
    if dim is not None and p.shape[0] != dim:
        raise ValueError(f"point has dimension {p.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(p)):
        raise ValueError("point coordinates must be finite")
    return p


class Classification(enum.Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    STRADDLE = "straddle"


@dataclass(frozen=True, eq=False)
class Ball:
    """Closed Euclidean ball."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not (self.radius >= 0.0 and math.isfinite(self.radius)):
            raise ValueError(f"radius must be finite and >= 0, got {self.radius}")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius


@dataclass(frozen=True, eq=False)
class AxisBox:
    """Axis-aligned cube: same half-width on every axis."""

    center: np.ndarray
    half_width: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not (self.half_width > 0.0 and math.isfinite(self.half_width)):
            raise ValueError(f"half_width must be finite and > 0, got {self.half_width}")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def diameter(self) -> float:
        # full diagonal of the cube
        return 2.0 * self.half_width * math.sqrt(self.dim)


@dataclass(frozen=True, eq=False)
class PointHull:
    """Convex hull of a nonempty finite point set.

    Membership and distance queries are decided from the vertex
    representation; in dimension >= 2 facet inequalities come from Qhull and
    answers within the slack band are demoted to STRADDLE.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValueError("vertices must be a nonempty (m, d) array")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertices must be finite")
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def diameter(self) -> float:
        v = self.vertices
        if v.shape[0] == 1:
            return 0.0
        diff = v[:, None, :] - v[None, :, :]
        return float(np.sqrt((diff ** 2).sum(axis=2)).max())

    @cached_property
    def _facets(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Normalized halfspace form (A, b) with hull = {x : A x + b <= 0}.

        None when the hull is degenerate (affinely dependent vertices) and
        Qhull cannot triangulate it; classification then falls back to
        distance certificates only.
        """
        if self.dim == 1 or self.vertices.shape[0] <= self.dim:
            return None
        try:
            from scipy.spatial import ConvexHull, QhullError

            hull = ConvexHull(self.vertices)
        except QhullError:
            return None
        eq = hull.equations  # rows [a, b] with a·x + b <= 0 inside
        norms = np.linalg.norm(eq[:, :-1], axis=1)
        return eq[:, :-1] / norms[:, None], eq[:, -1] / norms

    @cached_property
    def _interval(self) -> tuple[float, float]:
        """min/max for the 1-d case."""
        return float(self.vertices.min()), float(self.vertices.max())


ConvexCandidate = Union[Ball, AxisBox, PointHull]


def diameter(candidate: ConvexCandidate) -> float:
    """Diameter (sup of pairwise distances); exact for all three variants."""
    return candidate.diameter


def unit_ball_volume(d: int) -> float:
    """Lebesgue measure of the unit ball in R^d: pi^(d/2) / Gamma(d/2 + 1)."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def isodiametric_bound(diam: float, d: int) -> float:
    """Largest d-volume a set of the given diameter can have.

    Equality holds exactly for balls: vol(B(c, rho)) = bound(2*rho, d).
    """
    if diam < 0:
        raise ValueError("diameter must be >= 0")
    return unit_ball_volume(d) * 2.0 ** (-d) * diam ** d


def lattice_points(d: int, n: int) -> np.ndarray:
    """All points of Z^d/(2n) with Euclidean norm <= 1/2, as an (ell, d) array.

    Ordering: (-1/2, 0, ..., 0) first, (1/2, 0, ..., 0) second, the rest in
    lexicographic coordinate order.  Determinism of this ordering is what
    makes downstream outputs reproducible.
    """
    if d < 1 or n < 1:
        raise ValueError("d and n must be positive integers")
    rng = np.arange(-n, n + 1)
    if (2 * n + 1) ** d <= 20_000_000:
        grid = np.stack(np.meshgrid(*([rng] * d), indexing="ij"), axis=-1).reshape(-1, d)
        keep = (grid ** 2).sum(axis=1) <= n * n
        pts = grid[keep].astype(float) / (2 * n)
    else:
        rows = [k for k in product(rng, repeat=d) if sum(x * x for x in k) <= n * n]
        pts = np.array(rows, dtype=float) / (2 * n)

    first = np.zeros(d)
    first[0] = -0.5
    second = -first
    is_first = np.all(pts == first, axis=1)
    is_second = np.all(pts == second, axis=1)
    rest = pts[~(is_first | is_second)]
    # lexicographic by coordinates; lexsort keys are minor-to-major
    order = np.lexsort(tuple(rest[:, a] for a in range(d - 1, -1, -1)))
    return np.vstack([first, second, rest[order]])


def hull_distance_bounds(vertices: np.ndarray, p: np.ndarray,
                         iters: int = 60) -> tuple[float, float]:
    """Certified (lower, upper) bounds on dist(p, conv(vertices)).

    Upper bound: distance to the best feasible convex combination found by
    Frank-Wolfe iteration on min |V lam - p|^2 over the simplex.  Lower
    bound: the support-function certificate <u, p> - max_i <u, v_i> for the
    outward unit direction u of the current iterate, which is rigorous for
    any direction.
    """
    v = np.atleast_2d(np.asarray(vertices, dtype=float))
    p = np.asarray(p, dtype=float)
    d2 = ((v - p) ** 2).sum(axis=1)
    x = v[int(np.argmin(d2))].copy()
    lb = 0.0
    for _ in range(iters):
        g = x - p
        gn = float(np.linalg.norm(g))
        if gn <= DELTA_GEO:
            return 0.0, gn
        u = -g / gn  # unit direction from x toward p
        lb = max(lb, float(p @ u) - float((v @ u).max()))
        # Frank-Wolfe step toward the minimizing vertex
        i_star = int(np.argmin(v @ g))
        s = v[i_star]
        diff = x - s
        denom = float(diff @ diff)
        if denom <= 0.0:
            break
        gamma = min(1.0, max(0.0, float(diff @ (x - p)) / denom))
        if gamma <= 0.0:
            break
        x = x - gamma * diff
    ub = float(np.linalg.norm(x - p))
    return max(lb, 0.0), ub


def classify_balls(candidate: ConvexCandidate, centers: np.ndarray,
                   radii: np.ndarray, fw_cap: int = 256) -> np.ndarray:
    """Vectorized conservative classification of balls against a candidate.

    Returns an int8 array: 1 = ball inside candidate, -1 = disjoint,
    0 = straddle/undecided.  INSIDE and OUTSIDE answers are exactly true
    (slack DELTA_GEO absorbed in the conservative direction).
    """
    C = np.atleast_2d(np.asarray(centers, dtype=float))
    R = np.asarray(radii, dtype=float)
    out = np.zeros(C.shape[0], dtype=np.int8)

    if isinstance(candidate, Ball):
        dist = np.linalg.norm(C - candidate.center, axis=1)
        out[dist + R <= candidate.radius - DELTA_GEO] = 1
        out[dist - R >= candidate.radius + DELTA_GEO] = -1
        return out

    if isinstance(candidate, AxisBox):
        off = np.abs(C - candidate.center)
        h = candidate.half_width
        inside = (off.max(axis=1) + R) <= h - DELTA_GEO
        gap = np.sqrt((np.maximum(off - h, 0.0) ** 2).sum(axis=1))
        out[inside] = 1
        out[gap >= R + DELTA_GEO] = -1
        return out

    # PointHull
    if candidate.dim == 1:
        lo, hi = candidate._interval
        c = C[:, 0]
        out[(c - R >= lo + DELTA_GEO) & (c + R <= hi - DELTA_GEO)] = 1
        out[(c + R <= lo - DELTA_GEO) | (c - R >= hi + DELTA_GEO)] = -1
        return out

    facets = candidate._facets
    if facets is not None:
        A, b = facets
        signed = C @ A.T + b[None, :]  # (m, f) signed facet-plane distances
        worst = signed.max(axis=1)
        out[worst + R <= -DELTA_GEO] = 1
        out[worst - R >= DELTA_GEO] = -1
    else:
        worst = np.full(C.shape[0], -np.inf)

    # tighten undecided OUTSIDE answers with the Frank-Wolfe certificate;
    # the facet-plane bound is weak near corners
    undecided = np.nonzero(out == 0)[0]
    for idx in undecided[:fw_cap]:
        lb, _ = hull_distance_bounds(candidate.vertices, C[idx])
        if lb >= R[idx] + DELTA_GEO:
            out[idx] = -1
    return out


def classify_ball(candidate: ConvexCandidate, ball: Ball) -> Classification:
    """Conservative relation of a single ball to a convex candidate."""
    if candidate.dim != ball.dim:
        raise ValueError("candidate and ball must share a dimension")
    code = classify_balls(candidate, ball.center[None, :], np.array([ball.radius]))[0]
    if code == 1:
        return Classification.INSIDE
    if code == -1:
        return Classification.OUTSIDE
    return Classification.STRADDLE
