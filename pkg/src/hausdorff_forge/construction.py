"""Generator for the one-parameter lattice family of self-similar sets.

Given an ambient dimension d, a target dimension s in (0,d) and a gap
eps in (0,1), pick the smallest lattice density n passing two inequalities
(the cube-counting envelope staying below 1+eps, and the collapsed-cluster
ratio exceeding 1/eps), enumerate the lattice ball F, and produce the family
t -> Phi_t of ell homotheties with common ratio r = ell^(-1/s) whose
attractors interpolate between a nearly-full and a nearly-null s-measure,
all with diameter exactly 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .density import Budget, ratio_bound_max
from .errors import BudgetExceeded, IterationCapExceeded
from .geometry import AxisBox, Ball, unit_ball_volume, lattice_points
from .ifs import (IFS, Similitude, check_ssc, diameter_interval,
                  similarity_dimension)
from .measure import NaturalMeasure, measure_of


def check_ratio_bound(n: int, d: int, s: float, eps: float) -> bool:
    """True iff the cube-counting envelope stays below 1+eps on [1/(4n), 1]."""
    return ratio_bound_max(n, d, s) < 1.0 + eps


def check_collapse_gain(n: int, d: int, s: float, eps: float) -> bool:
    """True iff (omega_d (n - sqrt(d)/2)^d - 2) / (8n+4)^s > 1/eps.

    This is what guarantees the collapsed cluster at t=1 has density ratio
    above 1/eps once the lattice count bound kicks in.
    """
    sd = math.sqrt(d)
    if n <= sd / 2.0:
        raise ValueError(f"n={n} must exceed sqrt(d)/2={sd / 2.0}")
    lhs = (unit_ball_volume(d) * (n - sd / 2.0) ** d - 2.0) / (8 * n + 4) ** s
    return lhs > 1.0 / eps


def _log_scale_check(n: int, ell: int, s: float, eps: float) -> bool:
    """(8n+4) * ell^(-1/s) < eps^(1/s), compared in log space to dodge
    underflow when r is tiny and s small."""
    return s * math.log(8 * n + 4) - math.log(ell) < math.log(eps)


def choose_n(d: int, s: float, eps: float, n_cap: int = 10_000_000) -> int:
    """Smallest lattice density passing both inequalities.

    Also re-verifies the scale bound (8n+4) * r < eps^(1/s) with the actual
    lattice count (guaranteed by the two checks, but cheap to confirm).
    """
    if not (0.0 < s < d):
        raise ValueError(f"s must lie in (0, d), got s={s}, d={d}")
    if not (0.0 < eps < 1.0):
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    n = max(1, int(math.sqrt(d) / 2.0) + 1)
    while n <= n_cap:
        if check_ratio_bound(n, d, s, eps) and check_collapse_gain(n, d, s, eps):
            ell = lattice_points(d, n).shape[0]
            if not _log_scale_check(n, ell, s, eps):
                raise AssertionError(
                    f"scale bound failed at n={n} despite passing checks")
            return n
        n += 1
    raise IterationCapExceeded(
        f"no lattice density n <= {n_cap} satisfies the inequalities for "
        f"d={d}, s={s}, eps={eps}")


@dataclass(frozen=True, eq=False)
class ConstructionParams:
    """Everything the family needs: lattice, counts, ratio, and provenance.

    ``rigorous`` is False for forced sub-minimal n; the inequality
    invariants are then not enforced and downstream certificates that rely
    on them refuse to run.
    """

    d: int
    s: float
    eps: float
    n: int
    F: np.ndarray
    ell: int
    r: float
    rigorous: bool = True

    def __post_init__(self):
        F = np.asarray(self.F, dtype=float)
        object.__setattr__(self, "F", F)
        if F.shape != (self.ell, self.d):
            raise ValueError("lattice array shape must be (ell, d)")
        b1 = np.zeros(self.d); b1[0] = -0.5
        if not (np.array_equal(F[0], b1) and np.array_equal(F[1], -b1)):
            raise ValueError("lattice must start with (-1/2,0,...), (1/2,0,...)")
        if abs(self.r * self.ell ** (1.0 / self.s) - 1.0) > 1e-14 * 4:
            raise ValueError("r must equal ell^(-1/s)")
        if self.rigorous:
            if not _log_scale_check(self.n, self.ell, self.s, self.eps):
                raise ValueError("scale bound (8n+4)r < eps^(1/s) fails")
            if 8 * self.n * self.r >= 1.0:
                raise ValueError("8nr < 1 fails")
            if not check_ratio_bound(self.n, self.d, self.s, self.eps):
                raise ValueError("cube-counting envelope check fails")
            if not check_collapse_gain(self.n, self.d, self.s, self.eps):
                raise ValueError("collapse gain check fails")
            bound = unit_ball_volume(self.d) * (self.n - math.sqrt(self.d) / 2.0) ** self.d
            if self.ell < bound:
                raise ValueError("lattice count fell below the volume bound")

    def to_dict(self) -> dict:
        return {"d": self.d, "s": self.s, "eps": self.eps, "n": self.n,
                "ell": self.ell, "r": self.r, "rigorous": self.rigorous,
                "F": self.F.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "ConstructionParams":
        return cls(d=int(data["d"]), s=float(data["s"]), eps=float(data["eps"]),
                   n=int(data["n"]), F=np.asarray(data["F"], dtype=float),
                   ell=int(data["ell"]), r=float(data["r"]),
                   rigorous=bool(data.get("rigorous", True)))


def construct_family(d: int, s: float, eps: float,
                     force_n: int | None = None) -> ConstructionParams:
    """Build parameters with the minimal passing n, or a forced sub-minimal
    n with the rigor flag downgraded when any inequality fails."""
    if not (0.0 < s < d):
        raise ValueError(f"s must lie in (0, d), got s={s}, d={d}")
    if not (0.0 < eps < 1.0):
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if force_n is None:
        n = choose_n(d, s, eps)
        rigorous = True
    else:
        n = int(force_n)
        if n < 1 or n <= math.sqrt(d) / 2.0:
            raise ValueError(f"forced n={n} is degenerate for d={d}")
        rigorous = True
    F = lattice_points(d, n)
    ell = F.shape[0]
    r = ell ** (-1.0 / s)
    if force_n is not None:
        rigorous = (_log_scale_check(n, ell, s, eps) and 8 * n * r < 1.0
                    and check_ratio_bound(n, d, s, eps)
                    and check_collapse_gain(n, d, s, eps))
    return ConstructionParams(d=d, s=s, eps=eps, n=n, F=F, ell=ell, r=r,
                              rigorous=rigorous)


def ifs_at(params: ConstructionParams, t: float) -> IFS:
    """The family member at parameter t: common ratio r, the two anchor maps
    fixed at (-1/2,0,..) and (1/2,0,..), the rest translated by
    (1-r) * (8nr)^t * b_i."""
    if not (0.0 <= t <= 1.0):
        raise ValueError(f"t must lie in [0,1], got {t}")
    r = params.r
    shrink = (8.0 * params.n * r) ** t
    trans = (1.0 - r) * params.F.copy()
    trans[2:] *= shrink
    maps = tuple(Similitude(r, a) for a in trans)
    return IFS(dimension=params.d, maps=maps)


@dataclass(frozen=True)
class CheckResult:
    name: str
    t: float | None
    passed: bool
    detail: str


@dataclass
class FamilyReport:
    checks: list[CheckResult] = field(default_factory=list)

    def add(self, name: str, t: float | None, passed: bool, detail: str = ""):
        self.checks.append(CheckResult(name, t, passed, detail))

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]


def verify_family(params: ConstructionParams,
                  t_samples: Sequence[float] = (0.0, 0.5, 1.0),
                  cube_sample: int = 10, seed: int = 0,
                  diam_tol: float = 1e-3) -> FamilyReport:
    """Numerically confirm the family's claimed properties at sampled t.

    Per t: separation certified, similarity dimension equals s, diameter
    encloses 1.  At t=0 additionally the cube mass identity
    mu(Q(b_i, 1/(4n))) = 1/ell on a sample of indices; at t=1 the collapsed
    cluster ball has certified density ratio above 1/eps.
    """
    report = FamilyReport()
    n, r, ell, s = params.n, params.r, params.ell, params.s
    report.add("scale", None, 8 * n * r < 1.0, f"8nr = {8 * n * r:.6g}")

    for t in t_samples:
        ifs = ifs_at(params, t)
        trans = ifs.translations

        # first-level images of B(0,1/2) stay inside and pairwise apart
        reach = float(np.linalg.norm(trans, axis=1).max()) + r * 0.5
        report.add("images_inside", t, reach <= 0.5 + 1e-12,
                   f"max reach {reach:.12g}")
        gap = _min_translation_gap(params, t) - r
        report.add("images_disjoint", t, gap > 0.0, f"worst gap {gap:.6g}")

        delta = check_ssc(ifs)
        report.add("ssc", t, delta is not None and delta > 0.0,
                   f"delta = {delta}")
        sdim = similarity_dimension(ifs)
        report.add("dimension", t, abs(sdim - s) <= 1e-10,
                   f"|s - {sdim}| = {abs(sdim - s):.3g}")
        lo, hi = diameter_interval(ifs, tol=diam_tol)
        report.add("diameter", t,
                   lo <= 1.0 <= hi and hi - lo <= diam_tol,
                   f"[{lo:.9f}, {hi:.9f}]")

    if 0.0 in t_samples:
        ifs0 = ifs_at(params, 0.0)
        nat = NaturalMeasure.for_ifs(ifs0)
        rng = np.random.default_rng(seed)
        k = min(ell, max(cube_sample, 10))
        idx = rng.choice(ell, size=k, replace=False) if k < ell else np.arange(ell)
        target = 1.0 / ell
        worst = 0.0
        ok = True
        for i in sorted(int(v) for v in idx):
            try:
                mi = measure_of(AxisBox(params.F[i], 1.0 / (4 * n)), nat, tol=1e-6)
            except BudgetExceeded as exc:
                ok = False
                worst = math.inf
                break
            ok &= mi.lo <= target <= mi.hi
            worst = max(worst, abs(mi.lo - target), abs(mi.hi - target))
        report.add("cube_mass", 0.0, ok, f"worst deviation {worst:.3g}")

    if 1.0 in t_samples:
        exact = (ell - 2) / (8 * n + 2) ** s
        report.add("collapse_ratio", 1.0, exact > 1.0 / params.eps,
                   f"(ell-2)/(8n+2)^s = {exact:.6g} vs 1/eps = {1 / params.eps:.6g}")
        ifs1 = ifs_at(params, 1.0)
        nat1 = NaturalMeasure.for_ifs(ifs1)
        try:
            mi = measure_of(Ball(np.zeros(params.d), (4 * n + 1) * r), nat1,
                            tol=1e-6)
            inner = (ell - 2) / ell
            report.add("collapse_mass", 1.0, mi.lo <= inner <= mi.hi,
                       f"mu(V) in [{mi.lo:.9f}, {mi.hi:.9f}], expect {inner:.9f}")
        except BudgetExceeded:
            report.add("collapse_mass", 1.0, False, "measure budget exhausted")
    return report


def _min_translation_gap(params: ConstructionParams, t: float) -> float:
    """Minimum pairwise distance among the family's translations at t,
    using the lattice structure to avoid the quadratic pass."""
    r = params.r
    shrink = (8.0 * params.n * r) ** t
    inner = (1.0 - r) * shrink * params.F[2:]
    gaps = [(1.0 - r)]  # the two anchors are 1 apart
    if inner.shape[0]:
        # inner block is a scaled lattice: min spacing is scale/(2n)
        gaps.append((1.0 - r) * shrink / (2.0 * params.n))
        for anchor in (params.F[0], params.F[1]):
            a = (1.0 - r) * anchor
            gaps.append(float(np.linalg.norm(inner - a, axis=1).min()))
    return min(gaps)
