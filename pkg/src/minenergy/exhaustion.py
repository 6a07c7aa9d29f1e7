"""Exhaustion of a set by nested subsets, the thinness-at-infinity series and
mass-deficiency trends over growing truncations."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .balayage import sweep
from .equilibrium import _as_index, robin_capacity
from .gauss import GaussReport, _field, representation_solution, solve_gauss
from .geometry import ExhaustionChain, IndexSet, PointSet, annuli_partition
from .kernels import KernelError, KernelMatrix
from .measures import DiscreteMeasure, ExternalField, energy_distance
from .qp import DEFAULT_TOL, InfeasibleError

__all__ = [
    "StageRecord",
    "ExhaustionReport",
    "SeriesRecord",
    "DeficiencyRecord",
    "SERIES_COLUMNS",
    "THETA_FLOOR",
    "THETA_RATIO",
    "run_exhaustion",
    "thinness_series",
    "classify_series",
    "mass_deficiency_experiment",
    "geometric_limit",
]

SERIES_COLUMNS = ("stage", "size", "w_f", "c_f", "cap", "sweep_mass", "eta", "dist_to_final")

# Frozen classification thresholds.  THETA_FLOOR is half the median term of
# the reference F1 truncation: power profile, s=1, x1 in [1, 64], 3072 points
# in 3-point rings with radius spacing, Newtonian kernel in R^3, q=2.
# THETA_RATIO separates the slow decay of non-thin terms from geometric decay.
THETA_FLOOR = 0.07998682608490912
THETA_RATIO = 0.75


@dataclass(frozen=True)
class StageRecord:
    stage: int
    size: int
    w_f: float
    c_f: float
    cap: float
    sweep_mass: float | None
    eta: float | None
    dist_to_final: float
    frostman_screen: bool
    domination_screen: bool | None

    def row(self) -> tuple:
        return tuple(getattr(self, c) for c in SERIES_COLUMNS)


@dataclass(frozen=True, eq=False)
class ExhaustionReport:
    """Per-stage values along a nested chain and the final-stage solution.

    ``flags`` holds the unconditional exact monotonicity results and the
    screened ones (``c_f`` and ``sweep_mass``), each with whether its screens
    passed at every stage.
    """

    stages: list
    final: GaussReport | None
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "stages": [s.__dict__ for s in self.stages],
            "final": None if self.final is None else self.final.to_dict(),
            "flags": dict(self.flags),
        }

    def rows(self) -> list[tuple]:
        return [s.row() for s in self.stages]


def _nonincreasing(x) -> bool:
    x = np.asarray(x, dtype=float)
    return bool(np.all(x[1:] <= x[:-1]))


def run_exhaustion(K: KernelMatrix, f, chain: ExhaustionChain, tol: float = DEFAULT_TOL) -> ExhaustionReport:
    """Solve the weighted problem on every stage of ``chain``.

    Each stage is warm-started from the previous minimizer, which remains
    admissible, so ``w_f`` is nonincreasing and ``cap`` nondecreasing exactly.
    A stage where ``f = +inf`` everywhere records ``w_f = +inf``.
    For ``f = -U^zeta`` the swept mass of ``zeta`` and ``eta`` are recorded too.
    """
    fv = _field(K, f)
    zeta = f.zeta if isinstance(f, ExternalField) and f.form == "minus-potential" else None
    sols: list[GaussReport | None] = []
    caps = []
    x_lam = x_cap = None
    for stage in chain.stages:
        try:
            rep = solve_gauss(K, fv, stage, tol, x0=x_lam)
            x_lam = rep.minimizer.weights
        except InfeasibleError:
            rep = None
        cap = robin_capacity(K, stage, tol, x0=x_cap)
        x_cap = cap.equilibrium.weights
        sols.append(rep)
        caps.append(cap)

    final = sols[-1]
    stages = []
    for j, (stage, rep, cap) in enumerate(zip(chain.stages, sols, caps)):
        sm = eta = dom = None
        if zeta is not None:
            bal = sweep(K, zeta, stage, tol)
            sm = bal.mass_out
            eta = (1.0 - sm) / cap.capacity
            dom = bal.domination_screen
        if rep is None or final is None:
            dist = math.nan if j < len(sols) - 1 or rep is None else 0.0
        else:
            dist = energy_distance(K, rep.minimizer, final.minimizer)
        stages.append(StageRecord(
            stage=j,
            size=len(stage),
            w_f=math.inf if rep is None else rep.w_f,
            c_f=math.nan if rep is None else rep.c_f,
            cap=cap.capacity,
            sweep_mass=sm,
            eta=eta,
            dist_to_final=dist,
            frostman_screen=cap.frostman_screen,
            domination_screen=dom,
        ))

    w = [s.w_f for s in stages]
    c = [s.cap for s in stages]
    if not _nonincreasing(w):
        raise AssertionError(f"w_f increased along a nested chain: {w}")
    if not _nonincreasing(-np.asarray(c)):
        raise AssertionError(f"capacity decreased along a nested chain: {c}")
    if final is not None and stages[-1].dist_to_final != 0.0:
        raise AssertionError("last stage is not at distance 0 from itself")

    screened = all(s.frostman_screen for s in stages) and all(s.domination_screen is not False for s in stages)
    finite = [s for s in stages if math.isfinite(s.w_f)]
    tail = [s.dist_to_final for s in finite[-3:]]
    # strong convexity: ||lambda_K - lambda_A||^2 <= w_f(K) - w_f(A)
    bound_ok = all(
        s.dist_to_final ** 2 <= s.w_f - finite[-1].w_f + 10 * tol * max(1.0, abs(s.w_f))
        for s in finite
    ) if finite else True
    flags = {
        "w_f_nonincreasing": True,
        "cap_nondecreasing": True,
        "final_distance_zero": final is not None,
        "distance_tail_nonincreasing": _nonincreasing(tail),
        "distance_energy_bound": bool(bound_ok),
        "screens_all_stages": bool(screened),
        "c_f_nonincreasing": _nonincreasing([s.c_f for s in finite]),
    }
    if zeta is not None:
        flags["sweep_mass_nondecreasing"] = _nonincreasing([-s.sweep_mass for s in stages])
    return ExhaustionReport(stages, final, flags)


@dataclass(frozen=True)
class SeriesRecord:
    """Annular blocks, their capacities and the terms ``cap(A_k) / q**(k (n - alpha))``."""

    q: float
    shells: list
    sizes: list
    capacities: list
    terms: list
    partial_sums: list
    ratios: list
    classification: str
    theta_floor: float
    theta_ratio: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def classify_series(terms, theta_floor: float = THETA_FLOOR, theta_ratio: float = THETA_RATIO) -> str:
    """Trend label for a finite series.

    ``"divergent-trend"`` when every term of the last third is at least
    ``theta_floor``; ``"convergent-trend"`` when every consecutive ratio in the
    last third is at most ``theta_ratio``; otherwise ``"indeterminate"``.
    Fewer than two terms give ``"insufficient-data"``.
    """
    t = np.asarray(terms, dtype=float)
    if t.size < 2:
        return "insufficient-data"
    m = max(2, math.ceil(t.size / 3))
    tail = t[-m:]
    if theta_floor > 0 and tail.min() >= theta_floor:
        return "divergent-trend"
    if np.all(tail[1:] <= theta_ratio * tail[:-1]):
        return "convergent-trend"
    return "indeterminate"


def thinness_series(K: KernelMatrix, A=None, q: float = 2.0, *, origin=None,
                    theta_floor: float = THETA_FLOOR, theta_ratio: float = THETA_RATIO,
                    tol: float = DEFAULT_TOL) -> SeriesRecord:
    """Wiener-type series over the annular blocks of ``A``.

    Needs a Riesz kernel matrix assembled on a point set.
    """
    spec = K.spec
    if spec.kind != "riesz" or K.carrier is None:
        raise KernelError("thinness series needs a Riesz kernel matrix on a point set")
    A = _as_index(K, A)
    if len(A) == 0:
        raise ValueError("A is empty")
    sub = PointSet(K.carrier.points[A.indices], min_separation=0.0)
    blocks = annuli_partition(sub, q, origin)
    shells, sizes, caps, terms = [], [], [], []
    p = spec.dim - spec.alpha
    for k, blk in blocks.items():
        idx = IndexSet(A.indices[blk.indices], K.size)
        cap = robin_capacity(K, idx, tol).capacity
        shells.append(int(k))
        sizes.append(len(idx))
        caps.append(cap)
        terms.append(cap / q ** (k * p))
    return SeriesRecord(
        q=float(q),
        shells=shells,
        sizes=sizes,
        capacities=caps,
        terms=terms,
        partial_sums=np.cumsum(terms).tolist(),
        ratios=[b / a if a > 0 else math.nan for a, b in zip(terms[:-1], terms[1:])],
        classification=classify_series(terms, theta_floor, theta_ratio),
        theta_floor=float(theta_floor),
        theta_ratio=float(theta_ratio),
    )


def geometric_limit(values) -> float:
    """Limit of a sequence extrapolated from its last two increments as a geometric tail."""
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        return float(v[-1]) if v.size else math.nan
    d1, d2 = v[-2] - v[-3], v[-1] - v[-2]
    if d1 == 0 or d2 == 0:
        return float(v[-1])
    r = d2 / d1
    if not 0 < r < 1:
        return math.nan
    return float(v[-1] + d2 * r / (1 - r))


@dataclass(frozen=True)
class DeficiencyRecord:
    """Representation-route quantities per truncation and their trend."""

    truncations: list
    sizes: list
    sweep_mass: list
    eta: list
    c_f: list
    dist_minimizer_sweep: list
    representation_gap: list
    screens: list
    fitted_limit: float
    increments: list

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def mass_deficiency_experiment(K: KernelMatrix, zeta, truncations, labels=None,
                               tol: float = DEFAULT_TOL) -> DeficiencyRecord:
    """Run the representation route on each set of ``truncations``.

    ``truncations`` is a sequence of nested index sets of one carrier (for
    example the points of a body of revolution with ``x1 <= L``), so that
    every stage shares the same diagonal entries.
    """
    z = zeta.weights if isinstance(zeta, DiscreteMeasure) else np.asarray(zeta, dtype=float)
    labels = list(range(len(truncations))) if labels is None else list(labels)
    out = {k: [] for k in ("sizes", "sweep_mass", "eta", "c_f", "dist", "gap", "screens")}
    for T in truncations:
        T = _as_index(K, T)
        rep = representation_solution(K, z, T, tol)
        swept = sweep(K, z, T, tol).swept
        out["sizes"].append(len(T))
        out["sweep_mass"].append(rep.extra["swept_mass"])
        out["eta"].append(rep.eta)
        out["c_f"].append(rep.c_f)
        out["dist"].append(energy_distance(K, rep.minimizer, swept))
        out["gap"].append(rep.representation_gap)
        out["screens"].append(dict(rep.screens))
    sm = out["sweep_mass"]
    return DeficiencyRecord(
        truncations=labels,
        sizes=out["sizes"],
        sweep_mass=sm,
        eta=out["eta"],
        c_f=out["c_f"],
        dist_minimizer_sweep=out["dist"],
        representation_gap=out["gap"],
        screens=out["screens"],
        fitted_limit=geometric_limit(sm),
        increments=np.diff(sm).tolist(),
    )
