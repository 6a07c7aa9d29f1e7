"""The weighted minimal energy problem: minimizer, equilibrium constant,
characterization check and the representation through balayage."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .balayage import sweep
from .equilibrium import _as_index, robin_capacity
from .geometry import IndexSet
from .kernels import KernelMatrix
from .measures import (
    DiscreteMeasure,
    ExternalField,
    MeasureError,
    energy,
    energy_distance,
    field_values,
    gauss_functional,
)
from .qp import DEFAULT_TOL, QPError, solve_simplex_qp

__all__ = [
    "GaussReport",
    "CharacterizationResult",
    "BatteryRecord",
    "ScreenError",
    "solve_gauss",
    "equilibrium_constant",
    "verify_characterization",
    "representation_solution",
    "minimality_battery",
]


class ScreenError(RuntimeError):
    """A discrete maximum-principle screen needed by an operation failed."""


@dataclass(frozen=True, eq=False)
class GaussReport:
    """Solution of the weighted problem on ``A``.

    ``c_f`` is ``int U_f^lambda d lambda``; ``c_f_alt`` is ``w_f - int f d lambda``.
    ``eta``, ``representation_gap`` and ``screens`` are filled only by
    :func:`representation_solution`.
    """

    A: IndexSet
    minimizer: DiscreteMeasure
    w_f: float
    c_f: float
    c_f_alt: float
    kkt_residual: float
    status: str
    eta: float | None = None
    representation_gap: float | None = None
    screens: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "set_size": len(self.A),
            "minimizer": self.minimizer.weights.tolist(),
            "w_f": self.w_f,
            "c_f": self.c_f,
            "c_f_alt": self.c_f_alt,
            "kkt_residual": self.kkt_residual,
            "status": self.status,
            "eta": self.eta,
            "representation_gap": self.representation_gap,
            "screens": dict(self.screens),
        }
        d.update(self.extra)
        return d


def _field(K: KernelMatrix, f) -> np.ndarray:
    if isinstance(f, ExternalField):
        return field_values(f, K)
    if f is None:
        return np.zeros(K.size)
    f = np.asarray(f, dtype=float)
    if f.shape != (K.size,):
        raise MeasureError("field must have one value per carrier point")
    if np.any(np.isnan(f)) or np.any(f == -np.inf):
        raise MeasureError("field must take values in (-inf, +inf]")
    return f


def _finite_dot(f, w) -> float:
    nz = w != 0
    return float(f[nz] @ w[nz])


def equilibrium_constant(K: KernelMatrix, f, lam) -> float:
    """``c = int U_f^lambda d lambda = lambda'(K lambda + f)``."""
    f = _field(K, f)
    w = lam.weights if isinstance(lam, DiscreteMeasure) else np.asarray(lam, dtype=float)
    if np.any(w < 0):
        raise MeasureError("lambda must be a positive measure")
    return float(w @ (K.entries @ w)) + _finite_dot(f, w)


def solve_gauss(K: KernelMatrix, f=None, A=None, tol: float = DEFAULT_TOL, *, x0=None) -> GaussReport:
    """Minimize ``I_f(mu) = ||mu||^2 + 2 int f d mu`` over probability measures on ``A``.

    Raises :class:`~minenergy.qp.InfeasibleError` when ``f = +inf`` on all of ``A``.
    """
    A = _as_index(K, A)
    fv = _field(K, f)
    sol = solve_simplex_qp(K.entries, fv, A, tol, x0=x0)
    lam = sol.weights
    w_f = gauss_functional(K, fv, lam)
    c_f = equilibrium_constant(K, fv, lam)
    return GaussReport(
        A=A,
        minimizer=DiscreteMeasure(lam, K.carrier),
        w_f=w_f,
        c_f=c_f,
        c_f_alt=w_f - _finite_dot(fv, lam),
        kkt_residual=sol.kkt_residual,
        status=sol.status,
    )


@dataclass(frozen=True)
class CharacterizationResult:
    """Both characteristic inequalities for a candidate measure.

    residual_1 : ``max_A (c1 - U_f^mu)^+`` with ``c1 = int U_f^mu d mu``.
    residual_2 : ``max_{supp mu} (U_f^mu - c2)^+`` with ``c2 = w_f(A) - int f d mu``.
    """

    passed: bool
    residual: float
    residual_1: float
    residual_2: float
    c1: float
    c2: float
    admissible: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verify_characterization(K: KernelMatrix, f, A, mu, tol: float = 1e-6, *,
                            w_f: float | None = None) -> CharacterizationResult:
    """Check whether ``mu`` is the weighted minimizer on ``A``.

    ``mu`` passes when it is admissible and either characteristic inequality
    holds within ``tol``.  The second inequality needs the extremal value
    ``w_f(A)``; it is computed when not supplied.
    """
    A = _as_index(K, A)
    fv = _field(K, f)
    w = mu.weights if isinstance(mu, DiscreteMeasure) else np.asarray(mu, dtype=float)
    supp = w > 0
    on = A.indices
    admissible = bool(
        np.all(w >= 0)
        and abs(w.sum() - 1.0) <= 1e-12 * max(1.0, w.size ** 0.5)
        and not np.any(w[~A.mask()] != 0)
        and np.all(np.isfinite(fv[supp]))
    )
    if not admissible:
        return CharacterizationResult(False, np.inf, np.inf, np.inf, np.nan, np.nan, False)
    U = K.entries @ w + fv
    c1 = float(w[supp] @ U[supp])
    if w_f is None:
        w_f = solve_gauss(K, fv, A).w_f
    c2 = w_f - _finite_dot(fv, w)
    r1 = float(np.max(c1 - U[on], initial=0.0))
    r2 = float(np.max(U[supp] - c2, initial=0.0))
    res = min(r1, r2)
    return CharacterizationResult(res <= tol, res, r1, r2, c1, c2, True)


def representation_solution(K: KernelMatrix, zeta, A, tol: float = DEFAULT_TOL) -> GaussReport:
    """Solve the problem for ``f = -U^zeta`` both directly and through
    ``omega = zeta^A + eta * gamma_A`` with ``eta = (1 - zeta^A(X)) / cap(A)``.

    The two routes must agree when the Frostman screen for ``A`` and the
    domination screen for ``zeta`` both hold; otherwise the gap is only
    reported.
    """
    A = _as_index(K, A)
    z = zeta.weights if isinstance(zeta, DiscreteMeasure) else np.asarray(zeta, dtype=float)
    if np.any(z < 0):
        raise MeasureError("zeta must be a positive measure")
    if z.sum() > 1 + 1e-12:
        raise MeasureError(f"zeta must have total mass <= 1, got {z.sum()}")
    f = -(K.entries @ z)
    direct = solve_gauss(K, f, A, tol)
    bal = sweep(K, z, A, tol)
    cap = robin_capacity(K, A, tol)
    eta = (1.0 - bal.mass_out) / cap.capacity
    omega = bal.swept.weights + eta * cap.capacitary.weights
    gap = energy_distance(K, omega, direct.minimizer)
    screens = {"frostman": cap.frostman_screen, "domination": bal.domination_screen}
    lower = -energy(K, z)
    if direct.w_f < lower - 1e-10 * max(1.0, abs(lower)):
        raise QPError(f"w_f = {direct.w_f} is below the lower bound -||zeta||^2 = {lower}")
    return GaussReport(
        A=A,
        minimizer=direct.minimizer,
        w_f=direct.w_f,
        c_f=direct.c_f,
        c_f_alt=direct.c_f_alt,
        kkt_residual=direct.kkt_residual,
        status=direct.status,
        eta=float(eta),
        representation_gap=gap,
        screens=screens,
        extra={
            "representation": omega.tolist(),
            "swept_mass": bal.mass_out,
            "capacity": cap.capacity,
            "eta_gap": abs(direct.c_f - eta),
        },
    )


@dataclass(frozen=True)
class BatteryRecord:
    """Counts and worst excesses of the three minimality properties over the samples."""

    trials: int
    norm_violations: int
    potential_violations: int
    mass_violations: int
    max_norm_excess: float
    max_potential_excess: float
    max_mass_excess: float
    families: dict

    @property
    def violations(self) -> int:
        return self.norm_violations + self.potential_violations + self.mass_violations

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["violations"] = self.violations
        return d


def minimality_battery(K: KernelMatrix, zeta, A, report: GaussReport, trials: int = 50,
                       seed: int = 0, tol: float = 1e-8) -> BatteryRecord:
    """Compare the minimizer against random members of
    ``Lambda = {mu >= 0 : U^mu - U^zeta >= eta on A}``.

    Samples rotate through three constructions: the minimizer plus a random
    positive measure, a scaled-up minimizer plus a sparse random measure, and
    ``zeta + eta * gamma_A`` plus a random measure.  Every sample is checked
    for membership before use.  Refuses to run unless both screens of
    ``report`` hold.
    """
    if report.eta is None or not report.screens:
        raise ScreenError("battery needs a report from representation_solution")
    if not all(report.screens.values()):
        raise ScreenError(f"maximum-principle screens failed: {report.screens}")
    A = _as_index(K, A)
    z = zeta.weights if isinstance(zeta, DiscreteMeasure) else np.asarray(zeta, dtype=float)
    Kx = K.entries
    lam = report.minimizer.weights
    eta = report.eta
    floor = Kx[A.indices] @ z + eta
    cap = robin_capacity(K, A)
    base3 = z + eta * cap.capacitary.weights

    U_lam = Kx @ lam
    n_lam = float(np.sqrt(max(lam @ U_lam, 0.0)))
    m_lam = float(lam.sum())
    rng = np.random.default_rng(seed)
    counts = {"perturbed": 0, "scaled": 0, "zeta-plus-capacitary": 0}
    nv = pv = mv = 0
    ne = pe = me = -np.inf
    for k in range(trials):
        fam = k % 3
        if fam == 0:
            mu = lam + rng.uniform(0.0, 0.1) * rng.dirichlet(np.ones(K.size))
            counts["perturbed"] += 1
        elif fam == 1:
            extra = np.zeros(K.size)
            pick = rng.choice(K.size, size=min(5, K.size), replace=False)
            extra[pick] = rng.uniform(0.0, 0.05, size=pick.size)
            mu = (1.0 + rng.uniform(0.0, 0.2)) * lam + extra
            counts["scaled"] += 1
        else:
            mu = base3 + rng.uniform(0.0, 0.05) * rng.dirichlet(np.ones(K.size))
            counts["zeta-plus-capacitary"] += 1
        U_mu = Kx @ mu
        if np.any(U_mu[A.indices] < floor - tol):
            raise ScreenError("constructed sample left the class; screens are inconsistent")
        d_norm = n_lam - float(np.sqrt(max(mu @ U_mu, 0.0)))
        d_pot = float(np.max(U_lam - U_mu))
        d_mass = m_lam - float(mu.sum())
        nv += d_norm > tol
        pv += d_pot > tol
        mv += d_mass > tol
        ne, pe, me = max(ne, d_norm), max(pe, d_pot), max(me, d_mass)
    return BatteryRecord(trials, int(nv), int(pv), int(mv), float(ne), float(pe), float(me), counts)
