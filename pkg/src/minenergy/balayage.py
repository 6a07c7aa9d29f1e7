"""Inner balayage onto a finite set as an energy-norm projection onto a cone."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equilibrium import _as_index, _nonnegative, frostman_screen, screen_solution
from .geometry import IndexSet
from .kernels import KernelMatrix
from .measures import DiscreteMeasure, energy_distance, potential
from .qp import DEFAULT_TOL, QPError, solve_cone_projection, solve_obstacle_qp

__all__ = [
    "BalayageReport",
    "BalayageProperties",
    "domination_screen",
    "sweep",
    "sweep_min_norm",
    "verify_balayage_props",
]


def _weights(mu) -> np.ndarray:
    return mu.weights if isinstance(mu, DiscreteMeasure) else np.asarray(mu, dtype=float)


def domination_screen(K: KernelMatrix, mu, A) -> bool:
    """True when ``K_AA x = (K mu)|_A`` has a nonnegative solution.

    The swept measure then reproduces ``U^mu`` on all of ``A``.
    """
    A = _as_index(K, A)
    rhs = (K.entries @ _weights(mu))[A.indices]
    return _nonnegative(screen_solution(K, A, rhs))


@dataclass(frozen=True, eq=False)
class BalayageReport:
    """Swept measure ``mu^A`` with its residuals.

    equality_residual_on_A : worst of ``|U^{mu^A} - U^mu|`` on the support of
        ``mu^A`` and ``(U^mu - U^{mu^A})^+`` on ``A``.
    domination_residual : ``max (U^{mu^A} - U^mu)^+`` over the whole carrier.
    """

    A: IndexSet
    swept: DiscreteMeasure
    equality_residual_on_A: float
    domination_residual: float
    mass_in: float
    mass_out: float
    distance: float
    frostman_screen: bool
    domination_screen: bool
    status: str

    def to_dict(self) -> dict:
        return {
            "set_size": len(self.A),
            "swept": self.swept.weights.tolist(),
            "equality_residual_on_A": self.equality_residual_on_A,
            "domination_residual": self.domination_residual,
            "mass_in": self.mass_in,
            "mass_out": self.mass_out,
            "distance": self.distance,
            "frostman_screen": self.frostman_screen,
            "domination_screen": self.domination_screen,
            "status": self.status,
        }


def sweep(K: KernelMatrix, mu, A, tol: float = DEFAULT_TOL, *, x0=None) -> BalayageReport:
    """Balayage of a positive measure onto ``A``: the nearest member of the cone of
    positive measures carried by ``A`` in the energy norm."""
    A = _as_index(K, A)
    t = _weights(mu)
    if np.any(t < 0):
        raise ValueError("balayage is defined here for positive measures")
    sol = solve_cone_projection(K.entries, t, A, tol, x0=x0)
    w = sol.weights
    U_in = K.entries @ t
    U_out = K.entries @ w
    on = A.indices
    pos = w > 0
    eq_res = max(float(np.max(np.abs(U_out[pos] - U_in[pos]), initial=0.0)),
                 float(np.max(U_in[on] - U_out[on], initial=0.0)))
    return BalayageReport(
        A=A,
        swept=DiscreteMeasure(w, K.carrier),
        equality_residual_on_A=eq_res,
        domination_residual=float(np.max(U_out - U_in, initial=0.0)),
        mass_in=float(t.sum()),
        mass_out=float(w.sum()),
        distance=float(np.sqrt(max(sol.objective, 0.0))),
        frostman_screen=frostman_screen(K, A),
        domination_screen=domination_screen(K, t, A),
        status=sol.status,
    )


def sweep_min_norm(K: KernelMatrix, mu, A, tol: float = DEFAULT_TOL) -> DiscreteMeasure:
    """Minimum-norm positive measure on the carrier whose potential dominates ``U^mu`` on ``A``."""
    A = _as_index(K, A)
    g = np.zeros(K.size)
    g[A.indices] = (K.entries @ _weights(mu))[A.indices]
    sol = solve_obstacle_qp(K.entries, g, A, tol)
    if not sol.converged:
        raise QPError(f"obstacle solve did not converge (residual {sol.kkt_residual:.3e})")
    return DiscreteMeasure(sol.weights, K.carrier)


@dataclass(frozen=True, eq=False)
class BalayageProperties:
    """Outcome of the balayage property battery.

    Each ``*_screened`` flag says whether the discrete maximum-principle
    screens needed for that property hold; the matching residual is only
    expected to vanish when its flag is set.
    """

    rest_residual: float
    rest_screened: bool
    mass_in: float
    mass_out: float
    mass_excess: float
    mass_screened: bool
    domination_residual: float
    domination_screened: bool
    membership_residual: float
    idempotence_residual: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def failures(self, tol: float) -> list[str]:
        """Names of screened (or unconditional) properties violated beyond ``tol``."""
        bad = []
        if self.membership_residual > tol:
            bad.append("membership")
        if self.idempotence_residual > tol:
            bad.append("idempotence")
        if self.rest_screened and self.rest_residual > tol:
            bad.append("rest")
        if self.mass_screened and self.mass_excess > tol:
            bad.append("mass")
        if self.domination_screened and self.domination_residual > tol:
            bad.append("domination")
        return bad


def verify_balayage_props(K: KernelMatrix, mu, A, Q_super=None, tol: float = DEFAULT_TOL) -> BalayageProperties:
    """Rest property, mass inequality, domination, membership and idempotence for ``mu^A``."""
    A = _as_index(K, A)
    Q = _as_index(K, Q_super) if Q_super is not None else IndexSet.all(K.size)
    if not A.issubset(Q):
        raise ValueError("A must be a subset of Q_super")
    t = _weights(mu)
    rep_A = sweep(K, t, A, tol)
    rep_Q = sweep(K, t, Q, tol)
    rep_QA = sweep(K, rep_Q.swept, A, tol, x0=rep_Q.swept.weights)
    again = sweep(K, rep_A.swept, A, tol, x0=rep_A.swept.weights)

    dom_A = rep_A.domination_screen
    dom_Q = rep_Q.domination_screen
    frost_A = rep_A.frostman_screen
    return BalayageProperties(
        rest_residual=energy_distance(K, rep_A.swept, rep_QA.swept),
        rest_screened=dom_A and dom_Q,
        mass_in=rep_A.mass_in,
        mass_out=rep_A.mass_out,
        mass_excess=max(rep_A.mass_out - rep_A.mass_in, 0.0),
        mass_screened=frost_A and dom_A,
        domination_residual=rep_A.domination_residual,
        domination_screened=frost_A and dom_A,
        membership_residual=float(np.max(
            (K.entries @ t - potential(K, rep_A.swept))[A.indices], initial=0.0)),
        idempotence_residual=energy_distance(K, again.swept, rep_A.swept),
    )
