"""Capacity, unweighted equilibrium measure and capacitary measure of a finite set."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .geometry import ExhaustionChain, IndexSet
from .kernels import KernelMatrix
from .measures import DiscreteMeasure, energy_distance, potential
from .qp import DEFAULT_TOL, QPError, solve_obstacle_qp, solve_simplex_qp

__all__ = [
    "CapacityReport",
    "screen_solution",
    "frostman_screen",
    "robin_capacity",
    "capacitary_direct",
    "capacity_monotone_check",
]

SCREEN_EPS = 1e-12


def _as_index(K: KernelMatrix, A) -> IndexSet:
    if A is None:
        return IndexSet.all(K.size)
    if isinstance(A, IndexSet):
        if A.n != K.size:
            raise ValueError("index set does not index this kernel matrix")
        return A
    return IndexSet(np.asarray(A), K.size)


def screen_solution(K: KernelMatrix, A: IndexSet, rhs) -> np.ndarray:
    """Solve ``K_AA x = rhs`` on ``A`` (the equality version of the obstacle problem)."""
    idx = A.indices
    fac = cho_factor(K.sub(idx), lower=True, check_finite=False)
    return cho_solve(fac, np.asarray(rhs, dtype=float), check_finite=False)


def _nonnegative(x) -> bool:
    x = np.asarray(x)
    return bool(x.size == 0 or x.min() >= -SCREEN_EPS * max(np.abs(x).max(), 1.0))


def frostman_screen(K: KernelMatrix, A) -> bool:
    """True when ``K_AA x = 1`` has a nonnegative solution.

    Then the capacitary potential equals 1 on all of ``A``, the discrete
    stand-in for Frostman's maximum principle.
    """
    A = _as_index(K, A)
    return _nonnegative(screen_solution(K, A, np.ones(len(A))))


@dataclass(frozen=True, eq=False)
class CapacityReport:
    """Capacity of ``A`` with its equilibrium and capacitary measures.

    ``frostman_residual`` is ``max_A |U^gamma - 1|``; it is only expected to
    vanish when ``frostman_screen`` holds.  ``kkt_residual`` measures
    ``U^gamma >= 1`` on ``A`` and ``U^gamma <= 1`` on the support of gamma.
    """

    A: IndexSet
    w_value: float
    capacity: float
    equilibrium: DiscreteMeasure
    capacitary: DiscreteMeasure
    frostman_residual: float
    frostman_screen: bool
    kkt_residual: float
    status: str

    def to_dict(self) -> dict:
        return {
            "set_size": len(self.A),
            "w_value": self.w_value,
            "capacity": self.capacity,
            "equilibrium": self.equilibrium.weights.tolist(),
            "capacitary": self.capacitary.weights.tolist(),
            "capacitary_mass": self.capacitary.mass,
            "frostman_residual": self.frostman_residual,
            "frostman_screen": self.frostman_screen,
            "kkt_residual": self.kkt_residual,
            "status": self.status,
        }


def robin_capacity(K: KernelMatrix, A=None, tol: float = DEFAULT_TOL, *, x0=None) -> CapacityReport:
    """Minimal energy ``w(A)`` over unit measures on ``A`` and ``cap(A) = 1/w(A)``.

    The capacitary measure is obtained by scaling, ``gamma = lambda / w``.
    """
    A = _as_index(K, A)
    if len(A) == 0:
        raise ValueError("capacity of the empty set is not defined here")
    sol = solve_simplex_qp(K.entries, None, A, tol, x0=x0)
    lam = sol.weights
    w = sol.objective
    gamma = lam / w
    U = K.entries @ gamma
    on = A.indices
    pos = gamma > 0
    kkt = max(float(np.max(1.0 - U[on], initial=0.0)),
              float(np.max(U[pos] - 1.0, initial=0.0)))
    return CapacityReport(
        A=A,
        w_value=w,
        capacity=1.0 / w,
        equilibrium=DiscreteMeasure(lam, K.carrier),
        capacitary=DiscreteMeasure(gamma, K.carrier),
        frostman_residual=float(np.abs(U[on] - 1.0).max()),
        frostman_screen=frostman_screen(K, A),
        kkt_residual=kkt,
        status=sol.status,
    )


def capacitary_direct(K: KernelMatrix, A=None, tol: float = DEFAULT_TOL) -> DiscreteMeasure:
    """Minimum-norm measure with ``U^nu >= 1`` on ``A``, computed on the whole carrier."""
    A = _as_index(K, A)
    g = np.zeros(K.size)
    g[A.indices] = 1.0
    sol = solve_obstacle_qp(K.entries, g, A, tol)
    if not sol.converged:
        raise QPError(f"obstacle solve did not converge (residual {sol.kkt_residual:.3e})")
    return DiscreteMeasure(sol.weights, K.carrier)


def capacitary_gap(K: KernelMatrix, A=None, tol: float = DEFAULT_TOL) -> float:
    """Energy-norm distance between the obstacle route and the scaled equilibrium route."""
    A = _as_index(K, A)
    return energy_distance(K, capacitary_direct(K, A, tol), robin_capacity(K, A, tol).capacitary)


def capacity_monotone_check(K: KernelMatrix, chain: ExhaustionChain, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Capacities along a nested chain; raises if they ever decrease.

    Each stage is warm-started from the previous equilibrium measure, which
    stays admissible, so the computed energies are nonincreasing exactly.
    """
    caps = []
    x0 = None
    for stage in chain.stages:
        rep = robin_capacity(K, stage, tol, x0=x0)
        caps.append(rep.capacity)
        x0 = rep.equilibrium.weights
    caps = np.asarray(caps)
    if np.any(np.diff(caps) < 0):
        raise AssertionError(f"capacity decreased along a nested chain: {caps}")
    return caps


def capacitary_potential(K: KernelMatrix, rep: CapacityReport) -> np.ndarray:
    return potential(K, rep.capacitary)
