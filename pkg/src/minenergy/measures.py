"""Discrete measures, potentials, energies, external fields and the Gauss functional."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import IndexSet, PointSet
from .kernels import KernelMatrix

__all__ = [
    "MeasureError",
    "DiscreteMeasure",
    "ExternalField",
    "potential",
    "inner_product",
    "energy",
    "energy_distance",
    "field_values",
    "weighted_potential",
    "gauss_functional",
]


class MeasureError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Signed atomic measure: one weight per carrier point."""

    weights: np.ndarray
    carrier: PointSet | None = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, copy=True).ravel()
        if not np.all(np.isfinite(w)):
            raise MeasureError("measure weights must be finite")
        if self.carrier is not None and len(self.carrier) != w.size:
            raise MeasureError("weight vector length does not match the carrier")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def zero(cls, n: int, carrier=None) -> "DiscreteMeasure":
        return cls(np.zeros(n), carrier)

    @classmethod
    def dirac(cls, j: int, n: int, mass: float = 1.0, carrier=None) -> "DiscreteMeasure":
        w = np.zeros(n)
        w[j] = mass
        return cls(w, carrier)

    def __len__(self) -> int:
        return self.weights.size

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def support(self) -> IndexSet:
        return IndexSet(np.flatnonzero(self.weights != 0), self.weights.size)

    @property
    def is_positive(self) -> bool:
        return bool(np.all(self.weights >= 0))

    def restrict(self, A: IndexSet) -> "DiscreteMeasure":
        return DiscreteMeasure(np.where(A.mask(), self.weights, 0.0), self.carrier)

    def __add__(self, other):
        return DiscreteMeasure(self.weights + _w(other), self.carrier)

    def __sub__(self, other):
        return DiscreteMeasure(self.weights - _w(other), self.carrier)

    def __mul__(self, a: float):
        return DiscreteMeasure(a * self.weights, self.carrier)

    __rmul__ = __mul__


def _w(mu) -> np.ndarray:
    return mu.weights if isinstance(mu, DiscreteMeasure) else np.asarray(mu, dtype=float)


def _check(K: KernelMatrix, *mus):
    for mu in mus:
        w = _w(mu)
        if w.shape != (K.size,):
            raise MeasureError(f"measure of length {w.shape} does not live on a carrier of size {K.size}")
        if (isinstance(mu, DiscreteMeasure) and mu.carrier is not None
                and K.carrier is not None and mu.carrier is not K.carrier):
            raise MeasureError("measure and kernel matrix live on different carriers")


def potential(K: KernelMatrix, mu) -> np.ndarray:
    """``U^mu = K w``."""
    _check(K, mu)
    return K.entries @ _w(mu)


def inner_product(K: KernelMatrix, mu, nu) -> float:
    _check(K, mu, nu)
    return float(_w(mu) @ (K.entries @ _w(nu)))


def energy(K: KernelMatrix, mu) -> float:
    return inner_product(K, mu, mu)


def energy_distance(K: KernelMatrix, mu, nu) -> float:
    """Energy norm ``||mu - nu||``, clipped at 0 against round-off."""
    d = _w(mu) - _w(nu)
    _check(K, d)
    return float(np.sqrt(max(d @ (K.entries @ d), 0.0)))


@dataclass(frozen=True, eq=False)
class ExternalField:
    """External field ``f = psi + U^theta`` or ``f = -U^zeta``.

    ``psi`` may contain ``+inf``; those points are excluded from every
    admissible measure.
    """

    form: str
    psi: np.ndarray | None = None
    theta: DiscreteMeasure | None = None
    zeta: DiscreteMeasure | None = None

    def __post_init__(self):
        if self.form not in ("psi-plus-potential", "minus-potential"):
            raise MeasureError(f"unknown field form {self.form!r}")
        if self.form == "minus-potential":
            if self.zeta is None:
                raise MeasureError("minus-potential field needs zeta")
            if not self.zeta.is_positive:
                raise MeasureError("zeta must be a positive measure")
            if self.zeta.mass > 1 + 1e-12:
                raise MeasureError(f"zeta must have total mass <= 1, got {self.zeta.mass}")
        if self.psi is not None:
            psi = np.array(self.psi, dtype=float, copy=True).ravel()
            if np.any(np.isnan(psi)) or np.any(psi == -np.inf):
                raise MeasureError("psi must take values in (-inf, +inf]")
            psi.setflags(write=False)
            object.__setattr__(self, "psi", psi)

    @classmethod
    def zero(cls) -> "ExternalField":
        return cls("psi-plus-potential")

    @classmethod
    def from_psi(cls, psi, theta: DiscreteMeasure | None = None) -> "ExternalField":
        return cls("psi-plus-potential", psi=psi, theta=theta)

    @classmethod
    def minus_potential(cls, zeta: DiscreteMeasure) -> "ExternalField":
        return cls("minus-potential", zeta=zeta)


def field_values(spec: ExternalField, K: KernelMatrix) -> np.ndarray:
    n = K.size
    if spec.form == "minus-potential":
        return -potential(K, spec.zeta)
    f = np.zeros(n)
    if spec.psi is not None:
        if spec.psi.shape != (n,):
            raise MeasureError("psi does not live on the kernel's carrier")
        f = f + spec.psi
    if spec.theta is not None:
        f = f + potential(K, spec.theta)
    return f


def weighted_potential(K: KernelMatrix, f, mu) -> np.ndarray:
    """``U_f^mu = U^mu + f``."""
    return potential(K, mu) + np.asarray(f, dtype=float)


def gauss_functional(K: KernelMatrix, f, mu) -> float:
    """``I_f(mu) = ||mu||^2 + 2 * sum f_i w_i``."""
    w = _w(mu)
    f = np.asarray(f, dtype=float)
    _check(K, w)
    bad = np.isinf(f) & (w != 0)
    if np.any(bad):
        raise MeasureError(f"measure charges points {np.flatnonzero(bad).tolist()} where f = +inf")
    finite = ~np.isinf(f)
    return float(w @ (K.entries @ w) + 2.0 * (f[finite] @ w[finite]))
