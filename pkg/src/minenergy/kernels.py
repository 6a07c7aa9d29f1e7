"""Riesz and logarithmic kernels and certified positive definite kernel matrices."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import quad
from scipy.linalg import lapack
from scipy.spatial.distance import cdist

from .geometry import PointSet, nearest_neighbor_distances

__all__ = [
    "KernelError",
    "PositiveDefinitenessError",
    "KernelSpec",
    "KernelMatrix",
    "kernel_eval",
    "assemble_matrix",
    "load_explicit_matrix",
    "surface_cell_c_reg",
]


class KernelError(ValueError):
    pass


class PositiveDefinitenessError(KernelError):
    """Raised when a kernel matrix fails the Cholesky certificate."""

    def __init__(self, pivot: float, minor: int):
        self.pivot = pivot
        self.minor = minor
        super().__init__(
            f"kernel matrix is not positive definite: pivot {pivot:.6g} "
            f"at leading minor of size {minor}"
        )


@dataclass(frozen=True)
class KernelSpec:
    """Which kernel to assemble and how to fill the singular diagonal.

    kind : ``"riesz"`` (``|x-y|**(alpha-dim)``), ``"logarithmic"``
        (``-log|x-y|``) or ``"explicit"`` (user matrix).
    diagonal : ``"cell"`` uses ``kappa(c_reg * delta_i)`` with ``delta_i``
        half the nearest-neighbour distance; ``"fixed"`` takes
        ``diagonal_values``.
    """

    kind: str = "riesz"
    alpha: float = 2.0
    dim: int = 3
    diagonal: str = "cell"
    c_reg: float = 1.0
    diagonal_values: tuple | None = None
    margin: float = 0.05
    matrix: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind == "riesz":
            if self.dim < 2:
                raise KernelError("Riesz kernels need dimension n >= 2")
            if not 0 < self.alpha < self.dim:
                raise KernelError(f"Riesz order must satisfy 0 < alpha < n, got alpha={self.alpha}, n={self.dim}")
        elif self.kind == "logarithmic":
            if not 0 <= self.margin < 1:
                raise KernelError("margin must lie in [0, 1)")
        elif self.kind == "explicit":
            if self.matrix is None:
                raise KernelError("explicit kernel needs a matrix")
        else:
            raise KernelError(f"unknown kernel kind {self.kind!r}")
        if self.diagonal not in ("cell", "fixed"):
            raise KernelError(f"unknown diagonal rule {self.diagonal!r}; use 'cell' or 'fixed'")
        if self.diagonal == "fixed" and self.kind != "explicit" and self.diagonal_values is None:
            raise KernelError("fixed diagonal rule needs diagonal_values")
        if self.c_reg <= 0:
            raise KernelError("c_reg must be positive")

    @classmethod
    def riesz(cls, alpha: float, dim: int, **kw) -> "KernelSpec":
        return cls(kind="riesz", alpha=alpha, dim=dim, **kw)

    @classmethod
    def logarithmic(cls, **kw) -> "KernelSpec":
        return cls(kind="logarithmic", dim=2, **kw)

    @classmethod
    def explicit(cls, matrix) -> "KernelSpec":
        return cls(kind="explicit", matrix=np.asarray(matrix, dtype=float))

    def profile(self, r):
        """Kernel as a function of distance (no domain checks)."""
        r = np.asarray(r, dtype=float)
        if self.kind == "riesz":
            return r ** (self.alpha - self.dim)
        if self.kind == "logarithmic":
            return -np.log(r)
        raise KernelError("explicit kernels have no distance profile")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "diagonal": self.diagonal, "c_reg": self.c_reg}
        if self.kind == "riesz":
            d.update(alpha=self.alpha, dim=self.dim)
        if self.kind == "logarithmic":
            d.update(margin=self.margin)
        if self.diagonal_values is not None:
            d["diagonal_values"] = list(self.diagonal_values)
        return d


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = float(np.linalg.norm(x - y))
    if r == 0.0:
        raise KernelError("kernel is singular at x = y; use the diagonal rule")
    if spec.kind == "logarithmic" and r >= 1.0:
        raise KernelError(f"|x - y| = {r} >= 1 is outside the logarithmic kernel's domain")
    return float(spec.profile(r))


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Symmetric positive definite matrix of kernel values on a carrier.

    ``pd_certificate`` is the smallest Cholesky pivot ``L_ii**2``.
    """

    entries: np.ndarray
    spec: KernelSpec
    pd_certificate: float
    carrier: PointSet | None = None
    cholesky: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def __len__(self) -> int:
        return self.size

    def sub(self, rows, cols=None) -> np.ndarray:
        rows = np.asarray(rows)
        cols = rows if cols is None else np.asarray(cols)
        return self.entries[np.ix_(rows, cols)]


def _certify(K: np.ndarray) -> tuple[float, np.ndarray]:
    L, info = lapack.dpotrf(K, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        pivot, minor = _first_bad_pivot(K)
        raise PositiveDefinitenessError(pivot, minor)
    if info < 0:
        raise KernelError(f"LAPACK dpotrf argument error {info}")
    return float(np.min(np.diag(L)) ** 2), L


def _first_bad_pivot(K: np.ndarray) -> tuple[float, int]:
    # unblocked outer-product Cholesky, only run on the failure path
    A = np.array(K, dtype=float, copy=True)
    n = A.shape[0]
    for k in range(n):
        piv = A[k, k]
        if not piv > 0:
            return float(piv), k + 1
        col = A[k + 1:, k] / math.sqrt(piv)
        A[k + 1:, k + 1:] -= np.outer(col, col)
    return float("nan"), n


def _cell_delta(ps: PointSet) -> np.ndarray:
    return 0.5 * nearest_neighbor_distances(ps.points)


def assemble_matrix(ps: PointSet | None, spec: KernelSpec) -> KernelMatrix:
    """Assemble and certify the kernel matrix of ``spec`` on ``ps``.

    Raises :class:`PositiveDefinitenessError` when the Cholesky factorization
    meets a nonpositive pivot.
    """
    if spec.kind == "explicit":
        K = np.array(spec.matrix, dtype=float, copy=True)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise KernelError("explicit matrix must be square")
        if ps is not None and len(ps) != K.shape[0]:
            raise KernelError("explicit matrix size does not match the point set")
        scale = max(np.max(np.abs(K)), np.finfo(float).tiny)
        if np.max(np.abs(K - K.T)) > 1e-12 * scale:
            raise KernelError("explicit matrix is not symmetric within 1e-12 relative")
        K = 0.5 * (K + K.T)
        if spec.diagonal == "fixed" and spec.diagonal_values is not None:
            np.fill_diagonal(K, np.asarray(spec.diagonal_values, dtype=float))
    else:
        if ps is None:
            raise KernelError(f"{spec.kind} kernel needs a point set")
        if len(ps) < 2 and spec.diagonal == "cell":
            raise KernelError("cell diagonal rule needs at least 2 points")
        if spec.kind == "riesz" and ps.dim != spec.dim:
            raise KernelError(f"kernel dimension {spec.dim} does not match points in R^{ps.dim}")
        if spec.kind == "logarithmic":
            if ps.dim != 2:
                raise KernelError("logarithmic kernel is implemented on R^2 only")
            limit = 1.0 - spec.margin
            worst = float(np.max(ps.norms()))
            if worst >= limit:
                raise KernelError(
                    f"logarithmic kernel needs all points inside the disc of radius {limit}; "
                    f"found |x| = {worst}"
                )
        D = cdist(ps.points, ps.points)
        np.fill_diagonal(D, 1.0)
        K = spec.profile(D)
        if spec.diagonal == "cell":
            diag = spec.profile(spec.c_reg * _cell_delta(ps))
        else:
            diag = np.asarray(spec.diagonal_values, dtype=float)
            if diag.shape != (len(ps),):
                raise KernelError("diagonal_values must have one entry per point")
        np.fill_diagonal(K, diag)
        # exact symmetry
        K = np.triu(K) + np.triu(K, 1).T
    if not np.all(np.isfinite(K)):
        raise KernelError("kernel matrix has non-finite entries")
    cert, L = _certify(K)
    K.setflags(write=False)
    L.setflags(write=False)
    return KernelMatrix(K, spec, cert, ps, L)


def load_explicit_matrix(path) -> np.ndarray:
    """Read a row-major matrix from CSV or JSON.

    CSV: first row holds ``N``, then ``N`` rows of ``N`` values.
    JSON: ``{"N": n, "entries": [...]}`` with a flat row-major list or nested rows.
    """
    path = Path(path)
    if path.suffix.lower() == ".json":
        data = json.loads(path.read_text())
        n = int(data["N"])
        M = np.asarray(data["entries"], dtype=float)
    else:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
        n = int(rows[0][0])
        M = np.asarray([[float(c) for c in r] for r in rows[1:]], dtype=float)
    if M.size != n * n:
        raise KernelError(f"expected {n * n} matrix entries, found {M.size}")
    return M.reshape(n, n)


def surface_cell_c_reg(alpha: float, dim: int = 3) -> float:
    """Cell constant matching the self-energy of a hexagonal surface cell.

    For quasi-uniform points on a 2-D surface, each point stands for a cell
    of area ``A`` whose nearest-neighbour spacing is ``sqrt(2A/sqrt(3))``.
    The returned ``c_reg`` makes ``(c_reg * delta)**(alpha - dim)`` equal the
    mean of ``r**(alpha - dim)`` over two independent uniform points of a disc
    with area ``A``.  Requires ``0 < dim - alpha < 2``.
    """
    p = dim - alpha
    if not 0 < p < 2:
        raise KernelError("surface cell calibration needs 0 < dim - alpha < 2")

    def density(r):
        # distance density of two uniform points in the unit disc
        return 4 * r / math.pi * (math.acos(r / 2) - (r / 2) * math.sqrt(1 - r * r / 4))

    mean, _ = quad(lambda r: r ** (-p) * density(r), 0.0, 2.0, limit=200)
    # radius of the equal-area disc over half the hexagonal spacing, both per sqrt(A)
    a_over_delta = math.sqrt(1 / math.pi) / (0.5 * math.sqrt(2 / math.sqrt(3)))
    return a_over_delta * mean ** (-1.0 / p)
