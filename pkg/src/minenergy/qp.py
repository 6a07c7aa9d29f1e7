"""Convex QP solvers behind every extremal problem in the package.

All problems share the objective ``w'Qw + 2 b'w`` with ``Q`` symmetric
positive definite:

* simplex QP      -- ``w >= 0``, ``sum(w) = 1``, ``w`` carried by ``support``;
* cone projection -- ``min (w - t)'Q(w - t)`` over ``w >= 0`` carried by ``support``;
* obstacle QP     -- ``min v'Qv`` over ``v >= 0`` with ``(Qv)_i >= g_i`` on a set.

The iterative solver is a primal active-set method with Cholesky solves on
the free set.  :func:`active_set_oracle` enumerates active sets exhaustively
and serves as the independent reference on small instances.
"""
from __future__ import annotations

import itertools
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .geometry import IndexSet

__all__ = [
    "QPError",
    "InfeasibleError",
    "QPSolution",
    "DEFAULT_TOL",
    "DEFAULT_MAX_ITER",
    "solve_simplex_qp",
    "solve_cone_projection",
    "solve_obstacle_qp",
    "active_set_oracle",
    "solver_limits",
    "simplex_kkt_residual",
    "cone_kkt_residual",
    "obstacle_kkt_residual",
]

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100_000

_LIMITS = {"max_iter": DEFAULT_MAX_ITER}


@contextmanager
def solver_limits(max_iter: int):
    """Temporarily change the iteration cap used when a solver gets ``max_iter=None``."""
    if max_iter < 1:
        raise ValueError("max_iter must be positive")
    old = _LIMITS["max_iter"]
    _LIMITS["max_iter"] = int(max_iter)
    try:
        yield
    finally:
        _LIMITS["max_iter"] = old


class QPError(RuntimeError):
    pass


class InfeasibleError(QPError):
    """The admissible class is empty."""


@dataclass(frozen=True, eq=False)
class QPSolution:
    weights: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    status: str
    multiplier: float = 0.0

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _as_support(support, n: int) -> np.ndarray:
    if support is None:
        return np.arange(n)
    if isinstance(support, IndexSet):
        if support.n != n:
            raise QPError("support does not index this problem")
        return support.indices
    idx = np.unique(np.asarray(support, dtype=np.int64))
    if idx.size and (idx[0] < 0 or idx[-1] >= n):
        raise QPError("support index out of range")
    return idx


def _objective(Q, b, w) -> float:
    nz = w != 0
    return float(w @ (Q @ w) + 2.0 * (b[nz] @ w[nz]))


# ---------------------------------------------------------------------------
# KKT certificates, recomputed from scratch on returned weights


def simplex_kkt_residual(Q, b, w, support) -> tuple[float, float]:
    """Residual of the simplex-QP optimality system and its multiplier.

    The multiplier is ``c = sum_i w_i (Qw + b)_i``; the residual is the worst
    of: negative weights, mass defect, mass outside the support or on
    infinite-``b`` points, ``(c - g_i)^+`` on the support, and ``|g_i - c|``
    where ``w_i > 0``.
    """
    Q = np.asarray(Q, dtype=float)
    b = np.asarray(b, dtype=float)
    w = np.asarray(w, dtype=float)
    S = _as_support(support, len(w))
    on = np.zeros(len(w), dtype=bool)
    on[S] = True
    on &= np.isfinite(b)
    res = max(0.0, -float(w.min()), abs(float(w.sum()) - 1.0))
    if np.any(~on):
        res = max(res, float(np.abs(w[~on]).max()))
    bf = np.where(np.isfinite(b), b, 0.0)
    g = Q @ w + bf
    pos = w > 0
    c = float(w[pos] @ g[pos])
    res = max(res, float(np.max(c - g[on], initial=0.0)))
    if np.any(pos):
        res = max(res, float(np.abs(g[pos] - c).max()))
    return res, c


def cone_kkt_residual(Q, target, w, support) -> float:
    """Residual of ``Q(w - t) >= 0`` on the support, ``= 0`` where ``w > 0``."""
    Q = np.asarray(Q, dtype=float)
    w = np.asarray(w, dtype=float)
    S = _as_support(support, len(w))
    on = np.zeros(len(w), dtype=bool)
    on[S] = True
    res = max(0.0, -float(w.min()))
    if np.any(~on):
        res = max(res, float(np.abs(w[~on]).max()))
    g = Q @ (w - np.asarray(target, dtype=float))
    res = max(res, float(np.max(-g[on], initial=0.0)))
    pos = w > 0
    if np.any(pos):
        res = max(res, float(np.abs(g[pos]).max()))
    return res


def obstacle_kkt_residual(Q, g, obstacle, v) -> float:
    """Residual of the obstacle-QP optimality system in the full variable space.

    Stationarity ``2Qv = 2 sum_i m_i Q e_i + 2s`` with multipliers ``m >= 0``
    on the obstacle rows and ``s >= 0`` on the bounds is met by ``m = v`` and
    ``s = 0`` when ``v`` is carried by the obstacle set; the residual collects
    mass off the set, negative weights, obstacle violations and the
    complementarity gap ``|(Qv)_i - g_i|`` where ``m_i = v_i > 0``.
    """
    Q = np.asarray(Q, dtype=float)
    v = np.asarray(v, dtype=float)
    g = np.asarray(g, dtype=float)
    O = _as_support(obstacle, len(v))
    on = np.zeros(len(v), dtype=bool)
    on[O] = True
    res = max(0.0, -float(v.min()))
    if np.any(~on):
        res = max(res, float(np.abs(v[~on]).max()))
    u = Q @ v
    res = max(res, float(np.max(g[on] - u[on], initial=0.0)))
    pos = (v > 0) & on
    if np.any(pos):
        res = max(res, float(np.abs(u[pos] - g[pos]).max()))
    return res


# ---------------------------------------------------------------------------
# primal active-set engine


def _equality_solve(Q, b, F, simplex):
    """Minimize over the free set ``F`` with the inactive variables at 0."""
    QF = Q[np.ix_(F, F)]
    try:
        fac = cho_factor(QF, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise QPError("Q restricted to the free set is not positive definite") from exc
    v = cho_solve(fac, b[F], check_finite=False)
    if not simplex:
        return -v, 0.0
    u = cho_solve(fac, np.ones(len(F)), check_finite=False)
    c = (1.0 + v.sum()) / u.sum()
    return c * u - v, float(c)


def _initial_point(Q, b, simplex):
    n = len(b)
    y, _ = _equality_solve(Q, b, np.arange(n), simplex)
    x = np.maximum(y, 0.0)
    if simplex:
        s = x.sum()
        if s > 0:
            x = x / s
        else:
            x = np.zeros(n)
            x[int(np.argmin(np.diag(Q) + 2 * b))] = 1.0
    return x


def _active_set(Q, b, simplex, x0, tol, max_iter):
    n = len(b)
    if x0 is None:
        x = _initial_point(Q, b, simplex)
    else:
        x = np.array(x0, dtype=float)
    free = x > 0
    c = 0.0
    it = 0
    status = "max-iter"
    while it < max_iter:
        it += 1
        F = np.flatnonzero(free)
        if F.size == 0:
            y_F = np.zeros(0)
        else:
            y_F, c = _equality_solve(Q, b, F, simplex)
        if F.size and np.any(y_F <= 0):
            x_F = x[F]
            d = y_F - x_F
            neg = d < 0
            ratios = np.full(F.size, np.inf)
            ratios[neg] = x_F[neg] / -d[neg]
            alpha = min(1.0, float(ratios.min()))
            x_new = x_F + alpha * d
            block = (ratios <= alpha) | (x_new <= 0)
            if alpha >= 1.0:
                block |= y_F <= 0
            x_new[block] = 0.0
            x[F] = x_new
            free[F[block]] = False
            if simplex and not np.any(free):
                # cannot happen in exact arithmetic; restart from the best vertex
                j = int(np.argmin(np.diag(Q) + 2 * b))
                x[:] = 0.0
                x[j] = 1.0
                free[j] = True
            continue
        x[:] = 0.0
        x[F] = y_F
        g = Q @ x + b
        dual = g - c
        dual[F] = np.inf
        j = int(np.argmin(dual)) if n else 0
        if n == 0 or dual[j] >= -tol:
            status = "converged"
            break
        free[j] = True
    if simplex:
        x = np.maximum(x, 0.0)
        x /= x.sum()
    return x, it, status


def _run(Q, b, simplex, x0, tol, max_iter):
    if max_iter is None:
        max_iter = _LIMITS["max_iter"]
    x, it, status = _active_set(Q, b, simplex, x0, tol, max_iter)
    if x0 is not None and _objective(Q, b, x0) < _objective(Q, b, x):
        # never return a worse point than the feasible warm start
        x = np.array(x0, dtype=float)
    return x, it, status


def _reduce_start(x0, idx, n_full):
    if x0 is None:
        return None
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (n_full,):
        raise QPError("warm start has the wrong length")
    return x0[idx]


def solve_simplex_qp(Q, b=None, support=None, tol: float = DEFAULT_TOL,
                     max_iter: int | None = None, *, x0=None) -> QPSolution:
    """Minimize ``w'Qw + 2b'w`` over probability vectors carried by ``support``.

    Entries of ``b`` equal to ``+inf`` pin their weights to zero.  ``x0`` is an
    optional feasible warm start; the returned objective never exceeds its
    objective.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
    if np.any(np.isnan(b)) or np.any(b == -np.inf):
        raise QPError("b must take values in (-inf, +inf]")
    S = _as_support(support, n)
    if S.size == 0:
        raise InfeasibleError("support is empty")
    idx = S[np.isfinite(b[S])]
    if idx.size == 0:
        raise InfeasibleError("b is +inf on the whole support: no admissible measure")
    Qs = Q[np.ix_(idx, idx)]
    bs = b[idx]
    start = _reduce_start(x0, idx, n)
    if start is not None and (np.any(start < 0) or abs(start.sum() - 1) > 1e-12):
        start = None
    x, it, status = _run(Qs, bs, True, start, tol, max_iter)
    w = np.zeros(n)
    w[idx] = x
    res, c = simplex_kkt_residual(Q, b, w, S)
    if status == "converged" and res > tol:
        status = "max-iter"
    return QPSolution(w, _objective(Qs, bs, x), res, it, status, c)


def solve_cone_projection(Q, target, support=None, tol: float = DEFAULT_TOL,
                          max_iter: int | None = None, *, x0=None) -> QPSolution:
    """Energy-norm projection of ``target`` onto nonnegative vectors carried by ``support``.

    ``objective`` is the squared distance ``(w - t)'Q(w - t)``.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    t = np.asarray(target, dtype=float)
    S = _as_support(support, n)
    w = np.zeros(n)
    it, status = 0, "converged"
    if S.size:
        bs = -(Q[S] @ t)
        start = _reduce_start(x0, S, n)
        if start is not None and np.any(start < 0):
            start = None
        x, it, status = _run(Q[np.ix_(S, S)], bs, False, start, tol, max_iter)
        w[S] = x
    res = cone_kkt_residual(Q, t, w, S)
    if status == "converged" and res > tol:
        status = "max-iter"
    d = w - t
    return QPSolution(w, float(d @ (Q @ d)), res, it, status, 0.0)


def solve_obstacle_qp(Q, g, obstacle_set=None, tol: float = DEFAULT_TOL,
                      max_iter: int | None = None) -> QPSolution:
    """Minimize ``v'Qv`` over ``v >= 0`` subject to ``(Qv)_i >= g_i`` on ``obstacle_set``.

    By duality the minimizer is carried by the obstacle set and solves the
    complementarity problem ``v >= 0``, ``Q_OO v - g >= 0``,
    ``v'(Q_OO v - g) = 0``; that system is what the active-set engine solves.
    The certificate is evaluated in the original variables.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    g = np.asarray(g, dtype=float)
    if g.shape != (n,):
        raise QPError("g must have one entry per carrier point")
    O = _as_support(obstacle_set, n)
    if not np.all(np.isfinite(g[O])):
        raise QPError("g must be finite on the obstacle set")
    v = np.zeros(n)
    it, status = 0, "converged"
    if O.size:
        x, it, status = _run(Q[np.ix_(O, O)], -g[O], False, None, tol, max_iter)
        v[O] = x
    res = obstacle_kkt_residual(Q, g, O, v)
    if status == "converged" and res > tol:
        status = "max-iter"
    return QPSolution(v, float(v @ (Q @ v)), res, it, status, 0.0)


# ---------------------------------------------------------------------------
# exhaustive reference solver


def active_set_oracle(Q, b=None, kind: str = "simplex", support=None,
                      max_size: int = 12, feas_tol: float = 1e-10) -> QPSolution:
    """Exact optimum by enumerating every active set.

    kind : ``"simplex"`` and ``"cone"`` minimize ``w'Qw + 2b'w`` (for
        ``"cone"`` pass ``b = -Q t`` to project ``t``); ``"obstacle"``
        minimizes ``v'Qv`` with ``b`` playing the obstacle ``g`` on
        ``support``.
    max_size : bound on the number of enumerated inequality constraints
        (``|support|`` for simplex/cone, ``n + |support|`` for obstacle).

    Each working set's equality-constrained KKT system is solved densely;
    the feasible candidate with sign-correct multipliers is kept, ties
    broken by the lexicographically smallest active set.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
    S = _as_support(support, n)
    if kind == "obstacle":
        return _oracle_obstacle(Q, b, S, max_size, feas_tol)
    if kind not in ("simplex", "cone"):
        raise QPError(f"unknown problem kind {kind!r}")
    simplex = kind == "simplex"
    idx = S[np.isfinite(b[S])]
    if simplex and idx.size == 0:
        raise InfeasibleError("no admissible point")
    m = idx.size
    if m > max_size:
        raise QPError(f"oracle limited to {max_size} variables, got {m}")
    Qs = Q[np.ix_(idx, idx)]
    bs = b[idx]
    scale = max(1.0, float(np.abs(Qs).max(initial=0.0)), float(np.abs(bs).max(initial=0.0)))
    tol = feas_tol * scale
    best = None
    count = 0
    for k in range(m + 1):
        for active in itertools.combinations(range(m), k):
            count += 1
            free = [i for i in range(m) if i not in active]
            if simplex and not free:
                continue
            x = np.zeros(m)
            c = 0.0
            if free:
                f = len(free)
                if simplex:
                    M = np.zeros((f + 1, f + 1))
                    M[:f, :f] = Qs[np.ix_(free, free)]
                    M[:f, f] = -1.0
                    M[f, :f] = 1.0
                    rhs = np.concatenate([-bs[free], [1.0]])
                else:
                    M = Qs[np.ix_(free, free)]
                    rhs = -bs[free]
                try:
                    sol = np.linalg.solve(M, rhs)
                except np.linalg.LinAlgError:
                    continue
                x[free] = sol[: len(free)]
                if simplex:
                    c = sol[-1]
            if np.any(x < -tol):
                continue
            mult = Qs @ x + bs - c
            if active and np.any(mult[list(active)] < -tol):
                continue
            if best is None or active < best[0]:
                best = (active, x.copy(), c)
    if best is None:
        raise QPError("oracle found no KKT point")
    _, x, c = best
    x = np.maximum(x, 0.0)
    w = np.zeros(n)
    w[idx] = x
    if simplex:
        res, c = simplex_kkt_residual(Q, b, w, S)
    else:
        res = float(np.max(-(Q @ w + b)[S], initial=0.0))
    return QPSolution(w, _objective(Qs, bs, x), res, count, "converged", float(c))


def _oracle_obstacle(Q, g, O, max_size, feas_tol):
    n = Q.shape[0]
    # constraint k < n: v_k >= 0; constraint n + j: (Q v)_{O[j]} >= g_{O[j]}
    A = np.vstack([np.eye(n), Q[O]])
    rhs_all = np.concatenate([np.zeros(n), g[O]])
    m = A.shape[0]
    if m > max_size:
        raise QPError(f"oracle limited to {max_size} constraints, got {m}")
    scale = max(1.0, float(np.abs(Q).max()), float(np.abs(g[O]).max(initial=0.0)))
    tol = feas_tol * scale
    best = None
    count = 0
    for k in range(min(m, n) + 1):
        for active in itertools.combinations(range(m), k):
            count += 1
            W = list(active)
            Aw = A[W]
            if k and np.linalg.matrix_rank(Aw) < k:
                continue
            M = np.zeros((n + k, n + k))
            M[:n, :n] = 2.0 * Q
            M[:n, n:] = -Aw.T
            M[n:, :n] = Aw
            rhs = np.concatenate([np.zeros(n), rhs_all[W]])
            try:
                sol = np.linalg.solve(M, rhs)
            except np.linalg.LinAlgError:
                continue
            v, lam = sol[:n], sol[n:]
            if np.any(lam < -tol):
                continue
            if np.any(A @ v - rhs_all < -tol):
                continue
            if best is None or active < best[0]:
                best = (active, v.copy())
    if best is None:
        raise QPError("oracle found no KKT point")
    v = best[1]
    v = np.where(np.abs(v) <= tol, 0.0, v)
    res = obstacle_kkt_residual(Q, g, O, np.maximum(v, 0.0))
    return QPSolution(v, float(v @ (Q @ v)), res, count, "converged", 0.0)
