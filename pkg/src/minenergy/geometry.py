"""Point sets, index sets and exhaustion chains for finite carriers in R^n."""
from __future__ import annotations

import math
from dataclasses import dataclass


import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "PointSet",
    "IndexSet",
    "ExhaustionChain",
    "Sphere",
    "Ball",
    "Circle",
    "RotationBody",
    "shape_from_dict",
    "sample_shape",
    "annuli_partition",
    "exhaustion_chain",
    "nearest_neighbor_distances",
]

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


class GeometryError(ValueError):
    pass


def nearest_neighbor_distances(points: np.ndarray) -> np.ndarray:
    """Distance from every point to its nearest distinct neighbour."""
    points = np.asarray(points, dtype=float)
    if len(points) < 2:
        raise GeometryError("nearest-neighbour distance needs at least 2 points")
    dist, _ = cKDTree(points).query(points, k=2)
    return dist[:, 1]


@dataclass(frozen=True, eq=False)
class PointSet:
    """Ordered, pairwise distinct points in R^dim.

    ``min_separation`` overrides the default duplicate threshold of
    ``1e-9 * diameter``.  Pass ``0.0`` to demand only strict distinctness.
    """

    points: np.ndarray
    labels: tuple | None = None
    min_separation: float | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise GeometryError(f"points must be an (N, dim) array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("point coordinates must be finite")
        if self.labels is not None and len(self.labels) != len(pts):
            raise GeometryError("labels must have one entry per point")
        if len(pts) > 1:
            nn = nearest_neighbor_distances(pts)
            thresh = self.min_separation
            if thresh is None:
                thresh = 1e-9 * _diameter(pts)
            if nn.min() <= thresh:
                i = int(np.argmin(nn))
                raise GeometryError(
                    f"point {i} lies within {nn[i]:.3e} of another point "
                    f"(minimum separation {thresh:.3e})"
                )
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def norms(self, origin=None) -> np.ndarray:
        if origin is None:
            return np.linalg.norm(self.points, axis=1)
        return np.linalg.norm(self.points - np.asarray(origin, dtype=float), axis=1)

    def scaled(self, factor: float) -> "PointSet":
        sep = None if self.min_separation is None else self.min_separation * factor
        return PointSet(self.points * factor, self.labels, sep)

    def concat(self, other: "PointSet") -> "PointSet":
        if other.dim != self.dim:
            raise GeometryError("cannot concatenate point sets of different dimension")
        labels = None
        if self.labels is not None or other.labels is not None:
            labels = (self.labels or (None,) * len(self)) + (other.labels or (None,) * len(other))
        seps = [s for s in (self.min_separation, other.min_separation) if s is not None]
        return PointSet(np.vstack([self.points, other.points]), labels, min(seps) if seps else None)


def _diameter(points: np.ndarray) -> float:
    # bounding-box diagonal; within a factor sqrt(dim) of the true diameter
    return float(np.linalg.norm(points.max(axis=0) - points.min(axis=0)))


@dataclass(frozen=True, eq=False)
class IndexSet:
    """Sorted, duplicate-free indices into a point set of size ``n``."""

    indices: np.ndarray
    n: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        if idx.size and (idx.min() < 0 or idx.max() >= self.n):
            raise GeometryError(f"indices must lie in [0, {self.n})")
        if np.unique(idx).size != idx.size:
            raise GeometryError("duplicate indices")
        idx = np.sort(idx)
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @classmethod
    def all(cls, n: int) -> "IndexSet":
        return cls(np.arange(n), n)

    @classmethod
    def from_mask(cls, mask) -> "IndexSet":
        mask = np.asarray(mask, dtype=bool)
        return cls(np.flatnonzero(mask), mask.size)

    def __len__(self) -> int:
        return int(self.indices.size)

    def __iter__(self):
        return iter(self.indices.tolist())

    def __contains__(self, i) -> bool:
        pos = np.searchsorted(self.indices, i)
        return bool(pos < self.indices.size and self.indices[pos] == i)

    def __eq__(self, other) -> bool:
        if not isinstance(other, IndexSet):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.indices, other.indices)

    def __hash__(self):
        return hash((self.n, self.indices.tobytes()))

    def mask(self) -> np.ndarray:
        m = np.zeros(self.n, dtype=bool)
        m[self.indices] = True
        return m

    def issubset(self, other: "IndexSet") -> bool:
        return self.n == other.n and bool(np.all(np.isin(self.indices, other.indices)))

    def union(self, other: "IndexSet") -> "IndexSet":
        return IndexSet(np.union1d(self.indices, other.indices), self.n)

    def complement(self) -> "IndexSet":
        return IndexSet.from_mask(~self.mask())


@dataclass(frozen=True, eq=False)
class ExhaustionChain:
    carrier: PointSet
    stages: tuple

    def __post_init__(self):
        stages = tuple(self.stages)
        if not stages:
            raise GeometryError("an exhaustion chain needs at least one stage")
        for a, b in zip(stages, stages[1:]):
            if not (a.issubset(b) and len(b) > len(a)):
                raise GeometryError("chain stages must be strictly nested and increasing")
        object.__setattr__(self, "stages", stages)

    @property
    def target(self) -> IndexSet:
        return self.stages[-1]

    def __len__(self) -> int:
        return len(self.stages)


# ---------------------------------------------------------------------------
# shapes


@dataclass(frozen=True)
class Sphere:
    radius: float = 1.0
    dim: int = 3
    center: tuple | None = None


@dataclass(frozen=True)
class Ball:
    radius: float = 1.0
    dim: int = 3
    center: tuple | None = None


@dataclass(frozen=True)
class Circle:
    radius: float = 1.0
    center: tuple | None = None


@dataclass(frozen=True)
class RotationBody:
    """Body of revolution ``x2^2 + x3^2 <= rho(x1)^2`` about the x1 axis in R^3.

    ``profile`` is ``"power"`` for ``rho(x1) = x1**-s`` or ``"exp"`` for
    ``rho(x1) = exp(-x1**s)``; the body is truncated to ``x_min <= x1 <= x_max``.
    Only the lateral surface is sampled, as rings of ``ring_size`` points.
    ``spacing="uniform"`` places the rings at equal steps in ``x1``;
    ``spacing="radius"`` makes the local ring density proportional to
    ``1 / max(rho(x1), rho_floor)``, so thin parts get rings about as far
    apart as they are wide.
    """

    profile: str = "power"
    s: float = 1.0
    x_min: float = 1.0
    x_max: float = 8.0
    ring_size: int = 6
    spacing: str = "uniform"
    rho_floor: float = 1e-2

    def rho(self, x1):
        x1 = np.asarray(x1, dtype=float)
        if self.profile == "power":
            return x1 ** (-self.s)
        if self.profile == "exp":
            return np.exp(-(x1**self.s))
        raise GeometryError(f"unknown rotation-body profile {self.profile!r}")


_SHAPES = {"sphere": Sphere, "ball": Ball, "circle": Circle, "rotation_body": RotationBody}


def shape_from_dict(desc: dict):
    """Build a shape descriptor from a config mapping ``{"kind": ..., **params}``."""
    desc = dict(desc)
    kind = desc.pop("kind", None)
    if kind not in _SHAPES:
        raise GeometryError(f"unknown shape kind {kind!r}; expected one of {sorted(_SHAPES)}")
    if "center" in desc and desc["center"] is not None:
        desc["center"] = tuple(desc["center"])
    return _SHAPES[kind](**desc)


def _fibonacci_sphere(n_pts: int, repair_poles: bool = True) -> np.ndarray:
    k = np.arange(n_pts) + 0.5
    z = 1.0 - 2.0 * k / n_pts
    r = np.sqrt(1.0 - z * z)
    theta = GOLDEN_ANGLE * np.arange(n_pts)
    x = np.column_stack([r * np.cos(theta), r * np.sin(theta), z])
    if repair_poles and n_pts >= 50:
        x = _repair_poles(x)
    return x


def _repair_poles(x: np.ndarray, cap: int = 10, ratio: float = 0.95, iters: int = 400) -> np.ndarray:
    """Spread apart the crowded spiral points next to each pole.

    The first and last few spiral points come in pairs closer than the
    lattice spacing.  Those with nearest-neighbour distance below
    ``ratio * median`` slide along the sphere under Coulomb repulsion from
    all other (fixed) points.
    """
    n = len(x)
    x = x.copy()
    h = math.sqrt(4 * math.pi / n)
    nn = nearest_neighbor_distances(x)
    ends = np.r_[np.arange(cap), np.arange(n - cap, n)]
    mov = np.unique(ends[nn[ends] < ratio * np.median(nn)])
    if mov.size == 0:
        return x
    rows = np.arange(mov.size)
    for it in range(iters):
        diff = x[mov][:, None, :] - x[None]
        r = np.linalg.norm(diff, axis=2)
        r[rows, mov] = np.inf
        force = (diff * (r**-3)[..., None]).sum(axis=1)
        force -= (force * x[mov]).sum(axis=1, keepdims=True) * x[mov]
        step = 0.02 * h * 0.99**it / np.linalg.norm(force, axis=1).max()
        moved = x[mov] + step * force
        x[mov] = moved / np.linalg.norm(moved, axis=1, keepdims=True)
    return x


def _random_sphere(n_pts: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    x = rng.standard_normal((n_pts, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _shift(points, center, dim):
    if center is None:
        return points
    center = np.asarray(center, dtype=float)
    if center.shape != (dim,):
        raise GeometryError(f"center must have {dim} coordinates")
    return points + center


def sample_shape(shape, N: int, seed: int = 0, *, random: bool = False,
                 min_separation: float | None = None) -> PointSet:
    """Sample ``N`` distinct points on (or in) ``shape``.

    Spheres and circles use deterministic quasi-uniform layouts (Fibonacci
    spiral on S^2 with its crowded polar points relaxed, equal angles on the
    circle); balls use a Vogel/Fibonacci radial spiral.  ``random=True`` switches to seeded uniform sampling, which
    is also the only option for spheres and balls in dimension >= 4.
    """
    if isinstance(shape, dict):
        shape = shape_from_dict(shape)
    if N < 2:
        raise GeometryError("N must be at least 2")
    rng = np.random.default_rng(seed)

    if isinstance(shape, Circle):
        if shape.radius <= 0:
            raise GeometryError("radius must be positive")
        if random:
            theta = np.sort(rng.uniform(0.0, 2 * math.pi, N))
        else:
            theta = 2 * math.pi * np.arange(N) / N
        pts = shape.radius * np.column_stack([np.cos(theta), np.sin(theta)])
        return PointSet(_shift(pts, shape.center, 2), min_separation=min_separation)

    if isinstance(shape, Sphere):
        if shape.radius <= 0:
            raise GeometryError("radius must be positive")
        if shape.dim < 2:
            raise GeometryError("sphere dimension must be at least 2")
        if shape.dim == 2:
            return sample_shape(Circle(shape.radius, shape.center), N, seed,
                                random=random, min_separation=min_separation)
        if shape.dim == 3 and not random:
            unit = _fibonacci_sphere(N)
        else:
            unit = _random_sphere(N, shape.dim, rng)
        return PointSet(_shift(shape.radius * unit, shape.center, shape.dim),
                        min_separation=min_separation)

    if isinstance(shape, Ball):
        if shape.radius <= 0:
            raise GeometryError("radius must be positive")
        d = shape.dim
        if d < 2:
            raise GeometryError("ball dimension must be at least 2")
        if random or d >= 4:
            unit = _random_sphere(N, d, rng)
            radii = rng.uniform(0.0, 1.0, N) ** (1.0 / d)
        else:
            radii = ((np.arange(N) + 0.5) / N) ** (1.0 / d)
            if d == 2:
                theta = GOLDEN_ANGLE * np.arange(N)
                unit = np.column_stack([np.cos(theta), np.sin(theta)])
            else:
                unit = _fibonacci_sphere(N, repair_poles=False)
        pts = shape.radius * radii[:, None] * unit
        return PointSet(_shift(pts, shape.center, d), min_separation=min_separation)

    if isinstance(shape, RotationBody):
        return _sample_rotation_body(shape, N, min_separation)

    raise GeometryError(f"unsupported shape {shape!r}")


def _sample_rotation_body(body: RotationBody, N: int, min_separation) -> PointSet:
    if body.x_max <= body.x_min:
        raise GeometryError("rotation body truncation needs x_max > x_min")
    if body.x_min <= 0 and body.profile == "power":
        raise GeometryError("power profile needs x_min > 0")
    if body.ring_size < 1:
        raise GeometryError("ring_size must be positive")
    if body.spacing not in ("uniform", "radius"):
        raise GeometryError(f"unknown ring spacing {body.spacing!r}; use 'uniform' or 'radius'")
    n_rings = max(1, N // body.ring_size)
    sizes = [len(c) for c in np.array_split(np.arange(N), n_rings)]
    u = (np.arange(n_rings) + 0.5) / n_rings
    if body.spacing == "uniform":
        x1 = body.x_min + (body.x_max - body.x_min) * u
    else:
        if not body.rho_floor > 0:
            raise GeometryError("radius spacing needs rho_floor > 0")
        # invert the cumulative ring density on a fine grid
        grid = np.linspace(body.x_min, body.x_max, 200_001)
        dens = 1.0 / np.maximum(body.rho(grid), body.rho_floor)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
        x1 = np.interp(u * cum[-1], cum, grid)
    rho = body.rho(x1)
    blocks = []
    for j, (m, r) in enumerate(zip(sizes, rho)):
        # alternate rings are rotated by half a step
        theta = 2 * math.pi * (np.arange(m) + 0.5 * (j % 2)) / m
        blocks.append(np.column_stack([np.full(m, x1[j]), r * np.cos(theta), r * np.sin(theta)]))
    pts = np.vstack(blocks)
    if min_separation is None:
        # the profile may shrink far below the ring spacing; only demand distinct points
        min_separation = 0.0
    return PointSet(pts, min_separation=min_separation)


# ---------------------------------------------------------------------------
# index machinery


def annuli_partition(ps: PointSet, q: float, origin=None) -> dict[int, IndexSet]:
    """Bin points into the shells ``q**k <= |x - origin| < q**(k+1)``.

    Returns ``{k: IndexSet}`` for every nonempty shell, ordered by ``k``.
    Points located exactly at ``origin`` belong to no shell.
    """
    if not q > 1:
        raise GeometryError("annulus ratio q must exceed 1")
    r = ps.norms(origin)
    out: dict[int, list[int]] = {}
    logq = math.log(q)
    for i, ri in enumerate(r):
        if ri <= 0:
            continue
        k = math.floor(math.log(ri) / logq)
        # repair floating-point error at shell boundaries
        while q**k > ri:
            k -= 1
        while q ** (k + 1) <= ri:
            k += 1
        out.setdefault(k, []).append(i)
    return {k: IndexSet(out[k], len(ps)) for k in sorted(out)}


def exhaustion_chain(ps: PointSet, target: IndexSet | None = None, rule: str = "by-distance",
                     stages: int = 5, *, seed: int = 0, origin=None) -> ExhaustionChain:
    """Nested index sets growing to ``target``.

    ``rule`` is ``"by-distance"`` (nearest to ``origin`` first),
    ``"by-index"`` or ``"random"`` (seeded permutation).  Stage ``j`` of ``m``
    holds the first ``floor(j * |target| / m)`` indices in that order.
    """
    if target is None:
        target = IndexSet.all(len(ps))
    size = len(target)
    if stages < 1:
        raise GeometryError("stages must be at least 1")
    if stages > size:
        raise GeometryError(f"cannot build {stages} strictly nested stages from {size} indices")
    idx = target.indices
    if rule == "by-index":
        order = idx
    elif rule == "by-distance":
        r = ps.norms(origin)[idx]
        order = idx[np.argsort(r, kind="stable")]
    elif rule == "random":
        order = np.random.default_rng(seed).permutation(idx)
    else:
        raise GeometryError(f"unknown ordering rule {rule!r}")
    sets = [IndexSet(order[: (j * size) // stages], len(ps)) for j in range(1, stages + 1)]
    return ExhaustionChain(ps, tuple(sets))

