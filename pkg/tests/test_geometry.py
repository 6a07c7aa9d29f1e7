import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from minenergy.geometry import (
    Ball,
    Circle,
    ExhaustionChain,
    GeometryError,
    IndexSet,
    PointSet,
    RotationBody,
    Sphere,
    annuli_partition,
    exhaustion_chain,
    nearest_neighbor_distances,
    sample_shape,
    shape_from_dict,
)


def test_pointset_rejects_duplicates_and_bad_values():
    with pytest.raises(GeometryError):
        PointSet(np.array([[0.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(GeometryError):
        PointSet(np.array([[0.0, np.nan], [1.0, 0.0]]))
    with pytest.raises(GeometryError):
        PointSet(np.array([1.0, 2.0]))


def test_pointset_near_duplicate_threshold():
    pts = np.array([[0.0, 0.0], [1e-12, 0.0], [1.0, 1.0]])
    with pytest.raises(GeometryError):
        PointSet(pts)
    # an explicit zero threshold only rejects exact duplicates
    assert len(PointSet(pts, min_separation=0.0)) == 3


def test_nearest_neighbor_distances():
    d = nearest_neighbor_distances(np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]))
    np.testing.assert_allclose(d, [1.0, 1.0, 2.0])


def test_indexset_basics():
    A = IndexSet([3, 1, 2], 5)
    assert A.indices.tolist() == [1, 2, 3]
    assert 2 in A and 0 not in A
    assert A.complement().indices.tolist() == [0, 4]
    assert A.union(IndexSet([0], 5)) == IndexSet([0, 1, 2, 3], 5)
    assert IndexSet([1, 2], 5).issubset(A)
    assert IndexSet.from_mask(A.mask()) == A
    with pytest.raises(GeometryError):
        IndexSet([1, 1], 5)
    with pytest.raises(GeometryError):
        IndexSet([5], 5)


def test_chain_must_be_strictly_nested():
    ps = sample_shape(Circle(), 10)
    with pytest.raises(GeometryError):
        ExhaustionChain(ps, (IndexSet([0, 1], 10), IndexSet([0, 1], 10)))
    with pytest.raises(GeometryError):
        ExhaustionChain(ps, (IndexSet([0, 1], 10), IndexSet([2, 3, 4], 10)))


def test_circle_sampling_is_equiangular():
    ps = sample_shape(Circle(2.0), 8)
    np.testing.assert_allclose(ps.norms(), 2.0)
    ang = np.sort(np.mod(np.arctan2(ps.points[:, 1], ps.points[:, 0]), 2 * np.pi))
    np.testing.assert_allclose(np.diff(ang), 2 * np.pi / 8, atol=1e-12)


def test_sphere_sampling_on_surface_and_quasi_uniform():
    ps = sample_shape(Sphere(1.5, 3), 500)
    np.testing.assert_allclose(ps.norms(), 1.5, atol=1e-12)
    nn = nearest_neighbor_distances(ps.points)
    assert nn.min() / np.median(nn) > 0.8


def test_sphere_center_and_random_mode():
    ps = sample_shape(Sphere(1.0, 3, center=(1.0, 2.0, 3.0)), 50)
    np.testing.assert_allclose(ps.norms(np.array([1.0, 2.0, 3.0])), 1.0, atol=1e-12)
    a = sample_shape(Sphere(1.0, 4), 30, seed=3)
    b = sample_shape(Sphere(1.0, 4), 30, seed=3)
    np.testing.assert_array_equal(a.points, b.points)
    np.testing.assert_allclose(a.norms(), 1.0, atol=1e-12)


def test_ball_sampling_inside():
    ps = sample_shape(Ball(2.0, 3), 300)
    assert np.all(ps.norms() <= 2.0 + 1e-12)
    ps2 = sample_shape(Ball(1.0, 2), 100)
    assert np.all(ps2.norms() <= 1.0 + 1e-12)


def test_sampling_errors():
    with pytest.raises(GeometryError):
        sample_shape(Circle(), 1)
    with pytest.raises(GeometryError):
        sample_shape(Circle(-1.0), 10)
    with pytest.raises(GeometryError):
        sample_shape(RotationBody(x_min=2.0, x_max=1.0), 30)
    with pytest.raises(GeometryError):
        sample_shape(RotationBody(spacing="bogus"), 30)
    with pytest.raises(GeometryError):
        shape_from_dict({"kind": "torus"})


def test_rotation_body_rings_follow_profile():
    body = RotationBody("power", 1.0, 1.0, 8.0, ring_size=6)
    ps = sample_shape(body, 120)
    x1 = ps.points[:, 0]
    r = np.hypot(ps.points[:, 1], ps.points[:, 2])
    np.testing.assert_allclose(r, body.rho(x1), rtol=1e-12)
    assert len(np.unique(x1)) == 20


def test_rotation_body_radius_spacing_denser_where_thin():
    body = RotationBody("power", 1.0, 1.0, 16.0, ring_size=3, spacing="radius")
    x = np.unique(sample_shape(body, 600).points[:, 0])
    gaps = np.diff(x)
    # ring spacing proportional to rho = 1/x
    np.testing.assert_allclose(gaps * 0.5 * (x[1:] + x[:-1]), np.median(gaps * x[1:]), rtol=0.05)


def test_rotation_body_tiny_radius_allowed():
    ps = sample_shape(RotationBody("exp", 2.0, 1.0, 8.0, ring_size=3), 60)
    r = np.hypot(ps.points[:, 1], ps.points[:, 2])
    assert r.min() < 1e-25


def test_annuli_partition_example():
    pts = np.array([[1.5, 0.0], [3.0, 0.0], [0.0, 5.0], [7.9, 0.0], [0.5, 0.0]])
    parts = annuli_partition(PointSet(pts), 2.0)
    assert {k: v.indices.tolist() for k, v in parts.items()} == {-1: [4], 0: [0], 1: [1], 2: [2, 3]}
    with pytest.raises(GeometryError):
        annuli_partition(PointSet(pts), 1.0)


@given(st.floats(1.1, 5.0), st.integers(0, 1000))
def test_annuli_partition_properties(q, seed):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((40, 3)) * rng.uniform(0.1, 50, size=(40, 1))
    ps = PointSet(pts)
    parts = annuli_partition(ps, q)
    seen = np.concatenate([v.indices for v in parts.values()])
    assert sorted(seen.tolist()) == list(range(40))
    r = ps.norms()
    for k, v in parts.items():
        rk = r[v.indices]
        assert np.all(rk >= q**k * (1 - 1e-12)) and np.all(rk < q ** (k + 1) * (1 + 1e-12))


@pytest.mark.parametrize("rule", ["by-distance", "by-index", "random"])
def test_exhaustion_chain_rules(rule):
    ps = sample_shape(Circle(), 20)
    ch = exhaustion_chain(ps, None, rule, 4, seed=1)
    assert [len(s) for s in ch.stages] == [5, 10, 15, 20]
    assert ch.target == IndexSet.all(20)
    if rule == "by-distance":
        o = np.array([2.0, 0.0])
        ch = exhaustion_chain(ps, None, rule, 4, origin=o)
        r = ps.norms(o)
        assert r[ch.stages[0].indices].max() <= r[np.setdiff1d(np.arange(20), ch.stages[0].indices)].min()


def test_exhaustion_chain_too_many_stages():
    ps = sample_shape(Circle(), 4)
    with pytest.raises(GeometryError):
        exhaustion_chain(ps, None, "by-index", 5)


def test_random_chain_is_seeded():
    ps = sample_shape(Circle(), 30)
    a = exhaustion_chain(ps, None, "random", 3, seed=7)
    b = exhaustion_chain(ps, None, "random", 3, seed=7)
    assert all(x == y for x, y in zip(a.stages, b.stages))


def test_scaled_pointset():
    ps = sample_shape(Circle(), 12)
    assert math.isclose(float(ps.scaled(3.0).norms().max()), 3.0)
