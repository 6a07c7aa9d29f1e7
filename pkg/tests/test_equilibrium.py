import math

import numpy as np
import pytest

from minenergy.equilibrium import (
    capacitary_direct,
    capacitary_gap,
    capacity_monotone_check,
    frostman_screen,
    robin_capacity,
)
from minenergy.geometry import Circle, ExhaustionChain, IndexSet, exhaustion_chain, sample_shape
from minenergy.kernels import KernelSpec, assemble_matrix
from minenergy.measures import energy

from conftest import circle_instance, explicit, random_spd

K2 = explicit([[2.0, 1.0], [1.0, 2.0]])


def test_two_point_capacity():
    r = robin_capacity(K2)
    np.testing.assert_allclose(r.equilibrium.weights, [0.5, 0.5], atol=1e-15)
    assert math.isclose(r.w_value, 1.5) and math.isclose(r.capacity, 2 / 3)
    np.testing.assert_allclose(r.capacitary.weights, [1 / 3, 1 / 3], atol=1e-15)
    np.testing.assert_allclose(K2.entries @ r.capacitary.weights, 1.0, atol=1e-15)
    assert r.frostman_screen and r.frostman_residual <= 1e-15
    np.testing.assert_allclose(capacitary_direct(K2).weights, [1 / 3, 1 / 3], atol=1e-15)


def test_singleton_capacity(rng):
    M = random_spd(5, rng)
    K = explicit(M)
    for j in range(5):
        r = robin_capacity(K, IndexSet([j], 5))
        assert r.equilibrium.weights[j] == 1.0
        assert math.isclose(r.capacity, 1 / M[j, j], rel_tol=1e-14)
    nu = capacitary_direct(explicit(np.eye(3)), IndexSet([1], 3))
    np.testing.assert_array_equal(nu.weights, [0.0, 1.0, 0.0])


def test_empty_set_rejected():
    with pytest.raises(ValueError):
        robin_capacity(K2, IndexSet([], 2))


@pytest.mark.parametrize("seed", range(20))
def test_duality_identities(seed):
    rng = np.random.default_rng(seed)
    K = explicit(random_spd(30, rng, kind="positive"))
    A = IndexSet(np.sort(rng.choice(30, 20, replace=False)), 30)
    r = robin_capacity(K, A)
    cap = r.capacity
    assert math.isclose(r.capacitary.mass, cap, rel_tol=1e-8)
    assert math.isclose(energy(K, r.capacitary), cap, rel_tol=1e-8)
    np.testing.assert_allclose(r.capacitary.weights, r.equilibrium.weights * cap, rtol=1e-14)
    U = K.entries @ r.capacitary.weights
    assert np.all(U[A.indices] >= 1 - 1e-9)
    assert np.all(U[r.capacitary.weights > 0] <= 1 + 1e-9)
    assert r.kkt_residual <= 1e-9
    if r.frostman_screen:
        assert r.frostman_residual <= 1e-6


def test_riesz_capacity_scaling():
    ps = sample_shape(Circle(), 50)
    spec = KernelSpec.riesz(1.0, 2)
    c1 = robin_capacity(assemble_matrix(ps, spec)).capacity
    for r in (0.5, 3.0):
        cr = robin_capacity(assemble_matrix(ps.scaled(r), spec)).capacity
        assert math.isclose(cr, c1 * r ** (2 - 1.0), rel_tol=1e-8)


def test_capacitary_direct_on_larger_carrier():
    K, A, _ = circle_instance(100)
    assert capacitary_gap(K, A) <= 1e-6
    nu = capacitary_direct(K, A)
    assert nu.weights[-1] == 0.0


def test_monotone_chain():
    K, A, _ = circle_instance(100)
    ps = K.carrier
    ch = exhaustion_chain(ps, A, "by-distance", 10, origin=np.array([2.0, 0.0]))
    caps = capacity_monotone_check(K, ch)
    assert np.all(np.diff(caps) > 0)
    assert caps[-1] == robin_capacity(K, A).capacity or math.isclose(
        caps[-1], robin_capacity(K, A).capacity, rel_tol=1e-12)
    single = ExhaustionChain(ps, (A,))
    assert len(capacity_monotone_check(K, single)) == 1


def test_frostman_screen_cases():
    assert frostman_screen(K2, None)
    # a matrix whose equilibrium solve needs a negative weight
    M = np.array([[1.0, 0.7, 0.0], [0.7, 1.0, 0.7], [0.0, 0.7, 1.0]])
    K = explicit(M)
    assert not frostman_screen(K, None)
    r = robin_capacity(K)
    assert r.frostman_residual > 1e-3 and r.kkt_residual <= 1e-9
