import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from minenergy.equilibrium import robin_capacity
from minenergy.gauss import (
    ScreenError,
    equilibrium_constant,
    minimality_battery,
    representation_solution,
    solve_gauss,
    verify_characterization,
)
from minenergy.geometry import IndexSet
from minenergy.measures import MeasureError, energy, energy_distance
from minenergy.qp import InfeasibleError, active_set_oracle

from conftest import circle_instance, explicit, random_spd

K2 = explicit([[2.0, 1.0], [1.0, 2.0]])


def perturb(K, f, A, lam, frac=0.1):
    """Move ``frac`` of the mass of ``lam`` to the index of A with the worst potential."""
    U = K.entries @ lam + f
    j = A.indices[np.argmax(U[A.indices])]
    mu = (1 - frac) * lam
    mu[j] += frac
    return mu


def test_zero_field_reduces_to_capacity(rng):
    K = explicit(random_spd(12, rng, kind="positive"))
    r = solve_gauss(K)
    cap = robin_capacity(K)
    np.testing.assert_array_equal(r.minimizer.weights, cap.equilibrium.weights)
    assert math.isclose(r.c_f, cap.w_value, rel_tol=1e-12)
    assert math.isclose(equilibrium_constant(K, None, cap.equilibrium), cap.w_value, rel_tol=1e-12)


def test_zeta_in_set(rng):
    K = explicit(random_spd(10, rng, kind="positive"))
    A = IndexSet(range(6), 10)
    zeta = np.zeros(10)
    zeta[[1, 4]] = [0.4, 0.6]
    r = solve_gauss(K, -(K.entries @ zeta), A)
    assert energy_distance(K, r.minimizer, zeta) <= 1e-8
    assert math.isclose(r.w_f, -energy(K, zeta), rel_tol=1e-10)
    assert abs(r.c_f) <= 1e-8


def test_two_point_oracle_instance():
    f = np.array([0.0, -1.0])
    r = solve_gauss(K2, f)
    o = active_set_oracle(K2.entries, f, "simplex")
    np.testing.assert_allclose(r.minimizer.weights, o.weights, atol=1e-8)
    np.testing.assert_allclose(r.minimizer.weights, [0.0, 1.0], atol=1e-15)
    assert math.isclose(r.w_f, 0.0, abs_tol=1e-15)
    # c_f = lambda'(K lambda + f) and c_f = w_f - f'lambda
    assert math.isclose(r.c_f, 1.0, rel_tol=1e-12)
    assert abs(r.c_f - r.c_f_alt) <= 1e-12


def test_equilibrium_constant_cancellation(rng):
    K = explicit(random_spd(6, rng))
    lam = rng.dirichlet(np.ones(6))
    assert abs(equilibrium_constant(K, -(K.entries @ lam), lam)) <= 1e-14


def test_gate_and_infinite_field():
    with pytest.raises(InfeasibleError):
        solve_gauss(K2, [np.inf, np.inf])
    r = solve_gauss(K2, [np.inf, 0.0])
    np.testing.assert_array_equal(r.minimizer.weights, [0.0, 1.0])
    assert r.c_f == r.c_f_alt == 2.0


def test_characterization_examples(rng):
    K = explicit(random_spd(8, rng, kind="positive"))
    f = rng.standard_normal(8)
    A = IndexSet(range(8), 8)
    r = solve_gauss(K, f, A)
    ok = verify_characterization(K, f, A, r.minimizer)
    assert ok.passed and ok.residual <= 1e-8
    bad = verify_characterization(K, f, A, perturb(K, f, A, r.minimizer.weights))
    assert not bad.passed and bad.residual >= 1e-3
    single = IndexSet([3], 8)
    e = np.zeros(8)
    e[3] = 1.0
    assert verify_characterization(K, f, single, e).passed


def test_characterization_rejects_inadmissible():
    res = verify_characterization(K2, None, IndexSet([0], 2), [0.5, 0.5])
    assert not res.admissible and not res.passed


@given(st.integers(0, 100_000))
def test_kkt_iff_optimal(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 10))
    K = explicit(random_spd(n, rng))
    f = rng.standard_normal(n)
    r = solve_gauss(K, f)
    assert verify_characterization(K, f, None, r.minimizer, 1e-8, w_f=r.w_f).passed
    # any candidate that passes is the minimizer
    cand = rng.dirichlet(np.ones(n))
    if verify_characterization(K, f, None, cand, 1e-9, w_f=r.w_f).passed:
        assert energy_distance(K, cand, r.minimizer) <= 1e-6
    assert abs(r.c_f - r.c_f_alt) <= 1e-10 * max(1.0, abs(r.c_f))


@given(st.integers(0, 100_000), st.floats(-5.0, 5.0))
def test_constant_shift_invariance(seed, c):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 10))
    K = explicit(random_spd(n, rng))
    f = rng.standard_normal(n)
    a = solve_gauss(K, f)
    b = solve_gauss(K, f + c)
    np.testing.assert_allclose(a.minimizer.weights, b.minimizer.weights, atol=1e-8)
    assert math.isclose(b.w_f, a.w_f + 2 * c, rel_tol=1e-9, abs_tol=1e-9)
    assert math.isclose(b.c_f, a.c_f + c, rel_tol=1e-9, abs_tol=1e-9)


@given(st.integers(0, 100_000))
def test_lower_bound_minus_potential(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 12))
    K = explicit(random_spd(n, rng, kind="positive"))
    zeta = rng.random(n)
    zeta *= rng.uniform(0.1, 1.0) / zeta.sum()
    A = IndexSet(np.sort(rng.choice(n, int(rng.integers(1, n)), replace=False)), n)
    r = representation_solution(K, zeta, A)
    assert r.w_f >= -energy(K, zeta) - 1e-12
    assert r.eta >= -1e-12
    if all(r.screens.values()):
        assert r.representation_gap <= 1e-8
        assert abs(r.c_f - r.eta) <= 1e-8


def test_representation_zeta_in_set():
    K, A, _ = circle_instance(40)
    zeta = np.zeros(41)
    zeta[[0, 7, 19]] = [0.2, 0.3, 0.5]
    r = representation_solution(K, zeta, A)
    assert abs(r.eta) <= 1e-12
    assert r.representation_gap <= 1e-8
    assert energy_distance(K, r.minimizer, zeta) <= 1e-8


def test_representation_zero_zeta():
    K, A, _ = circle_instance(40)
    r = representation_solution(K, np.zeros(41), A)
    cap = robin_capacity(K, A)
    assert math.isclose(r.eta, 1 / cap.capacity, rel_tol=1e-12)
    assert math.isclose(r.c_f, cap.w_value, rel_tol=1e-10)
    assert energy_distance(K, r.minimizer, cap.equilibrium) <= 1e-8


def test_representation_errors():
    with pytest.raises(MeasureError):
        representation_solution(K2, [0.8, 0.8], None)
    with pytest.raises(MeasureError):
        representation_solution(K2, [-0.1, 0.5], None)


def test_circle_representation_and_battery():
    K, A, zeta = circle_instance(200)
    r = representation_solution(K, zeta, A)
    assert r.screens == {"frostman": True, "domination": True}
    assert r.representation_gap <= 1e-6
    assert abs(r.c_f - r.eta) <= 1e-6
    b = minimality_battery(K, zeta, A, r, trials=50, seed=0)
    assert b.trials == 50 and b.violations == 0
    assert sum(b.families.values()) == 50
    # the minimizer itself attains equality in all three properties
    lam = r.minimizer.weights
    assert energy(K, lam) <= energy(K, lam + 0.1 * zeta.weights)


def test_battery_refuses_without_screens():
    K, A, zeta = circle_instance(20)
    r = solve_gauss(K, -(K.entries @ zeta.weights), A)
    with pytest.raises(ScreenError):
        minimality_battery(K, zeta, A, r)
    rep = representation_solution(K, zeta, A)
    forged = type(rep)(**{**rep.__dict__, "screens": {"frostman": False, "domination": True}})
    with pytest.raises(ScreenError):
        minimality_battery(K, zeta, A, forged)
