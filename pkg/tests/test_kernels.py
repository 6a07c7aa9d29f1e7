import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from minenergy.geometry import Circle, PointSet, Sphere, sample_shape
from minenergy.kernels import (
    KernelError,
    KernelSpec,
    PositiveDefinitenessError,
    assemble_matrix,
    kernel_eval,
    load_explicit_matrix,
    surface_cell_c_reg,
)


def test_kernel_eval_examples():
    assert kernel_eval(KernelSpec.riesz(2, 3), [0, 0, 0], [1, 0, 0]) == 1.0
    assert kernel_eval(KernelSpec.riesz(1, 3), [0, 0, 0], [2, 0, 0]) == 0.25
    assert math.isclose(kernel_eval(KernelSpec.logarithmic(), [0, 0], [0.5, 0]), math.log(2), rel_tol=1e-15)


def test_kernel_eval_domain():
    with pytest.raises(KernelError):
        kernel_eval(KernelSpec.riesz(2, 3), [0, 0, 0], [0, 0, 0])
    with pytest.raises(KernelError):
        kernel_eval(KernelSpec.logarithmic(), [0, 0], [1.5, 0])


@pytest.mark.parametrize("alpha,dim", [(0.0, 3), (3.0, 3), (1.0, 1), (-1.0, 2)])
def test_riesz_order_validation(alpha, dim):
    with pytest.raises(KernelError):
        KernelSpec.riesz(alpha, dim)


def test_two_point_cell_rule():
    ps = PointSet(np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]))
    K = assemble_matrix(ps, KernelSpec.riesz(2, 3))
    np.testing.assert_array_equal(K.entries, [[2.0, 1.0], [1.0, 2.0]])
    # Cholesky pivots 2 and 1.5
    assert math.isclose(K.pd_certificate, 1.5, rel_tol=1e-14)


def test_explicit_matrices():
    K = assemble_matrix(None, KernelSpec.explicit(np.eye(2)))
    assert K.pd_certificate == 1.0
    with pytest.raises(PositiveDefinitenessError) as info:
        assemble_matrix(None, KernelSpec.explicit([[1.0, 2.0], [2.0, 1.0]]))
    assert info.value.minor == 2
    assert math.isclose(info.value.pivot, -3.0)
    with pytest.raises(KernelError):
        assemble_matrix(None, KernelSpec.explicit([[1.0, 0.5], [0.4, 1.0]]))


def test_fixed_diagonal():
    ps = sample_shape(Circle(), 6)
    K = assemble_matrix(ps, KernelSpec.riesz(1, 2, diagonal="fixed", diagonal_values=tuple([5.0] * 6)))
    np.testing.assert_array_equal(np.diag(K.entries), 5.0)
    with pytest.raises(KernelError):
        assemble_matrix(ps, KernelSpec.riesz(1, 2, diagonal="fixed", diagonal_values=(1.0, 2.0)))


def test_logarithmic_requires_small_disc():
    with pytest.raises(KernelError):
        assemble_matrix(sample_shape(Circle(0.97), 8), KernelSpec.logarithmic())
    K = assemble_matrix(sample_shape(Circle(0.4), 8), KernelSpec.logarithmic())
    assert K.pd_certificate > 0
    np.testing.assert_allclose(np.diag(K.entries), -np.log(0.4 * np.sin(np.pi / 8)))


def test_dimension_mismatch():
    with pytest.raises(KernelError):
        assemble_matrix(sample_shape(Circle(), 5), KernelSpec.riesz(2, 3))


def test_symmetry_exact_and_energy_principle(rng):
    ps = sample_shape(Sphere(1.0, 3), 300)
    K = assemble_matrix(ps, KernelSpec.riesz(2, 3))
    assert np.max(np.abs(K.entries - K.entries.T)) == 0.0
    W = rng.standard_normal((1000, len(ps)))
    q = np.einsum("ij,jk,ik->i", W, K.entries, W)
    assert np.all(q > 0)


@given(st.floats(0.1, 10.0), st.sampled_from([(1.0, 2), (0.5, 2), (2.0, 3), (1.0, 3)]))
def test_riesz_scaling_covariance(r, ad):
    alpha, dim = ad
    shape = Circle() if dim == 2 else Sphere(1.0, 3)
    ps = sample_shape(shape, 40)
    spec = KernelSpec.riesz(alpha, dim)
    K1 = assemble_matrix(ps, spec).entries
    K2 = assemble_matrix(ps.scaled(r), spec).entries
    np.testing.assert_allclose(K2, K1 * r ** (alpha - dim), rtol=1e-12)


def test_matrix_is_read_only():
    K = assemble_matrix(None, KernelSpec.explicit(np.eye(3)))
    with pytest.raises(ValueError):
        K.entries[0, 0] = 2.0


def test_load_explicit_csv_and_json(tmp_path):
    (tmp_path / "m.csv").write_text("2\n2,1\n1,2\n")
    np.testing.assert_array_equal(load_explicit_matrix(tmp_path / "m.csv"), [[2, 1], [1, 2]])
    (tmp_path / "m.json").write_text('{"N": 2, "entries": [2, 1, 1, 2]}')
    np.testing.assert_array_equal(load_explicit_matrix(tmp_path / "m.json"), [[2, 1], [1, 2]])
    (tmp_path / "bad.csv").write_text("3\n2,1\n1,2\n")
    with pytest.raises(KernelError):
        load_explicit_matrix(tmp_path / "bad.csv")


def test_surface_cell_constant_closed_form():
    # for alpha=2, n=3: mean 1/r over a unit-area disc is 128/(45 pi) * sqrt(pi) / ... ; closed form below
    closed = (3 * math.pi / 8) * math.sqrt(math.sqrt(3) / (2 * math.pi))
    assert math.isclose(surface_cell_c_reg(2, 3), closed, rel_tol=1e-9)
    with pytest.raises(KernelError):
        surface_cell_c_reg(0.5, 3)
