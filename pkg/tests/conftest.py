import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def random_spd(n, rng, kind="gram"):
    """Random SPD matrix with positive entries (kernel-like) or a general Gram matrix."""
    if kind == "positive":
        X = rng.random((n, 3)) * 4
        D = np.linalg.norm(X[:, None] - X[None, :], axis=-1)
        K = np.exp(-D)
        K[np.diag_indices(n)] = 1.0 + rng.random(n)
        return K
    M = rng.standard_normal((n, n))
    return M @ M.T / n + 0.5 * np.eye(n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def circle_instance(n=200, exterior=(2.0, 0.0), alpha=1.0):
    """Unit circle in R^2 with one exterior point appended, riesz kernel of order ``alpha``.

    Returns ``(K, A, zeta)`` with ``A`` the circle points and ``zeta`` the unit
    mass at the exterior point.
    """
    from minenergy.geometry import Circle, IndexSet, PointSet, sample_shape
    from minenergy.kernels import KernelSpec, assemble_matrix
    from minenergy.measures import DiscreteMeasure

    pts = np.vstack([sample_shape(Circle(), n).points, np.asarray(exterior, dtype=float)])
    K = assemble_matrix(PointSet(pts), KernelSpec.riesz(alpha, 2))
    return K, IndexSet(range(n), n + 1), DiscreteMeasure.dirac(n, n + 1)


def explicit(M):
    from minenergy.kernels import KernelSpec, assemble_matrix

    return assemble_matrix(None, KernelSpec.explicit(np.asarray(M, dtype=float)))
