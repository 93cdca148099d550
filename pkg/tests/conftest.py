import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sigma2sphere.fields import project
from sigma2sphere.grid import build_grid

settings.register_profile(
    "sigma2", max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("sigma2")


@pytest.fixture(scope="session")
def g6():
    return build_grid(6)


@pytest.fixture(scope="session")
def g8():
    return build_grid(8)


def random_field(grid, rng, degree=4, amplitude=0.1):
    """Smooth random field of the given degree, scaled to sup norm ``amplitude``."""
    c = np.zeros(grid.dim)
    sel = (grid.degree <= degree) & (grid.degree >= 1)
    c[sel] = rng.normal(size=sel.sum()) / (1.0 + grid.degree[sel]) ** 2
    from sigma2sphere.fields import ScalarField

    f = ScalarField(grid, c)
    return ScalarField(grid, c * amplitude / np.max(np.abs(f.nodal)))


def poly_field(grid, fn):
    return project(grid, fn(grid.nodes))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
