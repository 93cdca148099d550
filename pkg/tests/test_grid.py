import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sigma2sphere.fields import (
    ScalarField,
    coordinate,
    gradient,
    hessian,
    integrate,
    laplacian,
    project,
    spectral_gradient,
)
from sigma2sphere.grid import SPHERE_VOLUME, build_grid, harmonic_dimension


def test_dimension_counts(g6):
    assert g6.dim == sum(harmonic_dimension(l) for l in range(7))
    assert harmonic_dimension(1) == 5
    assert harmonic_dimension(2) == 14


def test_volume_and_moments(g8):
    x = g8.nodes
    assert g8.weights.sum() == pytest.approx(SPHERE_VOLUME, rel=1e-14)
    assert g8.weights @ x[:, 2] ** 2 == pytest.approx(SPHERE_VOLUME / 5, rel=1e-13)
    assert g8.weights @ x[:, 0] ** 4 == pytest.approx(3 * SPHERE_VOLUME / 35, rel=1e-13)
    assert g8.weights @ (x[:, 0] ** 2 * x[:, 3] ** 2) == pytest.approx(SPHERE_VOLUME / 35, rel=1e-13)


def test_nodes_on_sphere(g6):
    assert np.allclose(np.linalg.norm(g6.nodes, axis=1), 1.0, atol=1e-14)


def test_basis_orthonormal(g6):
    B = g6.basis_eval()
    gram = (B * g6.weights[:, None]).T @ B
    assert np.abs(gram - np.eye(g6.dim)).max() < 1e-12


def test_larger_azimuth_count_same_integrals():
    g = build_grid(4, azimuth_count=14)
    f = coordinate(g, 0)
    assert integrate(f * f) == pytest.approx(SPHERE_VOLUME / 5, rel=1e-12)


@pytest.mark.parametrize("L, nphi", [(4, 9), (4, 6), (3, 8)])
def test_bad_grid_rejected(L, nphi):
    with pytest.raises(ValueError):
        build_grid(L, azimuth_count=nphi)


@given(st.integers(0, 2**32 - 1))
def test_analysis_inverts_synthesis(seed):
    g = build_grid(6)
    c = np.random.default_rng(seed).normal(size=g.dim)
    assert np.abs(g.analyze(g.synthesize(c)) - c).max() < 1e-12


def test_laplacian_eigenvalues(g8):
    rng = np.random.default_rng(1)
    c = rng.normal(size=g8.dim)
    lap = laplacian(ScalarField(g8, c))
    ell = g8.degree
    assert np.abs(lap.coeffs + ell * (ell + 3) * c).max() < 1e-9 * np.abs(c).max() * 80


def test_coordinate_derivatives(g6):
    x = g6.nodes
    Pi = np.eye(5)[None] - x[:, :, None] * x[:, None, :]
    for j in range(5):
        f = coordinate(g6, j)
        assert np.abs(gradient(f) - Pi[:, :, j]).max() < 1e-12
        assert np.abs(hessian(f) + x[:, j, None, None] * Pi).max() < 1e-12


def test_gradient_of_quadratic(g6):
    f = project(g6, g6.nodes[:, 4] ** 2)
    x = g6.nodes
    expect = 2 * x[:, 4:5] * (np.eye(5)[4] - x[:, 4:5] * x)
    assert np.abs(gradient(f) - expect).max() < 1e-12


def test_spectral_gradient_matches_field_gradient(g6):
    f = project(g6, np.exp(0.3 * g6.nodes[:, 1]) * g6.nodes[:, 3])
    G = spectral_gradient(g6, f.nodal[:, None])[:, 0]
    assert np.abs(G - gradient(f)).max() < 1e-11


@given(st.integers(0, 2**32 - 1))
def test_integration_by_parts(seed):
    g = build_grid(6)
    rng = np.random.default_rng(seed)
    f = ScalarField(g, rng.normal(size=g.dim) * (g.degree <= 3))
    lhs = g.weights @ np.sum(gradient(f) ** 2, axis=1)
    rhs = -g.weights @ (f.nodal * laplacian(f).nodal)
    assert lhs == pytest.approx(rhs, rel=1e-11)


def test_evaluate_at_matches_nodes(g6):
    rng = np.random.default_rng(2)
    f = ScalarField(g6, rng.normal(size=g6.dim))
    idx = rng.choice(g6.size, 20, replace=False)
    assert np.abs(f.at(g6.nodes[idx]) - f.nodal[idx]).max() < 1e-11
    assert np.abs(g6.basis_at(g6.nodes[idx]) @ f.coeffs - f.nodal[idx]).max() < 1e-11


def test_evaluate_off_grid_polynomial(g6):
    f = project(g6, g6.nodes[:, 0] * g6.nodes[:, 2] ** 2 - g6.nodes[:, 4])
    p = np.random.default_rng(3).normal(size=(7, 5))
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    assert np.abs(f.at(p) - (p[:, 0] * p[:, 2] ** 2 - p[:, 4])).max() < 1e-12


def test_product_projection_exact_within_degree(g6):
    a, b = coordinate(g6, 1), coordinate(g6, 2)
    ab = a * b
    assert np.abs(ab.nodal - g6.nodes[:, 1] * g6.nodes[:, 2]).max() < 1e-13


def test_build_grid_cached():
    assert build_grid(4) is build_grid(4)
