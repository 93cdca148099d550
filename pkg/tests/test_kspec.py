import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sigma2sphere import kspec
from sigma2sphere.errors import ConfigError, NonPositiveKError
from sigma2sphere.grid import build_grid

points = st.lists(st.floats(-1, 1), min_size=5, max_size=5).map(np.array).filter(lambda v: np.linalg.norm(v) > 0.1)


def _unit(v):
    return v / np.linalg.norm(v)


def test_presets_values():
    x = np.eye(5)
    assert kspec.linear_eps(0.5)(x).tolist() == [6, 6, 6, 6, 6.5]
    assert kspec.x5_squared(0.1)(x)[4] == pytest.approx(6 * (1 + 0.1 * 0.8))
    assert kspec.morse_a()(x).tolist() == pytest.approx([4.2, 5.4, 6.9, 7.2, 6.3 - 0.42])


def test_deformation():
    K = kspec.morse_a().deformed(0.25)
    x = np.eye(5)
    assert K(x) == pytest.approx(0.75 * 6 + 0.25 * kspec.morse_a()(x))
    with pytest.raises(ConfigError):
        kspec.morse_a().deformed(1.5)


@given(points)
def test_ambient_derivatives_match_finite_differences(x):
    K = kspec.morse_a()
    x = _unit(x)
    h = 1e-6
    E = np.eye(5)
    fd_g = np.array([(K._raw(x + h * e) - K._raw(x - h * e))[0] / (2 * h) for e in E])
    assert np.abs(fd_g - K.ambient_gradient(x)[0]).max() < 1e-7
    fd_H = np.array([(K._raw_grad(x + h * e) - K._raw_grad(x - h * e))[0] / (2 * h) for e in E])
    assert np.abs(fd_H - K.ambient_hessian(x)[0]).max() < 1e-6


@given(points)
def test_tangential_gradient(x):
    K = kspec.morse_a()
    x = _unit(x)
    g = K.gradient(x)[0]
    assert abs(g @ x) < 1e-13


def test_laplacian_of_quadratic_at_poles():
    # traceless quadratic q: Lap q = -10 q on S^4, and Lap x5^4 = -16 at e5
    D = np.array(kspec.MORSE_A_DIAGONAL)
    K = kspec.morse_a(quartic=0.0, diagonal=D - D.mean())
    lap = K.laplacian(np.eye(5))
    assert lap == pytest.approx(-10 * 0.6 * (D - D.mean()), abs=1e-12)
    Q = kspec.from_terms([[[0, 0, 0, 0, 4], 1.0]])
    assert Q.laplacian(np.eye(5)[4:])[0] == pytest.approx(-16.0)


def test_hessian_tangential_and_symmetric():
    K = kspec.morse_a()
    x = _unit(np.array([0.3, 0.1, -0.2, 0.6, 0.5]))[None]
    H = K.hessian(x)[0]
    assert np.abs(H - H.T).max() < 1e-14
    assert np.abs(H @ x[0]).max() < 1e-14


def test_evenness():
    assert kspec.morse_a().is_even()
    assert not kspec.linear_eps().is_even()


def test_check_positive():
    g = build_grid(4)
    kspec.morse_a().check_positive(g)
    with pytest.raises(NonPositiveKError, match="node"):
        kspec.from_terms([[[0, 0, 0, 0, 0], 1.0], [[1, 0, 0, 0, 0], -2.0]]).check_positive(g)


def test_validation():
    with pytest.raises(ConfigError):
        kspec.KSpec(np.zeros((1, 4), int), [1.0])
    with pytest.raises(ConfigError):
        kspec.KSpec(-np.ones((1, 5), int), [1.0])
    with pytest.raises(ConfigError):
        kspec.from_terms([])
    with pytest.raises(ConfigError):
        kspec.preset("unknown")


def test_to_dict_round_trip():
    K = kspec.morse_a()
    d = K.to_dict()
    K2 = kspec.from_terms(d["terms"], name=d["name"])
    x = np.random.default_rng(0).normal(size=(10, 5))
    assert np.array_equal(K(x), K2(x))
