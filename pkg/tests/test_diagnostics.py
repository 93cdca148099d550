import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigma2sphere import kspec
from sigma2sphere.curvature import residual_nodal
from sigma2sphere.diagnostics import (
    bubble_values,
    diagnose,
    make_bubble,
    profile_report,
    refine_max,
    renormalize,
)
from sigma2sphere.fields import constant, coordinate, project
from sigma2sphere.grid import SPHERE_VOLUME, build_grid

K6 = kspec.constant(6.0)


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def test_trivial_bubble(g6):
    w = make_bubble(np.eye(5)[0], 1.0, K6, g6)
    assert np.abs(w.nodal).max() < 1e-14


def test_bubble_peaks_at_P():
    P = _unit([0.3, -0.2, 0.5, 0.1, -0.7])
    x = np.random.default_rng(0).normal(size=(200, 5))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    vals = bubble_values(P, 3.0, K6, x)
    assert bubble_values(P, 3.0, K6, P[None])[0] == pytest.approx(np.log(3.0), rel=1e-14)
    assert vals.max() < np.log(3.0)
    assert bubble_values(P, 3.0, K6, -P[None])[0] == pytest.approx(-np.log(3.0), rel=1e-14)


def test_bubble_offset_for_other_constant(g6):
    c = 3.0
    w = make_bubble(np.eye(5)[4], 1.0, kspec.constant(c), g6)
    assert np.abs(w.nodal - 0.25 * np.log(6 / c)).max() < 1e-14


def test_bubble_residual_refines():
    P = np.eye(5)[1]
    res = []
    for L in (8, 12):
        g = build_grid(L)
        res.append(np.abs(residual_nodal(make_bubble(P, 2.0, K6, g), K6)).max())
    assert res[1] < res[0] / 10


def test_refine_max_off_node(g8):
    P = _unit([0.31, 0.22, -0.4, 0.5, 0.6])
    w = project(g8, np.exp(2 * g8.nodes @ P))
    i = int(np.argmax(w.nodal))
    Q = refine_max(w, g8.nodes[i])
    assert np.arccos(min(1.0, Q @ P)) < 1e-6


@settings(max_examples=5)
@given(st.lists(st.floats(-1, 1), min_size=5, max_size=5).filter(lambda v: np.linalg.norm(v) > 0.2), st.floats(1.2, 2.0))
def test_round_trip(P, t):
    g = build_grid(12)
    P = _unit(P)
    r = renormalize(make_bubble(P, t, K6, g), K6)
    assert np.arccos(min(1.0, r.P @ P)) < 1e-4
    assert r.t == pytest.approx(t, rel=0.01)
    rep = profile_report(r.v, r.P, K6, r.t, r.map)
    assert rep.sup_deviation < 1e-5
    assert rep.grad4 < 1e-8


def test_renormalize_constant_field(g6):
    c = 2.0
    w = constant(g6, 0.25 * np.log(6 / c))
    r = renormalize(w, kspec.constant(c))
    assert r.t == pytest.approx(1.0, abs=1e-12)
    assert np.abs(r.v.nodal - w.nodal).max() < 1e-12


def test_renormalize_clamps_t(g6):
    r = renormalize(constant(g6, -0.5), K6)
    assert r.t == 1.0 and r.clamped


def test_profile_of_first_harmonic(g8):
    v = coordinate(g8, 4) * 0.1
    rep = profile_report(v, np.eye(5)[4], K6)
    assert rep.grad4 == pytest.approx(1e-4 * SPHERE_VOLUME * 24 / 35, rel=1e-12)
    assert rep.sup_deviation == pytest.approx(0.1 * np.abs(g8.nodes[:, 4]).max(), rel=1e-12)
    assert rep.w23 > 0 and rep.w26 > 0
    assert rep.inegrad_slack is None


def test_scar_margin_admissible(g8):
    v = project(g8, 0.1 * g8.nodes[:, 4] ** 2)
    rep = profile_report(v, np.eye(5)[4], K6)
    assert rep.scar_margin >= -1e-8


def test_diagnose_report_fields(g8):
    rep = diagnose(make_bubble(np.eye(5)[3], 1.5, K6, g8), K6).to_dict()
    assert set(rep) == {"P", "t", "sup_deviation", "grad4", "w23", "w26", "inegrad_slack", "scar_margin", "t_clamped"}
    assert rep["t"] == pytest.approx(1.5, rel=1e-3)
