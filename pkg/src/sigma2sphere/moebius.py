"""Conformal automorphisms phi_{P,t} of S^4, pullbacks and centers of mass.

phi_{P,t} acts as y -> t y in the stereographic chart sending -P to y = 0 and
P to infinity, so -P and P are fixed and points are pushed toward P.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, NearBlowUpError
from .fields import ScalarField, project
from .grid import SPHERE_VOLUME

T_CAP = 50.0
_E5 = np.eye(5)[4]


def canonical_rotation(P) -> np.ndarray:
    """Rotation in span{e5, P} taking e5 to P, identity on the complement."""
    P = np.asarray(P, dtype=float)
    c = P[4]
    if c >= 1.0 - 1e-15:
        return np.eye(5)
    if c <= -1.0 + 1e-15:
        return np.diag([1.0, 1.0, 1.0, -1.0, -1.0])
    v = P - c * _E5
    v /= np.linalg.norm(v)
    s = np.sqrt(max(0.0, 1.0 - c * c))
    u = _E5
    return (
        np.eye(5)
        + (c - 1.0) * (np.outer(u, u) + np.outer(v, v))
        + s * (np.outer(v, u) - np.outer(u, v))
    )


@dataclass(frozen=True)
class MoebiusMap:
    P: np.ndarray
    t: float
    rotation: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float).reshape(5)
        n = np.linalg.norm(P)
        if abs(n - 1.0) > 1e-10:
            raise ValueError(f"P must be a unit vector, |P| = {n}")
        P = P / n
        if not self.t >= 1.0:
            raise ValueError(f"dilation t must be >= 1, got {self.t}")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "rotation", canonical_rotation(P))

    @classmethod
    def identity(cls) -> "MoebiusMap":
        return cls(_E5.copy(), 1.0)

    def inverse(self) -> "MoebiusMap":
        return MoebiusMap(-self.P, self.t)

    def __call__(self, x) -> np.ndarray:
        return moebius_apply(self, x)

    @property
    def xi(self) -> np.ndarray:
        return xi_of(self)


def _dilate(P, t, x):
    """Closed form of phi_{P_k,t_k} on points x; P (m, 5), t (m,), x (n, 5) -> (m, n, 5)."""
    c = P @ x.T  # (m, n)
    tt = t[:, None]
    a, b = 1.0 - c, 1.0 + c
    denom = a + tt**2 * b
    perp = x[None] - c[..., None] * P[:, None, :]
    num = 2 * tt[..., None] * perp + (tt**2 * b - a)[..., None] * P[:, None, :]
    return num / denom[..., None]


def moebius_apply(m: MoebiusMap, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    out = _dilate(m.P[None], np.array([m.t]), np.atleast_2d(x))[0]
    return out[0] if single else out


def moebius_apply_batch(P, t, x) -> np.ndarray:
    """Apply phi_{P_k, t_k} for each k to all points x; returns (m, n, 5)."""
    return _dilate(np.atleast_2d(P), np.atleast_1d(t), np.atleast_2d(x))


def moebius_apply_rotated(m: MoebiusMap, x) -> np.ndarray:
    """Reference implementation: rotate P to e5, dilate the chart, rotate back."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xr = x @ m.rotation  # R^T x
    y = xr[:, :4] / (1.0 - xr[:, 4:5])
    y = m.t * y
    r2 = np.sum(y**2, axis=1, keepdims=True)
    out = np.hstack([2 * y / (1 + r2), (r2 - 1) / (r2 + 1)])
    pole = np.isclose(xr[:, 4], 1.0, atol=1e-15)
    out[pole] = xr[pole]
    return out @ m.rotation.T


def conformal_factor(m: MoebiusMap, x) -> np.ndarray:
    """|d phi|(x) = t(1+|y|^2)/(1+t^2|y|^2); equals t at -P and 1/t at P."""
    x = np.asarray(x, dtype=float)
    c = x @ m.P
    return 2 * m.t / ((1.0 - c) + m.t**2 * (1.0 + c))


def log_conformal_factor(m: MoebiusMap, x) -> np.ndarray:
    return np.log(conformal_factor(m, x))


def log_factor_field(grid, m: MoebiusMap) -> ScalarField:
    return project(grid, log_conformal_factor(m, grid.nodes))


def pullback_w(w: ScalarField, m: MoebiusMap) -> ScalarField:
    """w o phi + ln|d phi|, evaluated at mapped nodes and projected."""
    if m.t == 1.0:
        return w
    x = w.grid.nodes
    return project(w.grid, w.at(moebius_apply(m, x)) + log_conformal_factor(m, x))


def xi_of(m: MoebiusMap) -> np.ndarray:
    return (m.t - 1.0) / m.t * m.P


def map_of(xi) -> MoebiusMap:
    xi = np.asarray(xi, dtype=float).reshape(5)
    r = np.linalg.norm(xi)
    if r >= 1.0:
        raise ValueError(f"ball coordinate must satisfy |xi| < 1, got {r}")
    if r == 0.0:
        return MoebiusMap.identity()
    return MoebiusMap(xi / r, 1.0 / (1.0 - r))


def ball_to_pt(xi):
    """Vectorized (P, t) for many ball points (m, 5)."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    r = np.linalg.norm(xi, axis=1)
    if np.any(r >= 1.0):
        raise ValueError("ball coordinate must satisfy |xi| < 1")
    P = np.where(r[:, None] > 0, xi / np.where(r > 0, r, 1.0)[:, None], _E5)
    return P, 1.0 / (1.0 - r)


def center_of_mass(w: ScalarField) -> np.ndarray:
    g = w.grid
    return (g.weights * np.exp(4 * w.nodal)) @ g.nodes / SPHERE_VOLUME


def _pushed_mass(grid, e4w, xi):
    """int e^{4w(z)} phi_xi^{-1}(z) dz, the balance of the pullback by phi_xi."""
    P, t = ball_to_pt(xi)
    z = _dilate(-P, t, grid.nodes)[0]
    return (grid.weights * e4w) @ z


def normalize_to_S0(
    w: ScalarField,
    t_cap: float = T_CAP,
    tol: float = 1e-9,
    maxiter: int = 50,
    polish: int = 5,
) -> tuple[ScalarField, MoebiusMap]:
    """Find m with pullback_w(w, m) balanced: int e^{4v} x = 0.

    Newton on xi uses the change of variables int e^{4v} x = int e^{4w} phi^{-1},
    then a few corrections with the projected pullback itself.
    """
    g = w.grid
    e4w = np.exp(4 * w.nodal)
    mass = float(g.weights @ e4w)
    xi = np.zeros(5)
    res = _pushed_mass(g, e4w, xi)
    it = 0
    r_max = 1.0 - 1.0 / t_cap

    def jacobian(xi, h=1e-6):
        J = np.empty((5, 5))
        for k in range(5):
            e = np.zeros(5)
            e[k] = h
            J[:, k] = (_pushed_mass(g, e4w, xi + e) - _pushed_mass(g, e4w, xi - e)) / (2 * h)
        return J

    J = None
    while np.linalg.norm(res) > 0.1 * tol * mass:
        if it >= maxiter:
            raise ConvergenceError(f"normalize_to_S0 did not converge; last xi = {xi.tolist()}")
        J = jacobian(xi)
        step = np.linalg.solve(J, -res)
        lam = 1.0
        while True:
            trial = xi + lam * step
            if np.linalg.norm(trial) < r_max:
                r_new = _pushed_mass(g, e4w, trial)
                if np.linalg.norm(r_new) < np.linalg.norm(res) or lam < 1e-12:
                    break
            lam *= 0.5
            if lam < 1e-12:
                raise NearBlowUpError(
                    f"normalization requires t beyond t_cap = {t_cap}; last xi = {xi.tolist()}"
                )
        xi, res = trial, r_new
        it += 1

    m = map_of(xi)
    v = pullback_w(w, m)
    for _ in range(polish):
        bal = (g.weights * np.exp(4 * v.nodal)) @ g.nodes
        if np.linalg.norm(bal) <= tol * float(g.weights @ np.exp(4 * v.nodal)):
            break
        # reuse the change-of-variables Jacobian for the projected pullback
        if J is None:
            J = jacobian(xi)
        xi = xi + np.linalg.solve(J, -bal)
        if np.linalg.norm(xi) >= r_max:
            raise NearBlowUpError(f"normalization exceeds t_cap = {t_cap}")
        m = map_of(xi)
        v = pullback_w(w, m)
    return v, m
