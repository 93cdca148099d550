"""Bubble construction, renormalization at the maximum and profile norms."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .curvature import scar_margin
from .fields import ScalarField, project
from .grid import SphereGrid
from .kspec import KSpec
from .moebius import MoebiusMap, log_conformal_factor, moebius_apply, pullback_w


def bubble_values(P, t: float, K: KSpec, x) -> np.ndarray:
    """ln|d phi_{P,t}^{-1}| + 1/4 ln(6/K(P)) at unit vectors x; largest at P."""
    P = np.asarray(P, dtype=float)
    inv = MoebiusMap(P, t).inverse()
    return log_conformal_factor(inv, x) + 0.25 * np.log(6.0 / float(K(P[None])[0]))


def make_bubble(P, t: float, K: KSpec, grid: SphereGrid) -> ScalarField:
    """Projected bubble concentrating at P; exact solution when K is constant."""
    return project(grid, bubble_values(P, t, K, grid.nodes))


def _tangent_frame(P):
    Q, _ = np.linalg.qr(np.column_stack([P, np.eye(5)]))
    return Q[:, 1:5] * np.sign(Q[:, :1].T @ P)[0]


def refine_max(w: ScalarField, P0, h: float = 1e-3, maxiter: int = 30, tol: float = 1e-12):
    """Newton on the tangent plane for a local maximum of w near P0."""
    P = np.asarray(P0, dtype=float) / np.linalg.norm(P0)
    for _ in range(maxiter):
        E = _tangent_frame(P)
        pts = [np.zeros(4)]
        for a in range(4):
            for s in (1, -1):
                pts.append(s * h * np.eye(4)[a])
        for a in range(4):
            for b in range(a + 1, 4):
                for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                    pts.append(h * (sa * np.eye(4)[a] + sb * np.eye(4)[b]))
        Y = np.array(pts)
        X = np.cos(np.linalg.norm(Y, axis=1))[:, None] * P + Y @ E.T
        X /= np.linalg.norm(X, axis=1, keepdims=True)
        f = w.at(X)
        g = np.array([(f[1 + 2 * a] - f[2 + 2 * a]) / (2 * h) for a in range(4)])
        H = np.diag([(f[1 + 2 * a] - 2 * f[0] + f[2 + 2 * a]) / h**2 for a in range(4)])
        k = 9
        for a in range(4):
            for b in range(a + 1, 4):
                H[a, b] = H[b, a] = (f[k] - f[k + 1] - f[k + 2] + f[k + 3]) / (4 * h * h)
                k += 4
        try:
            step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        if np.any(np.linalg.eigvalsh(H) >= 0):
            step = 0.1 * g  # not concave here: small ascent step
        n = np.linalg.norm(step)
        if n > 0.1:
            step *= 0.1 / n
            n = 0.1
        P = np.cos(n) * P + (np.sin(n) / n if n else 1.0) * (E @ step)
        P /= np.linalg.norm(P)
        if n < tol:
            break
    return P


@dataclass
class Renormalization:
    v: ScalarField
    P: np.ndarray
    t: float
    clamped: bool

    @property
    def map(self) -> MoebiusMap:
        return MoebiusMap(self.P, self.t)


def renormalize(w: ScalarField, K: KSpec) -> Renormalization:
    """Blow-up renormalization: P at the maximum, t from w(P) - ln t = 1/4 ln(6/K(P))."""
    i = int(np.argmax(w.nodal))  # ties resolve to the lowest index
    P = refine_max(w, w.grid.nodes[i])
    wP = float(w.at(P[None])[0])
    t = float(np.exp(wP - 0.25 * np.log(6.0 / float(K(P[None])[0]))))
    clamped = t < 1.0
    t = max(t, 1.0)
    v = pullback_w(w, MoebiusMap(P, t))
    return Renormalization(v, P, t, clamped)


@dataclass
class DiagnosticsReport:
    P: list
    t: float
    sup_deviation: float
    grad4: float
    w23: float
    w26: float
    inegrad_slack: float | None
    scar_margin: float
    t_clamped: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def profile_report(v: ScalarField, P, K: KSpec, t: float = 1.0, m: MoebiusMap | None = None, clamped=False):
    """Norms of the renormalized profile v against the limit 1/4 ln(6/K(P))."""
    P = np.asarray(P, dtype=float)
    grid = v.grid
    wts = grid.weights
    target = 0.25 * np.log(6.0 / float(K(P[None])[0]))
    grad2 = np.sum(v.frame_gradient**2, axis=1)
    Hs = v.frame_hessian
    lap = np.trace(Hs, axis1=1, axis2=2)
    grad4 = float(wts @ grad2**2)
    slack = None
    if m is not None:
        Kphi = K(moebius_apply(m, grid.nodes))
        slack = float(wts @ ((Kphi * np.exp(4 * v.nodal) - 6.0) * v.nodal)) - grad4
    return DiagnosticsReport(
        P=P.tolist(),
        t=float(t),
        sup_deviation=float(np.max(np.abs(v.nodal - target))),
        grad4=grad4,
        w23=float(wts @ np.abs(lap) ** 3) ** (1 / 3),
        w26=float(wts @ np.sum(Hs**2, axis=(1, 2)) ** 3) ** (1 / 6),
        inegrad_slack=slack,
        scar_margin=scar_margin(v),
        t_clamped=bool(clamped),
    )


def diagnose(w: ScalarField, K: KSpec) -> DiagnosticsReport:
    r = renormalize(w, K)
    return profile_report(r.v, r.P, K, r.t, r.map, r.clamped)
