"""The sigma_2 machinery for conformal metrics g = e^{2w} g_c on S^4.

Convention: A(w) = Pi - 2 Hess w + 2 dw (x) dw - |dw|^2 Pi, the background form
of A_g = Ric_g - (R_g/6) g.  Then A(0) = Pi and sigma_2(A(0)) = 6.  Internally
tensors live in the orthonormal frame (N, 4, 4); public results are ambient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InadmissibleError
from .fields import (
    ScalarField,
    SecondOrderOperator,
    nodal_integral,
    project,
    spectral_gradient,
)
from .grid import SPHERE_VOLUME
from .kspec import KSpec

GAUSS_BONNET = 16.0 * np.pi**2


# ------------------------------------------------------------ pointwise algebra
def frame_schouten(w: ScalarField) -> np.ndarray:
    g, H = w.frame_gradient, w.frame_hessian
    I = np.eye(4)[None]
    g2 = np.sum(g**2, axis=1)
    return I - 2 * H + 2 * g[:, :, None] * g[:, None, :] - g2[:, None, None] * I


def schouten(w: ScalarField) -> np.ndarray:
    return w.grid.to_ambient_tensor(frame_schouten(w))


def sigma_k(A, k: int) -> np.ndarray:
    """Elementary symmetric functions of a stack of symmetric (tangential) matrices."""
    A = np.asarray(A)
    tr = np.trace(A, axis1=-2, axis2=-1)
    if k == 1:
        return tr
    if k == 2:
        return 0.5 * (tr**2 - np.einsum("...ij,...ji->...", A, A))
    raise ValueError("only sigma_1 and sigma_2 are supported")


def newton_tensor(A, nodes=None) -> np.ndarray:
    """M = (tr A) Pi - A, so that M:A = 2 sigma_2(A).

    Frame input (..., 4, 4) uses Pi = I; ambient input (N, 5, 5) needs the nodes.
    """
    A = np.asarray(A)
    tr = np.trace(A, axis1=-2, axis2=-1)
    if A.shape[-1] == 4:
        return tr[..., None, None] * np.eye(4) - A
    if nodes is None:
        raise ValueError("ambient Newton tensor needs the node positions")
    Pi = np.eye(5)[None] - nodes[:, :, None] * nodes[:, None, :]
    return tr[:, None, None] * Pi - A


def admissible(w: ScalarField) -> tuple[np.ndarray, float, float]:
    A = frame_schouten(w)
    s1, s2 = sigma_k(A, 1), sigma_k(A, 2)
    return (s1 > 0) & (s2 > 0), float(s1.min()), float(s2.min())


# --------------------------------------------------------------- the equation
def sigma2_nodal(w: ScalarField) -> np.ndarray:
    return sigma_k(frame_schouten(w), 2)


def residual_nodal(w: ScalarField, K: KSpec) -> np.ndarray:
    return sigma2_nodal(w) - K(w.grid.nodes) * np.exp(4 * w.nodal)


def residual(w: ScalarField, K: KSpec) -> ScalarField:
    """sigma_2(A(w)) - K^[s] e^{4w}, projected."""
    return project(w.grid, residual_nodal(w, K))


def sigma2_derivative_parts(w: ScalarField):
    """Frame coefficients (Q, b) with d sigma_2(A(w))[u] = Q:Hess u + b.grad u."""
    A = frame_schouten(w)
    M = newton_tensor(A)
    g = w.frame_gradient
    trA = np.trace(A, axis1=1, axis2=2)
    Q = -2.0 * M
    b = 4.0 * np.einsum("nab,nb->na", M, g) - 2.0 * 3.0 * trA[:, None] * g
    return Q, b, A


def linear_operator(w: ScalarField, K: KSpec) -> SecondOrderOperator:
    """Matrix-free Frechet derivative of the residual at w."""
    Q, b, _ = sigma2_derivative_parts(w)
    gamma = -4.0 * K(w.grid.nodes) * np.exp(4 * w.nodal)
    return SecondOrderOperator(w.grid, Q, b, gamma)


def linearize(w: ScalarField, K: KSpec) -> np.ndarray:
    """Dense derivative of the projected residual in coefficient space."""
    return linear_operator(w, K).dense()


# ------------------------------------------------------------ scalar curvature
def scalar_curvature(w: ScalarField) -> ScalarField:
    """R_g = e^{-2w}(12 - 6 Lap w - 6|grad w|^2), background derivatives."""
    lap = np.trace(w.frame_hessian, axis1=1, axis2=2)
    g2 = np.sum(w.frame_gradient**2, axis=1)
    return project(w.grid, np.exp(-2 * w.nodal) * (12.0 - 6.0 * lap - 6.0 * g2))


def scalar_curvature_intrinsic(w: ScalarField) -> ScalarField:
    """R_g = R_0 e^{-2w} - 6 Lap_g w + 6 |grad_g w|^2_g, derivatives taken in g.

    In dimension 4, Lap_g u = e^{-2w}(Lap u + 2 <dw, du>) and |du|^2_g = e^{-2w}|du|^2.
    """
    lap = np.trace(w.frame_hessian, axis1=1, axis2=2)
    g2 = np.sum(w.frame_gradient**2, axis=1)
    lap_g = np.exp(-2 * w.nodal) * (lap + 2 * g2)
    grad2_g = np.exp(-2 * w.nodal) * g2
    return project(w.grid, 12.0 * np.exp(-2 * w.nodal) - 6 * lap_g + 6 * grad2_g)


# -------------------------------------------------------- integral identities
def kazdan_warner(w: ScalarField, K) -> np.ndarray:
    """int <grad K, grad x_j> e^{4w} for j = 1..5; grad x_j . v = v_j for tangent v."""
    grid = w.grid
    if isinstance(K, ScalarField):
        from .fields import gradient

        gK = gradient(K)
    else:
        gK = K.gradient(grid.nodes)
    return (grid.weights * np.exp(4 * w.nodal)) @ gK


def gauss_bonnet(w: ScalarField, K: KSpec | None = None) -> dict:
    """int sigma_2(A_g) dvol_g, which in background terms is int sigma_2(A(w)) dvol_c.

    With K, also int K^[s] e^{4w}, the same quantity for a solution.
    """
    out = {"sigma2_integral": nodal_integral(w.grid, sigma2_nodal(w)), "target": GAUSS_BONNET}
    if K is not None:
        out["K_integral"] = nodal_integral(w.grid, K(w.grid.nodes) * np.exp(4 * w.nodal))
    return out


# ---------------------------------------------------------- tensor identities
@dataclass
class CurvatureBundle:
    A: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    R: np.ndarray
    E_norm2: np.ndarray
    admissible: np.ndarray
    min_sigma1: float
    min_sigma2: float

    def identity_defects(self) -> dict:
        scale = max(1.0, float(np.max(np.abs(self.R))) ** 2)
        return {
            "E_norm_identity": float(np.max(np.abs(self.E_norm2 - (self.R**2 / 12 - 2 * self.sigma2)))) / scale,
            "sigma1_R_identity": float(np.max(np.abs(self.sigma1 - self.R / 3))) / np.sqrt(scale),
        }


def curvature_bundle(w: ScalarField) -> CurvatureBundle:
    """Metric-normalized invariants of g at each node.

    g^{-1}A_g has frame matrix e^{-2w}A(w); E is its trace-free part and
    R = 3 sigma_1(g^{-1}A_g).
    """
    A = frame_schouten(w)
    B = np.exp(-2 * w.nodal)[:, None, None] * A
    s1, s2 = sigma_k(B, 1), sigma_k(B, 2)
    R = np.exp(-2 * w.nodal) * (
        12.0 - 6.0 * np.trace(w.frame_hessian, axis1=1, axis2=2) - 6.0 * np.sum(w.frame_gradient**2, axis=1)
    )
    E = B - (s1 / 4)[:, None, None] * np.eye(4)
    adm = (s1 > 0) & (s2 > 0)
    return CurvatureBundle(
        A=w.grid.to_ambient_tensor(A),
        sigma1=s1,
        sigma2=s2,
        R=R,
        E_norm2=np.sum(E**2, axis=(1, 2)),
        admissible=adm,
        min_sigma1=float(s1.min()),
        min_sigma2=float(s2.min()),
    )


def newton_contraction_defect(w: ScalarField) -> float:
    A = schouten(w)
    M = newton_tensor(A, w.grid.nodes)
    s2 = sigma_k(A, 2)
    scale = max(1.0, float(np.max(np.abs(s2))))
    return float(np.max(np.abs(np.einsum("nij,nij->n", M, A) - 2 * s2))) / scale


_SYM = [(i, j) for i in range(5) for j in range(i, 5)]


def _tensor_gradient(grid, T):
    """Background covariant derivative of a tangential field T (N,5,5) -> (N,5,5,5).

    Components are projected, differentiated spectrally, and projected back
    onto the tangent space in the first two slots; the last slot is the
    derivative direction.
    """
    comps = np.stack([T[:, i, j] for i, j in _SYM], axis=1)
    G = spectral_gradient(grid, comps)  # (N, 15, 5)
    D = np.empty((grid.size, 5, 5, 5))
    for c, (i, j) in enumerate(_SYM):
        D[:, i, j] = G[:, c]
        D[:, j, i] = G[:, c]
    Pi = grid.tangent_projector
    return np.einsum("nia,njb,nabk->nijk", Pi, Pi, D)


def concavity_gap(w: ScalarField, detail: bool = False):
    """min over nodes of |grad E|^2 - |grad R|^2/12 + |grad sigma_2|^2/(2 sigma_2), in g."""
    grid = w.grid
    A = schouten(w)
    Pi = grid.tangent_projector
    trA = np.trace(A, axis1=1, axis2=2)
    s2A = sigma_k(A, 2)
    if np.any(s2A <= 0) or np.any(trA <= 0):
        raise InadmissibleError("concavity gap needs an admissible metric")
    ew = np.exp(w.nodal)
    E = A - (trA / 4)[:, None, None] * Pi  # (0,2) trace-free part, same in g and g_c
    dw = spectral_gradient(grid, w.nodal[:, None])[:, 0]
    DE = _tensor_gradient(grid, E)
    Edw = np.einsum("nij,nj->ni", E, dw)
    DgE = (
        DE
        - 2 * E[:, :, :, None] * dw[:, None, None, :]
        - np.einsum("ni,nkj->nijk", dw, E)
        - np.einsum("nj,nik->nijk", dw, E)
        + np.einsum("nki,nj->nijk", Pi, Edw)
        + np.einsum("nkj,ni->nijk", Pi, Edw)
    )
    gradE2 = np.sum(DgE**2, axis=(1, 2, 3)) * ew**-6
    R = 3 * trA * ew**-2
    s2g = s2A * ew**-4
    dR, ds2 = np.moveaxis(spectral_gradient(grid, np.stack([R, s2g], axis=1)), 1, 0)
    gradR2 = np.sum(dR**2, axis=1) * ew**-2
    grads2 = np.sum(ds2**2, axis=1) * ew**-2
    gap = gradE2 - gradR2 / 12 + grads2 / (2 * s2g)
    if detail:
        return gap, {"gradE2": gradE2, "gradR2": gradR2, "grad_sigma2_2": grads2}
    return float(gap.min())


def bianchi_defect(w: ScalarField) -> float:
    """max over nodes of |div_g T|_g for T = g^{-1}-raised Newton tensor of A_g."""
    grid = w.grid
    A = schouten(w)
    M = newton_tensor(A, grid.nodes)
    T = np.exp(-2 * w.nodal)[:, None, None] * M  # mixed components in a g_c-orthonormal frame
    dw = spectral_gradient(grid, w.nodal[:, None])[:, 0]
    DT = _tensor_gradient(grid, T)
    div = np.einsum("niji->nj", DT)
    div = div + 4 * np.einsum("nij,ni->nj", T, dw) - np.trace(T, axis1=1, axis2=2)[:, None] * dw
    norm = np.exp(-w.nodal) * np.linalg.norm(div, axis=1)
    return float(norm.max())


def scar_margin(v: ScalarField) -> float:
    """min over nodes of 2 - Lap v - |grad v|^2, a consequence of admissibility."""
    lap = np.trace(v.frame_hessian, axis1=1, axis2=2)
    return float(np.min(2 - lap - np.sum(v.frame_gradient**2, axis=1)))


def average(grid, values) -> float:
    return float(grid.weights @ values) / SPHERE_VOLUME
