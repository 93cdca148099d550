"""Discrete calculus on the unit 4-sphere S^4 in R^5.

Points are parametrized by hyperspherical angles (t1, t2, t3, phi):

    x5 = cos t1
    x4 = sin t1 cos t2
    x3 = sin t1 sin t2 cos t3
    x1 = sin t1 sin t2 sin t3 cos phi
    x2 = sin t1 sin t2 sin t3 sin phi

The quadrature is a tensor product of Gauss-Jacobi rules in u_i = cos t_i
(weights (1-u^2), (1-u^2)^(1/2), 1) and a uniform rule in phi.  The harmonic
basis of degree <= L is separable in these angles, which lets synthesis and
analysis run as four small batched matrix products instead of a dense
node-by-basis matrix.

A basis function is labelled by (l, k2, k3, mm) with l >= k2 >= k3 >= m(mm),
where mm enumerates the azimuthal factors [1, cos phi, sin phi, cos 2phi, ...].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import special

SPHERE_VOLUME = 8.0 * np.pi**2 / 3.0


def harmonic_dimension(ell: int) -> int:
    """Dimension of the space of degree-ell spherical harmonics on S^4."""
    return (ell + 1) * (ell + 2) * (2 * ell + 3) // 6


def _jacobi_norm_log(n, a):
    # log of int_{-1}^{1} P_n^{(a,a)}(u)^2 (1-u^2)^a du
    return (
        (2 * a + 1) * np.log(2.0)
        + 2 * special.gammaln(n + a + 1)
        - np.log(2 * n + 2 * a + 1)
        - special.gammaln(n + 2 * a + 1)
        - special.gammaln(n + 1)
    )


def _jacobi_symmetric(u, a, nmax):
    """P_n^{(a,a)}(u) for n = 0..nmax by the three-term recurrence."""
    P = [np.ones_like(u)]
    if nmax >= 1:
        P.append((a + 1) * u)
    for n in range(2, nmax + 1):
        c = 2 * n + 2 * a
        P.append(((c - 1) * c * (c - 2) * u * P[-1] - 2 * (n + a - 1) ** 2 * c * P[-2]) / (2 * n * (n + 2 * a) * (c - 2)))
    return P


def angular_tables(u, s, L, a0, derivs=2):
    """Tables of f_{n,k}(t) = c_{n,k} s^k P_{n-k}^{(k+a0, k+a0)}(u) and t-derivatives.

    ``u = cos t`` and ``s = sin t`` are arrays of shape (p,).  Returns a list of
    arrays of shape (p, L+1, L+1) indexed [point, n, k]; entries with k > n are 0.
    The normalization makes f_{n,k} orthonormal in L^2((1-u^2)^(a0) du) for
    fixed k.
    """
    u = np.asarray(u, dtype=float)
    s = np.asarray(s, dtype=float)
    p = u.shape[0]
    # raw[k][d] = P_d^{(k+a0, k+a0)}(u); dP/du of family k is a multiple of raw[k+1][d-1]
    raw = [_jacobi_symmetric(u, k + a0, L - k) for k in range(L + 1)]
    out = [np.zeros((p, L + 1, L + 1)) for _ in range(derivs + 1)]
    zero = np.zeros_like(u)
    for k in range(L + 1):
        a = k + a0
        sk = s**k
        skm1 = s ** (k - 1) if k >= 1 else zero
        skm2 = s ** (k - 2) if k >= 2 else zero
        for n in range(k, L + 1):
            d = n - k
            c = np.exp(-0.5 * _jacobi_norm_log(d, a))
            P = raw[k][d]
            out[0][:, n, k] = c * sk * P
            if derivs == 0:
                continue
            dP = 0.5 * (d + 2 * a + 1) * raw[k + 1][d - 1] if d >= 1 else zero
            out[1][:, n, k] = c * (k * skm1 * u * P - s ** (k + 1) * dP)
            if derivs == 1:
                continue
            ddP = 0.25 * (d + 2 * a + 1) * (d + 2 * a + 2) * raw[k + 2][d - 2] if d >= 2 else zero
            out[2][:, n, k] = c * (
                k * (k - 1) * skm2 * u**2 * P
                - k * sk * P
                - (2 * k + 1) * sk * u * dP
                + s ** (k + 2) * ddP
            )
    return out


def azimuth_tables(phi, L):
    """[value, d/dphi, d2/dphi2] of the azimuthal factors, shape (p, 2L+1)."""
    phi = np.asarray(phi, dtype=float)
    p = phi.shape[0]
    val = np.zeros((p, 2 * L + 1))
    d1 = np.zeros_like(val)
    d2 = np.zeros_like(val)
    val[:, 0] = 1.0 / np.sqrt(2 * np.pi)
    for m in range(1, L + 1):
        c, s = np.cos(m * phi) / np.sqrt(np.pi), np.sin(m * phi) / np.sqrt(np.pi)
        val[:, 2 * m - 1], val[:, 2 * m] = c, s
        d1[:, 2 * m - 1], d1[:, 2 * m] = -m * s, m * c
        d2[:, 2 * m - 1], d2[:, 2 * m] = -m * m * c, -m * m * s
    return [val, d1, d2]


def _azimuthal_order(L):
    return (np.arange(2 * L + 1) + 1) // 2


def _expand_to_azimuth(tables, L):
    # (p, k3, m) -> (p, k3, mm)
    mord = _azimuthal_order(L)
    return [t[:, :, mord] for t in tables]


def cartesian_to_angles(x):
    """Hyperspherical angles (as cos/sin pairs and phi) of unit vectors x (p, 5)."""
    x = np.asarray(x, dtype=float)
    u1 = np.clip(x[:, 4], -1.0, 1.0)
    r1 = np.sqrt(np.maximum(x[:, 0] ** 2 + x[:, 1] ** 2 + x[:, 2] ** 2 + x[:, 3] ** 2, 0.0))
    r2 = np.sqrt(x[:, 0] ** 2 + x[:, 1] ** 2 + x[:, 2] ** 2)
    r3 = np.hypot(x[:, 0], x[:, 1])
    with np.errstate(invalid="ignore", divide="ignore"):
        u2 = np.where(r1 > 0, x[:, 3] / np.where(r1 > 0, r1, 1.0), 1.0)
        u3 = np.where(r2 > 0, x[:, 2] / np.where(r2 > 0, r2, 1.0), 1.0)
    u2 = np.clip(u2, -1.0, 1.0)
    u3 = np.clip(u3, -1.0, 1.0)
    s1 = np.sqrt(1 - u1**2)
    s2 = np.sqrt(1 - u2**2)
    s3 = np.sqrt(1 - u3**2)
    phi = np.arctan2(x[:, 1], x[:, 0])
    return (u1, s1), (u2, s2), (u3, s3), phi


@dataclass(eq=False)
class SphereGrid:
    """Quadrature grid and separable orthonormal harmonic basis of degree <= L."""

    L: int
    azimuth_count: int
    u: tuple = field(init=False, repr=False)
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        L, nphi = self.L, self.azimuth_count
        if L < 4:
            raise ValueError(f"L must be >= 4, got {L}")
        if nphi < 2 * L + 2:
            raise ValueError(f"azimuth_count must be >= 2L+2 = {2 * L + 2}, got {nphi}")
        if nphi % 2:
            raise ValueError("azimuth_count must be even (antipodal symmetry of the rule)")
        n = L + 1
        u1, w1 = special.roots_jacobi(n, 1.0, 1.0)
        u2, w2 = special.roots_jacobi(n, 0.5, 0.5)
        u3, w3 = special.roots_legendre(n)
        phi = 2 * np.pi * np.arange(nphi) / nphi
        wphi = np.full(nphi, 2 * np.pi / nphi)
        if min(w1.min(), w2.min(), w3.min()) <= 0:
            raise ValueError("non-positive quadrature weight")
        self.u = (u1, u2, u3)
        s1, s2, s3 = (np.sqrt(1 - v**2) for v in (u1, u2, u3))

        # Node ordering: (phi, t3, t2, t1), t1 fastest.
        P, U3, U2, U1 = np.meshgrid(phi, u3, u2, u1, indexing="ij")
        _, S3, S2, S1 = np.meshgrid(phi, s3, s2, s1, indexing="ij")
        P, U1, U2, U3, S1, S2, S3 = (a.ravel() for a in (P, U1, U2, U3, S1, S2, S3))
        cp, sp = np.cos(P), np.sin(P)
        self.nodes = np.stack(
            [S1 * S2 * S3 * cp, S1 * S2 * S3 * sp, S1 * S2 * U3, S1 * U2, U1], axis=1
        )
        W = np.einsum("a,b,c,d->abcd", wphi, w3, w2, w1)
        self.weights = W.ravel()

        # Orthonormal tangent frame E_a = (d x / d t_a) / h_a and scale factors.
        z = np.zeros_like(U1)
        E1 = np.stack([U1 * S2 * S3 * cp, U1 * S2 * S3 * sp, U1 * S2 * U3, U1 * U2, -S1], axis=1)
        E2 = np.stack([U2 * S3 * cp, U2 * S3 * sp, U2 * U3, -S2, z], axis=1)
        E3 = np.stack([U3 * cp, U3 * sp, -S3, z, z], axis=1)
        E4 = np.stack([-sp, cp, z, z, z], axis=1)
        self.frame = np.stack([E1, E2, E3, E4], axis=1)  # (N, 4, 5)
        self.scale = np.stack([np.ones_like(S1), S1, S1 * S2, S1 * S2 * S3], axis=1)
        self.cot = np.stack([U1 / S1, U2 / S2, U3 / S3], axis=1)

        # 1D factor tables [value, d, d2] in batched-matmul layout.
        t1 = angular_tables(u1, s1, L, 1.0)
        t2 = angular_tables(u2, s2, L, 0.5)
        t3 = _expand_to_azimuth(angular_tables(u3, s3, L, 0.0), L)
        tp = azimuth_tables(phi, L)
        self._T1 = [np.ascontiguousarray(t.transpose(2, 0, 1)) for t in t1]  # (k2, n1, l)
        self._T2 = [np.ascontiguousarray(t.transpose(2, 0, 1)) for t in t2]  # (k3, n2, k2)
        self._T3 = [np.ascontiguousarray(t.transpose(2, 0, 1)) for t in t3]  # (mm, n3, k3)
        self._F = tp  # (nphi, mm)

        # Compact basis ordering.
        mord = _azimuthal_order(L)
        idx = [
            (l, k2, k3, mm)
            for l in range(L + 1)
            for k2 in range(l + 1)
            for k3 in range(k2 + 1)
            for mm in range(2 * L + 1)
            if mord[mm] <= k3
        ]
        idx = np.array(idx, dtype=np.int64)
        self.labels = idx
        self.degree = idx[:, 0].copy()
        self._flat = np.ravel_multi_index(idx.T, (L + 1, L + 1, L + 1, 2 * L + 1))
        expected = sum(harmonic_dimension(l) for l in range(L + 1))
        if len(idx) != expected:
            raise RuntimeError("basis dimension mismatch")

    # ------------------------------------------------------------------ sizes
    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def dim(self) -> int:
        return self.labels.shape[0]

    @property
    def _pshape(self):
        L = self.L
        return (L + 1, L + 1, L + 1, 2 * L + 1)

    def degree_mask(self, ell: int) -> np.ndarray:
        return self.degree == ell

    # ------------------------------------------------------------ transforms
    def _pad(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        batch = coeffs.shape[1:]
        flat = coeffs.reshape(self.dim, -1)
        C = np.zeros((int(np.prod(self._pshape)), flat.shape[1]))
        C[self._flat] = flat
        return C.reshape(self._pshape + (flat.shape[1],)), batch

    def synthesize(self, coeffs, order=(0, 0, 0, 0)) -> np.ndarray:
        """Nodal values of sum_j c_j d^order b_j, derivative orders per angle.

        ``coeffs`` has shape (dim,) or (dim, b); result has shape (N,) or (N, b).
        """
        C, batch = self._pad(coeffs)
        o1, o2, o3, o4 = order
        T1, T2, T3, F = self._T1[o1], self._T2[o2], self._T3[o3], self._F[o4]
        K, M = self.L + 1, 2 * self.L + 1
        b = C.shape[-1]
        n1, n2, n3 = T1.shape[1], T2.shape[1], T3.shape[1]
        # contract l, batched over k2
        X = C.transpose(1, 0, 2, 3, 4).reshape(K, K, K * M * b)
        X = np.matmul(T1, X).reshape(K, n1, K, M, b)  # (k2, n1, k3, mm, b)
        # contract k2, batched over k3
        X = X.transpose(2, 0, 1, 3, 4).reshape(K, K, n1 * M * b)
        X = np.matmul(T2, X).reshape(K, n2, n1, M, b)  # (k3, n2, n1, mm, b)
        # contract k3, batched over mm
        X = X.transpose(3, 0, 1, 2, 4).reshape(M, K, n2 * n1 * b)
        X = np.matmul(T3, X).reshape(M, n3 * n2 * n1 * b)  # (mm, n3, n2, n1, b)
        out = (F @ X).reshape(-1, b)
        return out.reshape((self.size,) + batch)

    def analyze(self, values) -> np.ndarray:
        """Quadrature inner products with the basis: B^T (w * values)."""
        values = np.asarray(values, dtype=float)
        batch = values.shape[1:]
        g = (values.reshape(self.size, -1) * self.weights[:, None])
        b = g.shape[1]
        K, M = self.L + 1, 2 * self.L + 1
        T1, T2, T3, F = self._T1[0], self._T2[0], self._T3[0], self._F[0]
        n1, n2, n3, nphi = T1.shape[1], T2.shape[1], T3.shape[1], F.shape[0]
        X = F.T @ g.reshape(nphi, -1)  # (mm, n3*n2*n1*b)
        X = np.matmul(T3.transpose(0, 2, 1), X.reshape(M, n3, -1))  # (mm, k3, n2*n1*b)
        X = X.reshape(M, K, n2, n1, b).transpose(1, 2, 3, 0, 4).reshape(K, n2, -1)
        X = np.matmul(T2.transpose(0, 2, 1), X)  # (k3, k2, n1*mm*b)
        X = X.reshape(K, K, n1, M, b).transpose(1, 2, 0, 3, 4).reshape(K, n1, -1)
        X = np.matmul(T1.transpose(0, 2, 1), X)  # (k2, l, k3*mm*b)
        X = X.reshape(K, K, K, M, b).transpose(1, 0, 2, 3, 4).reshape(-1, b)
        return X[self._flat].reshape((self.dim,) + batch)

    def basis_eval(self) -> np.ndarray:
        """Dense node-by-basis matrix (small grids only)."""
        if self.size * self.dim > 5e7:
            raise MemoryError("basis_eval is only materialized for small grids")
        return self.synthesize(np.eye(self.dim))

    # ----------------------------------------------------------- derivatives
    def coordinate_derivatives(self, coeffs):
        """First and second partial derivatives in (t1, t2, t3, phi) at nodes."""
        d1 = np.empty((self.size, 4) + np.shape(coeffs)[1:])
        d2 = np.empty((self.size, 4, 4) + np.shape(coeffs)[1:])
        for a in range(4):
            o = [0, 0, 0, 0]
            o[a] = 1
            d1[:, a] = self.synthesize(coeffs, tuple(o))
            for b in range(a, 4):
                o = [0, 0, 0, 0]
                o[a] += 1
                o[b] += 1
                d2[:, a, b] = self.synthesize(coeffs, tuple(o))
                d2[:, b, a] = d2[:, a, b]
        return d1, d2

    def christoffel_first_order(self, alpha):
        """First-order coefficients -sum_ab alpha_ab Gamma^c_ab for the round metric.

        ``alpha`` holds nodal coefficients of d_a d_b, shape (N, 4, 4), symmetric.
        """
        h, cot = self.scale, self.cot
        beta = np.zeros(alpha.shape[:1] + (4,))
        for c in range(3):
            for a in range(c + 1, 4):
                beta[:, c] += alpha[:, a, a] * (h[:, a] / h[:, c]) ** 2 * cot[:, c]
        for a in range(1, 4):
            for b in range(a):
                beta[:, a] -= 2.0 * alpha[:, a, b] * cot[:, b]
        return beta

    def frame_derivatives(self, coeffs):
        """Gradient (N, 4, ...) and covariant Hessian (N, 4, 4, ...) in the frame."""
        d1, d2 = self.coordinate_derivatives(coeffs)
        extra = (None,) * (d1.ndim - 2)
        h = self.scale[(slice(None), slice(None)) + extra]
        cot = self.cot[(slice(None), slice(None)) + extra]
        H = d2.copy()
        for a in range(4):
            for c in range(min(a, 3)):
                H[:, a, a] += (h[:, a] / h[:, c]) ** 2 * cot[:, c] * d1[:, c]
            for b in range(min(a, 3)):
                H[:, a, b] -= cot[:, b] * d1[:, a]
                H[:, b, a] = H[:, a, b]
        hh = h[:, :, None] * h[:, None, :]
        return d1 / h, H / hh

    def to_ambient_vector(self, v_frame):
        return np.einsum("na,nai->ni", v_frame, self.frame)

    def to_ambient_tensor(self, T_frame):
        return np.einsum("nab,nai,nbj->nij", T_frame, self.frame, self.frame)

    def to_frame_vector(self, v):
        return np.einsum("nai,ni->na", self.frame, v)

    def to_frame_tensor(self, T):
        return np.einsum("nai,nij,nbj->nab", self.frame, T, self.frame)

    @cached_property
    def tangent_projector(self) -> np.ndarray:
        x = self.nodes
        return np.eye(5)[None] - x[:, :, None] * x[:, None, :]

    # ------------------------------------------------- scattered evaluation
    def basis_at(self, points) -> np.ndarray:
        """Basis values at arbitrary unit vectors, shape (p, dim); small L only."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        L = self.L
        (u1, s1), (u2, s2), (u3, s3), phi = cartesian_to_angles(points)
        T1 = angular_tables(u1, s1, L, 1.0, derivs=0)[0]
        T2 = angular_tables(u2, s2, L, 0.5, derivs=0)[0]
        T3 = _expand_to_azimuth(angular_tables(u3, s3, L, 0.0, derivs=0), L)[0]
        F = azimuth_tables(phi, L)[0]
        l, k2, k3, mm = self.labels.T
        return T1[:, l, k2] * T2[:, k2, k3] * T3[:, k3, mm] * F[:, mm]

    def evaluate_at(self, coeffs, points, chunk=4096) -> np.ndarray:
        """Evaluate the expansion at arbitrary unit vectors ``points`` (p, 5)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        C, _ = self._pad(coeffs)
        C = C[..., 0]
        L, K = self.L, self.L + 1
        # per k3: rectangular block l, k2 >= k3 (zero where k2 > l), mm <= 2 k3
        blocks = [np.ascontiguousarray(C[k3:, k3:, k3, : 2 * k3 + 1]).reshape(-1, 2 * k3 + 1) for k3 in range(K)]
        out = np.empty(points.shape[0])
        for start in range(0, points.shape[0], chunk):
            X = points[start:start + chunk]
            p = X.shape[0]
            (u1, s1), (u2, s2), (u3, s3), phi = cartesian_to_angles(X)
            T1 = angular_tables(u1, s1, L, 1.0, derivs=0)[0]  # (p, l, k2)
            T2 = angular_tables(u2, s2, L, 0.5, derivs=0)[0]  # (p, k2, k3)
            T3 = _expand_to_azimuth(angular_tables(u3, s3, L, 0.0, derivs=0), L)[0]  # (p, k3, mm)
            V = np.ascontiguousarray((T3 * azimuth_tables(phi, L)[0][:, None, :]).transpose(1, 0, 2))
            T2 = np.ascontiguousarray(T2.transpose(2, 0, 1))  # (k3, p, k2)
            Z = np.zeros((p, K, K))
            for k3, Cb in enumerate(blocks):
                n = K - k3
                Y = (V[k3, :, : 2 * k3 + 1] @ Cb.T).reshape(p, n, n)
                Y *= T2[k3][:, None, k3:]
                Z[:, k3:, k3:] += Y
            out[start:start + chunk] = np.einsum("pij,pij->p", Z, T1)
        return out


def build_grid(L: int = 12, azimuth_count: int | None = None) -> SphereGrid:
    """Construct the product-Gauss grid of resolution L (exact to degree 2L+1)."""
    if azimuth_count is None:
        azimuth_count = 2 * L + 2
    return _cached_grid(int(L), int(azimuth_count))


_GRID_CACHE: dict = {}


def _cached_grid(L, nphi):
    key = (L, nphi)
    if key not in _GRID_CACHE:
        _GRID_CACHE[key] = SphereGrid(L, nphi)
    return _GRID_CACHE[key]
