"""G(P,t) = average of K(phi_{P,t}(x)) x, its zeros, degree and the index sum of K."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import BoundaryTooSmallError, NonDegeneracyError
from .grid import SPHERE_VOLUME, build_grid
from .kspec import KSpec
from .moebius import _dilate, ball_to_pt

DEFAULT_G_LEVEL = 8
DEFAULT_BOUNDARY_LEVEL = 4
# boundary quadrature levels tried in turn by the degree computation
KRONECKER_LEVELS = (6, 8, 10)
# a Kronecker value is accepted when within this distance of an integer
INTEGER_SLACK = 0.3


def _grid(grid):
    return build_grid(DEFAULT_G_LEVEL) if grid is None else grid


def gmap(K: KSpec, P, t, grid=None) -> np.ndarray:
    """G(P,t) for one map, or for stacks P (m, 5), t (m,)."""
    grid = _grid(grid)
    P = np.asarray(P, dtype=float)
    single = P.ndim == 1
    out = _gmap_batch(K, np.atleast_2d(P), np.atleast_1d(np.asarray(t, dtype=float)), grid)
    return out[0] if single else out


def _gmap_batch(K, P, t, grid, chunk=16):
    out = np.empty((P.shape[0], 5))
    wx = grid.weights[:, None] * grid.nodes / SPHERE_VOLUME
    for s in range(0, P.shape[0], chunk):
        z = _dilate(P[s:s + chunk], t[s:s + chunk], grid.nodes)  # (m, N, 5)
        m, n = z.shape[:2]
        k = K(z.reshape(-1, 5)).reshape(m, n)
        out[s:s + chunk] = k @ wx
    return out


class ZonalG:
    """G(P,t) through the substitution z = phi(x) and the Funk-Hecke formula.

    After the substitution the weight depends on z only through c = z.P:
        |S^4| G = int K(z) z a(c) dz + P int K(z) b(c) dz,
    so only the harmonic components of the polynomials K and K x_j at P enter,
    each scaled by a one-dimensional integral in c.  Exact for polynomial K at
    any t, up to the c-quadrature.
    """

    def __init__(self, K: KSpec, n_c: int = 400):
        from scipy.special import eval_jacobi, roots_jacobi

        self.K = K
        L = max(4, K.degree + 1)
        g = build_grid(L)
        self.grid = g
        kv = K(g.nodes)
        vals = np.column_stack([kv] + [kv * g.nodes[:, j] for j in range(5)])
        coeffs = g.analyze(vals)  # (dim, 6)
        self._coeffs = coeffs
        self._degree = g.degree
        self.L = L
        c, wc = roots_jacobi(n_c, 1.0, 1.0)
        self._c, self._wc = c, wc
        ells = np.arange(L + 1)
        self._gegen = np.stack([eval_jacobi(l, 1.0, 1.0, c) / eval_jacobi(l, 1.0, 1.0, 1.0) for l in ells])

    def _multipliers(self, t):
        """Funk-Hecke multipliers of a(c), b(c) for each t: two arrays (m, L+1)."""
        t = np.atleast_1d(t)[:, None]
        c = self._c[None]
        D = (1 + c) + t**2 * (1 - c)
        base = (2 * t) ** 4 / D**5
        a = 2 * t * base
        b = -(2 * t * c + t**2 * (1 - c) - (1 + c)) * base
        S3 = 2 * np.pi**2
        mu_a = S3 * (a * self._wc) @ self._gegen.T
        mu_b = S3 * (b * self._wc) @ self._gegen.T
        return mu_a, mu_b

    def __call__(self, P, t) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, dtype=float))
        t = np.broadcast_to(np.asarray(t, dtype=float), (P.shape[0],))
        B = self.grid.basis_at(P)  # (m, dim)
        mu_a, mu_b = self._multipliers(t)  # (m, L+1)
        scale_a = mu_a[:, self._degree]  # (m, dim)
        scale_b = mu_b[:, self._degree]
        Kx = np.einsum("md,dj->mj", B * scale_a, self._coeffs[:, 1:])
        Kp = np.einsum("md,d->m", B * scale_b, self._coeffs[:, 0])
        return (Kx + Kp[:, None] * P) / SPHERE_VOLUME

    def on_ball(self, xi, chunk: int = 8192) -> np.ndarray:
        P, t = ball_to_pt(xi)
        out = np.empty((P.shape[0], 5))
        for s in range(0, P.shape[0], chunk):
            out[s:s + chunk] = self(P[s:s + chunk], t[s:s + chunk])
        return out


_ZONAL_CACHE: dict = {}


def zonal_gmap(K: KSpec) -> ZonalG:
    key = (K.exponents.tobytes(), K.coefficients.tobytes(), K.s)
    if key not in _ZONAL_CACHE:
        _ZONAL_CACHE[key] = ZonalG(K)
    return _ZONAL_CACHE[key]


def gmap_on_ball(K: KSpec, xi, grid=None, method: str = "quadrature") -> np.ndarray:
    """G as a function of the ball point xi = (t-1)P/t; accepts (5,) or (m, 5).

    ``method`` is "quadrature" (direct evaluation of the defining integral on
    ``grid``) or "zonal" (exact reduction, see ZonalG).
    """
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim == 1
    if method == "zonal":
        out = zonal_gmap(K).on_ball(np.atleast_2d(xi))
    elif method == "quadrature":
        P, t = ball_to_pt(np.atleast_2d(xi))
        out = _gmap_batch(K, P, t, _grid(grid))
    else:
        raise ValueError(f"unknown G method {method!r}")
    return out[0] if single else out


def _jacobian_batch(u, xi, h):
    """Central-difference Jacobians of a batched map u at points xi (m, 5)."""
    m = xi.shape[0]
    pts = np.concatenate([xi + s * h * e for e in np.eye(5) for s in (1.0, -1.0)])
    vals = u(pts).reshape(5, 2, m, 5)
    return np.moveaxis((vals[:, 0] - vals[:, 1]) / (2 * h), 0, -1)  # (m, 5, 5): [.., i, k] = d u_i / d xi_k


def gmap_jacobian(K: KSpec, xi, h=1e-5, grid=None, method: str = "zonal") -> np.ndarray:
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    grid = _grid(grid)
    J = _jacobian_batch(lambda p: gmap_on_ball(K, p, grid, method), xi, h)
    return J[0] if J.shape[0] == 1 else J


def ball_seeds(n: int, r: float, seed: int = 0) -> np.ndarray:
    """Low-discrepancy points in the ball of radius r, origin first."""
    sob = qmc.Sobol(5, scramble=True, seed=seed)
    pts = [np.zeros((1, 5))]
    count = 1
    while count < n:
        cand = 2 * sob.random(64) - 1
        cand = cand[np.linalg.norm(cand, axis=1) < 1] * r
        pts.append(cand)
        count += cand.shape[0]
    return np.concatenate(pts)[:n]


@dataclass
class Zero:
    xi: np.ndarray
    sign: int
    det: float
    residual: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        P, t = ball_to_pt(self.xi)
        return {
            "xi": self.xi.tolist(),
            "P": P[0].tolist(),
            "t": float(t[0]),
            "sign": self.sign,
            "det": self.det,
            "residual": self.residual,
            "degenerate": self.degenerate,
        }


def newton_zeros(u, seeds, r, tol=1e-12, maxiter=60, h=1e-6, max_halvings=40):
    """Batched damped Newton for zeros of u inside the ball of radius r."""
    xi = np.array(seeds, dtype=float)
    val = u(xi)
    active = np.ones(len(xi), dtype=bool)
    done = np.zeros(len(xi), dtype=bool)
    for _ in range(maxiter):
        nrm = np.linalg.norm(val, axis=1)
        done |= nrm <= tol
        active &= ~done
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        J = _jacobian_batch(u, xi[idx], h)
        try:
            step = np.linalg.solve(J, -val[idx][..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.stack([np.linalg.lstsq(j, -v, rcond=None)[0] for j, v in zip(J, val[idx])])
        lam = np.ones(idx.size)
        pending = np.arange(idx.size)
        for _ in range(max_halvings):
            trial = xi[idx[pending]] + lam[pending, None] * step[pending]
            inside = np.linalg.norm(trial, axis=1) < r
            tv = np.full((pending.size, 5), np.inf)
            if inside.any():
                tv[inside] = u(trial[inside])
            ok = np.linalg.norm(tv, axis=1) < nrm[idx[pending]]
            acc = pending[ok]
            xi[idx[acc]] = trial[ok]
            val[idx[acc]] = tv[ok]
            pending = pending[~ok]
            lam[pending] *= 0.5
            if pending.size == 0:
                break
        # seeds that cannot decrease |u| inside the ball are abandoned
        active[idx[pending]] = False
    nrm = np.linalg.norm(val, axis=1)
    return xi, nrm, nrm <= tol


def _dedup(points, radius=1e-6):
    keep = []
    for i, p in enumerate(points):
        if all(np.linalg.norm(p - points[j]) > radius for j in keep):
            keep.append(i)
    return keep


def find_zeros(
    K: KSpec, r: float, n_seeds: int = 200, grid=None, tol=None, seed: int = 0, method: str = "zonal"
) -> list[Zero]:
    if not 0 < r < 1:
        raise ValueError(f"radius must lie in (0, 1), got {r}")
    grid = _grid(grid)
    scale = max(1.0, K.sup_norm(grid))
    tol = 1e-12 * scale if tol is None else tol

    def u(p):
        return gmap_on_ball(K, p, grid, method)

    xi, nrm, conv = newton_zeros(u, ball_seeds(n_seeds, r, seed), r, tol=tol)
    cand = xi[conv]
    order = np.lexsort(cand.T[::-1]) if len(cand) else []
    cand = cand[order] if len(cand) else cand
    zeros = []
    for i in _dedup(cand):
        J = gmap_jacobian(K, cand[i], grid=grid, method=method)
        det = float(np.linalg.det(J))
        sv = np.linalg.svd(J, compute_uv=False)
        # relative test: the Jacobian of G scales with K - mean(K), not with K
        degenerate = sv[-1] <= 1e-8 * max(sv[0], 1e-14 * scale)
        zeros.append(Zero(cand[i], int(np.sign(det)), det, float(np.linalg.norm(u(cand[i]))), degenerate))
    return zeros


def kronecker_degree(u, r: float, level: int = DEFAULT_BOUNDARY_LEVEL, h: float = 1e-4, whiten: bool = True):
    """Degree of u on the ball of radius r from the boundary integral of u/|u|.

    Returns (raw value, min |u| on the boundary quadrature nodes).
    """
    bg = build_grid(level)
    z, E = bg.nodes, bg.frame
    N = z.shape[0]
    pts = [r * z]
    for a in range(4):
        for s in (1.0, -1.0):
            q = z + s * h * E[:, a]
            pts.append(r * q / np.linalg.norm(q, axis=1, keepdims=True))
    vals = u(np.concatenate(pts)).reshape(9, N, 5)
    nu = np.linalg.norm(vals[0], axis=1)
    if whiten:
        # An SPD map is homotopic to the identity through invertible maps, so
        # C^{-1/2} u has the same degree but a far less peaked integrand.
        C = np.einsum("n,ni,nj->ij", bg.weights, vals[0], vals[0]) / SPHERE_VOLUME
        lam, V = np.linalg.eigh(C)
        vals = vals @ (V / np.sqrt(lam)) @ V.T
    U = vals[0]
    D = [(vals[1 + 2 * a] - vals[2 + 2 * a]) / (2 * h) for a in range(4)]
    mat = np.stack([U] + D, axis=1)  # rows u, du/dE_a
    orient = np.sign(np.linalg.det(np.concatenate([z[:, None], E], axis=1)))
    integrand = orient * np.linalg.det(mat) / np.linalg.norm(U, axis=1) ** 5
    return float(bg.weights @ integrand) / SPHERE_VOLUME, float(nu.min())


@dataclass
class DegreeReport:
    r: float
    degree: int
    kronecker_value: float
    boundary_min_G: float
    zeros: list = field(default_factory=list)
    zero_sign_sum: int = 0
    zeros_complete: bool = True
    index_sum: int | None = None
    method: dict = field(default_factory=dict)
    radius_history: list = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return (not self.zeros_complete) or self.degree == self.zero_sign_sum

    def to_dict(self) -> dict:
        d = asdict(self)
        d["zeros"] = [z.to_dict() if isinstance(z, Zero) else z for z in self.zeros]
        d["consistent"] = self.consistent
        d["no_zeros"] = len(self.zeros) == 0
        return d


def stable_kronecker(u, r: float, levels=KRONECKER_LEVELS, slack: float = INTEGER_SLACK):
    """Kronecker value refined over boundary levels until two consecutive
    levels round to the same integer and both lie within ``slack`` of it.

    Returns (degree or None, values per level, min |u| on the boundary).
    """
    values, bmin, prev = [], np.inf, None
    for lv in levels:
        val, b = kronecker_degree(u, r, lv)
        values.append(val)
        bmin = min(bmin, b)
        if prev is not None:
            k = round(val)
            if round(prev) == k and abs(val - k) < slack and abs(prev - k) < slack:
                return int(k), values, bmin
        prev = val
    return None, values, bmin


def _route_error(K, r, grid, level, method):
    """Disagreement of G between two independent routes at boundary points.

    For the zonal route this is |zonal - quadrature on a finer grid|; for the
    quadrature route it is the change when the grid is refined by 4.
    """
    fine = build_grid(grid.L + 4)
    bg = build_grid(level)
    pts = r * bg.nodes[:: max(1, bg.size // 16)]
    return float(np.max(np.abs(gmap_on_ball(K, pts, grid, method) - gmap_on_ball(K, pts, fine))))


def brouwer_degree(
    K: KSpec,
    r: float | None = None,
    grid=None,
    radii=(0.5, 0.6, 0.7, 0.8, 0.9),
    n_seeds: int = 200,
    levels=KRONECKER_LEVELS,
    threshold: float | None = None,
    method: str = "zonal",
) -> DegreeReport:
    """Degree of G on B_r; with r = None the radius grows until the degree is
    unchanged for two consecutive admissible radii."""
    grid = _grid(grid)
    scale = max(1.0, K.sup_norm(grid))

    def u(p):
        return gmap_on_ball(K, p, grid, method)

    def at_radius(rr):
        err = _route_error(K, rr, grid, DEFAULT_BOUNDARY_LEVEL, method)
        thr = max(10 * err, 1e-10 * scale) if threshold is None else threshold
        deg, vals, bmin = stable_kronecker(u, rr, levels)
        row = {"r": rr, "degree": deg, "kronecker": vals, "boundary_min": bmin, "route_error": err, "threshold": thr}
        return row

    history = []
    if r is not None:
        row = at_radius(r)
        history.append(row)
        if row["boundary_min"] <= row["threshold"]:
            raise BoundaryTooSmallError(
                f"min |G| on the boundary of B_{r} is {row['boundary_min']:.3g} <= threshold {row['threshold']:.3g}; adjust r"
            )
        if row["degree"] is None:
            raise BoundaryTooSmallError(f"Kronecker values {row['kronecker']} at r = {r} did not settle; adjust r")
    else:
        prev = None
        row = None
        for rr in radii:
            cand = at_radius(rr)
            history.append(cand)
            if cand["boundary_min"] <= cand["threshold"] or cand["degree"] is None:
                prev = None
                continue
            if prev is not None and prev["degree"] == cand["degree"]:
                row = cand
                break
            prev = cand
        if row is None:
            raise BoundaryTooSmallError(f"no admissible radius with a stable degree among {list(radii)}")
        r = row["r"]
    zeros = find_zeros(K, r, n_seeds=n_seeds, grid=grid, method=method)
    return DegreeReport(
        r=r,
        degree=row["degree"],
        kronecker_value=row["kronecker"][-1],
        boundary_min_G=row["boundary_min"],
        zeros=zeros,
        zero_sign_sum=int(sum(z.sign for z in zeros)),
        zeros_complete=not any(z.degenerate for z in zeros),
        method={"G": method, "G_level": grid.L, "kronecker_levels": list(levels), "seeds": n_seeds},
        radius_history=history,
    )


def affine_degree(A, r: float = 0.5, level: int = DEFAULT_BOUNDARY_LEVEL) -> int:
    """Kronecker degree of the linear field xi -> A xi (oracle for the machinery)."""
    A = np.asarray(A, dtype=float)
    val, _ = kronecker_degree(lambda p: p @ A.T, r, level)
    return int(round(val))


# ----------------------------------------------------------- critical points
@dataclass
class CriticalPoint:
    x: np.ndarray
    value: float
    laplacian: float
    det_hessian: float
    index: int | None

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "K": self.value,
            "laplacian": self.laplacian,
            "det_hessian": self.det_hessian,
            "index": self.index,
        }


def _tangent_basis(x):
    """Orthonormal basis (5, 4) of the tangent space at unit x."""
    q, _ = np.linalg.qr(np.column_stack([x, np.eye(5)]))
    return q[:, 1:5]


def sphere_seeds(n: int, seed: int = 0) -> np.ndarray:
    from scipy.special import ndtri

    sob = qmc.Sobol(5, scramble=True, seed=seed)
    pts = ndtri(np.clip(sob.random_base2(max(0, int(np.ceil(np.log2(n)))))[:n], 1e-12, 1 - 1e-12))
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def critical_points(K: KSpec, n_seeds: int = 200, tol: float = 1e-12, maxiter: int = 60, seed: int = 0):
    scale = max(1.0, float(np.max(np.abs(K(sphere_seeds(256, seed + 1))))))
    X = sphere_seeds(n_seeds, seed)
    g0 = K.gradient(X)
    if np.max(np.linalg.norm(g0, axis=1)) <= 1e-10 * scale:
        raise NonDegeneracyError("grad K vanishes identically: every point is a degenerate critical point")
    found = []
    for x in X:
        for _ in range(maxiter):
            g = K.gradient(x[None])[0]
            if np.linalg.norm(g) <= tol * scale:
                found.append(x)
                break
            T = _tangent_basis(x)
            H = T.T @ K.hessian(x[None])[0] @ T
            try:
                d = np.linalg.solve(H, -T.T @ g)
            except np.linalg.LinAlgError:
                d = np.linalg.lstsq(H, -T.T @ g, rcond=None)[0]
            nd = np.linalg.norm(d)
            if nd > 0.5:
                d *= 0.5 / nd
            x = x + T @ d
            x /= np.linalg.norm(x)
    found = np.array(found)
    if len(found):
        found = found[np.lexsort(found.T[::-1])]
    pts = []
    for i in _dedup(found):
        x = found[i]
        T = _tangent_basis(x)
        H = T.T @ K.hessian(x[None])[0] @ T
        pts.append((x, float(K(x[None])[0]), float(np.trace(H)), float(np.linalg.det(H))))
    return pts, scale


def critical_index_sum(K: KSpec, n_seeds: int = 200, seed: int = 0):
    """Sum of ind(grad K) over critical points with Delta K < 0.

    Returns (sum, list of all critical points found); critical points with
    Delta K > 0 are listed with their index when non-degenerate.
    """
    pts, scale = critical_points(K, n_seeds, seed=seed)
    out = []
    total = 0
    for x, val, lap, det in pts:
        if abs(lap) <= 1e-10 * scale:
            raise NonDegeneracyError(f"Delta K = 0 at the critical point {x.tolist()}")
        degenerate = abs(det) <= 1e-10 * scale**4
        if degenerate and lap < 0:
            raise NonDegeneracyError(f"degenerate critical point with Delta K < 0 at {x.tolist()}")
        idx = None if degenerate else int(np.sign(det))
        if lap < 0:
            total += idx
        out.append(CriticalPoint(x, val, lap, det, idx))
    return total, out
