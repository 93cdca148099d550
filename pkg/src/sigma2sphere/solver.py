"""Constructive solver: projected inner solve, multipliers Lambda, outer zero search
over the ball coordinate, continuation in s and a full Newton polish."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .curvature import (
    GAUSS_BONNET,
    frame_schouten,
    kazdan_warner,
    linear_operator,
    residual_nodal,
    scar_margin,
    sigma2_derivative_parts,
    sigma_k,
)
from .errors import (
    ConvergenceError,
    InadmissibleError,
    NearBlowUpError,
    SingularLinearizationError,
)
from .fields import ScalarField, SecondOrderOperator, project, zero
from .functionals import functional_F
from .grid import SPHERE_VOLUME, SphereGrid
from .kspec import KSpec
from .moebius import T_CAP, MoebiusMap, center_of_mass, map_of, moebius_apply, normalize_to_S0, pullback_w

log = logging.getLogger(__name__)


# ------------------------------------------------------------------ helpers
def project_Y(f: ScalarField) -> ScalarField:
    """Remove the first spherical harmonics (the span of x_1..x_5)."""
    c = f.coeffs.copy()
    c[f.grid.degree == 1] = 0.0
    return ScalarField(f.grid, c)


def _preconditioner(grid: SphereGrid, mask=None) -> np.ndarray:
    """Inverse diagonal of -6 Lap - 24 on the basis, with 1 on degree one."""
    ell = grid.degree
    d = 6.0 * ell * (ell + 3) - 24.0
    d[ell == 1] = 1.0
    inv = 1.0 / d
    return inv if mask is None else inv[mask]


def _solve_linear(op: SecondOrderOperator, rhs, mask, rtol=1e-12, maxiter=400):
    """GMRES on the coefficients selected by mask, preconditioned by the s=0 operator."""
    A = op.restricted(mask)
    pinv = _preconditioner(op.grid, mask)
    M = LinearOperator(A.shape, matvec=lambda y: pinv * np.ravel(y), dtype=float)
    x, info = gmres(A, rhs, M=M, rtol=rtol, atol=0.0, restart=80, maxiter=maxiter)
    return x, info


def admissibility_margins(v: ScalarField) -> tuple[float, float]:
    A = frame_schouten(v)
    return float(sigma_k(A, 1).min()), float(sigma_k(A, 2).min())


def multipliers(grid: SphereGrid, F_nodal) -> np.ndarray:
    """Lambda_j = 5 |S^4|^{-1} int F x_j."""
    return 5.0 / SPHERE_VOLUME * (grid.weights * F_nodal) @ grid.nodes


# --------------------------------------------------------------- inner solve
@dataclass
class InnerResult:
    v: ScalarField
    Lambda: np.ndarray
    residual_norm: float
    iterations: int
    margins: tuple


def _F_nodal(v: ScalarField, Kphi):
    return np.exp(-4 * v.nodal) * sigma_k(frame_schouten(v), 2) - Kphi


def inner_solve(
    K: KSpec,
    xi,
    v0: ScalarField | None = None,
    grid: SphereGrid | None = None,
    tol: float | None = None,
    maxiter: int = 30,
) -> InnerResult:
    """Solve Pi F(v) = 0 for v in X, F = e^{-4v} sigma_2(A(v)) - K^[s] o phi_xi.

    Returns v and the multipliers Lambda of the first-harmonic part of F.
    """
    if grid is None:
        grid = v0.grid
    m = map_of(xi)
    Kphi = K(moebius_apply(m, grid.nodes))
    tol = 1e-10 * max(1.0, float(np.abs(Kphi).max())) if tol is None else tol
    mask = grid.degree != 1
    v = zero(grid) if v0 is None else project_Y(v0)

    def state(v):
        F = _F_nodal(v, Kphi)
        Fc = grid.analyze(F)
        r = np.where(mask, Fc, 0.0)
        return F, r, float(np.max(np.abs(grid.synthesize(r))))

    F, r, rn = state(v)
    it = 0
    extra = 1  # one step past the tolerance sharpens Lambda for finite differences
    while rn > tol or extra > 0:
        if rn <= tol:
            extra -= 1
        if it >= maxiter:
            raise ConvergenceError(f"inner solve stagnated at |Pi F| = {rn:.3e} after {it} steps")
        Q, b, A = sigma2_derivative_parts(v)
        e = np.exp(-4 * v.nodal)
        s2 = sigma_k(A, 2)
        op = SecondOrderOperator(grid, Q * e[:, None, None], b * e[:, None], -4 * s2 * e)
        dx, info = _solve_linear(op, -r[mask], mask)
        step = np.zeros(grid.dim)
        step[mask] = dx
        lam = 1.0
        r2 = np.linalg.norm(r)
        while True:
            trial = ScalarField(grid, v.coeffs + lam * step)
            s1m, s2m = admissibility_margins(trial)
            if s1m > 0 and s2m > 0:
                Ft, rt, rnt = state(trial)
                if np.linalg.norm(rt) < r2 or (rn <= tol and rnt <= 10 * tol):
                    break
            lam *= 0.5
            if lam < 1e-12:
                if rn <= tol:
                    break
                raise InadmissibleError("inner solve line search failed to keep v admissible")
        if lam < 1e-12:
            break
        v, F, r, rn = trial, Ft, rt, rnt
        it += 1
    return InnerResult(v, multipliers(grid, F), rn, it, admissibility_margins(v))


# ---------------------------------------------------------------- outer solve
@dataclass
class SolverState:
    v: ScalarField
    xi: np.ndarray
    s: float
    Lambda: np.ndarray
    residual_norm: float
    margins: tuple
    outer_iterations: int = 0

    @property
    def map(self) -> MoebiusMap:
        return map_of(self.xi)


def solve_at_s(
    K: KSpec,
    s: float,
    xi_seed,
    v_seed: ScalarField | None = None,
    grid: SphereGrid | None = None,
    tol: float = 1e-9,
    maxiter: int = 20,
    h: float = 1e-4,
    t_cap: float = T_CAP,
) -> SolverState:
    """Drive Lambda^[s](xi) to zero by quasi-Newton in xi."""
    Ks = K.deformed(s)
    xi = np.asarray(xi_seed, dtype=float).copy()
    r_max = 1.0 - 1.0 / t_cap

    def evaluate(x, v0):
        return inner_solve(Ks, x, v0, grid=grid)

    res = evaluate(xi, v_seed)
    grid = res.v.grid
    J = None
    it = 0
    while np.linalg.norm(res.Lambda) > tol:
        if it >= maxiter:
            raise ConvergenceError(
                f"no zero of Lambda found at s = {s}: |Lambda| = {np.linalg.norm(res.Lambda):.3e}, xi = {xi.tolist()}"
            )
        if J is None:
            J = np.empty((5, 5))
            for k in range(5):
                e = np.zeros(5)
                e[k] = h
                J[:, k] = (evaluate(xi + e, res.v).Lambda - evaluate(xi - e, res.v).Lambda) / (2 * h)
        step = np.linalg.lstsq(J, -res.Lambda, rcond=None)[0]
        lam = 1.0
        while True:
            trial = xi + lam * step
            if np.linalg.norm(trial) >= r_max:
                lam *= 0.5
                if lam < 1e-6:
                    raise NearBlowUpError(f"Lambda-zero search left the ball (t > {t_cap}) at s = {s}")
                continue
            try:
                new = evaluate(trial, res.v)
            except ConvergenceError:
                new = None
            if new is not None and np.linalg.norm(new.Lambda) < np.linalg.norm(res.Lambda):
                break
            lam *= 0.5
            if lam < 1e-6:
                raise ConvergenceError(f"outer line search failed at s = {s}, xi = {xi.tolist()}")
        # Broyden update keeps later Jacobians cheap
        dx = trial - xi
        dL = new.Lambda - res.Lambda
        J = J + np.outer(dL - J @ dx, dx) / (dx @ dx)
        xi, res = trial, new
        it += 1
    return SolverState(res.v, xi, s, res.Lambda, res.residual_norm, res.margins, it)


def reconstruct_w(state: SolverState) -> ScalarField:
    """w = v o phi^{-1} + ln|d phi^{-1}|."""
    return pullback_w(state.v, state.map.inverse())


# ---------------------------------------------------------------- continuation
@dataclass
class ContinuationSchedule:
    start: float = 0.01
    grow: float = 2.0
    shrink: float = 0.5
    floor: float = 1e-4
    max_steps: int = 200


@dataclass
class ContinuationTrace:
    rows: list = field(default_factory=list)
    status: str = "running"

    def add(self, state: SolverState, F_value: float):
        self.rows.append(
            {
                "s": state.s,
                "xi": [float(a) for a in state.xi],
                "v_norm": float(np.linalg.norm(state.v.coeffs) / np.sqrt(SPHERE_VOLUME)),
                "Lambda_norm": float(np.linalg.norm(state.Lambda)),
                "residual_norm": state.residual_norm,
                "F": F_value,
                "min_sigma1": state.margins[0],
                "min_sigma2": state.margins[1],
            }
        )

    @property
    def s_values(self):
        return [r["s"] for r in self.rows]


@dataclass
class ConformalSolution:
    w: ScalarField
    K: KSpec
    s: float
    xi: np.ndarray
    report: dict = field(default_factory=dict)


def continue_to_one(
    K: KSpec,
    xi_seed,
    grid: SphereGrid,
    schedule: ContinuationSchedule | None = None,
    polish: bool = True,
    t_cap: float = T_CAP,
) -> tuple[ConformalSolution, ContinuationTrace]:
    schedule = schedule or ContinuationSchedule()
    trace = ContinuationTrace()
    xi = np.asarray(xi_seed, dtype=float)
    v = zero(grid)
    s_done = 0.0
    ds = schedule.start
    steps = 0
    state = None
    while s_done < 1.0:
        if steps >= schedule.max_steps:
            trace.status = "step_failure"
            raise ConvergenceError("continuation exceeded the step budget")
        s_next = min(1.0, s_done + ds)
        steps += 1
        try:
            state = solve_at_s(K, s_next, xi, v, grid=grid, t_cap=t_cap)
        except InadmissibleError:
            ds *= schedule.shrink
            if ds < schedule.floor:
                trace.status = "inadmissible"
                raise
            continue
        except ConvergenceError:
            ds *= schedule.shrink
            if ds < schedule.floor:
                trace.status = "step_failure"
                raise
            continue
        xi, v, s_done = state.xi, state.v, s_next
        w_s = reconstruct_w(state)
        trace.add(state, functional_F(w_s, K.deformed(s_next)).F)
        log.info("s = %.4g  |Lambda| = %.2e  |v| = %.3g", s_next, np.linalg.norm(state.Lambda), trace.rows[-1]["v_norm"])
        ds *= schedule.grow
    w = reconstruct_w(state)
    K1 = K.deformed(1.0)
    if polish:
        w = full_newton(w, K1).w
    trace.status = "converged_at_1"
    sol = ConformalSolution(w, K1, 1.0, xi)
    sol.report = verify_solution(w, K1)
    return sol, trace


# ---------------------------------------------------------------- full Newton
def first_harmonic_singular_values(w: ScalarField, K: KSpec) -> np.ndarray:
    op = linear_operator(w, K)
    idx = np.nonzero(w.grid.degree == 1)[0]
    E = np.zeros((w.grid.dim, idx.size))
    E[idx, np.arange(idx.size)] = 1.0
    block = op.apply(E)[idx]
    return np.linalg.svd(block, compute_uv=False)


def full_newton(
    w0: ScalarField,
    K: KSpec,
    tol: float | None = None,
    maxiter: int = 20,
) -> ConformalSolution:
    """Damped Newton on the projected residual sigma_2(A(w)) - K e^{4w}."""
    grid = w0.grid
    scale = max(1.0, K.sup_norm(grid))
    tol = 1e-11 * scale if tol is None else tol
    s1, s2 = admissibility_margins(w0)
    if s1 <= 0 or s2 <= 0:
        raise InadmissibleError("full Newton needs an admissible starting point")
    mask = np.ones(grid.dim, dtype=bool)

    def state(w):
        r = grid.analyze(residual_nodal(w, K))
        return r, float(np.max(np.abs(grid.synthesize(r))))

    w = w0
    r, rn = state(w)
    it = 0
    while rn > tol:
        if it >= maxiter:
            raise ConvergenceError(f"full Newton did not converge: |residual| = {rn:.3e}")
        op = linear_operator(w, K)
        dx, info = _solve_linear(op, -r, mask)
        if info != 0 and np.linalg.norm(op.apply(dx) + r) > 1e-3 * np.linalg.norm(r):
            sv = first_harmonic_singular_values(w, K)
            raise SingularLinearizationError(
                f"linear solve failed near the conformal kernel; smallest singular values {sv.tolist()}", sv
            )
        lam = 1.0
        while True:
            trial = ScalarField(grid, w.coeffs + lam * dx)
            a1, a2 = admissibility_margins(trial)
            if a1 > 0 and a2 > 0:
                rt, rnt = state(trial)
                if np.linalg.norm(rt) < np.linalg.norm(r):
                    break
            lam *= 0.5
            if lam < 1e-12:
                raise ConvergenceError(f"full Newton line search failed at |residual| = {rn:.3e}")
        w, r, rn = trial, rt, rnt
        it += 1
    return ConformalSolution(w, K, K.s, np.zeros(5), {"iterations": it, "residual_inf": rn})


# ---------------------------------------------------------------- verification
def verify_solution(w: ScalarField, K: KSpec, normalize: bool = True) -> dict:
    """Residual, Kazdan-Warner, Gauss-Bonnet, admissibility, F and profile checks."""
    grid = w.grid
    scale = max(1.0, K.sup_norm(grid))
    res = project(grid, residual_nodal(w, K))
    res_inf = float(np.max(np.abs(res.nodal)))
    kw = kazdan_warner(w, K)
    e4w = np.exp(4 * w.nodal)
    K_int = float(grid.weights @ (K(grid.nodes) * e4w))
    s2_int = float(grid.weights @ sigma_k(frame_schouten(w), 2))
    s1, s2 = admissibility_margins(w)
    rep = {
        "L": grid.L,
        "s": K.s,
        "residual_inf": res_inf,
        "residual_tol": 1e-9 * scale,
        "kazdan_warner": kw.tolist(),
        "kazdan_warner_norm": float(np.linalg.norm(kw)),
        "kazdan_warner_tol": 1e-7 * scale * SPHERE_VOLUME,
        "K_integral": K_int,
        "sigma2_integral": s2_int,
        "gauss_bonnet_target": GAUSS_BONNET,
        "gauss_bonnet_error": abs(K_int - GAUSS_BONNET),
        "gauss_bonnet_sigma2_error": abs(s2_int - GAUSS_BONNET),
        "min_sigma1": s1,
        "min_sigma2": s2,
        "admissible": bool(s1 > 0 and s2 > 0),
        "functional": functional_F(w, K).to_dict(),
        "center_of_mass": center_of_mass(w).tolist(),
    }
    if normalize and rep["admissible"]:
        try:
            v, m = normalize_to_S0(w)
            grad = v.frame_gradient
            grad4 = float(grid.weights @ np.sum(grad**2, axis=1) ** 2)
            Kphi = K(moebius_apply(m, grid.nodes))
            rhs = float(grid.weights @ ((Kphi * np.exp(4 * v.nodal) - 6.0) * v.nodal))
            rep.update(
                {
                    "normalization_xi": m.xi.tolist(),
                    "normalization_t": m.t,
                    "inegrad_lhs": grad4,
                    "inegrad_rhs": rhs,
                    "inegrad_slack": rhs - grad4,
                    "scar_margin": scar_margin(v),
                }
            )
        except ConvergenceError as exc:
            rep["normalization_error"] = str(exc)
    rep["passed"] = bool(
        rep["residual_inf"] <= rep["residual_tol"]
        and rep["kazdan_warner_norm"] <= rep["kazdan_warner_tol"]
        and rep["gauss_bonnet_error"] <= 1e-6 * GAUSS_BONNET
        and rep["admissible"]
    )
    return rep
