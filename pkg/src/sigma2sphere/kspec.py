"""Prescribed curvature functions K as ambient polynomials in x1..x5."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NonPositiveKError

# Shipped Morse preset: distinct, nonzero, traceless quadratic part plus a
# quartic x5 term chosen so that G also vanishes away from the origin.
MORSE_A_DIAGONAL = (-3.0, -1.0, 1.5, 2.0, 0.5)
MORSE_A_QUARTIC = -0.42


@dataclass(frozen=True)
class KSpec:
    """K(x) = sum_k c_k x^{e_k}; ``s`` selects the deformation (1-s)6 + sK."""

    exponents: np.ndarray
    coefficients: np.ndarray
    s: float = 1.0
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        e = np.atleast_2d(np.asarray(self.exponents, dtype=np.int64))
        c = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        if e.ndim != 2 or e.shape[1] != 5 or e.shape[0] != c.shape[0]:
            raise ConfigError("K needs one exponent 5-vector per coefficient")
        if np.any(e < 0):
            raise ConfigError("negative exponent in K")
        if not 0.0 <= self.s <= 1.0:
            raise ConfigError(f"deformation parameter s must lie in [0, 1], got {self.s}")
        object.__setattr__(self, "exponents", e)
        object.__setattr__(self, "coefficients", c)

    @property
    def degree(self) -> int:
        return int(self.exponents.sum(axis=1).max()) if len(self.coefficients) else 0

    def deformed(self, s: float) -> "KSpec":
        return KSpec(self.exponents, self.coefficients, s, self.name, self.params)

    # ------------------------------------------------------------ evaluation
    def _powers(self, x):
        """Table x_i^p for p up to the largest exponent, shape (p_max+1, n, 5)."""
        pmax = int(self.exponents.max()) if self.exponents.size else 0
        P = np.empty((pmax + 1,) + x.shape)
        P[0] = 1.0
        for p in range(1, pmax + 1):
            P[p] = P[p - 1] * x
        return P

    def _monomials(self, P, exps):
        out = np.zeros(P.shape[1])
        for e, c in exps:
            term = np.full(P.shape[1], c)
            for i in np.nonzero(e)[0]:
                term = term * P[e[i], :, i]
            out += term
        return out

    def _raw(self, x):
        x = np.atleast_2d(x)
        return self._monomials(self._powers(x), zip(self.exponents, self.coefficients))

    def _raw_grad(self, x):
        x = np.atleast_2d(x)
        P = self._powers(x)
        g = np.zeros(x.shape)
        for i in range(5):
            terms = []
            for e, c in zip(self.exponents, self.coefficients):
                if e[i]:
                    ee = e.copy()
                    ee[i] -= 1
                    terms.append((ee, c * e[i]))
            g[:, i] = self._monomials(P, terms)
        return g

    def _raw_hess(self, x):
        x = np.atleast_2d(x)
        P = self._powers(x)
        H = np.zeros(x.shape + (5,))
        for i in range(5):
            for j in range(i, 5):
                terms = []
                for e, c in zip(self.exponents, self.coefficients):
                    ee = e.copy()
                    f = ee[i]
                    ee[i] -= 1
                    f *= max(ee[j], 0)
                    if f:
                        ee[j] -= 1
                        terms.append((ee, c * f))
                H[:, i, j] = H[:, j, i] = self._monomials(P, terms)
        return H

    def __call__(self, x) -> np.ndarray:
        """K^[s] at unit vectors x (p, 5)."""
        return (1.0 - self.s) * 6.0 + self.s * self._raw(x)

    def ambient_gradient(self, x) -> np.ndarray:
        return self.s * self._raw_grad(x)

    def ambient_hessian(self, x) -> np.ndarray:
        return self.s * self._raw_hess(x)

    def gradient(self, x) -> np.ndarray:
        """Tangential gradient on S^4: Pi(x) grad p."""
        x = np.atleast_2d(x)
        g = self.ambient_gradient(x)
        return g - np.sum(g * x, axis=1, keepdims=True) * x

    def hessian(self, x) -> np.ndarray:
        """Covariant Hessian on S^4: Pi D^2p Pi - (x . Dp) Pi."""
        x = np.atleast_2d(x)
        Pi = np.eye(5)[None] - x[:, :, None] * x[:, None, :]
        g = self.ambient_gradient(x)
        D2 = self.ambient_hessian(x)
        radial = np.sum(g * x, axis=1)
        return Pi @ D2 @ Pi - radial[:, None, None] * Pi

    def laplacian(self, x) -> np.ndarray:
        return np.trace(self.hessian(x), axis1=1, axis2=2)

    def sup_norm(self, grid) -> float:
        return float(np.max(np.abs(self(grid.nodes))))

    def check_positive(self, grid) -> None:
        vals = self._raw(grid.nodes)
        i = int(np.argmin(vals))
        if vals[i] <= 0:
            raise NonPositiveKError(
                f"K is not positive: K = {vals[i]:.6g} at node {i}, x = {grid.nodes[i].tolist()}"
            )

    def is_even(self) -> bool:
        return bool(np.all(self.exponents.sum(axis=1) % 2 == 0))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "params": dict(self.params),
            "terms": [[e.tolist(), float(c)] for e, c in zip(self.exponents, self.coefficients)],
        }


def _mono(*pairs):
    exps, coefs = [], []
    for e, c in pairs:
        exps.append(e)
        coefs.append(c)
    return np.array(exps, dtype=np.int64), np.array(coefs)


def _unit(i, p=1):
    e = [0] * 5
    e[i] = p
    return e


def constant(c: float = 6.0) -> KSpec:
    return KSpec(*_mono(([0] * 5, c)), name="constant6" if c == 6.0 else "constant", params={"c": c})


def linear_eps(eps: float = 0.5) -> KSpec:
    return KSpec(*_mono(([0] * 5, 6.0), (_unit(4), eps)), name="linear_eps", params={"eps": eps})


def x5_squared(eps: float = 0.1) -> KSpec:
    """6(1 + eps (x5^2 - 1/5)): even, with G vanishing at the origin."""
    return KSpec(
        *_mono(([0] * 5, 6.0 * (1 - eps / 5)), (_unit(4, 2), 6.0 * eps)),
        name="x5_squared",
        params={"eps": eps},
    )


def morse_a(eps: float = 0.1, quartic: float = MORSE_A_QUARTIC, diagonal=MORSE_A_DIAGONAL) -> KSpec:
    """6(1 + eps x^T D x) + quartic x5^4 with D diagonal, distinct and traceless.

    Even in x, so G is odd in the ball coordinate; the quartic term makes G
    change sign along the e5 axis, giving zeros off the origin.
    """
    pairs = [([0] * 5, 6.0)] + [(_unit(i, 2), 6.0 * eps * d) for i, d in enumerate(diagonal)]
    if quartic:
        pairs.append((_unit(4, 4), quartic))
    return KSpec(
        *_mono(*pairs),
        name="morse_a",
        params={"eps": eps, "quartic": quartic, "diagonal": list(diagonal)},
    )


PRESETS = {
    "constant6": lambda **kw: constant(6.0),
    "constant": lambda c=6.0: constant(c),
    "linear_eps": linear_eps,
    "x5_squared": x5_squared,
    "morse_a": morse_a,
}


def preset(name: str, **params) -> KSpec:
    if name not in PRESETS:
        raise ConfigError(f"unknown K preset {name!r}; known: {sorted(PRESETS)}")
    try:
        return PRESETS[name](**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for preset {name!r}: {exc}") from None


def from_terms(terms, name: str = "custom") -> KSpec:
    """Build K from [[exponents], coefficient] pairs."""
    try:
        exps = [list(map(int, e)) for e, _ in terms]
        coefs = [float(c) for _, c in terms]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed K terms: {exc}") from None
    if not exps:
        raise ConfigError("K needs at least one term")
    return KSpec(np.array(exps), np.array(coefs), name=name)
