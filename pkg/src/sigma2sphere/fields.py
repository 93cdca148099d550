"""Scalar fields on S^4 and the differential operators acting on them.

Tangent vector fields are plain arrays of shape (N, 5) and tangent 2-tensors
arrays of shape (N, 5, 5), one ambient (tangential) entry per grid node.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse.linalg import LinearOperator

from .grid import SPHERE_VOLUME, SphereGrid


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A function on S^4 held as harmonic coefficients plus nodal values."""

    grid: SphereGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (self.grid.dim,):
            raise ValueError(f"expected {self.grid.dim} coefficients, got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @cached_property
    def nodal(self) -> np.ndarray:
        return self.grid.synthesize(self.coeffs)

    @cached_property
    def _frame_derivs(self):
        return self.grid.frame_derivatives(self.coeffs)

    @property
    def frame_gradient(self) -> np.ndarray:
        return self._frame_derivs[0]

    @property
    def frame_hessian(self) -> np.ndarray:
        return self._frame_derivs[1]

    def at(self, points) -> np.ndarray:
        return self.grid.evaluate_at(self.coeffs, points)

    def __add__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.grid, self.coeffs + other.coeffs)
        return self + constant(self.grid, other)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self

    def __mul__(self, a):
        if isinstance(a, ScalarField):
            return project(self.grid, self.nodal * a.nodal)
        return ScalarField(self.grid, a * self.coeffs)

    __rmul__ = __mul__


def project(grid: SphereGrid, nodal) -> ScalarField:
    nodal = np.asarray(nodal, dtype=float)
    if nodal.shape != (grid.size,):
        raise ValueError(f"expected {grid.size} nodal values, got {nodal.shape}")
    return ScalarField(grid, grid.analyze(nodal))


def constant(grid: SphereGrid, c: float) -> ScalarField:
    coeffs = np.zeros(grid.dim)
    coeffs[0] = c * np.sqrt(SPHERE_VOLUME)
    return ScalarField(grid, coeffs)


def coordinate(grid: SphereGrid, j: int) -> ScalarField:
    """The ambient coordinate function x_j (0-based j)."""
    return project(grid, grid.nodes[:, j])


def zero(grid: SphereGrid) -> ScalarField:
    return ScalarField(grid, np.zeros(grid.dim))


def integrate(f, average: bool = False) -> float:
    """Quadrature integral over S^4; ``average`` divides by the exact volume."""
    if isinstance(f, ScalarField):
        grid, values = f.grid, f.nodal
    else:
        grid, values = f
    total = float(np.dot(grid.weights, values))
    return total / SPHERE_VOLUME if average else total


def nodal_integral(grid: SphereGrid, values, average: bool = False) -> float:
    return integrate((grid, np.asarray(values)), average)


def gradient(f: ScalarField) -> np.ndarray:
    return f.grid.to_ambient_vector(f.frame_gradient)


def hessian(f: ScalarField) -> np.ndarray:
    return f.grid.to_ambient_tensor(f.frame_hessian)


def laplacian(f: ScalarField) -> ScalarField:
    return project(f.grid, np.trace(f.frame_hessian, axis1=1, axis2=2))


def first_harmonic_mask(grid: SphereGrid) -> np.ndarray:
    return grid.degree == 1


def spectral_gradient(grid: SphereGrid, nodal) -> np.ndarray:
    """Ambient gradients of the projections of several nodal fields.

    ``nodal`` has shape (N, c); returns (N, c, 5).
    """
    coeffs = grid.analyze(nodal)
    d1 = np.stack(
        [grid.synthesize(coeffs, tuple(int(a == b) for b in range(4))) for a in range(4)], axis=1
    )  # (N, 4, c)
    d1 = d1 / grid.scale[:, :, None]
    return np.einsum("nac,nai->nci", d1, grid.frame)


class SecondOrderOperator:
    """v -> P[ Q:Hess(v) + b.grad(v) + g v ] acting on coefficient vectors.

    ``Q`` (N, 4, 4), ``b`` (N, 4) are frame components and ``g`` (N,) a nodal
    multiplier; P is the quadrature projection onto the basis.
    """

    def __init__(self, grid: SphereGrid, Q, b, g):
        self.grid = grid
        h = grid.scale
        alpha = Q / (h[:, :, None] * h[:, None, :])
        self.alpha = alpha
        self.beta = b / h + grid.christoffel_first_order(alpha)
        self.gamma = np.asarray(g, dtype=float)
        self._terms = []
        for a in range(4):
            for c in range(a, 4):
                coef = alpha[:, a, c] * (1.0 if a == c else 2.0)
                if np.any(coef):
                    o = [0, 0, 0, 0]
                    o[a] += 1
                    o[c] += 1
                    self._terms.append((tuple(o), coef))
            if np.any(self.beta[:, a]):
                o = [0, 0, 0, 0]
                o[a] = 1
                self._terms.append((tuple(o), self.beta[:, a]))
        if np.any(self.gamma):
            self._terms.append(((0, 0, 0, 0), self.gamma))

    def nodal(self, coeffs) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        out = np.zeros((self.grid.size,) + coeffs.shape[1:])
        extra = (None,) * (coeffs.ndim - 1)
        for order, coef in self._terms:
            out += coef[(slice(None),) + extra] * self.grid.synthesize(coeffs, order)
        return out

    def apply(self, coeffs) -> np.ndarray:
        return self.grid.analyze(self.nodal(coeffs))

    def dense(self, batch: int = 128) -> np.ndarray:
        n = self.grid.dim
        J = np.empty((n, n))
        for start in range(0, n, batch):
            stop = min(n, start + batch)
            E = np.zeros((n, stop - start))
            E[np.arange(start, stop), np.arange(stop - start)] = 1.0
            J[:, start:stop] = self.apply(E)
        return J

    def restricted(self, mask) -> LinearOperator:
        """LinearOperator on the coefficients selected by ``mask`` (both sides)."""
        idx = np.nonzero(mask)[0]
        n = self.grid.dim

        def mv(y):
            c = np.zeros(n)
            c[idx] = np.ravel(y)
            return self.apply(c)[idx]

        return LinearOperator((idx.size, idx.size), matvec=mv, dtype=float)
