"""The functionals II, Y, C_K and F = Y - II + C_K of a conformal factor."""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass

import numpy as np

from .fields import ScalarField
from .grid import SPHERE_VOLUME
from .kspec import KSpec


def _avg(w: ScalarField, values) -> float:
    return float(w.grid.weights @ values) / SPHERE_VOLUME


def _lap_grad2(w: ScalarField):
    lap = np.trace(w.frame_hessian, axis1=1, axis2=2)
    return lap, np.sum(w.frame_gradient**2, axis=1)


def functional_II(w: ScalarField) -> float:
    lap, g2 = _lap_grad2(w)
    return _avg(w, lap**2 + 2 * g2 + 12 * w.nodal)


def functional_Y(w: ScalarField) -> float:
    lap, g2 = _lap_grad2(w)
    return _avg(w, (lap + g2) ** 2) - 4 * _avg(w, g2)


def functional_CK(w: ScalarField, K: KSpec) -> float:
    mean = _avg(w, K(w.grid.nodes) * np.exp(4 * w.nodal))
    if not mean > 0:
        raise ValueError(f"average of K e^(4w) must be positive, got {mean}")
    return 3.0 * float(np.log(mean))


@dataclass(frozen=True)
class FunctionalReport:
    II: float
    Y: float
    C_K: float
    F: float
    input_hash: str
    L: int

    def to_dict(self) -> dict:
        return asdict(self)


def field_hash(w: ScalarField, K: KSpec | None = None) -> str:
    h = hashlib.sha256(np.ascontiguousarray(w.coeffs).tobytes())
    h.update(f"{w.grid.L}:{w.grid.azimuth_count}".encode())
    if K is not None:
        h.update(repr(K.to_dict()).encode())
        h.update(repr(K.s).encode())
    return h.hexdigest()[:16]


def functional_F(w: ScalarField, K: KSpec) -> FunctionalReport:
    ii, y, ck = functional_II(w), functional_Y(w), functional_CK(w, K)
    return FunctionalReport(ii, y, ck, y - ii + ck, field_hash(w, K), w.grid.L)
