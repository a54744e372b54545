"""Lorentz quasinorms of piecewise-constant grid fields.

A grid field is read as the function that is constant on each cell of
measure ``h**3``.  Its distribution function is then a step function and
both the q < inf integral and the q = inf supremum can be evaluated in
closed form, interval by interval, with no quadrature error.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from . import _kernels
from .grid import Grid, GridError, ScalarField, VectorField3


class LorentzIndexError(ValueError):
    pass


@dataclass(frozen=True)
class LorentzIndex:
    p: float
    q: float = math.inf

    def __post_init__(self):
        if not (self.p > 1 and math.isfinite(self.p)):
            raise LorentzIndexError(f"need 1 < p < inf, got p={self.p}")
        if not self.q > 1:
            raise LorentzIndexError(f"need q > 1 or q = inf, got q={self.q}")

    @property
    def weak(self) -> bool:
        return math.isinf(self.q)


@dataclass(frozen=True)
class DistributionSummary:
    """Distinct magnitudes v_1 > ... > v_m and measures of {|f| >= v_k}."""

    values: np.ndarray
    measures: np.ndarray


@dataclass(frozen=True)
class LorentzReport:
    p: float
    q: float
    value: float
    breakpoints_count: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "p": self.p,
                "q": None if math.isinf(self.q) else self.q,
                "value": self.value,
                "breakpoints_count": self.breakpoints_count,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "LorentzReport":
        d = json.loads(text)
        q = math.inf if d["q"] is None else float(d["q"])
        return cls(float(d["p"]), q, float(d["value"]), int(d["breakpoints_count"]))


def _magnitudes(f) -> tuple[np.ndarray, float]:
    if isinstance(f, VectorField3):
        return f.magnitude().ravel(), f.grid.cell_measure
    if isinstance(f, ScalarField):
        return np.abs(f.values).ravel(), f.grid.cell_measure
    raise TypeError(f"expected ScalarField or VectorField3, got {type(f).__name__}")


def _as_index(idx) -> LorentzIndex:
    if isinstance(idx, LorentzIndex):
        return idx
    p, q = idx
    return LorentzIndex(float(p), float(q))


def level_table(mags: np.ndarray, cell: float) -> DistributionSummary:
    """Level table of an array of magnitudes (any shape)."""
    desc = np.sort(np.asarray(mags, dtype=np.float64).ravel(), kind="stable")[::-1]
    desc = np.ascontiguousarray(desc)
    values, counts = _kernels.level_table(desc)
    return DistributionSummary(values, counts * cell)


def distribution_summary(f) -> DistributionSummary:
    mags, cell = _magnitudes(f)
    return level_table(mags, cell)


def distribution_function(f, alpha: float) -> float:
    """Measure of {|f| > alpha}."""
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    mags, cell = _magnitudes(f)
    return cell * int(np.count_nonzero(mags > alpha))


def quasinorm_from_magnitudes(mags: np.ndarray, cell: float, idx) -> float:
    idx = _as_index(idx)
    desc = np.ascontiguousarray(np.sort(np.asarray(mags, dtype=np.float64).ravel())[::-1])
    values, counts = _kernels.level_table(desc)
    q = -1.0 if idx.weak else idx.q
    return float(_kernels.lorentz_levels(values, counts, float(cell), idx.p, q))


def lorentz_quasinorm(f, idx) -> float:
    """Exact ||f||_{L^{p,q}} of the cellwise-constant extension of ``f``.

    Vector fields are measured through their Euclidean magnitude.  ``idx``
    is a :class:`LorentzIndex` or a ``(p, q)`` pair with ``q = math.inf``
    for the weak space.
    """
    mags, cell = _magnitudes(f)
    return quasinorm_from_magnitudes(mags, cell, idx)


def lorentz_report(f, idx) -> LorentzReport:
    idx = _as_index(idx)
    summary = distribution_summary(f)
    value = lorentz_quasinorm(f, idx)
    return LorentzReport(idx.p, idx.q, value, int(summary.values.size))


def lp_norm(f, p: float) -> float:
    """Direct (sum |f|^p h^3)^(1/p); independent of the level-table path."""
    mags, cell = _magnitudes(f)
    return float(np.sum(mags**p) * cell) ** (1.0 / p)


@dataclass(frozen=True)
class SplitPair:
    low: VectorField3
    high: VectorField3
    threshold: float
    low_sup: float
    superlevel_measure: float
    superlevel_bound: float

    @property
    def bounds_hold(self) -> bool:
        return self.low_sup <= self.threshold and self.superlevel_measure <= self.superlevel_bound

    @property
    def measure_slack(self) -> float:
        return self.superlevel_bound - self.superlevel_measure


def level_split(U: VectorField3, delta: float, t: float) -> SplitPair:
    """Split U at |U| = delta / sqrt(t); ties go to the high part."""
    if not delta > 0 or not t > 0:
        raise ValueError(f"delta and t must be positive, got delta={delta}, t={t}")
    thr = delta / math.sqrt(t)
    mag = U.magnitude()
    high_mask = mag >= thr
    high = np.where(high_mask, U.data, 0.0)
    low = np.where(high_mask, 0.0, U.data)
    weak = lorentz_quasinorm(U, (3.0, math.inf))
    s_meas = U.grid.cell_measure * int(np.count_nonzero(high_mask))
    bound = (math.sqrt(t) / delta) ** 3 * weak**3
    low_sup = float(mag[~high_mask].max()) if (~high_mask).any() else 0.0
    return SplitPair(
        VectorField3(U.grid, low), VectorField3(U.grid, high), thr, low_sup, s_meas, bound
    )


def convolve(f: ScalarField, g: ScalarField) -> ScalarField:
    """Periodic convolution times h^3, approximating the integral over R^3.

    The grid node with index (n/2, n/2, n/2) is the origin, so the kernel
    arrays are shifted to put it at index 0 before the transform.
    """
    if f.grid != g.grid:
        raise GridError(f"grid mismatch: {f.grid} vs {g.grid}")
    n = f.grid.n
    fa = np.fft.ifftshift(f.values)
    ga = np.fft.ifftshift(g.values)
    prod = sfft.rfftn(fa) * sfft.rfftn(ga)
    out = sfft.irfftn(prod, s=(n, n, n)) * f.grid.cell_measure
    return ScalarField(f.grid, np.fft.fftshift(out))
