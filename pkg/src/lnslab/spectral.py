"""Fourier-side operators on the periodic box.

Coefficients are stored in ``scipy.fft.rfftn`` layout, shape
``(3, n, n, n // 2 + 1)``; Hermitian symmetry is implicit.  The forward
transform is unnormalised and the inverse carries ``1 / n**3``.

Two wavevector sets are kept.  ``k`` is the true lattice ``2 pi m / L``
with ``m in [-n/2, n/2)`` and feeds the heat multiplier.  ``kd`` has the
Nyquist entries zeroed and feeds every derivative and the Leray projector,
so odd derivatives stay real and ``kd . P(u) == 0`` holds mode by mode.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft as sfft

from . import _kernels
from .grid import Grid, GridError, VectorField3
from .lorentz import lorentz_quasinorm


@dataclass(frozen=True)
class Wavenumbers:
    kx: np.ndarray
    ky: np.ndarray
    kz: np.ndarray
    kdx: np.ndarray
    kdy: np.ndarray
    kdz: np.ndarray
    k2: np.ndarray
    inv_kd2: np.ndarray
    dealias: np.ndarray
    rweight: np.ndarray


@lru_cache(maxsize=16)
def wavenumbers(grid: Grid) -> Wavenumbers:
    n = grid.n
    scale = 2.0 * np.pi / grid.box_len
    m_full = np.fft.fftfreq(n, d=1.0 / n)
    m_half = np.fft.rfftfreq(n, d=1.0 / n)
    k_full = scale * m_full
    k_half = scale * m_half
    kd_full = np.where(np.abs(m_full) == n // 2, 0.0, k_full)
    kd_half = np.where(m_half == n // 2, 0.0, k_half)

    kx, ky, kz = k_full[:, None, None], k_full[None, :, None], k_half[None, None, :]
    kdx, kdy, kdz = kd_full[:, None, None], kd_full[None, :, None], kd_half[None, None, :]
    k2 = kx**2 + ky**2 + kz**2
    kd2 = kdx**2 + kdy**2 + kdz**2
    with np.errstate(divide="ignore"):
        inv_kd2 = np.where(kd2 > 0, 1.0 / np.where(kd2 > 0, kd2, 1.0), 0.0)
    cut = n / 3.0
    keep = (
        (np.abs(m_full)[:, None, None] <= cut)
        & (np.abs(m_full)[None, :, None] <= cut)
        & (m_half[None, None, :] <= cut)
    )
    rw = np.full(m_half.size, 2.0)
    rw[0] = 1.0
    if n % 2 == 0:
        rw[-1] = 1.0
    for a in (kx, ky, kz, kdx, kdy, kdz, k2, inv_kd2, keep):
        a.setflags(write=False)
    return Wavenumbers(kx, ky, kz, kdx, kdy, kdz, k2, inv_kd2, keep, rw[None, None, :])


@dataclass(frozen=True, eq=False)
class SpectralVectorField3:
    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        n = self.grid.n
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (3, n, n, n // 2 + 1):
            raise ValueError(f"expected shape {(3, n, n, n // 2 + 1)}, got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    def with_coeffs(self, coeffs) -> "SpectralVectorField3":
        return SpectralVectorField3(self.grid, coeffs)


def forward(f: VectorField3) -> SpectralVectorField3:
    return SpectralVectorField3(f.grid, sfft.rfftn(f.data, axes=(1, 2, 3)))


def inverse(u: SpectralVectorField3) -> VectorField3:
    n = u.grid.n
    data = sfft.irfftn(u.coeffs, s=(n, n, n), axes=(1, 2, 3))
    return VectorField3(u.grid, data)


def transform(f, direction: str | None = None):
    """Switch representation; ``direction`` may be 'forward' or 'inverse'."""
    if isinstance(f, VectorField3) and direction in (None, "forward"):
        return forward(f)
    if isinstance(f, SpectralVectorField3) and direction in (None, "inverse"):
        return inverse(f)
    raise ValueError(f"cannot apply direction={direction!r} to {type(f).__name__}")


def spectral_energy(u: SpectralVectorField3) -> float:
    """sum |f|^2 h^3 computed from the coefficients (Parseval)."""
    g = u.grid
    w = wavenumbers(g).rweight
    s = float(np.sum(w * (u.coeffs.real**2 + u.coeffs.imag**2)))
    return s * g.cell_measure / g.n**3


def divergence_modes(u: SpectralVectorField3) -> np.ndarray:
    w = wavenumbers(u.grid)
    c = u.coeffs
    return 1j * (w.kdx * c[0] + w.kdy * c[1] + w.kdz * c[2])


def leray_project(u: SpectralVectorField3) -> SpectralVectorField3:
    """Apply I - k k^T/|k|^2; the zero mode is left unchanged."""
    w = wavenumbers(u.grid)
    c = u.coeffs
    ox, oy, oz = _kernels.leray(c[0], c[1], c[2], w.kdx, w.kdy, w.kdz, w.inv_kd2)
    return u.with_coeffs(np.stack([ox, oy, oz]))


def heat_multiplier(grid: Grid, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError(f"heat time must be nonnegative, got {t}")
    return np.exp(-wavenumbers(grid).k2 * t)


def heat_propagate(u: SpectralVectorField3, t: float) -> SpectralVectorField3:
    if t < 0:
        raise ValueError(f"heat time must be nonnegative, got {t}")
    if t == 0:
        return u.with_coeffs(u.coeffs.copy())
    return u.with_coeffs(u.coeffs * heat_multiplier(u.grid, t)[None])


def derivative_multiplier(grid: Grid, alpha) -> np.ndarray:
    """(i k)^alpha for a multi-index alpha = (a1, a2, a3)."""
    w = wavenumbers(grid)
    a1, a2, a3 = (int(a) for a in alpha)
    return (1j * w.kdx) ** a1 * (1j * w.kdy) ** a2 * (1j * w.kdz) ** a3


def oseen_apply(u: SpectralVectorField3, t: float, alpha=(0, 0, 0)) -> SpectralVectorField3:
    """D^alpha P e^{t Delta} u."""
    if not t > 0:
        raise ValueError(f"oseen_apply needs t > 0, got {t}")
    if sum(alpha) > 2 or min(alpha) < 0:
        raise ValueError(f"need a multi-index with |alpha| <= 2, got {alpha}")
    projected = leray_project(heat_propagate(u, t))
    return projected.with_coeffs(projected.coeffs * derivative_multiplier(u.grid, alpha)[None])


@dataclass(frozen=True)
class Multiplier:
    """Diagonal or 3x3 Fourier multiplier: heat(t), leray, derivative(alpha), dealias_mask."""

    kind: str
    t: float = 0.0
    alpha: tuple = (0, 0, 0)

    def __call__(self, u: SpectralVectorField3) -> SpectralVectorField3:
        if self.kind == "heat":
            return heat_propagate(u, self.t)
        if self.kind == "leray":
            return leray_project(u)
        if self.kind == "derivative":
            return u.with_coeffs(u.coeffs * derivative_multiplier(u.grid, self.alpha)[None])
        if self.kind == "dealias_mask":
            return u.with_coeffs(u.coeffs * wavenumbers(u.grid).dealias[None])
        raise ValueError(f"unknown multiplier kind {self.kind!r}")


def _div_tensor_hat(grid: Grid, t_hat: np.ndarray, pairs) -> np.ndarray:
    """Spectral divergence of a tensor given as 9 (or 6 symmetric) transforms.

    ``pairs[(j, i)]`` indexes the transform of T_{ji}; result_i = d_j T_{ji}.
    """
    w = wavenumbers(grid)
    kd = (w.kdx, w.kdy, w.kdz)
    out = np.empty((3,) + t_hat.shape[1:], dtype=np.complex128)
    for i in range(3):
        acc = 1j * kd[0] * t_hat[pairs[(0, i)]]
        acc = acc + 1j * kd[1] * t_hat[pairs[(1, i)]]
        acc = acc + 1j * kd[2] * t_hat[pairs[(2, i)]]
        out[i] = acc * w.dealias
    return out


_FULL_PAIRS = {(j, i): 3 * j + i for j in range(3) for i in range(3)}
SYM_PAIRS = {
    (0, 0): 0, (1, 1): 1, (2, 2): 2,
    (0, 1): 3, (1, 0): 3,
    (0, 2): 4, (2, 0): 4,
    (1, 2): 5, (2, 1): 5,
}


def advection_divergence_hat(u: VectorField3, v: VectorField3) -> np.ndarray:
    if u.grid != v.grid:
        raise GridError(f"grid mismatch: {u.grid} vs {v.grid}")
    prods = np.empty((9,) + u.grid.shape)
    for j in range(3):
        for i in range(3):
            prods[3 * j + i] = u.data[j] * v.data[i]
    t_hat = sfft.rfftn(prods, axes=(1, 2, 3))
    return _div_tensor_hat(u.grid, t_hat, _FULL_PAIRS)


def advection_divergence(u: VectorField3, v: VectorField3) -> VectorField3:
    """Dealiased div(u (x) v), i.e. component i is d_j (u_j v_i)."""
    hat = advection_divergence_hat(u, v)
    return inverse(SpectralVectorField3(u.grid, hat))


def sym_divergence_hat(grid: Grid, products: np.ndarray) -> np.ndarray:
    """Dealiased divergence of a symmetric tensor packed xx,yy,zz,xy,xz,yz."""
    t_hat = sfft.rfftn(products, axes=(1, 2, 3))
    return _div_tensor_hat(grid, t_hat, SYM_PAIRS)


# ---------------------------------------------------------------------------
# empirical inequality reports


class ExponentRelationError(ValueError):
    pass


@dataclass(frozen=True)
class HeatEstimate:
    p1: float
    p2: float
    q: float = 3.0

    def check(self):
        if not (1 < self.p2 <= self.p1 < math.inf):
            raise ExponentRelationError(f"need 1 < p2 <= p1 < inf, got p1={self.p1}, p2={self.p2}")
        if not self.q > 1:
            raise ExponentRelationError(f"need q > 1, got {self.q}")

    @property
    def exponent(self) -> float:
        return -1.5 * (1.0 / self.p2 - 1.0 / self.p1)

    name = "heat_estimate"


@dataclass(frozen=True)
class ONeil:
    p1: float
    q1: float
    p2: float
    q2: float
    r: float
    s: float

    def check(self):
        for name in ("p1", "p2", "r"):
            v = getattr(self, name)
            if not (1 < v < math.inf):
                raise ExponentRelationError(f"need 1 < {name} < inf, got {v}")
        if abs(1.0 / self.r + 1.0 - 1.0 / self.p1 - 1.0 / self.p2) > 1e-12:
            raise ExponentRelationError("need 1/r + 1 = 1/p1 + 1/p2")
        if 1.0 / self.s > 1.0 / self.q1 + 1.0 / self.q2 + 1e-12:
            raise ExponentRelationError("need 1/s <= 1/q1 + 1/q2")

    name = "oneil"


@dataclass(frozen=True)
class OseenEstimate:
    p: float
    alpha: tuple = (1, 0, 0)
    q: float = 3.0

    def check(self):
        if not (3 < self.p < math.inf):
            raise ExponentRelationError(f"need 3 < p < inf, got {self.p}")
        if sum(self.alpha) > 2 or min(self.alpha) < 0:
            raise ExponentRelationError(f"need |alpha| <= 2, got {self.alpha}")

    @property
    def exponent(self) -> float:
        return -0.5 * sum(self.alpha) - 1.5 * (1.0 / 3.0 - 1.0 / self.p)

    name = "oseen"


@dataclass(frozen=True)
class GaussianSample:
    """Vector Gaussian of width ``width_factor * sqrt(t)``, matched to each t."""

    width_factor: float
    center: tuple = (0.0, 0.0, 0.0)
    direction: tuple = (1.0, 0.0, 0.0)

    def field(self, grid: Grid, t: float) -> VectorField3:
        s = self.width_factor * math.sqrt(t)
        x, y, z = grid.coords()
        cx, cy, cz = self.center
        g = np.exp(-((x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2) / (2.0 * s * s))
        d = np.asarray(self.direction, dtype=np.float64)
        return VectorField3(grid, d[:, None, None, None] * g[None])


@dataclass
class RatioTable:
    kind: str
    rows: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)
    predicted: float | None = None

    def add(self, sample_id, t, ratio):
        self.rows.append((sample_id, t, ratio))

    def ratios(self) -> np.ndarray:
        return np.array([r[2] for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "sample_id", "t", "ratio", "fitted_slope"])
        for sid, t, ratio in self.rows:
            slope = self.slopes.get(sid, "")
            w.writerow([self.kind, sid, "" if t is None else repr(t), repr(ratio), repr(slope) if slope != "" else ""])
        return buf.getvalue()


def fit_slope(ts, values) -> float:
    """Least-squares slope of log(values) against log(ts)."""
    lx = np.log(np.asarray(ts, dtype=np.float64))
    ly = np.log(np.asarray(values, dtype=np.float64))
    return float(np.polyfit(lx, ly, 1)[0])


def inequality_report(kind, samples, t_grid=None, grid: Grid | None = None) -> RatioTable:
    """Empirical ratios for the heat, O'Neil and Oseen estimates.

    heat / oseen: ``samples`` are :class:`GaussianSample` objects realised on
    ``grid`` at every t in ``t_grid``; the table records the scale-weighted
    ratio and, per sample, the fitted log-log slope of the raw quotient.

    oneil: ``samples`` are ``(f, g)`` pairs of scalar fields; t is unused.
    """
    kind.check()
    table = RatioTable(kind.name)
    if isinstance(kind, ONeil):
        from .lorentz import convolve

        for sid, (f, g) in enumerate(samples):
            conv = convolve(f, g)
            num = lorentz_quasinorm(conv, (kind.r, kind.s))
            den = lorentz_quasinorm(f, (kind.p1, kind.q1)) * lorentz_quasinorm(g, (kind.p2, kind.q2))
            table.add(sid, None, num / den)
        return table

    if grid is None or t_grid is None:
        raise ValueError("heat/oseen reports need a grid and a t_grid")
    table.predicted = kind.exponent
    for sid, sample in enumerate(samples):
        quotients = []
        for t in t_grid:
            f = sample.field(grid, t)
            fh = forward(f)
            if isinstance(kind, HeatEstimate):
                out = inverse(heat_propagate(fh, t))
                num = lorentz_quasinorm(out, (kind.p1, kind.q))
                den = lorentz_quasinorm(f, (kind.p2, kind.q))
            else:
                out = inverse(oseen_apply(fh, t, kind.alpha))
                num = lorentz_quasinorm(out, (kind.p, kind.p))
                den = lorentz_quasinorm(f, (3.0, kind.q))
            quot = num / den
            quotients.append(quot)
            table.add(sid, float(t), quot * t ** (-kind.exponent))
        table.slopes[sid] = fit_slope(t_grid, quotients)
    return table
