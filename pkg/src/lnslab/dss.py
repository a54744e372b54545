"""Discretely self-similar data built from an annular profile.

A profile v supported in {1 < |x| < lam} is extended shell by shell,

    u0(x) = lam^{-k} v(lam^{-k} x)   for lam^k <= |x| < lam^{k+1},

over a finite range of k, so lam u0(lam x) = u0(x) wherever both shells
are realized.  Norms of the untruncated extension are computed from a fine
sample of the profile alone: every shell contributes the same L^3 mass,
and the distribution function of the full extension is a geometric sum
of rescaled copies of the profile's.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable

import numpy as np

from .grid import Grid, VectorField3, sample_field
from .lorentz import lorentz_quasinorm
from .spectral import divergence_modes, forward, inverse, leray_project, wavenumbers


class DssResolutionError(ValueError):
    pass


def bump_profile(lam: float, margin: float = 0.05, sharpness: float = 10.0) -> Callable:
    """curl(phi(r) e3) for a smooth bump phi supported strictly inside (1, lam).

    phi(s) = exp(sharpness (1 - 1 / (1 - s^2))) with s mapping
    [1 + margin (lam - 1), lam - margin (lam - 1)] onto [-1, 1].  Larger
    sharpness trades the steep edge layers of the plain bump for a
    Gaussian-like core, which resolves far better on a grid.
    """
    ra = 1.0 + margin * (lam - 1.0)
    rb = lam - margin * (lam - 1.0)

    def prof(x, y, z):
        r = np.sqrt(x * x + y * y + z * z)
        s = (2.0 * r - (ra + rb)) / (rb - ra)
        inside = np.abs(s) < 1.0
        ss = np.where(inside, s, 0.0)
        phi = np.where(inside, np.exp(sharpness * (1.0 - 1.0 / (1.0 - ss * ss))), 0.0)
        dphi = phi * sharpness * (-2.0 * ss / (1.0 - ss * ss) ** 2) * 2.0 / (rb - ra)
        rr = np.where(r > 0, r, 1.0)
        return dphi * y / rr, -dphi * x / rr, np.zeros_like(dphi * x)

    return prof


@dataclass(frozen=True)
class DssParams:
    """``amplitude`` is the L^3 norm of the profile on its annulus."""

    lam: float = 2.0
    amplitude: float = 1.0
    k_range: tuple = (1, 4)
    margin: float = 0.05
    sharpness: float = 10.0
    profile: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.lam > 1:
            raise ValueError(f"lambda must exceed 1, got {self.lam}")
        if not self.amplitude >= 0:
            raise ValueError("amplitude must be nonnegative")
        k0, k1 = self.k_range
        if k1 < k0:
            raise ValueError(f"empty k_range {self.k_range}")

    def unit_profile(self) -> Callable:
        return self.profile if self.profile is not None else bump_profile(self.lam, self.margin, self.sharpness)


def _fine_sample(prof, lam: float, m: int):
    """Cell-centred magnitudes of ``prof`` on [-lam, lam]^3 and the cell volume."""
    hb = 2.0 * lam / m
    c = (np.arange(m) + 0.5) * hb - lam
    x, y, z = c[:, None, None], c[None, :, None], c[None, None, :]
    ux, uy, uz = (np.broadcast_to(a, (m, m, m)) for a in prof(x, y, z))
    mag = np.sqrt(ux**2 + uy**2 + uz**2).ravel()
    return mag[mag > 0], hb**3


def dss_weak_cubed(mag: np.ndarray, cell: float, lam: float, depth: int = 80) -> float:
    """||u0||_{3,inf}^3 of the full extension of a profile given by samples.

    With mu(b) the measure of {|v| >= b}, the extension satisfies
    alpha^3 d(alpha) = sum_k (alpha lam^k)^3 mu(alpha lam^k), which is
    invariant under alpha -> lam alpha, so the sup is taken over
    alpha in (vmax / lam, vmax] at the profile's breakpoints.
    """
    if mag.size == 0:
        return 0.0
    vals, cnt = np.unique(-mag, return_counts=True)
    vals = -vals
    cum = np.cumsum(cnt) * cell
    vmax = vals[0]
    shift = np.floor(np.log(vmax / vals) / math.log(lam) + 1e-12)
    cand = np.unique(vals * lam**shift)
    cand = cand[(cand > vmax / lam) & (cand <= vmax * (1 + 1e-13))]
    F = np.zeros_like(cand)
    for k in range(0, -depth, -1):
        b = cand * lam**k
        j = np.searchsorted(-vals, -b, side="right")
        mu = np.where(j > 0, cum[np.maximum(j - 1, 0)], 0.0)
        F += b**3 * mu
    return float(F.max())


@lru_cache(maxsize=32)
def _unit_norms(lam: float, margin: float, sharpness: float, m: int = 160):
    """(L^3 norm, exact DSS weak-L^3 norm) of the default unit profile."""
    mag, cell = _fine_sample(bump_profile(lam, margin, sharpness), lam, m)
    l3 = float(np.sum(mag**3) * cell) ** (1 / 3)
    w = dss_weak_cubed(mag, cell, lam) ** (1 / 3)
    return l3, w


def _profile_norms(params: DssParams, m: int = 160):
    if params.profile is None:
        return _unit_norms(float(params.lam), float(params.margin), float(params.sharpness), m)
    mag, cell = _fine_sample(params.profile, params.lam, m)
    return float(np.sum(mag**3) * cell) ** (1 / 3), dss_weak_cubed(mag, cell, params.lam) ** (1 / 3)


def check_profile_divergence(prof, lam: float, n_points: int = 2000, seed: int = 0,
                             rtol: float = 1e-6) -> float:
    """Relative central-difference divergence of a user profile on its annulus."""
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((n_points, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = rng.uniform(1.0, lam, n_points)
    p = d * r[:, None]
    h = 1e-5 * lam
    div = np.zeros(n_points)
    grad_scale = 0.0
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        up = np.stack(prof(*(p + e).T), axis=-1)
        dn = np.stack(prof(*(p - e).T), axis=-1)
        dj = (up - dn) / (2 * h)
        div += dj[:, j]
        grad_scale = max(grad_scale, float(np.max(np.abs(dj))))
    rel = float(np.max(np.abs(div))) / grad_scale if grad_scale > 0 else 0.0
    if rel > rtol:
        raise ValueError(f"profile divergence {rel:.3e} exceeds {rtol:.1e}")
    return rel


def dss_extension(params: DssParams) -> Callable:
    """Vectorised u0(x, y, z) of the truncated extension, scaled to ``amplitude``."""
    lam = params.lam
    prof = params.unit_profile()
    l3, _ = _profile_norms(params)
    scale = params.amplitude / l3 if l3 > 0 else 0.0
    k0, k1 = params.k_range
    loglam = math.log(lam)

    def f(x, y, z):
        x, y, z = np.broadcast_arrays(x, y, z)
        r = np.sqrt(x * x + y * y + z * z)
        with np.errstate(divide="ignore"):
            k = np.floor(np.log(np.where(r > 0, r, 1.0)) / loglam + 1e-13)
        k = np.where(r > 0, k, k0 - 1)
        ok = (k >= k0) & (k <= k1)
        s = np.where(ok, lam ** (-k), 0.0)
        comps = prof(x * s, y * s, z * s)
        return tuple(np.where(ok, scale * s * c, 0.0) for c in comps)

    return f


@dataclass(frozen=True, eq=False)
class DssField:
    params: DssParams
    field: VectorField3
    weak_norm: float
    weak_norm_exact: float

    @property
    def grid(self) -> Grid:
        return self.field.grid

    def projected(self) -> VectorField3:
        return inverse(leray_project(forward(self.field)))


def make_dss_data(grid: Grid, params: DssParams) -> DssField:
    """Sample the truncated extension on ``grid`` after checking shell resolution."""
    lam = params.lam
    k0, k1 = params.k_range
    if k1 - k0 + 1 < 3:
        raise DssResolutionError(f"need at least 3 shells, got k_range={params.k_range}")
    if lam**k0 < 4 * grid.spacing:
        raise DssResolutionError(
            f"innermost shell radius {lam**k0:g} < 4 * spacing = {4 * grid.spacing:g}")
    if lam ** (k1 + 1) > grid.box_len / 2:
        raise DssResolutionError(
            f"outermost shell radius {lam ** (k1 + 1):g} > L/2 = {grid.box_len / 2:g}")
    if params.profile is not None:
        check_profile_divergence(params.profile, lam)
    f = sample_field(grid, dss_extension(params))
    weak = lorentz_quasinorm(f, (3.0, math.inf))
    l3, w = _profile_norms(params)
    exact = params.amplitude * w / l3 if l3 > 0 else 0.0
    return DssField(params, f, weak, exact)


def with_weak_norm(params: DssParams, target: float) -> DssParams:
    """Rescale the amplitude so the untruncated extension has weak-L^3 norm ``target``."""
    l3, w = _profile_norms(params)
    return replace(params, amplitude=target * l3 / w)


def dss_relation_error(params: DssParams, n_points: int = 1000, seed: int = 0) -> float:
    """max |lam u0(lam x) - u0(x)| / max |u0| over random points of the inner shells."""
    rng = np.random.default_rng(seed)
    lam = params.lam
    k0, k1 = params.k_range
    f = dss_extension(params)
    d = rng.standard_normal((n_points, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    # radii whose image under x -> lam x stays in a realized shell
    r = lam ** rng.uniform(k0, k1, n_points)
    p = d * r[:, None]
    a = np.stack(f(*p.T), axis=-1)
    b = lam * np.stack(f(*(lam * p).T), axis=-1)
    scale = float(np.max(np.abs(a)))
    return float(np.max(np.abs(a - b))) / scale if scale > 0 else 0.0


def _sample_chunked(grid: Grid, f, slab: int = 16) -> VectorField3:
    """sample_field in x-slabs, keeping temporaries small on large grids."""
    x, y, z = grid.coords()
    data = np.empty((3,) + grid.shape)
    for i in range(0, grid.n, slab):
        comps = f(x[i : i + slab], y, z)
        for c in range(3):
            data[c, i : i + slab] = comps[c]
    return VectorField3(grid, data)


def divergence_refinement(params: DssParams, levels, box_len: float) -> list:
    """Relative spectral divergence ||div u|| / ||grad u|| of the sampled datum per level."""
    rows = []
    prev = None
    for n in levels:
        g = Grid(int(n), float(box_len))
        u = forward(_sample_chunked(g, dss_extension(params)))
        w = wavenumbers(g)
        div = divergence_modes(u)
        grad = np.sqrt(w.kdx**2 + w.kdy**2 + w.kdz**2)[None] * np.abs(u.coeffs)
        num = math.sqrt(float(np.sum(w.rweight * np.abs(div) ** 2)))
        den = math.sqrt(float(np.sum(w.rweight[None] * grad**2)))
        rel = num / den if den > 0 else 0.0
        order = None
        if prev is not None and rel > 0 and prev[1] > 0:
            order = math.log(prev[1] / rel) / math.log(n / prev[0])
        rows.append({"n": int(n), "relative_divergence": rel, "order": order})
        prev = (n, rel)
    return rows


@dataclass
class AnnulusReport:
    lam: float
    items: list

    @property
    def holds(self) -> bool:
        return all(it["holds"] for it in self.items)

    def to_json(self) -> str:
        return json.dumps(self.items, sort_keys=True)


def annulus_inequalities(u0, lam: float | None = None, m: int = 160) -> AnnulusReport:
    """Both annulus inequalities for the untruncated extension.

    I = int_{1<=|x|<=lam} |u0|^3 and W = ||u0||_{3,inf}^3 are computed from
    a fine sample of the profile; the checks are I <= 3 (lam-1)^2 W and
    W <= lam^3 / (3 (lam-1)) I.  ``u0`` is a DssField, DssParams, or None
    for the zero datum.
    """
    if u0 is None:
        I = W = 0.0
        lam = 2.0 if lam is None else lam
    else:
        params = u0.params if isinstance(u0, DssField) else u0
        lam = params.lam if lam is None else lam
        if abs(lam - params.lam) > 1e-12:
            raise ValueError(f"datum was built for lambda={params.lam}, not {lam}")
        l3, w = _profile_norms(params, m)
        s = params.amplitude / l3 if l3 > 0 else 0.0
        I = (s * l3) ** 3
        W = (s * w) ** 3
    c1 = 3.0 * (lam - 1.0) ** 2
    c2 = lam**3 / (3.0 * (lam - 1.0))
    items = [
        {"lambda": lam, "lhs": I, "rhs": c1 * W, "constant": c1, "holds": bool(I <= c1 * W),
         "slack": c1 * W - I, "name": "annulus_l3_by_weak"},
        {"lambda": lam, "lhs": W, "rhs": c2 * I, "constant": c2, "holds": bool(W <= c2 * I),
         "slack": c2 * I - W, "name": "weak_by_annulus_l3"},
    ]
    return AnnulusReport(lam, items)


@dataclass
class RescaledSeries:
    rows: list
    zero_norm: bool = False

    @property
    def ratios(self) -> np.ndarray:
        return np.array([r["ratio"] for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "t", "ratio"])
        for r in self.rows:
            w.writerow([r["k"], repr(r["t"]), repr(r["ratio"])])
        return buf.getvalue()


def rescaled_norm_series(traj, lam: float, t0: float) -> RescaledSeries:
    """r_k = ||u(lam^{2k} t0)||_{3,inf} / ||u(t0)||_{3,inf} at sampled times."""
    t_end = float(traj.times[-1])
    K = int(math.floor(math.log(t_end / t0) / (2 * math.log(lam)) + 1e-9)) if t0 > 0 else 0
    if K < 1:
        raise ValueError(f"horizon t_end={t_end} does not reach lam^2 t0={lam**2 * t0}")
    base = traj.value_at("L3winf", t0)
    if base == 0:
        return RescaledSeries([], zero_norm=True)
    rows = []
    for k in range(K + 1):
        t = t0 * lam ** (2 * k)
        rows.append({"k": k, "t": t, "ratio": traj.value_at("L3winf", t) / base})
    return RescaledSeries(rows)


def resolved_time_window(grid: Grid, params: DssParams) -> tuple[float, float]:
    """Heat times whose length scale sqrt(t) lies between the spacing and the inner shell.

    Below h^2 the heat flow acts beneath the grid; above lam^(2 k_min) it
    reaches the region left empty by truncating the inner shells.
    """
    return grid.spacing**2, params.lam ** (2 * params.k_range[0])
