"""Landau jet solutions: closed form, mollified backgrounds, residual checks.

In spherical coordinates about the jet axis (rho = |x|, theta the polar
angle) the velocity is

    u_rho   = (2 / rho) ((a^2 - 1) / (a - cos theta)^2 - 1)
    u_theta = -2 sin theta / (rho (a - cos theta))

with unit viscosity.  Using sin(theta) e_theta = cos(theta) e_rho - axis,
the angular term has no coordinate singularity on the axis.
"""
from __future__ import annotations

import contextlib
import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid, VectorField3
from .lorentz import lorentz_quasinorm
from .spectral import forward, inverse, leray_project

# test hook for the verify suite; see inject_fault()
_FAULT = {"sign_flip": False}


@contextlib.contextmanager
def inject_fault(sign_flip: bool = True):
    """Temporarily corrupt the closed form by flipping the angular term."""
    old = _FAULT["sign_flip"]
    _FAULT["sign_flip"] = sign_flip
    try:
        yield
    finally:
        _FAULT["sign_flip"] = old


@dataclass(frozen=True)
class LandauParams:
    a: float
    axis: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if not self.a > 1:
            raise ValueError(f"Landau parameter must satisfy a > 1, got {self.a}")
        ax = np.asarray(self.axis, dtype=np.float64)
        if abs(np.linalg.norm(ax) - 1.0) > 1e-12:
            raise ValueError(f"axis must be a unit vector, got {self.axis}")


def _profile(x, y, z, params: LandauParams):
    """Return (rho, g) with U = g / rho; g is 0-homogeneous."""
    ex, ey, ez = params.axis
    rho = np.sqrt(x * x + y * y + z * z)
    safe = np.where(rho > 0, rho, 1.0)
    c = (x * ex + y * ey + z * ez) / safe
    a = params.a
    radial = 2.0 * ((a * a - 1.0) / (a - c) ** 2 - 1.0)
    ang = -2.0 / (a - c)
    if _FAULT["sign_flip"]:
        ang = -ang
    # u_theta e_theta = ang * (c e_rho - axis) / rho
    er = (x / safe, y / safe, z / safe)
    axis = (ex, ey, ez)
    g = tuple(radial * er[i] + ang * (c * er[i] - axis[i]) for i in range(3))
    return rho, g


def landau_velocity(x, params: LandauParams) -> np.ndarray:
    """Velocity at points ``x`` of shape (..., 3); the origin is rejected."""
    x = np.asarray(x, dtype=np.float64)
    rho, g = _profile(x[..., 0], x[..., 1], x[..., 2], params)
    if np.any(rho == 0):
        raise ValueError("Landau velocity is singular at the origin")
    return np.stack([gi / rho for gi in g], axis=-1)


def landau_components(params: LandauParams):
    """Vectorised ``f(x, y, z)`` for sample_field (unmollified)."""

    def f(x, y, z):
        rho, g = _profile(x, y, z, params)
        with np.errstate(divide="ignore", invalid="ignore"):
            return tuple(gi / rho for gi in g)

    return f


def landau_weak_norm(params: LandauParams) -> float:
    """Exact ||U_a||_(3,inf) of the unmollified field.

    For a (-1)-homogeneous field |{|U| > s}| = (1/(3 s^3)) * int_S2 |g|^3, so
    the weak norm is (int_S2 |g|^3 / 3)^(1/3).  The integrand depends only on
    c = cos(angle to the axis), which leaves a 1-d quadrature.
    """
    from scipy.integrate import quad

    a = params.a

    def g_cubed(c):
        radial = 2.0 * ((a * a - 1.0) / (a - c) ** 2 - 1.0)
        ang = -2.0 / (a - c)
        return (radial * radial + ang * ang * (1.0 - c * c)) ** 1.5

    val, _ = quad(g_cubed, -1.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)
    return (2.0 * math.pi * val / 3.0) ** (1.0 / 3.0)


def cap_profile(rho, r_cut: float):
    """1/rho outside r_cut, even quadratic cap (3 - rho^2/r_cut^2)/(2 r_cut) inside.

    Matches value and slope of 1/rho at r_cut and has zero slope at 0.
    """
    rho = np.asarray(rho, dtype=np.float64)
    inner = (3.0 - (rho / r_cut) ** 2) / (2.0 * r_cut)
    with np.errstate(divide="ignore"):
        outer = 1.0 / np.where(rho > 0, rho, 1.0)
    return np.where(rho < r_cut, inner, outer)


@dataclass(frozen=True, eq=False)
class MollifiedBackground:
    params: LandauParams
    r_cut: float
    field: VectorField3
    weak_norm: float
    projection_correction: float


def landau_background(grid: Grid, params: LandauParams, r_cut: float) -> MollifiedBackground:
    """Capped Landau field on ``grid``, Leray re-projected.

    ``projection_correction`` is the relative L2 change made by the
    projection on the region 2 r_cut <= |x| <= L/4.
    """
    if r_cut < 2.0 * grid.spacing:
        raise ValueError(f"r_cut={r_cut} is below 2 * spacing = {2 * grid.spacing}")
    x, y, z = grid.coords()
    rho, g = _profile(x, y, z, params)
    cap = cap_profile(rho, r_cut)
    raw = np.stack([np.broadcast_to(gi * cap, grid.shape) for gi in g])
    raw[:, rho == 0] = 0.0
    raw_field = VectorField3(grid, raw)
    projected = inverse(leray_project(forward(raw_field)))
    region = (np.broadcast_to(rho, grid.shape) >= 2 * r_cut) & (
        np.broadcast_to(rho, grid.shape) <= grid.box_len / 4
    )
    diff = projected.data - raw
    num = math.sqrt(float(np.sum(diff[:, region] ** 2)))
    den = math.sqrt(float(np.sum(raw[:, region] ** 2)))
    corr = num / den if den > 0 else 0.0
    weak = lorentz_quasinorm(projected, (3.0, math.inf))
    return MollifiedBackground(params, float(r_cut), projected, weak, corr)


# ---------------------------------------------------------------------------
# residual oracles


def _U(points, params):
    rho, g = _profile(points[..., 0], points[..., 1], points[..., 2], params)
    return np.stack([gi / rho for gi in g], axis=-1)


_E = np.eye(3)


def fd_divergence(params: LandauParams, points: np.ndarray, h: float) -> np.ndarray:
    """Second-order central-difference divergence of the closed form."""
    out = np.zeros(points.shape[:-1])
    for j in range(3):
        up = _U(points + h * _E[j], params)[..., j]
        dn = _U(points - h * _E[j], params)[..., j]
        out += (up - dn) / (2 * h)
    return out


def _momentum_residual(points, params, h, with_advection=True):
    """-Lap U + U.grad U by central differences, at ``points``."""
    u0 = _U(points, params)
    lap = -6.0 * u0
    adv = np.zeros_like(u0)
    for j in range(3):
        up = _U(points + h * _E[j], params)
        dn = _U(points - h * _E[j], params)
        lap += up + dn
        if with_advection:
            adv += u0[..., j : j + 1] * (up - dn) / (2 * h)
    lap /= h * h
    return -lap + adv if with_advection else -lap


def _fd_jacobian(points, params, h, with_advection):
    """J[..., i, j] = d_j R_i by central differences of the FD residual R."""
    cols = []
    for j in range(3):
        up = _momentum_residual(points + h * _E[j], params, h, with_advection)
        dn = _momentum_residual(points - h * _E[j], params, h, with_advection)
        cols.append((up - dn) / (2 * h))
    return np.stack(cols, axis=-1)


def _curl_from_jacobian(J):
    return np.stack([J[..., 2, 1] - J[..., 1, 2], J[..., 0, 2] - J[..., 2, 0],
                     J[..., 1, 0] - J[..., 0, 1]], axis=-1)


@dataclass
class ResidualTable:
    rows: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["a", "n", "r_in", "r_out", "residual", "order_estimate"])
        for r in self.rows:
            w.writerow([r["a"], r["n"], r["r_in"], r["r_out"], repr(r["residual"]),
                        "" if r["order"] is None else repr(r["order"])])
        return buf.getvalue()

    @property
    def orders(self) -> list:
        return [r["order"] for r in self.rows if r["order"] is not None]


def residual_report(params: LandauParams, annulus=(1.0, 3.0), levels=(32, 64, 128),
                    box_len: float | None = None, chunk: int = 40000) -> ResidualTable:
    """Stationary-equation residual of the closed form on an annulus.

    The pressure is eliminated by taking the curl of -Lap U + U.grad U
    (everything by second-order central differences on the grid nodes inside
    the annulus).  The residual is reported relative to the L2 norm of the
    full gradient of Lap U, with the observed order from consecutive levels.
    """
    r_in, r_out = annulus
    if box_len is None:
        box_len = 2.5 * r_out
    if not (0 < r_in < r_out < box_len / 2):
        raise ValueError(f"annulus {annulus} does not fit in a box of side {box_len}")
    rows = []
    prev = None
    for n in levels:
        g = Grid(int(n), float(box_len))
        h = g.spacing
        x, y, z = (np.broadcast_to(c, g.shape) for c in g.coords())
        r = np.sqrt(x**2 + y**2 + z**2)
        mask = (r >= r_in) & (r <= r_out)
        pts = np.stack([x[mask], y[mask], z[mask]], axis=-1)
        num = 0.0
        den = 0.0
        absval = 0.0
        for s in range(0, pts.shape[0], chunk):
            p = pts[s : s + chunk]
            res = _curl_from_jacobian(_fd_jacobian(p, params, h, True))
            ref = _fd_jacobian(p, params, h, False)
            num += float(np.sum(res**2))
            den += float(np.sum(ref**2))
        absval = math.sqrt(num * g.cell_measure)
        rel = math.sqrt(num / den) if den > 0 else 0.0
        order = None
        if prev is not None and rel > 0 and prev[1] > 0:
            order = math.log(prev[1] / rel) / math.log(n / prev[0])
        rows.append({"a": params.a, "n": int(n), "r_in": r_in, "r_out": r_out,
                     "residual": rel, "absolute": absval, "order": order})
        prev = (n, rel)
    return ResidualTable(rows)
