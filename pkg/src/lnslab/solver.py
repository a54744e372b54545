"""Mild solutions around a stationary background U.

State is kept in rfft layout.  The nonlinear term is

    N(u) = -P div(u (x) u + u (x) U + U (x) u)

and the linear part is integrated exactly with e^{-|k|^2 t}.  Two routes
share that machinery: an ETD1/ETD2RK time stepper, and a Picard iteration
on whole sampled trajectories in which the Duhamel integral is advanced
by the same exponential weights.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy.integrate import cumulative_simpson

from . import _kernels
from .fixedpoint import NonConvergenceError, PicardTrace, iterate
from .grid import Grid, GridError, VectorField3
from .lorentz import lorentz_quasinorm, lp_norm
from .spectral import (
    SpectralVectorField3,
    advection_divergence_hat,
    forward,
    heat_propagate,
    inverse,
    sym_divergence_hat,
    wavenumbers,
)

DEFAULT_P_LIST = (4.0, 6.0, 8.0, 10.0, 16.0)


class SolverNaNError(FloatingPointError):
    def __init__(self, t_last_good: float):
        self.t_last_good = t_last_good
        super().__init__(f"non-finite state; last good time t={t_last_good:g}")


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    scheme: str = "etd2"
    picard_iters: int = 60
    picard_tol: float = 1e-10
    delta_split: float = 1.0
    snapshot_stride: int = 1
    q: float = 4.0
    p_list: tuple = DEFAULT_P_LIST
    keep_snapshots: bool = True
    eps_u0: float | None = None
    eps_U: float | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= self.dt:
            raise ValueError(f"t_end={self.t_end} must be >= dt={self.dt}")
        if self.scheme not in ("etd1", "etd2"):
            raise ValueError(f"scheme must be etd1 or etd2, got {self.scheme!r}")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        if not self.delta_split > 0:
            raise ValueError("delta_split must be positive")

    @property
    def steps(self) -> int:
        return max(1, int(round(self.t_end / self.dt)))

    @property
    def dt_eff(self) -> float:
        return self.t_end / self.steps


# ---------------------------------------------------------------------------
# helpers on raw arrays


def _rfft(a):
    return sfft.rfftn(a, axes=(-3, -2, -1))


def _irfft(c, n):
    return sfft.irfftn(c, s=(n, n, n), axes=(-3, -2, -1))


def _leray_hat(grid: Grid, c: np.ndarray) -> np.ndarray:
    w = wavenumbers(grid)
    return np.stack(_kernels.leray(c[0], c[1], c[2], w.kdx, w.kdy, w.kdz, w.inv_kd2))


def _background_data(U, grid: Grid):
    if U is None:
        return None
    f = getattr(U, "field", U)
    if not isinstance(f, VectorField3):
        raise TypeError(f"background must be a VectorField3 or MollifiedBackground, got {type(U)}")
    if f.grid != grid:
        raise GridError(f"background grid {f.grid} does not match {grid}")
    return np.ascontiguousarray(f.data)


def nonlinear_hat(grid: Grid, u_real: np.ndarray, U_real) -> np.ndarray:
    """N(u) = -P div(u u + u U + U u) in rfft layout, dealiased."""
    Ub = np.zeros_like(u_real) if U_real is None else U_real
    prods = _kernels.sym_products(np.ascontiguousarray(u_real), Ub)
    return -_leray_hat(grid, sym_divergence_hat(grid, prods))


def _inner(grid: Grid, a_hat, b_hat) -> float:
    """Real L2 inner product h^3 sum a.b from rfft coefficients."""
    w = wavenumbers(grid).rweight
    s = float(np.sum(w * (a_hat.real * b_hat.real + a_hat.imag * b_hat.imag)))
    return s * grid.cell_measure / grid.n**3


def _grad_sq(grid: Grid, u_hat) -> float:
    k2 = wavenumbers(grid).k2
    return _inner(grid, u_hat * k2[None], u_hat)


def _etd_coeffs(grid: Grid, dt: float):
    k2 = wavenumbers(grid).k2
    z = k2 * dt
    E = np.exp(-z)
    safe = np.where(k2 > 0, k2, 1.0)
    phi1 = np.where(k2 > 0, -np.expm1(-z) / safe, dt)
    small = z < 1e-2
    series = dt * (0.5 - z / 6.0 + z**2 / 24.0 - z**3 / 120.0)
    zs = np.where(small, 1.0, z)
    direct = (np.expm1(-zs) + zs) / (np.where(small, 1.0, safe) * zs)
    phi2 = np.where(small, series, direct)
    return E, phi1, phi2


def _div_max(grid: Grid, c) -> float:
    w = wavenumbers(grid)
    d = w.kdx * c[0] + w.kdy * c[1] + w.kdz * c[2]
    return float(np.max(np.abs(d))) if d.size else 0.0


# ---------------------------------------------------------------------------
# trajectories


def norm_row(f: VectorField3, q: float, p_list) -> dict:
    g = f.grid
    u_hat = _rfft(f.data)
    row = {
        "L2": lp_norm(f, 2.0),
        "L3": lp_norm(f, 3.0),
        "L3q": lorentz_quasinorm(f, (3.0, q)),
        "L3winf": lorentz_quasinorm(f, (3.0, math.inf)),
        "H1dot": math.sqrt(max(_grad_sq(g, u_hat), 0.0)),
    }
    for p in p_list:
        row[f"Lp_{p:g}"] = lp_norm(f, float(p))
    return row


@dataclass(eq=False)
class SolutionTrajectory:
    grid: Grid
    times: np.ndarray
    series: dict
    q: float
    p_list: tuple
    snapshots: list = field(default_factory=list)
    steps: dict | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        for s in self.snapshots:
            if not np.all(np.isfinite(s.data)):
                raise ValueError("non-finite snapshot")

    @classmethod
    def from_snapshots(cls, times, snapshots, q=4.0, p_list=DEFAULT_P_LIST, **kw):
        rows = [norm_row(s, q, p_list) for s in snapshots]
        series = {k: np.array([r[k] for r in rows]) for k in rows[0]} if rows else {}
        grid = snapshots[0].grid if snapshots else None
        return cls(grid, np.asarray(times, float), series, q, tuple(p_list), list(snapshots), **kw)

    def kato_terms(self) -> dict:
        out = {}
        t = self.times
        for p in self.p_list:
            out[p] = (1.0 / p) * t ** (0.5 - 1.5 / p) * self.series[f"Lp_{p:g}"]
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        kt = self.kato_terms()
        w.writerow(["t", "L2", "L3", "L3q", "L3winf", "H1dot"] + [f"K_{p:g}" for p in self.p_list])
        for i, t in enumerate(self.times):
            row = [repr(float(t))]
            row += [repr(float(self.series[c][i])) for c in ("L2", "L3", "L3q", "L3winf", "H1dot")]
            row += [repr(float(kt[p][i])) for p in self.p_list]
            w.writerow(row)
        return buf.getvalue()

    def value_at(self, key: str, t: float, rtol=1e-9) -> float:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > rtol * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not a sampled time")
        return float(self.series[key][i])


# ---------------------------------------------------------------------------
# linear part and Duhamel operator


def caloric(u0: VectorField3, t: float) -> VectorField3:
    """e^{t Delta} u0; t = 0 returns u0 unchanged."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if t == 0:
        return u0
    return inverse(heat_propagate(forward(u0), t))


def _interp(traj: SolutionTrajectory, s: float) -> np.ndarray:
    t = traj.times
    i = int(np.searchsorted(t, s, side="right") - 1)
    i = min(max(i, 0), t.size - 1)
    if i == t.size - 1 or s <= t[i]:
        return traj.snapshots[i].data
    th = (s - t[i]) / (t[i + 1] - t[i])
    return (1 - th) * traj.snapshots[i].data + th * traj.snapshots[i + 1].data


def duhamel_B(u_traj: SolutionTrajectory, v_traj: SolutionTrajectory, t: float,
              substeps: int = 1) -> VectorField3:
    """-int_0^t e^{(t-s)Delta} P div(u (x) v) ds.

    Each grid interval is split into ``substeps`` pieces; on each piece the
    integrand is frozen at its left value (linear interpolation between
    stored samples) and the heat factor is integrated exactly per mode.
    """
    if u_traj.grid != v_traj.grid:
        raise GridError("trajectory grids differ")
    if u_traj.times.shape != v_traj.times.shape or np.any(u_traj.times != v_traj.times):
        raise ValueError("time grids mismatch")
    times = u_traj.times
    if times[0] != 0 or t > times[-1] * (1 + 1e-12) or t < 0:
        raise ValueError(f"trajectories must cover [0, {t}] starting at 0")
    if len(u_traj.snapshots) != times.size or len(v_traj.snapshots) != times.size:
        raise ValueError("trajectories need a snapshot at every sampled time")
    g = u_traj.grid
    k2 = wavenumbers(g).k2
    acc = np.zeros((3, g.n, g.n, g.n // 2 + 1), dtype=np.complex128)
    nodes = [s for s in times if s < t] + [t]
    for a, b in zip(nodes[:-1], nodes[1:]):
        sub = np.linspace(a, b, substeps + 1)
        for s0, s1 in zip(sub[:-1], sub[1:]):
            ds = s1 - s0
            if ds <= 0:
                continue
            uu = VectorField3(g, _interp(u_traj, s0))
            vv = VectorField3(g, _interp(v_traj, s0))
            n_hat = -_leray_hat(g, advection_divergence_hat(uu, vv))
            E = np.exp(-k2 * ds)
            phi = np.where(k2 > 0, -np.expm1(-k2 * ds) / np.where(k2 > 0, k2, 1.0), ds)
            acc = E[None] * acc + phi[None] * n_hat
    return inverse(SpectralVectorField3(g, acc))


# ---------------------------------------------------------------------------
# Kato norms


@dataclass
class KatoNorms:
    p_list: tuple
    values: dict
    K: float
    Y: float
    q: float

    @property
    def X(self) -> float:
        return max(self.K, self.Y)


def _check_p_list(p_list):
    for p in p_list:
        if not (3.0 < p < math.inf):
            raise ValueError(f"Kato exponents must lie in (3, inf), got {p}")


def kato_norms(traj: SolutionTrajectory, p_list=None, q: float | None = None) -> KatoNorms:
    p_list = tuple(traj.p_list if p_list is None else p_list)
    _check_p_list(p_list)
    q = traj.q if q is None else q
    t = traj.times
    vals = {}
    for p in p_list:
        key = f"Lp_{p:g}"
        if key in traj.series:
            lp = traj.series[key]
        else:
            lp = np.array([lp_norm(s, p) for s in traj.snapshots])
        vals[p] = float(np.max((1.0 / p) * t ** (0.5 - 1.5 / p) * lp)) if t.size else 0.0
    if q == traj.q and "L3q" in traj.series:
        y = traj.series["L3q"]
    else:
        y = np.array([lorentz_quasinorm(s, (3.0, q)) for s in traj.snapshots])
    Y = float(np.max(y)) if y.size else 0.0
    return KatoNorms(p_list, vals, max(vals.values(), default=0.0), Y, q)


def p_list_sensitivity(traj: SolutionTrajectory, base=DEFAULT_P_LIST) -> dict:
    """How much the Kato sup moves when exponents beyond ``base`` are added.

    ``traj`` must have been sampled with a p_list containing ``base``; the
    extra exponents are whatever else it carries.
    """
    base = tuple(float(p) for p in base)
    missing = [p for p in base if p not in traj.p_list]
    if missing:
        raise ValueError(f"trajectory was not sampled at p = {missing}")
    full = kato_norms(traj, traj.p_list)
    sub = kato_norms(traj, base)
    arg = max(full.values, key=full.values.get) if full.values else None
    change = (full.K - sub.K) / sub.K if sub.K > 0 else 0.0
    return {"base": list(base), "extended": list(traj.p_list), "K_base": sub.K,
            "K_extended": full.K, "rel_change": change, "argmax_p": arg}


def _x_norm_of(grid: Grid, fields: np.ndarray, times: np.ndarray, q, p_list) -> float:
    """X norm of a sampled trajectory given as real arrays (M+1, 3, n, n, n)."""
    best = 0.0
    for m in range(fields.shape[0]):
        f = VectorField3(grid, fields[m])
        best = max(best, lorentz_quasinorm(f, (3.0, q)))
        tm = times[m]
        if tm > 0:
            for p in p_list:
                best = max(best, (1.0 / p) * tm ** (0.5 - 1.5 / p) * lp_norm(f, p))
    return best


# ---------------------------------------------------------------------------
# time stepper


def _energy_step(grid, u_hat, n_hat, u_real, gradU):
    """(||u||^2, ||grad u||^2, <u, N(u)>, int u.(u.grad U))."""
    E = _inner(grid, u_hat, u_hat)
    G = _grad_sq(grid, u_hat)
    P = _inner(grid, u_hat, n_hat)
    if gradU is None:
        T = 0.0
    else:
        # gradU[i, j] = d_j U_i
        T = float(np.einsum("iabc,ijabc,jabc->", u_real, gradU, u_real)) * grid.cell_measure
    return E, G, P, T


def _grad_field(grid: Grid, U_real) -> np.ndarray:
    w = wavenumbers(grid)
    c = _rfft(U_real)
    kd = (w.kdx, w.kdy, w.kdz)
    out = np.empty((3, 3) + grid.shape)
    for i in range(3):
        for j in range(3):
            out[i, j] = _irfft(1j * kd[j] * c[i], grid.n)
    return out


def _check_background_div(grid, U_real):
    if U_real is None:
        return
    c = _rfft(U_real)
    scale = float(np.max(np.abs(c))) * 2 * math.pi * grid.n / grid.box_len
    if scale > 0 and _div_max(grid, c) > 1e-8 * scale:
        raise ValueError("background U is not divergence-free")


def time_step_solve(u0: VectorField3, U, config: SolverConfig, on_snapshot=None) -> SolutionTrajectory:
    """Advance the perturbation equation with ETD1 or ETD2RK.

    Norm series are sampled every ``snapshot_stride`` steps (and at the
    final step).  Energy diagnostics are recorded at every step from the
    same nonlinear evaluation the scheme uses.
    """
    g = u0.grid
    U_real = _background_data(U, g)
    _check_background_div(g, U_real)
    gradU = None if U_real is None else _grad_field(g, U_real)
    M, dt = config.steps, config.dt_eff
    Ec, phi1, phi2 = _etd_coeffs(g, dt)
    Ec, phi1, phi2 = Ec[None], phi1[None], phi2[None]

    u_hat = _rfft(u0.data)
    times, rows, snaps = [], [], []
    steps = {k: np.zeros(M + 1) for k in ("t", "E", "G", "P", "T", "D")}
    # per-mode exact int_0^dt e^{-2 k^2 s} k^2 ds, for the dissipation integral
    k2 = wavenumbers(g).k2
    dweight = -0.5 * np.expm1(-2.0 * k2 * dt)
    max_div = 0.0
    speed = float(np.max(u0.magnitude() + (0 if U_real is None else np.sqrt(np.sum(U_real**2, 0)))))

    def sample(m, u_real):
        f = VectorField3(g, u_real)
        times.append(m * dt)
        rows.append(norm_row(f, config.q, config.p_list))
        if config.keep_snapshots:
            snaps.append(f)
        if on_snapshot is not None:
            on_snapshot(m, m * dt, f)

    u_real = _irfft(u_hat, g.n)
    for m in range(M + 1):
        n_hat = nonlinear_hat(g, u_real, U_real)
        E, G, P, T = _energy_step(g, u_hat, n_hat, u_real, gradU)
        steps["t"][m], steps["E"][m], steps["G"][m], steps["P"][m], steps["T"][m] = m * dt, E, G, P, T
        if m % config.snapshot_stride == 0 or m == M:
            sample(m, u_real)
        if m == M:
            break
        steps["D"][m] = _inner(g, u_hat * dweight[None], u_hat)
        a_hat = Ec * u_hat + phi1 * n_hat
        if config.scheme == "etd2":
            a_real = _irfft(a_hat, g.n)
            n_a = nonlinear_hat(g, a_real, U_real)
            a_hat = a_hat + phi2 * (n_a - n_hat)
        u_hat = a_hat
        u_real = _irfft(u_hat, g.n)
        if not np.all(np.isfinite(u_real)):
            raise SolverNaNError(m * dt)
        scale = float(np.max(np.abs(u_hat)))
        if scale > 0:
            max_div = max(max_div, _div_max(g, u_hat) * g.box_len / (2 * math.pi * g.n) / scale)

    series = {k: np.array([r[k] for r in rows]) for k in rows[0]}
    info = {"dt": dt, "steps": M, "scheme": config.scheme,
            "cfl": speed * dt / g.spacing, "max_divergence": max_div}
    return SolutionTrajectory(g, np.array(times), series, config.q, tuple(config.p_list),
                              snaps, steps, info)


# ---------------------------------------------------------------------------
# Picard route


def picard_solve(u0: VectorField3, U, config: SolverConfig):
    """Iterate u = e^{t Delta} u0 + B(u,u) + B(u,U) + B(U,u) on sampled trajectories.

    The Duhamel integral uses the left-endpoint exponential rule on the
    step grid, so one sweep costs one nonlinear evaluation per time level.
    Returns the last iterate and the trace of X-norm differences.
    """
    g = u0.grid
    if g.n > 32:
        raise ValueError(f"picard_solve is meant for coarse grids (n <= 32), got n={g.n}")
    U_real = _background_data(U, g)
    M, dt = config.steps, config.dt_eff
    times = dt * np.arange(M + 1)
    q, p_list = config.q, tuple(config.p_list)
    _check_p_list(p_list)

    if config.eps_u0 is not None:
        v = lorentz_quasinorm(u0, (3.0, q))
        if v > config.eps_u0:
            warnings.warn(f"||u0||_(3,q) = {v:.4g} exceeds eps_u0 = {config.eps_u0:.4g}")
    if config.eps_U is not None and U_real is not None:
        v = lorentz_quasinorm(VectorField3(g, U_real), (3.0, math.inf))
        if v > config.eps_U:
            warnings.warn(f"||U||_(3,inf) = {v:.4g} exceeds eps_U = {config.eps_U:.4g}")

    E1, phi1, _ = _etd_coeffs(g, dt)
    u0_hat = _rfft(u0.data)
    cal = np.empty((M + 1, 3) + g.shape)
    c = u0_hat.copy()
    for m in range(M + 1):
        cal[m] = _irfft(c, g.n)
        c = E1[None] * c
    x_cal = _x_norm_of(g, cal, times, q, p_list)

    def phi(e):
        out = np.empty_like(e)
        D = np.zeros_like(u0_hat)
        for m in range(M + 1):
            out[m] = cal[m] + _irfft(D, g.n)
            if m < M:
                D = E1[None] * D + phi1[None] * nonlinear_hat(g, e[m], U_real)
        return out

    def xnorm(a):
        return _x_norm_of(g, a, times, q, p_list)

    tol = config.picard_tol * max(x_cal, 1e-300)
    tol = max(tol, 1e-14)
    sol, trace = iterate(phi, cal, norm=xnorm, tol=tol, max_iter=config.picard_iters)
    snaps = [VectorField3(g, sol[m]) for m in range(M + 1)]
    traj = SolutionTrajectory.from_snapshots(times, snaps, q, p_list,
                                             info={"dt": dt, "steps": M, "route": "picard"})
    return traj, trace


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class EnergyReport:
    balance_residual: float
    K_hat: float
    A: float
    inequality_holds: bool
    worst_slack: float
    equality_residual: float
    rows: dict

    @property
    def AK(self) -> float:
        return self.A * self.K_hat


def energy_monitor(traj: SolutionTrajectory, U=None, rtol: float = 1e-6) -> EnergyReport:
    """Energy balance, empirical trilinear constant and the integrated inequality.

    The instantaneous balance compares d/dt (1/2)||u||^2 taken from the
    semi-discrete right-hand side with -||grad u||^2 - int u.(u.grad U).
    The inequality ||u(t)||^2 + 2 (1 - A K) int_s^t ||grad u||^2 <= ||u(s)||^2
    is checked at every pair of recorded steps.  Trajectories from the time
    stepper carry the dissipation integrated mode by mode over each step;
    otherwise Simpson quadrature of the sampled ||grad u||^2 is used.
    """
    g = traj.grid
    if traj.steps is None:
        U_real = _background_data(U, g) if U is not None else None
        gradU = None if U_real is None else _grad_field(g, U_real)
        rec = {k: [] for k in ("E", "G", "P", "T")}
        for s in traj.snapshots:
            u_hat = _rfft(s.data)
            n_hat = nonlinear_hat(g, s.data, U_real)
            for k, v in zip("EGPT", _energy_step(g, u_hat, n_hat, s.data, gradU)):
                rec[k].append(v)
        steps = {k: np.array(v) for k, v in rec.items()}
        steps["t"] = traj.times
    else:
        steps = traj.steps
    t, E, G, P, T = (np.asarray(steps[k]) for k in ("t", "E", "G", "P", "T"))
    # (1/2) dE/dt = -G + P must equal -G - T; compare P with -T directly so
    # the residual is not lost to cancellation against G
    scale = np.maximum(G, 1e-300)
    resid = np.where(G > 0, np.abs(P + T) / scale, np.abs(P + T))
    balance = float(np.max(resid)) if resid.size else 0.0

    A = 0.0
    if U is not None:
        f = getattr(U, "field", U)
        A = lorentz_quasinorm(f, (3.0, math.inf))
    K_hat = 0.0
    pos = G > 0
    if A > 0 and np.any(pos):
        K_hat = float(np.max(np.abs(T[pos]) / (A * G[pos])))
    coef = 2.0 * (1.0 - A * K_hat)
    if "D" in steps:
        # dissipation integrated exactly per mode over each step
        C = np.concatenate([[0.0], np.cumsum(np.asarray(steps["D"])[:-1])])
    elif t.size >= 3:
        C = cumulative_simpson(G, x=t, initial=0.0)
    elif t.size == 2:
        C = np.array([0.0, 0.5 * (G[0] + G[1]) * (t[1] - t[0])])
    else:
        C = np.zeros_like(t)
    # E(t) + 2 int_0^t (G + T) = E(0), with T integrated by the trapezoid rule
    if t.size >= 2:
        tint = np.concatenate([[0.0], np.cumsum(0.5 * (T[1:] + T[:-1]) * np.diff(t))])
    else:
        tint = np.zeros_like(t)
    equality = float(np.max(np.abs(E + 2.0 * (C + tint) - E[0]))) / E[0] if E.size and E[0] > 0 else 0.0
    # lhs[s, t] - rhs[s, t] for s < t
    lhs = E[None, :] + coef * (C[None, :] - C[:, None])
    rhs = E[:, None] * (1.0 + rtol)
    iu = np.triu_indices(t.size, k=1)
    slack = (rhs - lhs)[iu]
    worst = float(np.min(slack)) if slack.size else 0.0
    holds = bool(A * K_hat < 1.0 and worst >= -1e-300)
    return EnergyReport(balance, K_hat, A, holds, worst, equality,
                        {"t": t, "E": E, "G": G, "P": P, "T": T, "residual": resid})


@dataclass
class CaloricSeries:
    t: np.ndarray
    values: np.ndarray
    q: float
    norm_u0: float

    @property
    def peak(self) -> float:
        return float(np.max(self.values)) if self.values.size else 0.0

    @property
    def floor(self) -> float:
        """Smallest sampled value relative to ||u0||_(3,q)."""
        if self.norm_u0 == 0 or not self.values.size:
            return 0.0
        return float(np.min(self.values)) / self.norm_u0

    @property
    def trends_to_zero(self) -> bool:
        return self.peak == 0 or self.values[-1] <= 0.05 * self.peak

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "value"])
        for a, b in zip(self.t, self.values):
            w.writerow([repr(float(a)), repr(float(b))])
        return buf.getvalue()


def caloric_convergence_report(u0: VectorField3, q: float, t_grid) -> CaloricSeries:
    """Series ||e^{t Delta} u0 - u0||_(3,q) along a decreasing t_grid."""
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if np.any(t_grid <= 0) or np.any(np.diff(t_grid) >= 0):
        raise ValueError("t_grid must be positive and strictly decreasing")
    u_hat = forward(u0)
    vals = []
    for t in t_grid:
        d = inverse(heat_propagate(u_hat, float(t))) - u0
        vals.append(lorentz_quasinorm(d, (3.0, q)))
    return CaloricSeries(t_grid, np.array(vals), q, lorentz_quasinorm(u0, (3.0, q)))


def smooth_datum(grid: Grid, amplitude: float = 1.0, width: float = 1.0,
                 direction=(1.0, 2.0, 3.0), center=(0.0, 0.0, 0.0),
                 band_limit: bool = False) -> VectorField3:
    """grad(psi) x c for a Gaussian psi, Leray-projected on the grid.

    ``amplitude`` multiplies psi, so the peak speed is about amplitude / width.
    With ``band_limit`` the 2/3-rule mask is applied as well.
    """
    c = np.asarray(direction, dtype=np.float64)
    c = c / np.linalg.norm(c)
    x, y, z = grid.coords()
    x, y, z = x - center[0], y - center[1], z - center[2]
    psi = amplitude * np.exp(-(x * x + y * y + z * z) / (2 * width * width))
    d = (-x * psi / width**2, -y * psi / width**2, -z * psi / width**2)
    data = np.stack([np.broadcast_to(d[1] * c[2] - d[2] * c[1], grid.shape),
                     np.broadcast_to(d[2] * c[0] - d[0] * c[2], grid.shape),
                     np.broadcast_to(d[0] * c[1] - d[1] * c[0], grid.shape)])
    hat = _leray_hat(grid, _rfft(data))
    if band_limit:
        hat = hat * wavenumbers(grid).dealias[None]
    return VectorField3(grid, _irfft(hat, grid.n))
