"""Command-line harness: scenarios, generators and the verification suite.

Exit codes: 0 pass, 1 assertion failure, 2 configuration refusal.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy import fft as sfft

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import _kernels
from .dss import (
    DssParams,
    DssResolutionError,
    annulus_inequalities,
    dss_relation_error,
    make_dss_data,
    rescaled_norm_series,
    with_weak_norm,
)
from .fixedpoint import PreconditionError, random_bilinear, solve_picard, uniqueness_probe
from .grid import Grid, GridError, VectorField3, build_grid, read_snapshot, write_snapshot
from .landau import LandauParams, landau_background, landau_velocity, residual_report
from .lorentz import lorentz_quasinorm, lorentz_report, lp_norm
from .solver import (
    DEFAULT_P_LIST,
    SolverConfig,
    energy_monitor,
    kato_norms,
    p_list_sensitivity,
    picard_solve,
    smooth_datum,
    time_step_solve,
)
from .spectral import (
    GaussianSample,
    HeatEstimate,
    forward,
    heat_propagate,
    inequality_report,
    inverse,
    leray_project,
    wavenumbers,
)

EXIT_PASS, EXIT_FAIL, EXIT_REFUSE = 0, 1, 2


class ConfigError(ValueError):
    """Raised for missing/invalid configuration or a smallness refusal."""


# Threshold provenance: calibrate_thresholds() on the coarse grid (n=16, L=8,
# mollified Landau a=8 rescaled to weak norm eps1, Gaussian-curl datum
# rescaled to L^{3,4} norm eps2, Picard over t in [0,1], dt=0.05) starting at
# eps=8 and halving: eps=8 fails (ratio ~1.1), eps=4 passes (ratio 0.554 <=
# 7/8 + 0.05).  Rerun with `lnslab calibrate` after changing the solver.
CALIBRATED_EPS1 = 4.0
CALIBRATED_EPS2 = 4.0

DEFAULTS = {
    "common": {
        "seed": 0,
        "thresholds": {"eps1": CALIBRATED_EPS1, "eps2": CALIBRATED_EPS2, "gate": "halved"},
    },
    "stability": {
        "grid": {"n": 64, "L": 16.0},
        "background": {"kind": "landau", "a": 8.0, "r_cut": 0.5},
        "data": {"kind": "smooth", "amplitude": 0.05, "width": 1.0},
        "solver": {"dt": 0.05, "t_end": 20.0, "scheme": "etd2", "q": 4.0, "snapshot_stride": 10},
        "targets": {"decay": 0.5},
        # exponents sampled on top of the default Kato list to report p_list sensitivity
        "kato_extra_p": [5.0, 12.0, 24.0, 32.0],
    },
    "counterexample": {
        "grid": {"n": 128, "L": 64.0},
        "background": {"kind": "landau", "a": 8.0, "r_cut": 1.0},
        "data": {"kind": "dss", "lam": 2.0, "k_min": 1, "k_max": 4, "weak_norm": 0.5},
        # one lam^2 cycle [t0, 4 t0] kept below the innermost shell scale lam^k_min = 2,
        # where truncating the shells inside it has not yet reached the core
        "control": {"width": 0.75},
        "solver": {"dt": 0.015625, "t_end": 0.25, "t0": 0.0625, "scheme": "etd2", "q": 4.0,
                   "snapshot_stride": 1},
        "targets": {"r_low": 0.75, "r_high": 1.25, "min_ratio": 0.5, "control_ratio": 0.5},
    },
    "simulate": {
        "grid": {"n": 32, "L": 8.0},
        "background": {"kind": "none"},
        "data": {"kind": "smooth", "amplitude": 0.05, "width": 1.0},
        "solver": {"dt": 0.05, "t_end": 1.0, "scheme": "etd2", "q": 4.0, "snapshot_stride": 5},
        "output": {"snapshots": False},
    },
    "fixedpoint_demo": {
        "instances": 50,
        "dim": 8,
        "eps": 0.2,
        "grid": {"n": 16, "L": 8.0},
        "background": {"kind": "landau", "a": 8.0, "r_cut": 1.0},
        "data": {"kind": "smooth", "amplitude": 0.05, "width": 1.0},
        "solver": {"dt": 0.05, "t_end": 1.0, "q": 4.0},
    },
    "norms": {
        "grid": {"n": 32, "L": 8.0},
        "data": {"kind": "smooth", "amplitude": 0.05, "width": 1.0},
        "indices": [[3.0, 3.0], [3.0, 4.0], [3.0, "inf"], [2.0, 2.0]],
    },
    "landau_gen": {
        "grid": {"n": 64, "L": 16.0},
        "background": {"kind": "landau", "a": 8.0, "r_cut": 0.5},
        "residual_levels": [32, 64, 128],
    },
    "dss_gen": {
        "grid": {"n": 64, "L": 32.0},
        "data": {"kind": "dss", "lam": 2.0, "k_min": 1, "k_max": 3, "weak_norm": 0.5},
    },
    "verify": {},
}

SUBCOMMANDS = ("simulate", "stability", "counterexample", "verify", "fixedpoint-demo",
               "norms", "landau-gen", "dss-gen", "calibrate")


# ---------------------------------------------------------------------------
# configuration


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(scenario: str, path=None, seed=None) -> dict:
    key = scenario.replace("-", "_")
    if key not in DEFAULTS:
        raise ConfigError(f"unknown scenario {scenario!r}")
    cfg = _merge(DEFAULTS["common"], DEFAULTS[key])
    if path is not None:
        try:
            with open(path, "rb") as fh:
                user = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        declared = user.pop("scenario", key)
        if declared.replace("-", "_") != key:
            raise ConfigError(f"config declares scenario {declared!r} but {scenario!r} was run")
        cfg = _merge(cfg, user)
    if seed is not None:
        cfg["seed"] = int(seed)
    cfg["scenario"] = key
    return cfg


def _float(x) -> float:
    if isinstance(x, str) and x.lower() in ("inf", "infinity"):
        return math.inf
    return float(x)


def _require(cfg: dict, *path):
    cur = cfg
    for p in path:
        if not isinstance(cur, dict) or p not in cur:
            raise ConfigError(f"missing config field {'.'.join(path)}")
        cur = cur[p]
    return cur


def make_grid(cfg: dict) -> Grid:
    try:
        return build_grid(int(_require(cfg, "grid", "n")), float(_require(cfg, "grid", "L")))
    except GridError as exc:
        raise ConfigError(str(exc)) from exc


def make_background(cfg: dict, grid: Grid):
    bg = cfg.get("background", {"kind": "none"})
    kind = bg.get("kind", "none")
    if kind == "none":
        return None
    if kind == "landau":
        r_cut = float(bg.get("r_cut", 2 * grid.spacing))
        try:
            return landau_background(grid, LandauParams(float(bg["a"])), r_cut)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad background: {exc}") from exc
    if kind == "snapshot":
        return read_snapshot(bg["path"])
    raise ConfigError(f"unknown background kind {kind!r}")


def _random_field(grid: Grid, amplitude: float, rng) -> VectorField3:
    """Band-limited random divergence-free field with unit-scaled max speed."""
    data = rng.standard_normal((3,) + grid.shape)
    hat = forward(VectorField3(grid, data))
    w = wavenumbers(grid)
    k2 = w.k2
    hat = hat.with_coeffs(hat.coeffs * np.exp(-k2 * (grid.box_len / (2 * math.pi)) ** 2 / 16)[None])
    f = inverse(leray_project(hat))
    peak = float(np.max(f.magnitude()))
    return f.scaled(amplitude / peak if peak > 0 else 0.0)


def make_data(cfg: dict, grid: Grid, rng=None):
    """Initial datum from cfg['data']; returns (VectorField3, extra dict)."""
    d = cfg.get("data", {"kind": "zero"})
    kind = d.get("kind", "zero")
    if kind == "zero":
        return VectorField3.zeros(grid), {}
    if kind == "smooth":
        f = smooth_datum(grid, float(d.get("amplitude", 0.05)), float(d.get("width", 1.0)),
                         band_limit=bool(d.get("band_limit", False)))
        return f, {}
    if kind == "dss":
        params = DssParams(lam=float(d.get("lam", 2.0)),
                           k_range=(int(d.get("k_min", 1)), int(d.get("k_max", 3))))
        if "weak_norm" in d:
            params = with_weak_norm(params, float(d["weak_norm"]))
        elif "amplitude" in d:
            params = DssParams(params.lam, float(d["amplitude"]), params.k_range)
        try:
            dss = make_dss_data(grid, params)
        except DssResolutionError as exc:
            raise ConfigError(str(exc)) from exc
        return dss.projected(), {"dss": dss}
    if kind == "snapshot":
        f = read_snapshot(d["path"])
        if f.grid != grid:
            raise ConfigError(f"snapshot grid {f.grid} differs from configured {grid}")
        return f, {}
    if kind == "random":
        rng = np.random.default_rng(cfg.get("seed", 0)) if rng is None else rng
        return _random_field(grid, float(d.get("amplitude", 0.05)), rng), {}
    raise ConfigError(f"unknown data kind {kind!r}")


def make_solver_config(cfg: dict, **over) -> SolverConfig:
    s = dict(cfg.get("solver", {}))
    s.update(over)
    try:
        return SolverConfig(dt=float(s["dt"]), t_end=float(s["t_end"]),
                            scheme=s.get("scheme", "etd2"), q=_float(s.get("q", 4.0)),
                            snapshot_stride=int(s.get("snapshot_stride", 1)),
                            picard_iters=int(s.get("picard_iters", 60)),
                            keep_snapshots=bool(s.get("keep_snapshots", False)))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad solver config: {exc}") from exc


def smallness_gate(cfg: dict, U, u0: VectorField3, q: float) -> dict:
    """Measured norms against eps1 (background) and eps2 (datum).

    gate = 'full' compares with eps, gate = 'halved' with eps / 2.
    """
    th = cfg.get("thresholds", {})
    gate = th.get("gate", "halved")
    if gate not in ("full", "halved"):
        raise ConfigError(f"gate must be 'full' or 'halved', got {gate!r}")
    fac = 0.5 if gate == "halved" else 1.0
    eps1, eps2 = float(th.get("eps1", CALIBRATED_EPS1)), float(th.get("eps2", CALIBRATED_EPS2))
    A = 0.0 if U is None else lorentz_quasinorm(getattr(U, "field", U), (3.0, math.inf))
    n0 = lorentz_quasinorm(u0, (3.0, q))
    out = {"gate": gate, "A": A, "eps1": eps1, "limit_A": fac * eps1,
           "u0_norm": n0, "eps2": eps2, "limit_u0": fac * eps2, "q": q}
    out["passed"] = bool(A <= fac * eps1 and n0 <= fac * eps2)
    return out


# ---------------------------------------------------------------------------
# output helpers


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    return x


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def _write(out: Path | None, name: str, text: str):
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


# ---------------------------------------------------------------------------
# scenarios


def run_stability(cfg: dict, out: Path | None = None) -> tuple[dict, bool]:
    grid = make_grid(cfg)
    U = make_background(cfg, grid)
    u0, _ = make_data(cfg, grid)
    scfg = make_solver_config(cfg)
    extra = tuple(float(p) for p in cfg.get("kato_extra_p", ()) if float(p) not in scfg.p_list)
    if extra:
        scfg = replace(scfg, p_list=tuple(sorted(scfg.p_list + extra)))
    gate = smallness_gate(cfg, U, u0, scfg.q)
    if not gate["passed"]:
        raise ConfigError(
            f"smallness refused ({gate['gate']} gate): ||U||_(3,inf) = {gate['A']:.4g} vs "
            f"{gate['limit_A']:.4g}, ||u0||_(3,q) = {gate['u0_norm']:.4g} vs {gate['limit_u0']:.4g}")
    traj = time_step_solve(u0, U, scfg)
    s = traj.series
    report = {"scenario": "stability", "gate": gate, "solver": traj.info}
    target = float(cfg.get("targets", {}).get("decay", 0.5))
    if s["L3"][0] == 0:
        report.update({"degenerate": True, "decay_ratio": 0.0, "passed": True})
    else:
        ratio = s["L3"][-1] / s["L3"][0]
        series_q = {}
        for key, q in (("L3", 3.0), ("L3q", scfg.q)):
            v = s[key] / s[key][0]
            series_q[f"q={q:g}"] = {
                "final_ratio": v[-1],
                "uniform_C": float(np.max(v)),
                "max_uptick": float(np.max(np.diff(v), initial=0.0)),
                "trending_down": bool(v[-1] < v[0] and np.all(np.diff(v) <= 1e-12)),
            }
        kn = kato_norms(traj, DEFAULT_P_LIST)
        en = energy_monitor(traj, U)
        report.update({
            "degenerate": False,
            "decay_ratio": ratio,
            "decay_target": target,
            "series": series_q,
            "kato": {"values": {f"{p:g}": v for p, v in kn.values.items()}, "K": kn.K, "Y": kn.Y,
                     "X": kn.X, "p_list_sensitivity": p_list_sensitivity(traj)},
            "energy": {"balance_residual": en.balance_residual, "K_hat": en.K_hat, "A": en.A,
                       "AK": en.AK, "inequality_holds": en.inequality_holds,
                       "worst_slack": en.worst_slack,
                       "equality_residual": en.equality_residual},
        })
        report["passed"] = bool(ratio <= target and all(v["trending_down"] for v in series_q.values()))
    _write(out, "stability_series.csv", traj.to_csv())
    _write(out, "stability_report.json", dumps(report))
    return report, report["passed"]


def run_counterexample(cfg: dict, out: Path | None = None) -> tuple[dict, bool]:
    grid = make_grid(cfg)
    if cfg.get("data", {}).get("kind") == "zero":
        report = {"scenario": "counterexample", "degenerate": True, "passed": True}
        _write(out, "counterexample_report.json", dumps(report))
        return report, True
    U = make_background(cfg, grid)
    u0, extra = make_data(cfg, grid)
    dss = extra.get("dss")
    if dss is None:
        raise ConfigError("counterexample needs data.kind = 'dss'")
    lam = dss.params.lam
    ineq = annulus_inequalities(dss)
    if not ineq.holds:
        raise ConfigError(f"DSS datum fails the annulus inequalities: {ineq.to_json()}")
    scfg = make_solver_config(cfg)
    t0 = float(cfg["solver"].get("t0", 1.0))
    gate = smallness_gate(cfg, U, u0, math.inf)
    traj = time_step_solve(u0, U, scfg)
    rs = rescaled_norm_series(traj, lam, t0)
    w = traj.series["L3winf"]
    min_ratio = float(np.min(w) / w[0])

    width = float(cfg.get("control", {}).get("width", 1.0))
    ctrl0 = smooth_datum(grid, 1.0, width)
    ctrl0 = ctrl0.scaled(lorentz_quasinorm(u0, (3.0, math.inf)) / lorentz_quasinorm(ctrl0, (3.0, math.inf)))
    ctraj = time_step_solve(ctrl0, U, scfg)
    cw = ctraj.series["L3winf"]
    c_final = float(cw[-1] / cw[0])

    tg = cfg.get("targets", {})
    r1 = float(rs.ratios[1]) if len(rs.rows) > 1 else math.nan
    checks = {
        "r1_in_band": bool(tg.get("r_low", 0.75) <= r1 <= tg.get("r_high", 1.25)),
        "min_ratio": bool(min_ratio >= tg.get("min_ratio", 0.5)),
        "control_decays": bool(c_final < tg.get("control_ratio", 0.5)),
        "annulus": ineq.holds,
    }
    report = {
        "scenario": "counterexample", "degenerate": False, "gate": gate, "lambda": lam,
        "dss_weak_norm_grid": dss.weak_norm, "dss_weak_norm_exact": dss.weak_norm_exact,
        "data_relation_error": dss_relation_error(dss.params),
        "annulus": ineq.items, "r": rs.ratios, "min_ratio": min_ratio,
        "control_final_ratio": c_final, "checks": checks, "solver": traj.info,
    }
    report["passed"] = all(checks.values())
    _write(out, "counterexample_series.csv", traj.to_csv())
    _write(out, "control_series.csv", ctraj.to_csv())
    _write(out, "rescaled_series.csv", rs.to_csv())
    _write(out, "annulus.json", ineq.to_json() + "\n")
    _write(out, "counterexample_report.json", dumps(report))
    return report, report["passed"]


def run_simulate(cfg: dict, out: Path | None = None) -> tuple[dict, bool]:
    grid = make_grid(cfg)
    U = make_background(cfg, grid)
    u0, _ = make_data(cfg, grid, np.random.default_rng(cfg["seed"]))
    scfg = make_solver_config(cfg)
    write_snaps = bool(cfg.get("output", {}).get("snapshots", False)) and out is not None

    def on_snap(m, t, f):
        if write_snaps:
            out.mkdir(parents=True, exist_ok=True)
            write_snapshot(f, out / f"snap_{m:06d}.lnsf")

    traj = time_step_solve(u0, U, scfg, on_snapshot=on_snap)
    report = {"scenario": "simulate", "solver": traj.info,
              "final": {k: v[-1] for k, v in traj.series.items()}, "passed": True}
    _write(out, "series.csv", traj.to_csv())
    _write(out, "simulate_report.json", dumps(report))
    return report, True


def fixedpoint_suite(seed: int, instances: int = 50, dim: int = 8, eps: float = 0.2) -> dict:
    """Scalar oracle plus random R^dim instances with certified constants."""
    e, trace = solve_picard(0.2, lambda x, y: x * y, 1.0 / 16.0, 1.0, 0.2)
    exact = (-9.0 / 8.0 + math.sqrt(81.0 / 64.0 + 0.8)) / 2.0
    rng = np.random.default_rng(seed)
    worst_ratio = worst_norm = worst_unique = 0.0
    actives = set()
    for _ in range(instances):
        B, cb = random_bilinear(dim, rng)
        U = rng.standard_normal(dim)
        U *= (1.0 / 16.0) * rng.uniform(0.2, 1.0) / np.linalg.norm(U)
        e0 = rng.standard_normal(dim)
        e0 *= eps * rng.uniform(0.2, 1.0) / np.linalg.norm(e0)
        _, tr = solve_picard(e0, B, U, cb, eps, rng=rng)
        worst_ratio = max(worst_ratio, tr.max_ratio)
        worst_norm = max(worst_norm, max(tr.norm_e) / (1.5 * eps))
        up = uniqueness_probe(e0, B, U, cb, eps, trials=3, rng=rng)
        if up.diverged:
            worst_unique = math.inf
        else:
            worst_unique = max(worst_unique, max(up.distances + [up.max_pairwise]))
        actives.add(up.active_bound)
    return {
        "scalar_error": abs(e - exact), "scalar_iterations": len(trace),
        "max_ratio": worst_ratio, "max_norm_over_ball": worst_norm,
        "max_uniqueness_gap": worst_unique, "uniqueness_radius_bound": sorted(actives),
        "instances": instances,
    }


def run_fixedpoint_demo(cfg: dict, out: Path | None = None) -> tuple[dict, bool]:
    fp = fixedpoint_suite(int(cfg["seed"]), int(cfg.get("instances", 50)), int(cfg.get("dim", 8)),
                          float(cfg.get("eps", 0.2)))
    grid = make_grid(cfg)
    U = make_background(cfg, grid)
    u0, _ = make_data(cfg, grid)
    scfg = make_solver_config(cfg)
    traj, trace = picard_solve(u0, U, scfg)
    report = {"scenario": "fixedpoint_demo", "algebraic": fp,
              "trajectory": {"iterations": len(trace), "max_ratio": trace.max_ratio,
                             "final_residual": trace.final_residual}}
    checks = {
        "scalar": fp["scalar_error"] <= 1e-12,
        "ratio": fp["max_ratio"] <= 7 / 8 + 1e-9,
        "ball": fp["max_norm_over_ball"] <= 1.0 + 1e-12,
        "uniqueness": fp["max_uniqueness_gap"] <= 1e-10,
        "trajectory_ratio": trace.max_ratio <= 7 / 8 + 0.05,
    }
    report["checks"] = checks
    report["passed"] = all(checks.values())
    _write(out, "picard_trace.csv", trace.to_csv())
    _write(out, "fixedpoint_report.json", dumps(report))
    return report, report["passed"]


def run_norms(cfg: dict, out: Path | None = None) -> tuple[dict, bool]:
    grid = make_grid(cfg)
    f, _ = make_data(cfg, grid, np.random.default_rng(cfg["seed"]))
    reps = []
    for p, q in cfg.get("indices", [[3.0, "inf"]]):
        r = lorentz_report(f, (float(p), _float(q)))
        reps.append(json.loads(r.to_json()))
    report = {"scenario": "norms", "reports": reps, "passed": True}
    _write(out, "norms.json", dumps(report))
    return report, True


def run_landau_gen(cfg: dict, out: Path | None = None) -> tuple[dict, bool]:
    grid = make_grid(cfg)
    bg = make_background(cfg, grid)
    if bg is None:
        raise ConfigError("landau-gen needs background.kind = 'landau'")
    table = residual_report(bg.params, levels=tuple(cfg.get("residual_levels", (32, 64, 128))))
    report = {"scenario": "landau_gen", "a": bg.params.a, "r_cut": bg.r_cut,
              "weak_norm": bg.weak_norm, "projection_correction": bg.projection_correction,
              "orders": table.orders}
    report["passed"] = bool(min(table.orders, default=0.0) >= 1.8)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_snapshot(bg.field, out / "landau_background.lnsf")
    _write(out, "landau_residuals.csv", table.to_csv())
    _write(out, "landau_report.json", dumps(report))
    return report, report["passed"]


def run_dss_gen(cfg: dict, out: Path | None = None) -> tuple[dict, bool]:
    grid = make_grid(cfg)
    u0, extra = make_data(cfg, grid)
    dss = extra.get("dss")
    if dss is None:
        raise ConfigError("dss-gen needs data.kind = 'dss'")
    ineq = annulus_inequalities(dss)
    rel = dss_relation_error(dss.params)
    report = {"scenario": "dss_gen", "weak_norm_grid": dss.weak_norm,
              "weak_norm_exact": dss.weak_norm_exact, "relation_error": rel,
              "annulus": ineq.items}
    report["passed"] = bool(ineq.holds and rel <= 1e-6)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_snapshot(u0, out / "dss_datum.lnsf")
    _write(out, "annulus.json", ineq.to_json() + "\n")
    _write(out, "dss_report.json", dumps(report))
    return report, report["passed"]


# ---------------------------------------------------------------------------
# verification suite


def _item(module, name, measured, threshold, passed, **extra):
    d = {"module": module, "name": name, "measured": measured, "threshold": threshold,
         "passed": bool(passed)}
    d.update(extra)
    return d


def _verify_lorentz(rng):
    g = Grid(16, 4.0)
    worst = 0.0
    for _ in range(10):
        f = VectorField3(g, rng.standard_normal((3,) + g.shape))
        for p in (2.0, 2.5, 3.0, 4.0):
            a, b = lorentz_quasinorm(f, (p, p)), lp_norm(f, p)
            worst = max(worst, abs(a - b) / b)
    items = [_item("lorentz", "lpp_equals_lp", worst, 1e-10, worst <= 1e-10)]
    worst = 0.0
    for _ in range(10):
        mask = rng.random(g.shape) < rng.uniform(0.05, 0.9)
        f = VectorField3(g, np.stack([mask * 1.0, 0 * mask, 0 * mask]))
        E = mask.sum() * g.cell_measure
        for p, q in ((3.0, 2.0), (2.5, 4.0), (3.0, math.inf)):
            exact = E ** (1 / p) if math.isinf(q) else (p / q) ** (1 / q) * E ** (1 / p)
            worst = max(worst, abs(lorentz_quasinorm(f, (p, q)) - exact) / exact)
    items.append(_item("lorentz", "indicator_closed_form", worst, 1e-12, worst <= 1e-12))
    return items


def _verify_spectral(rng):
    g = Grid(16, 2 * math.pi)
    f = VectorField3(g, rng.standard_normal((3,) + g.shape))
    rt = float(np.max(np.abs(inverse(forward(f)).data - f.data)))
    P = leray_project(forward(f))
    idem = float(np.max(np.abs(leray_project(P).coeffs - P.coeffs)) / np.max(np.abs(P.coeffs)))
    h1 = heat_propagate(heat_propagate(forward(f), 0.1), 0.2).coeffs
    h2 = heat_propagate(forward(f), 0.3).coeffs
    comp = float(np.max(np.abs(h1 - h2)) / np.max(np.abs(h2)))
    tab = inequality_report(HeatEstimate(4.0, 2.0), [GaussianSample(2.0)],
                            t_grid=np.geomspace(1e-2, 1e-1, 5), grid=Grid(64, 6.4))
    slope_err = abs(tab.slopes[0] - tab.predicted) / abs(tab.predicted)
    return [
        _item("spectral", "round_trip", rt, 1e-12, rt <= 1e-12),
        _item("spectral", "leray_idempotent", idem, 1e-12, idem <= 1e-12),
        _item("spectral", "heat_composition", comp, 1e-13, comp <= 1e-13),
        _item("spectral", "heat_exponent_slope", slope_err, 0.05, slope_err <= 0.05),
    ]


def _verify_landau():
    p = LandauParams(2.0)
    pts = np.array([[1.0, 0.5, 0.3], [0.2, -1.1, 0.7], [-0.4, 0.3, -1.5]])
    errs = []
    for h in (1e-2, 5e-3):
        from .landau import fd_divergence

        errs.append(float(np.max(np.abs(fd_divergence(p, pts, h)))))
    div_order = math.log(errs[0] / errs[1]) / math.log(2.0) if errs[1] > 0 else math.inf
    u1 = landau_velocity(pts, p)
    u2 = landau_velocity(2.5 * pts, p)
    homog = float(np.max(np.abs(2.5 * u2 - u1)) / np.max(np.abs(u1)))
    table = residual_report(p, levels=(16, 32, 64))
    res_order = min(table.orders)
    return [
        _item("landau", "divergence_order", div_order, 1.8, div_order >= 1.8 or errs[0] < 1e-12),
        _item("landau", "homogeneity", homog, 1e-12, homog <= 1e-12),
        _item("landau", "residual_order", res_order, 1.8, res_order >= 1.8),
    ]


def _verify_fixedpoint(seed):
    fp = fixedpoint_suite(seed, instances=10)
    return [
        _item("fixedpoint", "scalar_oracle", fp["scalar_error"], 1e-12, fp["scalar_error"] <= 1e-12),
        _item("fixedpoint", "contraction_ratio", fp["max_ratio"], 7 / 8 + 1e-9,
              fp["max_ratio"] <= 7 / 8 + 1e-9),
        _item("fixedpoint", "ball_bound", fp["max_norm_over_ball"], 1.0,
              fp["max_norm_over_ball"] <= 1.0 + 1e-12),
        _item("fixedpoint", "uniqueness", fp["max_uniqueness_gap"], 1e-10,
              fp["max_uniqueness_gap"] <= 1e-10),
    ]


def _verify_dss():
    items = []
    for lam in (2.0, 4.0):
        rep = annulus_inequalities(DssParams(lam=lam))
        slack = min(it["slack"] for it in rep.items)
        items.append(_item("dss", f"annulus_inequalities_lambda_{lam:g}", slack, 0.0, rep.holds))
    rel = dss_relation_error(DssParams())
    items.append(_item("dss", "dss_relation", rel, 1e-6, rel <= 1e-6))
    return items


def _verify_solver():
    g = Grid(8, 2 * math.pi)
    u0 = smooth_datum(g, 0.3, 0.8)
    cfg = SolverConfig(dt=0.05, t_end=0.5, scheme="etd1", q=3.0, keep_snapshots=True)
    pt, _ = picard_solve(u0, None, cfg)
    ts = time_step_solve(u0, None, cfg)
    diff = max(lp_norm(a - b, 3) / max(lp_norm(b, 3), 1e-300) for a, b in zip(pt.snapshots, ts.snapshots))
    zero = time_step_solve(VectorField3.zeros(g), None, cfg)
    zmax = float(np.max(zero.series["L2"]))
    return [
        _item("mild_solver", "picard_vs_stepper", diff, 1e-3, diff <= 1e-3),
        _item("mild_solver", "zero_datum", zmax, 1e-14, zmax <= 1e-14),
        _item("mild_solver", "divergence_free", ts.info["max_divergence"], 1e-11,
              ts.info["max_divergence"] <= 1e-11),
    ]


def run_verify(cfg: dict, out: Path | None = None) -> tuple[dict, bool]:
    seed = int(cfg.get("seed", 0))
    rng = np.random.default_rng(seed)
    items = []
    items += _verify_lorentz(rng)
    items += _verify_spectral(rng)
    items += _verify_landau()
    items += _verify_fixedpoint(seed)
    items += _verify_dss()
    items += _verify_solver()
    passed = all(it["passed"] for it in items)
    report = {"suite": "verify", "seed": seed, "backend": _kernels.backend(), "items": items,
              "passed": passed}
    _write(out, "verify_report.json", dumps(report))
    return report, passed


# ---------------------------------------------------------------------------
# calibration


def calibrate_thresholds(start: float = 8.0, margin: float = 0.05, min_eps: float = 1e-3) -> dict:
    """Halve eps1 = eps2 until coarse Picard contraction ratios are <= 7/8 + margin."""
    g = Grid(16, 8.0)
    bg = landau_background(g, LandauParams(8.0), 2 * g.spacing)
    u = smooth_datum(g, 1.0, 1.0)
    nu = lorentz_quasinorm(u, (3.0, 4.0))
    cfg = SolverConfig(dt=0.05, t_end=1.0, q=4.0, picard_iters=40)
    eps = start
    history = []
    while eps >= min_eps:
        U = VectorField3(g, bg.field.data * eps / bg.weak_norm)
        try:
            _, tr = picard_solve(u.scaled(eps / nu), U, cfg)
            ratio = tr.max_ratio
        except Exception:
            ratio = math.inf
        history.append({"eps": eps, "max_ratio": ratio})
        if ratio <= 7 / 8 + margin:
            return {"eps1": eps, "eps2": eps, "history": history}
        eps /= 2
    raise RuntimeError("calibration did not reach a contracting regime")


# ---------------------------------------------------------------------------
# entry point

RUNNERS = {
    "simulate": run_simulate,
    "stability": run_stability,
    "counterexample": run_counterexample,
    "verify": run_verify,
    "fixedpoint-demo": run_fixedpoint_demo,
    "norms": run_norms,
    "landau-gen": run_landau_gen,
    "dss-gen": run_dss_gen,
}


def _set_threads(n: int | None):
    if not n:
        return
    try:
        import numba

        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))
    except ImportError:
        pass


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lnslab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=SUBCOMMANDS)
    ap.add_argument("--config", type=Path, default=None)
    ap.add_argument("--out", type=Path, default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _set_threads(args.threads)
    workers = args.threads or 1
    t_start = time.perf_counter()
    try:
        with sfft.set_workers(workers):
            if args.command == "calibrate":
                res = calibrate_thresholds()
                sys.stdout.write(dumps(res))
                return EXIT_PASS
            cfg = load_config(args.command, args.config, args.seed)
            report, passed = RUNNERS[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSE
    except PreconditionError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSE
    summary = "PASS" if passed else "FAIL"
    print(f"{args.command}: {summary} ({time.perf_counter() - t_start:.1f}s)", file=sys.stderr)
    if args.out is None:
        sys.stdout.write(dumps(report))
    return EXIT_PASS if passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
