import math
import warnings

import numpy as np
import pytest

from lnslab.grid import Grid, VectorField3
from lnslab.lorentz import lorentz_quasinorm, lp_norm
from lnslab.solver import (
    SolutionTrajectory,
    SolverConfig,
    caloric,
    caloric_convergence_report,
    duhamel_B,
    energy_monitor,
    kato_norms,
    p_list_sensitivity,
    picard_solve,
    smooth_datum,
    time_step_solve,
)

G16 = Grid(16, 2 * math.pi)


@pytest.fixture(scope="module")
def datum():
    return smooth_datum(G16, 0.3, 0.8)


@pytest.fixture(scope="module")
def etd1(datum):
    return time_step_solve(datum, None, SolverConfig(dt=0.05, t_end=0.5, scheme="etd1"))


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(dt=0.0, t_end=1.0)
    with pytest.raises(ValueError):
        SolverConfig(dt=0.1, t_end=0.05)
    with pytest.raises(ValueError):
        SolverConfig(dt=0.1, t_end=1.0, scheme="rk4")
    with pytest.raises(ValueError):
        SolverConfig(dt=0.1, t_end=1.0, snapshot_stride=0)
    c = SolverConfig(dt=0.3, t_end=1.0)
    assert c.steps == 3 and c.dt_eff == pytest.approx(1 / 3)


def test_smooth_datum_divergence_free(datum):
    from lnslab.spectral import divergence_modes, forward

    d = divergence_modes(forward(datum))
    assert np.max(np.abs(d)) <= 1e-12 * np.max(np.abs(forward(datum).coeffs))


def test_zero_datum_stays_zero():
    tr = time_step_solve(VectorField3.zeros(G16), None, SolverConfig(dt=0.1, t_end=0.5))
    assert np.max(tr.series["L2"]) == 0.0


def test_divergence_stays_zero(etd1):
    assert etd1.info["max_divergence"] <= 1e-11


def test_duhamel_reproduces_etd1(datum, etd1):
    # ETD1 is exactly the left-endpoint exponential rule of the mild form
    for m in (1, 4, 10):
        t = etd1.times[m]
        rebuilt = caloric(datum, t) + duhamel_B(etd1, etd1, t)
        assert lp_norm(rebuilt - etd1.snapshots[m], 2) <= 1e-13 * lp_norm(etd1.snapshots[m], 2)


def test_duhamel_bilinear(etd1):
    t = etd1.times[-1]
    a = duhamel_B(etd1, etd1, t)
    two = SolutionTrajectory.from_snapshots(etd1.times, [s.scaled(2.0) for s in etd1.snapshots])
    b = duhamel_B(two, etd1, t)
    np.testing.assert_allclose(b.data, 2 * a.data, atol=1e-14)
    with pytest.raises(ValueError):
        duhamel_B(etd1, etd1, 2 * t)


def test_caloric_time_zero_identity(datum):
    assert caloric(datum, 0.0) is datum
    with pytest.raises(ValueError):
        caloric(datum, -1.0)


def test_picard_matches_etd1(datum, etd1):
    cfg = SolverConfig(dt=0.05, t_end=0.5, scheme="etd1", q=3.0)
    pt, trace = picard_solve(datum, None, cfg)
    diff = max(lp_norm(a - b, 3) / lp_norm(b, 3) for a, b in zip(pt.snapshots, etd1.snapshots))
    assert diff <= 1e-8
    assert trace.max_ratio < 7 / 8


def test_picard_rejects_fine_grid():
    g = Grid(64, 1.0)
    with pytest.raises(ValueError):
        picard_solve(VectorField3.zeros(g), None, SolverConfig(dt=0.1, t_end=0.2))


def test_picard_warns_when_not_small(datum):
    cfg = SolverConfig(dt=0.1, t_end=0.2, eps_u0=1e-6)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        picard_solve(datum, None, cfg)
    assert any("eps_u0" in str(x.message) for x in w)


def test_etd2_order(datum):
    fin = []
    for dt in (0.04, 0.02, 0.01):
        cfg = SolverConfig(dt=dt, t_end=0.4, scheme="etd2")
        fin.append(time_step_solve(datum, None, cfg).snapshots[-1])
    e1, e2 = lp_norm(fin[0] - fin[1], 2), lp_norm(fin[1] - fin[2], 2)
    assert math.log2(e1 / e2) >= 1.9


def test_linear_regime_matches_caloric():
    u0 = smooth_datum(G16, 1e-6, 0.8)
    tr = time_step_solve(u0, None, SolverConfig(dt=0.05, t_end=0.5))
    ref = caloric(u0, 0.5)
    assert lp_norm(tr.snapshots[-1] - ref, 3) <= 1e-5 * lp_norm(ref, 3)


def test_energy_equality_unforced():
    u0 = smooth_datum(G16, 0.3, 0.8, band_limit=True)
    tr = time_step_solve(u0, None, SolverConfig(dt=0.02, t_end=0.4))
    rep = energy_monitor(tr)
    assert rep.balance_residual <= 1e-6
    assert rep.inequality_holds
    assert rep.A == 0.0 and rep.K_hat == 0.0


def test_energy_monitor_from_snapshots(etd1):
    # Simpson fallback when only snapshots are available
    bare = SolutionTrajectory.from_snapshots(etd1.times, etd1.snapshots)
    rep = energy_monitor(bare)
    assert rep.balance_residual <= 1e-6


def test_kato_norms(etd1):
    kn = kato_norms(etd1)
    assert kn.X == max(kn.K, kn.Y)
    assert kn.Y == pytest.approx(np.max(etd1.series["L3q"]))
    with pytest.raises(ValueError):
        kato_norms(etd1, p_list=(2.0,))
    kt = etd1.kato_terms()
    assert kt[4.0][0] == 0.0


def test_trajectory_csv_and_lookup(etd1):
    lines = etd1.to_csv().splitlines()
    assert lines[0].startswith("t,L2,L3,L3q,L3winf,H1dot,K_4")
    assert len(lines) == etd1.times.size + 1
    assert etd1.value_at("L2", 0.25) == etd1.series["L2"][5]
    with pytest.raises(ValueError):
        etd1.value_at("L2", 0.26)


def test_snapshot_stride():
    u0 = smooth_datum(G16, 0.1, 0.8)
    tr = time_step_solve(u0, None, SolverConfig(dt=0.1, t_end=1.0, snapshot_stride=3))
    np.testing.assert_allclose(tr.times, [0.0, 0.3, 0.6, 0.9, 1.0])


def test_rejects_divergent_background():
    U = VectorField3(G16, np.stack([np.broadcast_to(np.sin(G16.coords()[0]), G16.shape)] * 3))
    with pytest.raises(ValueError):
        time_step_solve(smooth_datum(G16, 0.1, 0.8), U, SolverConfig(dt=0.1, t_end=0.2))


def test_nan_guard():
    from lnslab.solver import SolverNaNError

    u0 = smooth_datum(G16, 1e3, 0.8)
    with pytest.raises(SolverNaNError):
        with np.errstate(all="ignore"):
            time_step_solve(u0, None, SolverConfig(dt=0.5, t_end=50.0))


def test_caloric_report_smooth_goes_to_zero():
    g = Grid(32, 16.0)
    u0 = smooth_datum(g, 1.0, 2.0)
    rep = caloric_convergence_report(u0, 3.0, np.geomspace(4, 1e-3, 9))
    assert rep.trends_to_zero
    assert rep.norm_u0 == pytest.approx(lorentz_quasinorm(u0, (3.0, 3.0)))
    with pytest.raises(ValueError):
        caloric_convergence_report(u0, 3.0, [0.1, 0.2])


def test_p_list_sensitivity(datum):
    cfg = SolverConfig(dt=0.05, t_end=0.5, p_list=(4.0, 5.0, 6.0, 8.0, 10.0, 16.0, 32.0))
    tr = time_step_solve(datum, None, cfg)
    rep = p_list_sensitivity(tr)
    assert rep["K_extended"] >= rep["K_base"] > 0
    assert rep["rel_change"] == pytest.approx(rep["K_extended"] / rep["K_base"] - 1)
    assert rep["argmax_p"] in cfg.p_list
    with pytest.raises(ValueError):
        p_list_sensitivity(tr, base=(4.0, 7.0))
