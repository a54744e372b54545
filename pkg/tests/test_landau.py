import math

import numpy as np
import pytest

from lnslab.grid import Grid
from lnslab.landau import (
    LandauParams,
    cap_profile,
    fd_divergence,
    inject_fault,
    landau_background,
    landau_velocity,
    landau_weak_norm,
    residual_report,
)

PTS = np.array([[1.0, 0.5, 0.3], [0.2, -1.1, 0.7], [-0.4, 0.3, -1.5], [0.9, 0.9, 0.9]])


def test_params_validation():
    with pytest.raises(ValueError):
        LandauParams(1.0)
    with pytest.raises(ValueError):
        LandauParams(2.0, axis=(1.0, 1.0, 0.0))


def test_origin_rejected():
    with pytest.raises(ValueError):
        landau_velocity(np.zeros((1, 3)), LandauParams(2.0))


@pytest.mark.parametrize("lam", [0.3, 2.5, 17.0])
def test_minus_one_homogeneous(lam):
    p = LandauParams(3.0)
    u1 = landau_velocity(PTS, p)
    u2 = landau_velocity(lam * PTS, p)
    assert np.max(np.abs(lam * u2 - u1)) <= 1e-12 * np.max(np.abs(u1))


def test_axisymmetric_and_axis_rotation():
    # rotating the axis together with the points rotates the field
    th = 0.7
    R = np.array([[1, 0, 0], [0, math.cos(th), -math.sin(th)], [0, math.sin(th), math.cos(th)]])
    p = LandauParams(2.5)
    q = LandauParams(2.5, axis=tuple(R @ np.array([0.0, 0.0, 1.0])))
    a = landau_velocity(PTS, p) @ R.T
    b = landau_velocity(PTS @ R.T, q)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_divergence_second_order():
    p = LandauParams(2.0)
    e1 = np.max(np.abs(fd_divergence(p, PTS, 2e-2)))
    e2 = np.max(np.abs(fd_divergence(p, PTS, 1e-2)))
    assert math.log2(e1 / e2) >= 1.8


def test_residual_converges():
    tab = residual_report(LandauParams(2.0), levels=(16, 32, 64))
    assert min(tab.orders) >= 1.8
    assert tab.rows[-1]["residual"] < tab.rows[0]["residual"]
    assert tab.to_csv().startswith("a,n,r_in")


def test_fault_is_detected():
    levels = (16, 32, 64)
    clean = residual_report(LandauParams(2.0), levels=levels)
    with inject_fault():
        bad = residual_report(LandauParams(2.0), levels=levels)
    # a wrong closed form stops converging under refinement
    assert bad.orders[-1] < 1.0
    assert bad.rows[-1]["residual"] > 3 * clean.rows[-1]["residual"]
    again = residual_report(LandauParams(2.0), levels=(32,)).rows[0]["residual"]
    assert again == clean.rows[1]["residual"]


def test_cap_profile_matches_at_cut():
    r = np.array([0.0, 0.5, 1.0, 2.0])
    c = cap_profile(r, 1.0)
    assert c[2] == pytest.approx(1.0)
    assert c[3] == pytest.approx(0.5)
    assert c[0] == pytest.approx(1.5)
    # slope continuity at the cut
    h = 1e-6
    left = (cap_profile(1.0, 1.0) - cap_profile(1.0 - h, 1.0)) / h
    assert left == pytest.approx(-1.0, rel=1e-4)


def test_weak_norm_decreasing_in_a():
    vals = [landau_weak_norm(LandauParams(a)) for a in (2, 4, 8, 16, 32)]
    assert all(x > y for x, y in zip(vals, vals[1:]))


def test_background_consistent_with_exact_norm():
    g = Grid(64, 16.0)
    bg = landau_background(g, LandauParams(8.0), 0.5)
    exact = landau_weak_norm(LandauParams(8.0))
    assert abs(bg.weak_norm / exact - 1) < 0.05
    assert bg.projection_correction < 0.1
    with pytest.raises(ValueError):
        landau_background(g, LandauParams(8.0), 0.1)


def test_background_divergence_free_and_split():
    from lnslab.lorentz import level_split
    from lnslab.spectral import divergence_modes, forward

    g = Grid(64, 16.0)
    bg = landau_background(g, LandauParams(8.0), 0.5)
    d = divergence_modes(forward(bg.field))
    assert np.max(np.abs(d)) <= 1e-12 * np.max(np.abs(forward(bg.field).coeffs))
    sp = level_split(bg.field, 1.0, 1.0)
    assert sp.bounds_hold and sp.measure_slack >= 0


@pytest.mark.xfail(strict=True, reason="re-projecting the capped field changes it by a few "
                                       "percent away from the core, not 1e-3")
def test_projection_correction_small():
    g = Grid(64, 16.0)
    bg = landau_background(g, LandauParams(8.0), 0.5)
    assert bg.projection_correction <= 1e-3
