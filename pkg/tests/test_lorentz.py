import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lnslab.grid import Grid, ScalarField, VectorField3
from lnslab.lorentz import (
    LorentzIndex,
    LorentzIndexError,
    LorentzReport,
    convolve,
    distribution_function,
    distribution_summary,
    level_split,
    lorentz_quasinorm,
    lorentz_report,
    lp_norm,
    quasinorm_from_magnitudes,
)


def brute_quasinorm(mags, cell, p, q):
    """Reference via the decreasing rearrangement, step by step."""
    v = np.sort(np.asarray(mags).ravel())[::-1]
    if math.isinf(q):
        s = np.arange(1, v.size + 1) * cell
        return float(np.max(v * s ** (1 / p)))
    total = 0.0
    for j, vj in enumerate(v):
        a, b = j * cell, (j + 1) * cell
        # integral of (s^{1/p} vj)^q ds/s over [a, b]
        total += vj**q * (p / q) * (b ** (q / p) - a ** (q / p))
    return total ** (1 / q)


@pytest.mark.parametrize("p,q", [(1.5, 2.0), (3.0, 3.0), (3.0, 4.0), (2.5, 7.0), (3.0, math.inf)])
def test_matches_rearrangement_reference(rng, p, q):
    g = Grid(8, 2.0)
    mags = np.abs(rng.standard_normal(g.shape))
    mags[mags < 0.3] = 0.3  # ties across levels
    f = ScalarField(g, mags)
    ref = brute_quasinorm(mags, g.cell_measure, p, q)
    assert lorentz_quasinorm(f, (p, q)) == pytest.approx(ref, rel=1e-12)


def test_index_validation():
    with pytest.raises(LorentzIndexError):
        LorentzIndex(1.0, 2.0)
    with pytest.raises(LorentzIndexError):
        LorentzIndex(math.inf, 2.0)
    with pytest.raises(LorentzIndexError):
        LorentzIndex(3.0, 1.0)
    assert LorentzIndex(3.0).weak


def test_zero_field_has_zero_norm():
    g = Grid(8, 1.0)
    z = VectorField3.zeros(g)
    for idx in ((3.0, 3.0), (3.0, math.inf), (2.0, 5.0)):
        assert lorentz_quasinorm(z, idx) == 0.0


def test_distribution_function(rng):
    g = Grid(8, 2.0)
    v = rng.random(g.shape)
    f = ScalarField(g, v)
    assert distribution_function(f, 0.5) == pytest.approx(np.sum(v > 0.5) * g.cell_measure)
    with pytest.raises(ValueError):
        distribution_function(f, -1.0)
    s = distribution_summary(f)
    assert np.all(np.diff(s.values) < 0)
    assert s.measures[-1] == pytest.approx(g.n**3 * g.cell_measure)


def test_report_json_round_trip(rng):
    g = Grid(8, 1.0)
    f = VectorField3(g, rng.standard_normal((3,) + g.shape))
    for idx in ((3.0, 4.0), (3.0, math.inf)):
        r = lorentz_report(f, idx)
        back = LorentzReport.from_json(r.to_json())
        assert back == r
        assert r.breakpoints_count == g.n**3


def test_rejects_unknown_type():
    with pytest.raises(TypeError):
        lorentz_quasinorm(np.ones(4), (3.0, 3.0))


@settings(max_examples=40, deadline=None)
@given(
    c=st.floats(0.01, 100.0),
    p=st.floats(1.2, 8.0),
    q=st.one_of(st.floats(1.2, 12.0), st.just(math.inf)),
    seed=st.integers(0, 2**31 - 1),
)
def test_homogeneity_and_dilation(c, p, q, seed):
    rng = np.random.default_rng(seed)
    mags = rng.random(512)
    base = quasinorm_from_magnitudes(mags, 0.1, (p, q))
    assert quasinorm_from_magnitudes(c * mags, 0.1, (p, q)) == pytest.approx(c * base, rel=1e-11)
    # stretching the cells scales by cell^(1/p)
    assert quasinorm_from_magnitudes(mags, 0.1 * c, (p, q)) == pytest.approx(
        base * c ** (1 / p), rel=1e-11)


@settings(max_examples=30, deadline=None)
@given(p=st.floats(1.2, 6.0), q=st.floats(1.2, 20.0), seed=st.integers(0, 2**31 - 1))
def test_weak_bounded_by_strong(p, q, seed):
    # ||f||_{p,inf} <= (q/p)^{1/q} ||f||_{p,q}, equality for indicators
    rng = np.random.default_rng(seed)
    mags = rng.exponential(size=300)
    weak = quasinorm_from_magnitudes(mags, 0.3, (p, math.inf))
    strong = quasinorm_from_magnitudes(mags, 0.3, (p, q))
    assert weak <= (q / p) ** (1 / q) * strong * (1 + 1e-12)
    ones = np.ones(50)
    assert quasinorm_from_magnitudes(ones, 0.3, (p, math.inf)) == pytest.approx(
        (q / p) ** (1 / q) * quasinorm_from_magnitudes(ones, 0.3, (p, q)), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_invariant_under_permutation(seed):
    rng = np.random.default_rng(seed)
    mags = rng.random(200)
    a = quasinorm_from_magnitudes(mags, 0.5, (3.0, 4.0))
    b = quasinorm_from_magnitudes(rng.permutation(mags), 0.5, (3.0, 4.0))
    assert a == pytest.approx(b, rel=1e-14)


def test_lp_norm(rng):
    g = Grid(8, 2.0)
    f = VectorField3(g, rng.standard_normal((3,) + g.shape))
    m = f.magnitude()
    assert lp_norm(f, 3.0) == pytest.approx((np.sum(m**3) * g.cell_measure) ** (1 / 3))


def test_level_split_bounds(rng):
    g = Grid(16, 4.0)
    U = VectorField3(g, rng.standard_normal((3,) + g.shape))
    sp = level_split(U, 0.5, 0.1)
    assert sp.bounds_hold
    np.testing.assert_allclose((sp.low + sp.high).data, U.data)
    assert sp.threshold == pytest.approx(0.5 / math.sqrt(0.1))
    assert np.all((sp.high.magnitude() == 0) | (sp.high.magnitude() >= sp.threshold))
    with pytest.raises(ValueError):
        level_split(U, 0.0, 1.0)


def test_convolve_gaussians():
    # Gaussian * Gaussian is a Gaussian with added variances
    g = Grid(64, 24.0)
    x, y, z = g.coords()
    r2 = x * x + y * y + z * z

    def gauss(s):
        return np.exp(-r2 / (2 * s * s)) / (2 * math.pi * s * s) ** 1.5

    out = convolve(ScalarField(g, gauss(1.0)), ScalarField(g, gauss(1.5)))
    expect = gauss(math.sqrt(1.0 + 1.5**2))
    assert np.max(np.abs(out.values - expect)) < 1e-7 * np.max(expect)
