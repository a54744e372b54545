import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lnslab import _kernels as K

needs_numba = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba disabled or missing")


@needs_numba
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 400), ties=st.booleans())
def test_level_table_parity(seed, n, ties):
    rng = np.random.default_rng(seed)
    v = rng.random(n)
    if ties:
        v = np.round(v, 1)
    d = np.ascontiguousarray(np.sort(v)[::-1])
    a = K.level_table_numpy(d)
    b = K.level_table_numba(d)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@needs_numba
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), p=st.floats(1.1, 8.0),
       q=st.one_of(st.floats(1.1, 40.0), st.just(-1.0)))
def test_lorentz_levels_parity(seed, p, q):
    rng = np.random.default_rng(seed)
    d = np.ascontiguousarray(np.sort(rng.exponential(size=300))[::-1])
    vals, cnt = K.level_table_numpy(d)
    a = K.lorentz_levels_numpy(vals, cnt, 0.37, p, q)
    b = K.lorentz_levels_numba(vals, cnt, 0.37, p, q)
    assert a == pytest.approx(b, rel=1e-12)


@needs_numba
def test_leray_parity():
    rng = np.random.default_rng(3)
    shape = (8, 8, 5)
    u = [rng.standard_normal(shape) + 1j * rng.standard_normal(shape) for _ in range(3)]
    # wavenumbers come in broadcast form, one axis each
    k = [rng.standard_normal((8, 1, 1)), rng.standard_normal((1, 8, 1)),
         rng.standard_normal((1, 1, 5))]
    inv = 1.0 / (k[0] ** 2 + k[1] ** 2 + k[2] ** 2)
    a = K.leray_numpy(*u, *k, inv)
    b = K.leray_numba(*u, *k, inv)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-13, atol=1e-13)


@needs_numba
def test_sym_products_parity():
    rng = np.random.default_rng(4)
    u = rng.standard_normal((3, 8, 8, 8))
    U = rng.standard_normal((3, 8, 8, 8))
    np.testing.assert_allclose(K.sym_products_numpy(u, U), K.sym_products_numba(u, U),
                               rtol=1e-14, atol=1e-14)


def test_sym_products_values():
    rng = np.random.default_rng(5)
    u = rng.standard_normal((3, 4, 4, 4))
    U = rng.standard_normal((3, 4, 4, 4))
    out = K.sym_products(u, U)
    np.testing.assert_allclose(out[3], u[0] * u[1] + u[0] * U[1] + U[0] * u[1])
    np.testing.assert_allclose(out[2], u[2] * u[2] + 2 * u[2] * U[2])


def test_env_flag_selects_numpy():
    env = dict(os.environ, LNSLAB_DISABLE_NUMBA="1")
    code = "from lnslab import _kernels as K; print(K.backend(), K.level_table is K.level_table_numpy)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True).stdout.split()
    assert out == ["numpy", "True"]
