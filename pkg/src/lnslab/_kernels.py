"""Hot inner loops, compiled with numba when available.

Every kernel has a pure-numpy twin with the same signature.  The numba
versions are used unless ``LNSLAB_DISABLE_NUMBA`` is set to a truthy value
(or numba cannot be imported).  Both paths must agree to rounding; the test
suite checks this and ``benchmarks/bench_kernels.py`` times them.
"""
import os

import numpy as np

_FLAG = os.environ.get("LNSLAB_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised with the env flag
    HAVE_NUMBA = False


# ---------------------------------------------------------------------------
# pure numpy


def level_table_numpy(mags_desc):
    """Distinct values of a descending array and inclusive cumulative counts.

    ``counts[k]`` is the number of entries ``>= values[k]``.
    """
    mags_desc = np.asarray(mags_desc, dtype=np.float64)
    if mags_desc.size == 0:
        return np.empty(0), np.empty(0, dtype=np.int64)
    last = np.ones(mags_desc.size, dtype=bool)
    last[:-1] = mags_desc[1:] != mags_desc[:-1]
    ends = np.flatnonzero(last)
    return mags_desc[ends].copy(), (ends + 1).astype(np.int64)


def lorentz_levels_numpy(values, counts, cell, p, q):
    """Quasinorm of a piecewise-constant function from its level table.

    ``q <= 0`` encodes ``q = inf``.  Values are normalised by the maximum
    before exponentiation so large q cannot overflow.
    """
    m = values.size
    if m == 0 or values[0] <= 0.0:
        return 0.0
    vmax = values[0]
    v = values / vmax
    mu = counts * cell
    if q <= 0.0:
        return vmax * float(np.max(v * mu ** (1.0 / p)))
    vq = v**q
    nxt = np.empty(m)
    nxt[:-1] = vq[1:]
    nxt[-1] = 0.0
    total = (p / q) * np.sum(mu ** (q / p) * (vq - nxt))
    return vmax * total ** (1.0 / q)


def leray_numpy(ux, uy, uz, kx, ky, kz, inv_k2):
    """Apply I - k k^T / |k|^2 to three spectral components."""
    dot = (kx * ux + ky * uy + kz * uz) * inv_k2
    return ux - kx * dot, uy - ky * dot, uz - kz * dot


def sym_products_numpy(u, U):
    """Symmetric tensor u_i u_j + u_i U_j + U_i u_j, packed xx,yy,zz,xy,xz,yz."""
    out = np.empty((6,) + u.shape[1:])
    pairs = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))
    for c, (i, j) in enumerate(pairs):
        out[c] = u[i] * (u[j] + U[j]) + U[i] * u[j]
    return out


# ---------------------------------------------------------------------------
# numba

if HAVE_NUMBA:

    @njit(cache=True)
    def level_table_numba(mags_desc):
        n = mags_desc.size
        values = np.empty(n)
        counts = np.empty(n, dtype=np.int64)
        m = 0
        for i in range(n):
            if i == n - 1 or mags_desc[i + 1] != mags_desc[i]:
                values[m] = mags_desc[i]
                counts[m] = i + 1
                m += 1
        return values[:m].copy(), counts[:m].copy()

    @njit(cache=True)
    def lorentz_levels_numba(values, counts, cell, p, q):
        m = values.size
        if m == 0 or values[0] <= 0.0:
            return 0.0
        vmax = values[0]
        if q <= 0.0:
            best = 0.0
            for k in range(m):
                val = (values[k] / vmax) * (counts[k] * cell) ** (1.0 / p)
                if val > best:
                    best = val
            return vmax * best
        total = 0.0
        for k in range(m):
            hi = (values[k] / vmax) ** q
            lo = (values[k + 1] / vmax) ** q if k + 1 < m else 0.0
            total += (counts[k] * cell) ** (q / p) * (hi - lo)
        return vmax * ((p / q) * total) ** (1.0 / q)

    @njit(cache=True)
    def leray_numba(ux, uy, uz, kx, ky, kz, inv_k2):
        n0, n1, n2 = ux.shape
        ox = np.empty_like(ux)
        oy = np.empty_like(uy)
        oz = np.empty_like(uz)
        for i in range(n0):
            a = kx[i, 0, 0]
            for j in range(n1):
                b = ky[0, j, 0]
                for k in range(n2):
                    c = kz[0, 0, k]
                    d = (a * ux[i, j, k] + b * uy[i, j, k] + c * uz[i, j, k]) * inv_k2[i, j, k]
                    ox[i, j, k] = ux[i, j, k] - a * d
                    oy[i, j, k] = uy[i, j, k] - b * d
                    oz[i, j, k] = uz[i, j, k] - c * d
        return ox, oy, oz

    @njit(cache=True)
    def sym_products_numba(u, U):
        n0, n1, n2 = u.shape[1], u.shape[2], u.shape[3]
        out = np.empty((6, n0, n1, n2))
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    a0 = u[0, i, j, k]
                    a1 = u[1, i, j, k]
                    a2 = u[2, i, j, k]
                    b0 = U[0, i, j, k]
                    b1 = U[1, i, j, k]
                    b2 = U[2, i, j, k]
                    out[0, i, j, k] = a0 * (a0 + b0) + b0 * a0
                    out[1, i, j, k] = a1 * (a1 + b1) + b1 * a1
                    out[2, i, j, k] = a2 * (a2 + b2) + b2 * a2
                    out[3, i, j, k] = a0 * (a1 + b1) + b0 * a1
                    out[4, i, j, k] = a0 * (a2 + b2) + b0 * a2
                    out[5, i, j, k] = a1 * (a2 + b2) + b1 * a2
        return out

    level_table = level_table_numba
    lorentz_levels = lorentz_levels_numba
    leray = leray_numba
    sym_products = sym_products_numba
else:
    level_table = level_table_numpy
    lorentz_levels = lorentz_levels_numpy
    leray = leray_numpy
    sym_products = sym_products_numpy


def backend():
    return "numba" if HAVE_NUMBA else "numpy"
