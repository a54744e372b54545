"""Time the numba kernels against their numpy twins.

Both variants are imported side by side from lnslab._kernels, so one run
compares them regardless of LNSLAB_DISABLE_NUMBA.

    python benchmarks/bench_kernels.py [--n 64] [--repeat 5]
"""
import argparse
import time

import numpy as np

from lnslab import _kernels as K


def best_of(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def cases(n, rng):
    u = rng.standard_normal((3, n, n, n))
    U = rng.standard_normal((3, n, n, n))
    mags = np.ascontiguousarray(np.sort(np.abs(rng.standard_normal(n**3)))[::-1])
    vals, counts = K.level_table_numpy(mags)
    m = np.fft.fftfreq(n, 1.0 / n)
    mh = np.fft.rfftfreq(n, 1.0 / n)
    kx, ky, kz = m[:, None, None], m[None, :, None], mh[None, None, :]
    k2 = kx**2 + ky**2 + kz**2
    inv = np.where(k2 > 0, 1.0 / np.where(k2 > 0, k2, 1.0), 0.0)
    c = rng.standard_normal((3, n, n, n // 2 + 1)) + 1j * rng.standard_normal((3, n, n, n // 2 + 1))
    return {
        "level_table": ("level_table", (mags,)),
        "lorentz_levels q=4": ("lorentz_levels", (vals, counts, 1e-3, 3.0, 4.0)),
        "lorentz_levels q=inf": ("lorentz_levels", (vals, counts, 1e-3, 3.0, -1.0)),
        "leray": ("leray", (c[0], c[1], c[2], kx, ky, kz, inv)),
        "sym_products": ("sym_products", (u, U)),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    if not K.HAVE_NUMBA:
        print("numba unavailable or disabled; timing numpy only")
    print(f"n = {args.n}")
    print(f"{'kernel':24s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speedup':>9s}")
    for label, (name, a) in cases(args.n, rng).items():
        f_np = getattr(K, f"{name}_numpy")
        t_np = best_of(lambda: f_np(*a), args.repeat)
        if K.HAVE_NUMBA:
            f_nb = getattr(K, f"{name}_numba")
            t_nb = best_of(lambda: f_nb(*a), args.repeat)
            print(f"{label:24s} {1e3 * t_np:12.2f} {1e3 * t_nb:12.2f} {t_np / t_nb:9.2f}")
        else:
            print(f"{label:24s} {1e3 * t_np:12.2f} {'-':>12s} {'-':>9s}")


if __name__ == "__main__":
    main()
