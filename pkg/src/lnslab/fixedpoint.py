"""Picard solver for e = e0 - B(e, e) - B(U, e) - B(e, U).

The carrier is anything supporting ``+``, ``-`` and multiplication by a
float (floats, numpy arrays, trajectory objects), together with a norm
callable.  The smallness hypotheses cannot be proved by the code, so they
are certified by random probing before any iteration starts.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class PreconditionError(ValueError):
    """A hypothesis of the fixed-point theorem failed; ``name`` says which."""

    def __init__(self, name: str, detail: str):
        self.name = name
        super().__init__(f"{name}: {detail}")


class NonConvergenceError(RuntimeError):
    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace


def _default_norm(x) -> float:
    return float(np.linalg.norm(np.ravel(np.asarray(x, dtype=np.float64))))


def _default_sampler(like):
    def sample(rng):
        if np.isscalar(like):
            return float(rng.standard_normal())
        return rng.standard_normal(np.shape(like))

    return sample


@dataclass
class PicardTrace:
    norm_e: list = field(default_factory=list)
    diff_norm: list = field(default_factory=list)
    ratio: list = field(default_factory=list)
    residual: list = field(default_factory=list)

    def append(self, norm_e, diff, ratio, residual):
        self.norm_e.append(float(norm_e))
        self.diff_norm.append(float(diff))
        self.ratio.append(float(ratio))
        self.residual.append(float(residual))

    def __len__(self):
        return len(self.norm_e)

    @property
    def max_ratio(self) -> float:
        # ratio of row 0 has no predecessor difference
        return max(self.ratio[1:], default=0.0)

    @property
    def final_residual(self) -> float:
        return self.residual[-1] if self.residual else math.nan

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "norm_e", "diff_norm", "ratio", "residual"])
        for i in range(len(self)):
            w.writerow([i, repr(self.norm_e[i]), repr(self.diff_norm[i]),
                        repr(self.ratio[i]), repr(self.residual[i])])
        return buf.getvalue()


def picard_map(e0, B, U):
    """The map e -> e0 - B(e, e) - B(U, e) - B(e, U)."""

    def phi(e):
        return e0 - B(e, e) - B(U, e) - B(e, U)

    return phi


def certify(e0, B, U, C_B, eps, norm=_default_norm, probes=32, rng=None, sampler=None):
    """Check the hypotheses; raise PreconditionError naming the first failure.

    Returns the largest observed linear-bound ratio
    (||B(e,U)|| + ||B(U,e)||) / ||e|| over the probes.
    """
    if C_B < 1:
        raise PreconditionError("cb_below_one", f"C_B = {C_B} < 1")
    if eps > 1.0 / (4.0 * C_B) * (1 + 1e-15):
        raise PreconditionError("eps_too_large", f"eps = {eps} > 1/(4 C_B) = {1 / (4 * C_B)}")
    n0 = norm(e0)
    if n0 > eps * (1 + 1e-15):
        raise PreconditionError("e0_exceeds_eps", f"||e0|| = {n0} > eps = {eps}")
    rng = np.random.default_rng(0) if rng is None else rng
    sampler = _default_sampler(e0) if sampler is None else sampler
    worst = 0.0
    for _ in range(probes):
        x = sampler(rng)
        y = sampler(rng)
        nx, ny = norm(x), norm(y)
        if nx == 0 or ny == 0:
            continue
        if norm(B(x, y)) > C_B * nx * ny * (1 + 1e-12):
            raise PreconditionError("cb_bound_violated", f"||B(x,y)|| > C_B ||x|| ||y|| on a probe")
        lin = (norm(B(x, U)) + norm(B(U, x))) / nx
        worst = max(worst, lin)
        if lin > 0.125 * (1 + 1e-12):
            raise PreconditionError("linear_bound_violated",
                                    f"(||B(e,U)|| + ||B(U,e)||)/||e|| = {lin} > 1/8")
    return worst


def iterate(phi, start, norm=_default_norm, tol=1e-12, max_iter=200):
    """Run x_{n+1} = phi(x_n) from ``start`` until ||x_n - phi(x_n)|| <= tol.

    Returns (x, trace) where x is the first iterate whose residual is within
    tolerance.  Residual of x_n equals ||x_{n+1} - x_n|| so the trace costs
    one map evaluation per row.
    """
    trace = PicardTrace()
    x = start
    prev_diff = 0.0
    for it in range(max_iter + 1):
        nxt = phi(x)
        res = norm(nxt - x)
        ratio = res / prev_diff if prev_diff > 0 else 0.0
        trace.append(norm(x), prev_diff, ratio, res)
        if not math.isfinite(res):
            raise NonConvergenceError(f"non-finite residual at iteration {it}", trace)
        if res <= tol:
            return x, trace
        prev_diff = res
        x = nxt
    raise NonConvergenceError(
        f"residual {trace.final_residual:.3e} > tol {tol:.3e} after {max_iter} iterations", trace
    )


def solve_picard(e0, B, U, C_B, eps, tol=None, max_iter=200, norm=_default_norm,
                 probes=32, rng=None, sampler=None):
    """Fixed point of e = e0 - B(e,e) - B(U,e) - B(e,U) in the 3 eps / 2 ball.

    Parameters
    ----------
    e0, U : carrier elements
    B : callable (x, y) -> carrier element, bilinear
    C_B : certified bound ||B(x, y)|| <= C_B ||x|| ||y||, must be >= 1
    eps : ball parameter, ||e0|| <= eps <= 1 / (4 C_B)
    tol : residual tolerance, default 1e-12 * max(1, ||e0||)

    Returns
    -------
    (e, PicardTrace)
    """
    certify(e0, B, U, C_B, eps, norm=norm, probes=probes, rng=rng, sampler=sampler)
    if tol is None:
        tol = 1e-12 * max(1.0, norm(e0))
    return iterate(picard_map(e0, B, U), e0, norm=norm, tol=tol, max_iter=max_iter)


@dataclass
class UniquenessReport:
    reference: object
    limits: list
    distances: list
    max_pairwise: float
    radius: float
    active_bound: str
    diverged: list

    @property
    def ok(self) -> bool:
        return not self.diverged


def uniqueness_probe(e0, B, U, C_B, eps, trials=5, tol=None, max_iter=400,
                     norm=_default_norm, rng=None, sampler=None, probes=32):
    """Restart the iteration from random points of the uniqueness ball.

    The ball radius is min(3 eps / 2, 7 / (16 C_B)); ``active_bound`` records
    which of the two was smaller.
    """
    rng = np.random.default_rng(1) if rng is None else rng
    sampler = _default_sampler(e0) if sampler is None else sampler
    ref, _ = solve_picard(e0, B, U, C_B, eps, tol=tol, max_iter=max_iter, norm=norm,
                          probes=probes, rng=rng, sampler=sampler)
    if tol is None:
        tol = 1e-12 * max(1.0, norm(e0))
    r_stmt = 1.5 * eps
    r_proof = 7.0 / (16.0 * C_B)
    radius = min(r_stmt, r_proof)
    active = "3eps/2" if r_stmt <= r_proof else "7/(16C_B)"
    phi = picard_map(e0, B, U)
    limits, diverged = [], []
    for k in range(trials):
        d = sampler(rng)
        nd = norm(d)
        scale = radius * float(rng.uniform(0.1, 1.0)) / nd if nd > 0 else 0.0
        start = d * scale
        try:
            x, _ = iterate(phi, start, norm=norm, tol=tol, max_iter=max_iter)
        except NonConvergenceError as exc:
            diverged.append(f"trial {k}: {exc}")
            continue
        limits.append(x)
    dists = [norm(x - ref) for x in limits]
    pair = 0.0
    for i in range(len(limits)):
        for j in range(i + 1, len(limits)):
            pair = max(pair, norm(limits[i] - limits[j]))
    return UniquenessReport(ref, limits, dists, pair, radius, active, diverged)


def random_bilinear(dim: int, rng) -> tuple[Callable, float]:
    """Random bilinear map on R^dim with certified constant C_B = 1.

    The tensor is scaled to unit Frobenius norm, which bounds the operator
    norm of (x, y) -> T[:, x, y] by Cauchy-Schwarz.
    """
    T = rng.standard_normal((dim, dim, dim))
    T /= np.linalg.norm(T)

    def B(x, y):
        return np.einsum("ijk,j,k->i", T, x, y)

    return B, 1.0
