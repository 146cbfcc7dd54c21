"""Hot numeric kernels: O(N) inner loops of the event simulator and the
O(N^2) sweeps of the spatial estimators.

Two interchangeable backends with identical signatures and semantics:

* numba ``@njit`` loops (default when numba imports cleanly),
* pure-numpy vectorised fallback.

Selection: set ``SBDNET_NO_NUMBA=1`` in the environment to force the numpy
path; it is also taken automatically when numba is unavailable.  Use
``get_kernels(prefer_numba=...)`` for an explicit per-call choice (the
benchmark script compares both).

Pathloss is passed to kernels as (kind, k, alpha, table_r, table_v); see
``torus.PathLossModel.kernel_params``.
"""
from __future__ import annotations

import math
import os
from typing import Callable, NamedTuple

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - mirror image of the numba install
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def deco(f):
            return f

        return deco if not (args and callable(args[0])) else args[0]


# ---------------------------------------------------------------------------
# numba backend: scalar loops
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _pl_scalar(kind, k, alpha, tab_r, tab_v, r):
    if kind == 0:
        return (r + k) ** (-alpha)
    if kind == 2:
        return r ** (-alpha)
    # tabulated, constant beyond both ends
    n = tab_r.shape[0]
    if r <= tab_r[0]:
        return tab_v[0]
    if r >= tab_r[n - 1]:
        return tab_v[n - 1]
    j = np.searchsorted(tab_r, r)
    r0 = tab_r[j - 1]
    r1 = tab_r[j]
    w = (r - r0) / (r1 - r0)
    return tab_v[j - 1] * (1.0 - w) + tab_v[j] * w


@njit(cache=True, inline="always")
def _tdist(ax, ay, bx, by, period):
    dx = abs(ax - bx)
    dy = abs(ay - by)
    if period - dx < dx:
        dx = period - dx
    if period - dy < dy:
        dy = period - dy
    return math.sqrt(dx * dx + dy * dy)


@njit(cache=True)
def _gains_to_point_nb(px, py, xs, ys, n, period, kind, k, alpha, tab_r, tab_v, out):
    for i in range(n):
        out[i] = _pl_scalar(kind, k, alpha, tab_r, tab_v, _tdist(px, py, xs[i], ys[i], period))


@njit(cache=True)
def _add_point_gains_nb(px, py, xs, ys, n, period, kind, k, alpha, tab_r, tab_v, acc, sign):
    for i in range(n):
        g = _pl_scalar(kind, k, alpha, tab_r, tab_v, _tdist(px, py, xs[i], ys[i], period))
        acc[i] += sign * g


@njit(cache=True)
def _sum_gains_at_point_nb(px, py, xs, ys, n, period, kind, k, alpha, tab_r, tab_v):
    s = 0.0
    for i in range(n):
        s += _pl_scalar(kind, k, alpha, tab_r, tab_v, _tdist(px, py, xs[i], ys[i], period))
    return s


@njit(cache=True)
def _death_candidate_nb(residual, intf, n, c, n0, sig):
    best = -1
    best_dt = np.inf
    for i in range(n):
        rate = c * np.log2(1.0 + sig / (n0 + intf[i]))
        dt = residual[i] / rate
        if dt < best_dt:
            best_dt = dt
            best = i
    return best, best_dt


@njit(cache=True)
def _drain_residuals_nb(residual, intf, n, c, n0, sig, dt):
    for i in range(n):
        rate = c * np.log2(1.0 + sig / (n0 + intf[i]))
        residual[i] -= dt * rate


@njit(cache=True)
def _total_rate_nb(intf, n, c, n0, sig):
    s = 0.0
    for i in range(n):
        s += c * np.log2(1.0 + sig / (n0 + intf[i]))
    return s


@njit(cache=True)
def _interference_all_nb(rx_x, rx_y, tx_x, tx_y, n, period, kind, k, alpha, tab_r, tab_v, out):
    for i in range(n):
        s = 0.0
        for j in range(n):
            if j != i:
                s += _pl_scalar(kind, k, alpha, tab_r, tab_v,
                                _tdist(rx_x[i], rx_y[i], tx_x[j], tx_y[j], period))
        out[i] = s


@njit(cache=True)
def _pair_count_within_nb(xs, ys, n, period, radii, out):
    # out[k] = number of unordered pairs at wraparound distance <= radii[k]
    m = radii.shape[0]
    for k in range(m):
        out[k] = 0
    for i in range(n):
        for j in range(i + 1, n):
            d = _tdist(xs[i], ys[i], xs[j], ys[j], period)
            pos = np.searchsorted(radii, d)
            # d <= radii[t] for all t >= pos
            for t in range(pos, m):
                out[t] += 1


@njit(cache=True)
def _distances_to_point_nb(px, py, xs, ys, n, period, out):
    for i in range(n):
        out[i] = _tdist(px, py, xs[i], ys[i], period)


# ---------------------------------------------------------------------------
# numpy backend: vectorised equivalents
# ---------------------------------------------------------------------------

def _pl_array(kind, k, alpha, tab_r, tab_v, r):
    if kind == 0:
        return (r + k) ** (-alpha)
    if kind == 2:
        with np.errstate(divide="ignore"):
            return r ** (-alpha)
    return np.interp(r, tab_r, tab_v)


def _tdist_array(px, py, xs, ys, period):
    dx = np.abs(xs - px)
    dy = np.abs(ys - py)
    np.minimum(dx, period - dx, out=dx)
    np.minimum(dy, period - dy, out=dy)
    return np.sqrt(dx * dx + dy * dy)


def _gains_to_point_np(px, py, xs, ys, n, period, kind, k, alpha, tab_r, tab_v, out):
    r = _tdist_array(px, py, xs[:n], ys[:n], period)
    out[:n] = _pl_array(kind, k, alpha, tab_r, tab_v, r)


def _add_point_gains_np(px, py, xs, ys, n, period, kind, k, alpha, tab_r, tab_v, acc, sign):
    r = _tdist_array(px, py, xs[:n], ys[:n], period)
    acc[:n] += sign * _pl_array(kind, k, alpha, tab_r, tab_v, r)


def _sum_gains_at_point_np(px, py, xs, ys, n, period, kind, k, alpha, tab_r, tab_v):
    if n == 0:
        return 0.0
    r = _tdist_array(px, py, xs[:n], ys[:n], period)
    return float(np.sum(_pl_array(kind, k, alpha, tab_r, tab_v, r)))


def _death_candidate_np(residual, intf, n, c, n0, sig):
    if n == 0:
        return -1, np.inf
    rate = c * np.log2(1.0 + sig / (n0 + intf[:n]))
    dt = residual[:n] / rate
    i = int(np.argmin(dt))
    return i, float(dt[i])


def _drain_residuals_np(residual, intf, n, c, n0, sig, dt):
    rate = c * np.log2(1.0 + sig / (n0 + intf[:n]))
    residual[:n] -= dt * rate


def _total_rate_np(intf, n, c, n0, sig):
    if n == 0:
        return 0.0
    return float(np.sum(c * np.log2(1.0 + sig / (n0 + intf[:n]))))


def _interference_all_np(rx_x, rx_y, tx_x, tx_y, n, period, kind, k, alpha, tab_r, tab_v, out):
    # chunk rows to bound the temporary pairwise blocks
    step = max(1, int(2_000_000 // max(n, 1)))
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        dx = np.abs(rx_x[lo:hi, None] - tx_x[None, :n])
        dy = np.abs(rx_y[lo:hi, None] - tx_y[None, :n])
        np.minimum(dx, period - dx, out=dx)
        np.minimum(dy, period - dy, out=dy)
        g = _pl_array(kind, k, alpha, tab_r, tab_v, np.sqrt(dx * dx + dy * dy))
        idx = np.arange(lo, hi)
        g[idx - lo, idx] = 0.0
        out[lo:hi] = g.sum(axis=1)


def _pair_count_within_np(xs, ys, n, period, radii, out):
    out[:] = 0
    step = max(1, int(2_000_000 // max(n, 1)))
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        dx = np.abs(xs[lo:hi, None] - xs[None, :n])
        dy = np.abs(ys[lo:hi, None] - ys[None, :n])
        np.minimum(dx, period - dx, out=dx)
        np.minimum(dy, period - dy, out=dy)
        d = np.sqrt(dx * dx + dy * dy)
        # keep j > i only: unordered pairs
        jj = np.arange(n)[None, :]
        ii = np.arange(lo, hi)[:, None]
        d = np.where(jj > ii, d, np.inf)
        for t in range(radii.shape[0]):
            out[t] += int(np.count_nonzero(d <= radii[t]))


def _distances_to_point_np(px, py, xs, ys, n, period, out):
    out[:n] = _tdist_array(px, py, xs[:n], ys[:n], period)


# ---------------------------------------------------------------------------
# backend selection
# ---------------------------------------------------------------------------

class KernelSet(NamedTuple):
    name: str
    gains_to_point: Callable
    add_point_gains: Callable
    sum_gains_at_point: Callable
    death_candidate: Callable
    drain_residuals: Callable
    total_rate: Callable
    interference_all: Callable
    pair_count_within: Callable
    distances_to_point: Callable


_NUMBA_SET = KernelSet(
    "numba",
    _gains_to_point_nb,
    _add_point_gains_nb,
    _sum_gains_at_point_nb,
    _death_candidate_nb,
    _drain_residuals_nb,
    _total_rate_nb,
    _interference_all_nb,
    _pair_count_within_nb,
    _distances_to_point_nb,
)

_NUMPY_SET = KernelSet(
    "numpy",
    _gains_to_point_np,
    _add_point_gains_np,
    _sum_gains_at_point_np,
    _death_candidate_np,
    _drain_residuals_np,
    _total_rate_np,
    _interference_all_np,
    _pair_count_within_np,
    _distances_to_point_np,
)


def numba_enabled_by_default() -> bool:
    return HAS_NUMBA and os.environ.get("SBDNET_NO_NUMBA", "0") not in ("1", "true", "yes")


def get_kernels(prefer_numba: bool | None = None) -> KernelSet:
    use = numba_enabled_by_default() if prefer_numba is None else (prefer_numba and HAS_NUMBA)
    return _NUMBA_SET if use else _NUMPY_SET


def backend_name() -> str:
    return get_kernels().name
