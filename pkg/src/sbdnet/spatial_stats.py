"""Palm-calculus estimators on configuration snapshots.

The Palm view averages a functional over the points of the configuration;
the volume view averages it over uniformly random probe locations.  For any
bounded positive non-increasing kernel the steady state puts the Palm
average above the volume average (clustering); with the indicator kernel
this reduces to the empirical Ripley K lying above pi r^2, and with the
attenuation kernel to the typical receiver seeing more interference than a
random location does.

No edge correction is needed: on the torus a ball of radius r < Q embeds
without clipping, and the K of complete spatial randomness is exactly
pi r^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import get_kernels
from .errors import ConfigError, PreconditionError
from .network import ChannelParams, LinkConfiguration, interference_per_link, rates_per_link
from .rng import substream

Z95 = 1.959963984540054


@dataclass(frozen=True)
class ShotNoiseKernel:
    """Bounded, positive, non-increasing distance kernel."""

    f: object  # vectorised callable distance -> value

    def __call__(self, r):
        return self.f(r)

    def validate(self, r_max: float, grid: int = 512) -> None:
        r = np.linspace(0.0, r_max, grid)
        v = np.asarray(self.f(r), dtype=np.float64)
        if np.any(~np.isfinite(v)) or np.any(v < 0):
            raise ConfigError("shot-noise kernel must be finite and non-negative")
        if np.any(np.diff(v) > 1e-12 * max(float(v[0]), 1.0)):
            raise ConfigError("shot-noise kernel must be non-increasing")


@dataclass(frozen=True)
class PalmEstimate:
    value: float
    std_error: float
    n_points: int
    n_snapshots: int

    @property
    def ci(self) -> tuple[float, float]:
        return (self.value - Z95 * self.std_error, self.value + Z95 * self.std_error)


def _across_snapshots(means, counts) -> PalmEstimate:
    m = np.asarray(means, dtype=np.float64)
    se = float(m.std(ddof=1) / math.sqrt(m.size)) if m.size > 1 else 0.0
    return PalmEstimate(float(m.mean()), se, int(np.sum(counts)), int(m.size))


def ripley_k(snapshots, radii, which: str = "receivers"):
    """Empirical K per radius with a CI from snapshot-level variance.

    K_hat(r) = |S| / (n (n-1)) * #{ordered pairs at distance <= r}.
    """
    if which not in ("receivers", "transmitters"):
        raise ConfigError("which must be receivers or transmitters")
    radii = np.sort(np.asarray(radii, dtype=np.float64))
    if radii.size == 0 or radii[0] <= 0:
        raise ConfigError("radii must be positive")
    kern = get_kernels()
    per_snapshot = []
    for cfg in snapshots:
        if radii[-1] >= cfg.domain.half_side:
            raise ConfigError("radii must stay below the torus half-side")
        n = cfg.n
        if n < 2:
            raise PreconditionError("each snapshot needs at least 2 points")
        pts = cfg.rx if which == "receivers" else cfg.tx
        counts = np.zeros(radii.size, dtype=np.int64)
        kern.pair_count_within(np.ascontiguousarray(pts[:, 0]),
                               np.ascontiguousarray(pts[:, 1]),
                               n, cfg.domain.period, radii, counts)
        area = cfg.domain.area()
        per_snapshot.append(area * 2.0 * counts / (n * (n - 1.0)))
    ks = np.array(per_snapshot)
    mean = ks.mean(axis=0)
    se = ks.std(axis=0, ddof=1) / math.sqrt(ks.shape[0]) if ks.shape[0] > 1 else np.zeros_like(mean)
    return [(float(r), float(m), float(m - Z95 * s), float(m + Z95 * s))
            for r, m, s in zip(radii, mean, se)]


def palm_shot_noise(snapshots, kernel: ShotNoiseKernel, probes: int = 256,
                    seed: int = 0):
    """Palm vs volume averages of the shot noise of the kernel.

    Palm: average over receivers of the kernel summed over the other
    transmitters (own transmitter excluded by identity).  Volume: average
    over uniform probe locations of the kernel summed over all
    transmitters.  Returns (palm, volume) with standard errors across
    snapshots; empty snapshots are skipped but counted.
    """
    kern = get_kernels()
    palm_means, palm_n = [], []
    vol_means, vol_n = [], []
    skipped = 0
    for si, cfg in enumerate(snapshots):
        n = cfg.n
        if n == 0:
            skipped += 1
            continue
        kernel.validate(cfg.domain.half_side * math.sqrt(2.0))
        per = cfg.domain.period
        dist = np.empty(n)
        own = float(np.asarray(kernel(np.array([cfg.T])))[0])
        vals = np.empty(n)
        for i in range(n):
            kern.distances_to_point(cfg.rx[i, 0], cfg.rx[i, 1],
                                    np.ascontiguousarray(cfg.tx[:, 0]),
                                    np.ascontiguousarray(cfg.tx[:, 1]), n, per, dist)
            vals[i] = float(np.sum(kernel(dist))) - own
        palm_means.append(vals.mean())
        palm_n.append(n)

        rng = substream(seed, 30, si)
        q = cfg.domain.half_side
        px = rng.uniform(-q, q, probes)
        py = rng.uniform(-q, q, probes)
        pv = np.empty(probes)
        for j in range(probes):
            kern.distances_to_point(px[j], py[j],
                                    np.ascontiguousarray(cfg.tx[:, 0]),
                                    np.ascontiguousarray(cfg.tx[:, 1]), n, per, dist)
            pv[j] = float(np.sum(kernel(dist)))
        vol_means.append(pv.mean())
        vol_n.append(probes)
    if not palm_means:
        raise PreconditionError("all snapshots empty")
    palm = _across_snapshots(palm_means, palm_n)
    vol = _across_snapshots(vol_means, vol_n)
    return {"palm": palm, "volume": vol, "skipped_snapshots": skipped}


def _laplace_matrix(snapshots, s_grid, p: ChannelParams):
    per_snap = []
    counts = []
    for cfg in snapshots:
        if cfg.n == 0:
            continue
        inter = interference_per_link(cfg, p)
        per_snap.append([float(np.mean(np.exp(-s * inter))) for s in s_grid])
        counts.append(cfg.n)
    if not per_snap:
        raise PreconditionError("all snapshots empty")
    return np.array(per_snap), counts


def palm_laplace_interference(snapshots, s_grid, p: ChannelParams):
    """Palm average of exp(-s I) at the receivers, per transform argument."""
    s_grid = np.asarray(s_grid, dtype=np.float64)
    if np.any(s_grid < 0):
        raise ConfigError("transform arguments must be >= 0")
    mat, counts = _laplace_matrix(snapshots, s_grid, p)
    return [(float(s), _across_snapshots(mat[:, j], counts))
            for j, s in enumerate(s_grid)]


def laplace_ordering_check(snapshots, surrogates, s_grid, p: ChannelParams):
    """Paired comparison of the transform curves of the configurations and
    their matched-count uniform surrogates.

    Matching the per-snapshot counts makes the pairwise difference the
    right estimator (the shared count variance cancels).  Returns rows
    (s, value_phi, value_surrogate, delta_mean, delta_ci_lo, delta_ci_hi);
    a clustered process drives delta below zero.
    """
    if len(snapshots) != len(surrogates):
        raise ConfigError("need one surrogate per snapshot")
    s_grid = np.asarray(s_grid, dtype=np.float64)
    m_phi, counts = _laplace_matrix(snapshots, s_grid, p)
    m_sur, _ = _laplace_matrix(surrogates, s_grid, p)
    if m_phi.shape != m_sur.shape:
        raise ConfigError("snapshot/surrogate shape mismatch (empty snapshots?)")
    delta = m_phi - m_sur
    rows = []
    for j, s in enumerate(s_grid):
        est = _across_snapshots(delta[:, j], counts)
        rows.append((float(s), float(m_phi[:, j].mean()), float(m_sur[:, j].mean()),
                     est.value, *est.ci))
    return rows


def binomial_surrogate(snapshots, seed: int = 0):
    """Matched independently-marked uniform configurations: same per-snapshot
    counts, receivers uniform on the torus, transmitter marks at uniform
    angle on the radius-T circle."""
    out = []
    for si, cfg in enumerate(snapshots):
        rng = substream(seed, 31, si)
        q = cfg.domain.half_side
        n = cfg.n
        rx = rng.uniform(-q, q, (n, 2))
        ang = rng.uniform(0.0, 2.0 * math.pi, n)
        tx = cfg.domain.wrap(rx + cfg.T * np.column_stack([np.cos(ang), np.sin(ang)]))
        out.append(LinkConfiguration(cfg.domain, cfg.T, np.arange(n, dtype=np.int64),
                                     rx, tx, np.full(n, np.nan), np.zeros(n)))
    return out


def rate_conservation_check(snapshots, p: ChannelParams, lam: float):
    """Work balance: arriving bit volume lam L per unit area against the
    Palm service rate beta E0[R], estimated as mean total rate over |S|.

    Diagnostic on transient snapshots; an equality (within CI) only in
    steady state.
    """
    per_snap = []
    counts = []
    area = None
    for cfg in snapshots:
        area = cfg.domain.area()
        if cfg.n == 0:
            per_snap.append(0.0)
            counts.append(0)
            continue
        per_snap.append(float(np.sum(rates_per_link(cfg, p))) / area)
        counts.append(cfg.n)
    if area is None:
        raise PreconditionError("no snapshots")
    rhs = _across_snapshots(per_snap, counts)
    lhs = lam * p.L
    gap = abs(lhs - rhs.value) / lhs if lhs > 0 else math.nan
    return {"lhs": lhs, "rhs": rhs, "relative_gap": gap}
