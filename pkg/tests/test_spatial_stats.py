import math

import numpy as np
import pytest

from sbdnet.errors import ConfigError, PreconditionError
from sbdnet.network import ChannelParams, LinkConfiguration, interference_per_link
from sbdnet.rng import substream
from sbdnet.spatial_stats import (PalmEstimate, ShotNoiseKernel, binomial_surrogate,
                                  laplace_ordering_check, palm_laplace_interference,
                                  palm_shot_noise, rate_conservation_check, ripley_k)
from sbdnet.torus import Bounded, TorusDomain

DOM = TorusDomain(5.0)
P = ChannelParams(1.0, 1.0, 1.0, Bounded(1.0, 4.0))


def binom_snap(n, seed, T=0.0):
    rng = substream(seed, 0)
    rx = rng.uniform(-5, 5, (n, 2))
    if T == 0.0:
        tx = rx
    else:
        ang = rng.uniform(0, 2 * math.pi, n)
        tx = DOM.wrap(rx + T * np.column_stack([np.cos(ang), np.sin(ang)]))
    return LinkConfiguration(DOM, T, np.arange(n), rx, tx, np.ones(n), np.zeros(n))


def test_ripley_csr_baseline():
    snaps = [binom_snap(500, 1000 + i) for i in range(50)]
    radii = np.linspace(0.2, 2.0, 8)
    out = ripley_k(snaps, radii)
    covered = sum(1 for r, k, lo, hi in out if lo <= math.pi * r * r <= hi)
    assert covered >= 7  # 95% CIs on complete spatial randomness


def test_ripley_two_point_exact():
    d = 1.0
    pts = np.array([[0.0, 0.0], [d, 0.0]])
    snap = LinkConfiguration(DOM, 0.0, np.array([0, 1]), pts, pts,
                             np.ones(2), np.zeros(2))
    out = ripley_k([snap], [0.5, 1.5])
    assert out[0][1] == 0.0
    assert out[1][1] == pytest.approx(DOM.area())


def test_ripley_monotone_and_validation():
    snaps = [binom_snap(100, 5)]
    out = ripley_k(snaps, np.linspace(0.1, 2.0, 10))
    ks = [k for _, k, _, _ in out]
    assert all(np.diff(ks) >= 0)
    with pytest.raises(ConfigError):
        ripley_k(snaps, [6.0])  # radius beyond the torus half-side
    with pytest.raises(PreconditionError):
        ripley_k([binom_snap(1, 6)], [0.5])
    with pytest.raises(ConfigError):
        ripley_k(snaps, [0.5], which="nonsense")


def test_shot_noise_constant_kernel_counts():
    n = 40
    snap = binom_snap(n, 7)
    c = 0.7
    kern = ShotNoiseKernel(lambda r: np.full_like(np.asarray(r, dtype=float), c))
    out = palm_shot_noise([snap], kern, probes=64, seed=1)
    assert out["palm"].value == pytest.approx(c * (n - 1), rel=1e-12)
    assert out["volume"].value == pytest.approx(c * n, rel=1e-12)


def test_shot_noise_pathloss_kernel_matches_interference():
    snap = binom_snap(60, 8, T=1.0)
    kern = ShotNoiseKernel(lambda r: P.pathloss.evaluate(r))
    out = palm_shot_noise([snap], kern, probes=16, seed=2)
    oracle = float(np.mean(interference_per_link(snap, P)))
    assert abs(out["palm"].value - oracle) < 1e-12


def test_shot_noise_kernel_validation():
    increasing = ShotNoiseKernel(lambda r: np.asarray(r, dtype=float))
    with pytest.raises(ConfigError):
        palm_shot_noise([binom_snap(10, 9)], increasing)


def test_shot_noise_empty_snapshots_skipped():
    empty = LinkConfiguration.empty(DOM, 0.0)
    kern = ShotNoiseKernel(lambda r: P.pathloss.evaluate(r))
    out = palm_shot_noise([empty, binom_snap(20, 10)], kern, probes=8, seed=3)
    assert out["skipped_snapshots"] == 1
    assert out["palm"].n_snapshots == 1


def test_indicator_kernel_reproduces_ripley():
    # f = 1{r <= R0} ties the two estimators together (T=0 so the receiver
    # and transmitter point sets coincide): palm = K_hat (n-1) / |S|
    snap = binom_snap(80, 11)
    r0 = 1.2
    kern = ShotNoiseKernel(lambda r: (np.asarray(r) <= r0).astype(float))
    palm = palm_shot_noise([snap], kern, probes=4, seed=4)["palm"].value
    k_hat = ripley_k([snap], [r0])[0][1]
    assert abs(palm - k_hat * (snap.n - 1) / DOM.area()) < 1e-9


def test_estimators_translation_and_permutation_invariant():
    snap = binom_snap(50, 12)
    perm = substream(13, 0).permutation(50)
    shuffled = LinkConfiguration(DOM, 0.0, snap.ids[perm], snap.rx[perm],
                                 snap.tx[perm], snap.residual[perm], snap.birth[perm])
    moved = snap.translated((2.3, -4.1))
    radii = [0.5, 1.0, 2.0]
    base = [k for _, k, _, _ in ripley_k([snap], radii)]
    assert base == [k for _, k, _, _ in ripley_k([shuffled], radii)]
    assert np.allclose(base, [k for _, k, _, _ in ripley_k([moved], radii)], rtol=1e-12)
    i_base = np.sort(interference_per_link(snap, P))
    assert np.allclose(i_base, np.sort(interference_per_link(moved, P)), rtol=1e-9)


def test_laplace_endpoints():
    snap = binom_snap(30, 14)
    out = palm_laplace_interference([snap], [0.0, 1e6], P)
    assert out[0][1].value == 1.0
    assert out[1][1].value == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ConfigError):
        palm_laplace_interference([snap], [-1.0], P)


def test_binomial_surrogate_matches_counts_and_length():
    snap = binom_snap(25, 15, T=1.0)
    sur = binomial_surrogate([snap], seed=5)[0]
    assert sur.n == snap.n
    sur.validate()
    assert sur.T == snap.T


def test_laplace_ordering_on_csr_is_null():
    # the configuration is itself uniform, so the paired delta straddles 0
    snaps = [binom_snap(120, 300 + i) for i in range(40)]
    sur = binomial_surrogate(snaps, seed=6)
    rows = laplace_ordering_check(snaps, sur, [0.3, 1.0], P)
    for _, _, _, dm, lo, hi in rows:
        assert lo <= 0.0 <= hi or abs(dm) < 5e-3


def test_rate_conservation_diagnostic_mode():
    # transient snapshots: the check reports a gap without asserting
    snaps = [binom_snap(10, 400 + i) for i in range(5)]
    out = rate_conservation_check(snaps, P, lam=0.5)
    assert out["lhs"] == 0.5
    assert isinstance(out["rhs"], PalmEstimate)
    assert out["relative_gap"] >= 0
    with pytest.raises(PreconditionError):
        rate_conservation_check([], P, lam=0.5)
