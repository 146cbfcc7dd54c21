"""Statistical behaviour of the dynamics against the queueing comparators,
on the session-shared steady runs."""
import math

import numpy as np

from sbdnet.comparators import mminf_comparator


def solo_rate(desk):
    return desk.channel.C * math.log2(1.0 + desk.channel.pathloss.evaluate(desk.T)
                                      / desk.channel.N0)


def test_delay_tail_log_slope_negative(desk, steady):
    # upper-decile log-CCDF falls on a straight line of negative slope
    m, _ = steady(0.7, deaths=80_000, snaps=120)
    d = np.sort(m.delay_samples)
    grid = np.linspace(d[int(0.9 * d.size)], d[int(0.999 * d.size)], 12)
    cc = np.array([np.mean(d > t) for t in grid])
    slope, _ = np.polyfit(grid, np.log(cc), 1)
    assert np.isfinite(slope) and slope < 0


def test_interference_free_mean_is_lower_bound(desk, steady):
    m, _ = steady(0.5, deaths=10_000, snaps=60)
    floor = desk.channel.L / solo_rate(desk)
    assert m.delay_samples.mean() > floor
    ref = mminf_comparator(0.5 * desk.lam_c, desk.channel.L, solo_rate(desk),
                           n_samples=100_000, seed=3)
    assert m.delay_samples.mean() > ref.mean()


def test_light_traffic_matches_interference_free(desk, steady):
    m, _ = steady(0.02, deaths=1500)
    floor = desk.channel.L / solo_rate(desk)
    se = m.delay_samples.std(ddof=1) / math.sqrt(m.delay_samples.size)
    assert abs(m.delay_samples.mean() - floor) < 3.0 * se + 0.02 * floor
    assert m.delay_samples.mean() >= floor * 0.98


def test_little_law_on_shared_runs(desk, steady):
    for frac in (0.3, 0.5):
        m, cfg = steady(frac, deaths=10_000, snaps=(60 if frac == 0.5 else 0))
        assert abs(m.beta_hat - cfg.lam * m.w_hat) / m.beta_hat < 0.05
