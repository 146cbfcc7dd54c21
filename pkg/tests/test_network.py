import math

import numpy as np
import pytest
from scipy.integrate import quad

from oracles import brute_interference
from sbdnet.errors import ConfigError
from sbdnet.network import (ChannelParams, LinkConfiguration, MimoConfig,
                            degenerate_unit, faded_rate, interference,
                            interference_per_link, mimo_channel_draws,
                            mimo_indep_rate, shannon_rate, workload_derivative)
from sbdnet.rng import substream
from sbdnet.torus import Bounded, TorusDomain

DOM = TorusDomain(5.0)
PL = Bounded(1.0, 4.0)
P = ChannelParams(1.0, 1.0, 1.0, PL)


def make_cfg(rx, tx=None, T=0.0):
    rx = np.asarray(rx, dtype=float)
    tx = rx if tx is None else np.asarray(tx, dtype=float)
    n = rx.shape[0]
    return LinkConfiguration(DOM, T, np.arange(n), rx, tx, np.ones(n), np.zeros(n))


def random_cfg(n, seed, T=0.0):
    rng = substream(seed, 0)
    rx = rng.uniform(-5, 5, (n, 2))
    if T == 0.0:
        tx = rx
    else:
        ang = rng.uniform(0, 2 * math.pi, n)
        tx = DOM.wrap(rx + T * np.column_stack([np.cos(ang), np.sin(ang)]))
    return LinkConfiguration(DOM, T, np.arange(n), rx, tx, np.ones(n), np.zeros(n))


def test_interference_single_link_zero():
    cfg = make_cfg([[0.0, 0.0]])
    assert interference(cfg, P, link_id=0) == 0.0


def test_interference_two_links_symmetric():
    d = 1.3
    cfg = make_cfg([[0.0, 0.0], [d, 0.0]])
    expect = PL.evaluate(d)
    assert interference(cfg, P, link_id=0) == pytest.approx(expect, rel=1e-14)
    assert interference(cfg, P, link_id=1) == pytest.approx(expect, rel=1e-14)


def test_interference_matches_brute_force():
    cfg = make_cfg([[0.0, 0.0], [1.0, 2.0], [-3.0, 4.0], [2.2, -1.7], [-4.9, -4.9]])
    oracle = brute_interference(cfg, P)
    ours = interference_per_link(cfg, P)
    assert np.max(np.abs(ours - oracle)) < 1e-12
    for i in range(cfg.n):
        assert abs(interference(cfg, P, link_id=i) - oracle[i]) < 1e-12


def test_interference_coincident_transmitters_excluded_by_identity():
    # two identical links stacked at the same point: each sees exactly one
    cfg = make_cfg([[0.0, 0.0], [0.0, 0.0]])
    assert interference(cfg, P, link_id=0) == pytest.approx(1.0)  # l(0) = 1
    assert interference(cfg, P, link_id=1) == pytest.approx(1.0)


def test_interference_probe_location_no_exclusion():
    cfg = make_cfg([[1.0, 0.0], [-1.0, 0.0]])
    expect = 2.0 * PL.evaluate(1.0)
    assert interference(cfg, P, at=(0.0, 0.0)) == pytest.approx(expect, rel=1e-14)
    with pytest.raises(ConfigError):
        interference(cfg, P)


def test_interference_additive_over_disjoint_sets():
    rng = substream(3, 0)
    a = rng.uniform(-5, 5, (6, 2))
    b = rng.uniform(-5, 5, (5, 2))
    cfg_a = make_cfg(np.vstack([[0.0, 0.0], a]))
    cfg_b = make_cfg(np.vstack([[0.0, 0.0], b]))
    cfg_ab = make_cfg(np.vstack([[0.0, 0.0], a, b]))
    total = interference(cfg_ab, P, link_id=0)
    assert total == pytest.approx(interference(cfg_a, P, link_id=0)
                                  + interference(cfg_b, P, link_id=0), rel=1e-12)


def test_shannon_rate_examples():
    cfg = make_cfg([[0.0, 0.0]])
    assert shannon_rate(cfg, P, 0) == pytest.approx(1.0)  # log2(1 + 1/1)
    # direct-arithmetic oracle with weak signal and matched interference
    d_sig = 1.0  # (1+1)^-4 = 1/16 signal
    cfg2 = LinkConfiguration(DOM, d_sig, np.array([0, 1]),
                             np.array([[0.0, 0.0], [2.2, 2.2]]),
                             np.array([[1.0, 0.0], [2.2 + 1.0, 2.2]]),
                             np.ones(2), np.zeros(2))
    i0 = interference(cfg2, P, link_id=0)
    want = math.log2(1.0 + (1.0 / 16.0) / (1.0 + i0))
    assert shannon_rate(cfg2, P, 0) == pytest.approx(want, rel=1e-12)
    # pinned value: l(T)=1/16, I=1/16 -> log2(18/17)
    assert math.log2(1 + (1 / 16) / (1 + 1 / 16)) == pytest.approx(0.0824622, abs=1e-6)


def test_rate_decreasing_in_interference():
    rates = []
    for n in (1, 3, 10, 30):
        cfg = random_cfg(n, seed=7)
        rates.append(shannon_rate(cfg, P, 0))
    assert all(np.diff(rates) < 0)
    assert rates[-1] > 0


def test_monotonicity_under_configuration_extension():
    rng = substream(9, 0)
    for trial in range(20):
        n = int(rng.integers(2, 30))
        cfg1 = random_cfg(n, seed=100 + trial)
        extra = rng.uniform(-5, 5, (int(rng.integers(1, 10)), 2))
        rx2 = np.vstack([cfg1.rx, extra])
        cfg2 = make_cfg(rx2)
        assert shannon_rate(cfg1, P, 0) >= shannon_rate(cfg2, P, 0)


def test_rate_interference_product_bound():
    # R * I <= C l(T) / ln 2 on any configuration
    bound = P.C * 1.0 / math.log(2.0)
    for trial in range(20):
        cfg = random_cfg(2 + 3 * trial, seed=50 + trial)
        r = shannon_rate(cfg, P, 0)
        i = interference(cfg, P, link_id=0)
        assert r * i <= bound + 1e-12


def test_workload_derivative():
    assert workload_derivative(make_cfg(np.empty((0, 2))), P) == 0.0
    lone = make_cfg([[0.0, 0.0]])
    assert workload_derivative(lone, P) == pytest.approx(shannon_rate(lone, P, 0))
    # symmetric ring: k identical rates
    k = 6
    ang = np.linspace(0, 2 * math.pi, k, endpoint=False)
    ring = make_cfg(np.column_stack([1.5 * np.cos(ang), 1.5 * np.sin(ang)]))
    common = shannon_rate(ring, P, 0)
    for i in range(k):
        assert shannon_rate(ring, P, i) == pytest.approx(common, rel=1e-10)
    assert workload_derivative(ring, P) == pytest.approx(k * common, rel=1e-10)


def test_faded_rate_degenerate_equals_shannon():
    cfg = random_cfg(8, seed=4)
    est, se = faded_rate(cfg, P, 0, fade_sampler=degenerate_unit, mc_samples=50)
    assert est == pytest.approx(shannon_rate(cfg, P, 0), rel=1e-12)
    assert se == pytest.approx(0.0, abs=1e-15)


def test_faded_rate_lone_link_quadrature_oracle():
    # E[log2(1+h)] for unit-exponential h, via quadrature
    oracle = quad(lambda h: math.exp(-h) * math.log2(1 + h), 0, np.inf)[0]
    cfg = make_cfg([[0.0, 0.0]])
    est, se = faded_rate(cfg, P, 0, mc_samples=40_000, seed=8)
    assert abs(est - oracle) < 3 * se
    assert oracle == pytest.approx(0.8603, abs=2e-4)


def test_faded_rate_monotone_in_configuration():
    cfg1 = make_cfg([[0.0, 0.0], [2.0, 0.0]])
    cfg2 = make_cfg([[0.0, 0.0], [2.0, 0.0], [0.5, 0.5], [-1.0, 1.0]])
    e1, s1 = faded_rate(cfg1, P, 0, mc_samples=20_000, seed=5)
    e2, s2 = faded_rate(cfg2, P, 0, mc_samples=20_000, seed=6)
    assert e2 < e1 + 3 * (s1 + s2)


def test_faded_rate_validates_sample_count():
    with pytest.raises(ConfigError):
        faded_rate(make_cfg([[0.0, 0.0]]), P, 0, mc_samples=0)


def test_mimo_trace_invariant():
    m = MimoConfig(3, 2, mc_samples=4000)
    h = mimo_channel_draws(m, seed=2)
    tr = np.einsum("kij,kij->k", h, np.conj(h)).real
    se = tr.std(ddof=1) / math.sqrt(m.mc_samples)
    assert abs(tr.mean() - m.Xt * m.Xr) < 3 * se


def test_mimo_1x1_reduces_to_signal_faded_rate():
    cfg = random_cfg(6, seed=12)
    i0 = interference(cfg, P, link_id=0)
    m = MimoConfig(1, 1, mc_samples=60_000)
    est, se = mimo_indep_rate(cfg, P, 0, m, seed=3)
    oracle = quad(lambda h: math.exp(-h) * math.log2(1 + h / (1 + i0)), 0, np.inf)[0]
    assert abs(est - oracle) < 3 * se


def test_mimo_eigen_oracle_same_draws():
    # singular-value route on the same channel draws, 1e-9 agreement
    cfg = make_cfg([[0.0, 0.0]])
    m = MimoConfig(2, 2, mc_samples=500)
    est, _ = mimo_indep_rate(cfg, P, 0, m, seed=9)
    h = mimo_channel_draws(m, seed=9)
    sv = np.linalg.svd(h, compute_uv=False) ** 2
    oracle = float(np.mean(np.sum(np.log2(1.0 + sv / (m.Xt * (P.N0 + 0.0))), axis=1)))
    assert est == pytest.approx(oracle, abs=1e-9)


def test_mimo_large_interference_limit():
    m = MimoConfig(2, 2, mc_samples=40_000)
    cfg = make_cfg([[0.0, 0.0]])
    big_i = 1e9
    est, se = mimo_indep_rate(cfg, P, 0, m, seed=4, interference_power=big_i)
    target = P.C * math.log2(math.e) * m.Xr
    assert abs(est * big_i - target) < 3 * se * big_i


def test_snapshot_csv_roundtrip(tmp_path):
    cfg = random_cfg(17, seed=21, T=1.0)
    path = tmp_path / "snap.csv"
    cfg.to_csv(path)
    back = LinkConfiguration.from_csv(path, DOM, 1.0)
    assert np.array_equal(back.ids, cfg.ids)
    assert np.array_equal(back.rx, cfg.rx)
    assert np.array_equal(back.tx, cfg.tx)
    back.validate()


def test_configuration_validation():
    bad = LinkConfiguration(DOM, 1.0, np.array([0]), np.array([[0.0, 0.0]]),
                            np.array([[0.5, 0.0]]), np.array([1.0]), np.array([0.0]))
    with pytest.raises(ConfigError):
        bad.validate()
    dup = LinkConfiguration(DOM, 0.0, np.array([3, 3]), np.zeros((2, 2)),
                            np.zeros((2, 2)), np.ones(2), np.zeros(2))
    with pytest.raises(ConfigError):
        dup.validate()


def test_channel_params_validation():
    with pytest.raises(ConfigError):
        ChannelParams(1.0, 0.0, 1.0, PL)  # N0 must be > 0
    with pytest.raises(ConfigError):
        ChannelParams(0.0, 1.0, 1.0, PL)
