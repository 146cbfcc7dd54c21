import math

import numpy as np
import pytest

from sbdnet.chain import (build_tessellation, coarsened_integral,
                          coupled_dominance_run, drain_time_bound, fluid_ode,
                          simulate_cell_chain)
from sbdnet.errors import ConfigError
from sbdnet.network import ChannelParams
from sbdnet.torus import Bounded, PowerLaw, TorusDomain, constant_pathloss, \
    pathloss_integral_a

P = ChannelParams(1.0, 1.0, 1.0, Bounded(1.0, 4.0))


def test_epsilon_must_divide_period():
    with pytest.raises(ConfigError):
        build_tessellation(TorusDomain(1.0), P.pathloss, 0.3)
    with pytest.raises(ConfigError):
        build_tessellation(TorusDomain(1.0), PowerLaw(4.0), 0.5)


def test_constant_model_gives_constant_gains():
    t = build_tessellation(TorusDomain(1.0), constant_pathloss(0.4), 0.5)
    assert np.all(t.l_eps == 0.4)


def test_origin_cell_and_center_layout():
    t = build_tessellation(TorusDomain(2.0), P.pathloss, 0.5)
    assert np.allclose(t.centers[0], [0.0, 0.0])
    assert t.n_cells == 64 and t.grid_m == 8
    assert t.cell_of((0.1, -0.2)) == 0


def test_dominance_over_direct_gains_all_pairs():
    # 6x6 grid: every coarsened gain must dominate the gain at the centers
    t = build_tessellation(TorusDomain(1.5), P.pathloss, 0.5)
    per = t.domain.period
    for i in range(t.n_cells):
        dx = np.abs(t.centers[:, 0] - t.centers[i, 0])
        dy = np.abs(t.centers[:, 1] - t.centers[i, 1])
        dx = np.minimum(dx, per - dx)
        dy = np.minimum(dy, per - dy)
        direct = P.pathloss.evaluate(np.hypot(dx, dy))
        assert np.all(t.l_eps[i] + 1e-15 >= direct)


def test_row_sum_symmetry_exact():
    t = build_tessellation(TorusDomain(2.0), P.pathloss, 0.5)
    # each row is a permutation of row 0 (translation invariance): exact
    row0 = np.sort(t.l_eps[0])
    for i in range(0, t.n_cells, 7):
        assert np.array_equal(np.sort(t.l_eps[i]), row0)
    sums = t.l_eps.sum(axis=1)
    assert np.allclose(sums, sums[0], rtol=1e-12)


def test_coarsened_integral_monotone_refinement():
    dom = TorusDomain(1.0)
    a = pathloss_integral_a(P.pathloss, dom).value
    vals = [coarsened_integral(dom, P.pathloss, 1.0 / 2 ** k) for k in range(2, 7)]
    assert all(np.diff(vals) < 0)          # monotone decrease toward a
    assert all(v >= a for v in vals)       # always an upper bound
    t = build_tessellation(dom, P.pathloss, 0.25)
    assert t.integral() == pytest.approx(vals[0], rel=1e-12)


def test_lone_customer_exponential_service():
    t = build_tessellation(TorusDomain(1.0), P.pathloss, 1.0)
    x0 = np.zeros(t.n_cells, dtype=int)
    x0[0] = 1
    times = []
    for seed in range(4000):
        ts, xs = simulate_cell_chain(t, 0.0, P, 1e12, seed=seed, x0=x0)
        assert xs[-1].sum() == 0
        times.append(ts[-1])
    # signal 1, N0 = 1: rate log2(2) = 1, so Exp(1) death times
    assert np.mean(times) == pytest.approx(1.0, rel=0.03)


def test_chain_birth_bookkeeping_poisson_bound():
    # counts never exceed initial plus the number of births in the cell
    t = build_tessellation(TorusDomain(1.0), P.pathloss, 1.0)
    ts, xs = simulate_cell_chain(t, 0.5, P, 200.0, seed=3)
    diffs = np.diff(xs, axis=0)
    births = np.cumsum(np.clip(diffs, 0, None), axis=0)
    assert np.all(xs[1:] <= xs[0] + births)
    assert np.all(xs >= 0)


def test_chain_grid_sampling_matches_event_record():
    t = build_tessellation(TorusDomain(1.0), P.pathloss, 1.0)
    ts, xs = simulate_cell_chain(t, 0.4, P, 50.0, seed=9)
    grid = np.linspace(0.0, 50.0, 64)
    tg, xg = simulate_cell_chain(t, 0.4, P, 50.0, seed=9, sample_times=grid)
    # piecewise-constant reconstruction agrees with the event record
    for k, g in enumerate(tg):
        idx = np.searchsorted(ts, g, side="right") - 1
        assert np.array_equal(xg[k], xs[idx])


def test_sub_threshold_chain_stays_bounded():
    t = build_tessellation(TorusDomain(2.0), P.pathloss, 0.5)
    lam = 0.8 * t.stability_bound(P)
    grid = np.linspace(0.0, 400.0, 512)
    _, xs = simulate_cell_chain(t, lam, P, 400.0, seed=11, sample_times=grid)
    sup = xs.max(axis=1).astype(float)
    first, second = sup[:256].mean(), sup[256:].mean()
    assert second <= 1.5 * first + 5.0


def test_dominance_coupling_small_instance():
    t = build_tessellation(TorusDomain(1.0), P.pathloss, 1.0)  # 2x2 cells
    times, true_c, chain_c = coupled_dominance_run(t, lam=0.3, p=P, horizon=1e9,
                                                   seed=5, max_events=3000)
    assert np.all(true_c <= chain_c)
    assert len(times) == 3001


def test_fluid_zero_stays_zero():
    t = build_tessellation(TorusDomain(1.0), P.pathloss, 0.5)
    fl = fluid_ode(t, 0.5, P, np.zeros(t.n_cells), 5.0)
    assert np.all(fl.states == 0.0)
    assert fl.t_absorbed == 0.0


def test_fluid_symmetric_stays_symmetric():
    t = build_tessellation(TorusDomain(2.0), P.pathloss, 0.5)
    lam = 0.8 * t.stability_bound(P)
    fl = fluid_ode(t, lam, P, np.full(t.n_cells, 0.6), 1.5)
    spread = np.max(np.abs(fl.states - fl.states[:, :1]))
    assert spread < 1e-9


def test_fluid_drains_by_bound_time():
    t = build_tessellation(TorusDomain(2.0), P.pathloss, 0.5)
    lam = 0.8 * t.stability_bound(P)
    tau = drain_time_bound(t, P, lam)
    x0 = np.zeros(t.n_cells)
    x0[0] = 1.0
    fl = fluid_ode(t, lam, P, x0, 1.2 * tau)
    assert fl.t_absorbed is not None and fl.t_absorbed <= tau * (1 + 1e-6)
    assert np.all(fl.states[-1] == 0.0)


def test_fluid_max_norm_drift_inequality():
    t = build_tessellation(TorusDomain(2.0), P.pathloss, 0.5)
    lam = 0.8 * t.stability_bound(P)
    x0 = np.zeros(t.n_cells)
    x0[0] = 1.0
    fl = fluid_ode(t, lam, P, x0, 0.9 * drain_time_bound(t, P, lam), samples=2048)
    sup = fl.max_norm()
    live = sup > 1e-6
    dt = fl.times[1] - fl.times[0]
    rates = np.diff(sup[live]) / dt
    assert np.all(rates <= t.drift_bound(P, lam) + 1e-6)


def test_fluid_limit_of_scaled_chain():
    # X(z t)/z approaches the fluid path as z grows
    t = build_tessellation(TorusDomain(1.0), P.pathloss, 1.0)
    lam = 0.6 * t.stability_bound(P)
    x0 = np.zeros(t.n_cells)
    x0[0] = 1.0
    t_end = 0.6 * drain_time_bound(t, P, lam)
    fl = fluid_ode(t, lam, P, x0, t_end, samples=64)
    mean_gaps = []
    for z in (50, 100, 200):
        grid = fl.times * z
        gaps = []
        for rep in range(25):
            _, xs = simulate_cell_chain(t, lam, P, grid[-1], seed=1000 * z + rep,
                                        x0=(z * x0).astype(int), sample_times=grid)
            gaps.append(np.max(np.abs(xs / z - fl.states)))
        mean_gaps.append(np.mean(gaps))
    assert mean_gaps[1] < mean_gaps[0] and mean_gaps[2] < mean_gaps[1]


def test_stability_bound_formula():
    t = build_tessellation(TorusDomain(2.0), P.pathloss, 0.5)
    want = P.C / (P.L * math.log(2.0) * t.integral())
    assert t.stability_bound(P) == pytest.approx(want, rel=1e-12)
