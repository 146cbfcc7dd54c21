"""Canned experiment recipes behind the ``figures`` subcommand, plus the
run-planning helper shared by them.

Unstated desk-scale parameters default to Q = 5, C = L = N0 = 1, T = 0 and
the (r+1)^-4 bounded attenuation; every recipe is parameterised by the
fraction lam / lam_c, so the emitted data reproduce curve shapes rather
than any particular absolute calibration.  ``scale`` shrinks sample-size
targets for smoke runs.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .comparators import mm1_ps_comparator, mminf_comparator
from .errors import ConfigError
from .heuristics import critical_lambda, light_traffic_beta, poisson_heuristic_beta, \
    second_order_beta
from .network import ChannelParams
from .simulator import FileSizeDist, SimulationConfig, delay_ccdf, \
    delay_correlation, empirical_ccdf, run
from .spatial_stats import ripley_k
from .torus import Bounded, TorusDomain, pathloss_integral_a


@dataclass(frozen=True)
class Desk:
    """Resolved desk-scale parameter set."""

    channel: ChannelParams
    domain: TorusDomain
    T: float
    lam_c: float
    a: float


def desk_setup(channel: ChannelParams | None = None,
               domain: TorusDomain | None = None, T: float = 0.0) -> Desk:
    domain = domain or TorusDomain(5.0)
    channel = channel or ChannelParams(1.0, 1.0, 1.0, Bounded(1.0, 4.0))
    a = pathloss_integral_a(channel.pathloss, domain)
    lam_c = critical_lambda(channel, T, a)
    if lam_c <= 0:
        raise ConfigError("attenuation model admits no stable arrival rate")
    return Desk(channel, domain, T, lam_c, a.unwrap())


def plan_run(desk: Desk, lam: float, seed: int, deaths_target: int = 10_000,
             n_snapshots: int = 0, file_dist: FileSizeDist | None = None,
             record_events: bool = False, warmup_mult: float = 15.0) -> SimulationConfig:
    """Size a run: warmup from the predicted mean sojourn, horizon from the
    death-count target, snapshots spaced one predicted sojourn apart."""
    if not 0 < lam:
        raise ConfigError("arrival intensity must be > 0")
    sol = second_order_beta(lam, desk.channel, desk.T, desk.domain, tol=1e-6)
    w_pred = sol.beta / lam if math.isfinite(sol.beta) else 10.0
    w_pred = max(w_pred, desk.channel.L)
    warmup = min(max(warmup_mult * w_pred, 20.0), 600.0)
    rate = lam * desk.domain.area()
    spacing = max(w_pred, 0.5)
    horizon = warmup + max(deaths_target / rate, n_snapshots * spacing)
    snaps = tuple(warmup + (i + 1) * spacing for i in range(n_snapshots)) \
        if n_snapshots else ()
    fd = file_dist or FileSizeDist("exponential", desk.channel.L)
    return SimulationConfig(lam=lam, channel=desk.channel, domain=desk.domain,
                            T=desk.T, file_dist=fd, horizon=horizon, warmup=warmup,
                            seed=seed, snapshot_times=snaps, record_events=record_events)


def _write_csv(path, header_comment: str, columns: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(header_comment)
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return "%.12g" % v
    return str(v)


def _run_many(cfgs, jobs):
    if jobs <= 1 or len(cfgs) <= 1:
        return [run(c) for c in cfgs]
    with ProcessPoolExecutor(max_workers=min(jobs, len(cfgs))) as pool:
        return list(pool.map(run, cfgs))


def fig2(out_dir, desk: Desk, seed: int, scale: float = 1.0, header: str = "",
         jobs: int = 1) -> list[str]:
    """Density versus arrival rate: simulation against both fixed-point
    predictions and the interaction-free line."""
    fracs = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    deaths = max(int(10_000 * scale), 300)
    cfgs = [plan_run(desk, fr * desk.lam_c, seed + i, deaths_target=deaths)
            for i, fr in enumerate(fracs)]
    metrics = _run_many(cfgs, jobs)
    rows = []
    for fr, m in zip(fracs, metrics):
        lam = fr * desk.lam_c
        bf = poisson_heuristic_beta(lam, desk.channel, desk.T, desk.domain)
        bs = second_order_beta(lam, desk.channel, desk.T, desk.domain)
        rows.append((lam, fr, m.beta_hat, m.beta_se, bf.beta, bs.beta,
                     light_traffic_beta(lam, desk.channel, desk.T)))
    path = f"{out_dir}/fig2_beta_vs_lambda.csv"
    _write_csv(path, header,
               ["lambda", "lambda_frac", "beta_hat", "beta_se", "beta_f", "beta_s", "beta_l"],
               rows)
    return [path]


def fig3(out_dir, desk: Desk, seed: int, scale: float = 1.0, header: str = "",
         jobs: int = 1) -> list[str]:
    """Empirical K against the complete-spatial-randomness pi r^2 at light,
    intermediate, and near-critical load."""
    fracs = (0.141, 0.697, 0.985)
    n_snaps = max(int(40 * scale), 8)
    radii = np.linspace(0.15, 2.0, 12)
    cfgs = [plan_run(desk, fr * desk.lam_c, seed + i,
                     deaths_target=max(int(2000 * scale), 200), n_snapshots=n_snaps)
            for i, fr in enumerate(fracs)]
    metrics = _run_many(cfgs, jobs)
    paths = []
    for fr, m in zip(fracs, metrics):
        snaps = [s for s in m.snapshots if s.n >= 2]
        rows = [(r, kh, math.pi * r * r, lo, hi)
                for r, kh, lo, hi in ripley_k(snaps, radii)]
        path = f"{out_dir}/fig3_k_frac{str(fr).replace('.', 'p')}.csv"
        _write_csv(path, header, ["r", "k_hat", "k_ppp", "ci_lo", "ci_hi"], rows)
        paths.append(path)
    return paths


def fig56(out_dir, desk: Desk, seed: int, scale: float = 1.0, header: str = "",
          jobs: int = 1) -> list[str]:
    """Delay tail of the spatial model against the equal-split
    processor-sharing comparator and the interference-free lower bound."""
    lam = 0.7 * desk.lam_c
    m = run(plan_run(desk, lam, seed, deaths_target=max(int(20_000 * scale), 1000)))
    ps = mm1_ps_comparator(lam, desk.channel.L, desk.lam_c,
                           n_samples=max(int(100_000 * scale), 5000), seed=seed)
    solo = desk.channel.C * math.log2(1.0 + desk.channel.pathloss.evaluate(desk.T)
                                      / desk.channel.N0)
    mm = mminf_comparator(lam, desk.channel.L, solo,
                          n_samples=max(int(100_000 * scale), 5000), seed=seed)
    hi = float(np.quantile(ps, 0.999))
    grid = np.linspace(0.0, hi, 64)
    sp = dict(delay_ccdf(m, grid))
    pq = dict(empirical_ccdf(ps, grid))
    mq = dict(empirical_ccdf(mm, grid))
    rows = [(t, sp[t], pq[t], mq[t]) for t in grid]
    path = f"{out_dir}/fig5-6_delay_ccdf.csv"
    _write_csv(path, header, ["t", "ccdf_spatial", "ccdf_ps", "ccdf_mminf"], rows)
    return [path]


def fig8(out_dir, desk: Desk, seed: int, scale: float = 1.0, header: str = "",
         jobs: int = 1) -> list[str]:
    """Delay correlation of co-born link pairs versus their separation.

    Run at 0.56 of critical: heavier ambient interference buries the pair
    coupling below statistical resolution at affordable replication counts.
    """
    lam = 0.56 * desk.lam_c
    cfg = plan_run(desk, lam, seed, deaths_target=2000)
    reps = max(int(800 * scale), 100)
    q = desk.domain.half_side
    rows = delay_correlation(cfg, (0.05, 0.5, 1.0, 2.0, 3.5, q), reps)
    path = f"{out_dir}/fig8_delay_correlation.csv"
    _write_csv(path, header, ["d", "rho", "ci_lo", "ci_hi"], rows)
    return [path]


def fig9(out_dir, desk: Desk, seed: int, scale: float = 1.0, header: str = "",
         jobs: int = 1) -> list[str]:
    """Heavy-tailed files: delay tail against the matched processor-sharing
    comparator under the same Pareto law."""
    lam = 0.5 * desk.lam_c
    fd = FileSizeDist("pareto", desk.channel.L, 2.5)
    m = run(plan_run(desk, lam, seed, deaths_target=max(int(20_000 * scale), 1000),
                     file_dist=fd))
    ps = mm1_ps_comparator(lam, desk.channel.L, desk.lam_c,
                           n_samples=max(int(100_000 * scale), 5000), seed=seed,
                           file_dist=fd)
    hi = float(np.quantile(ps, 0.999))
    grid = np.linspace(0.0, hi, 64)
    sp = dict(delay_ccdf(m, grid))
    pq = dict(empirical_ccdf(ps, grid))
    rows = [(t, sp[t], pq[t]) for t in grid]
    path = f"{out_dir}/fig9_pareto_delay_ccdf.csv"
    _write_csv(path, header, ["t", "ccdf_spatial", "ccdf_ps"], rows)
    return [path]


FIGURES = {"fig2": fig2, "fig3": fig3, "fig5-6": fig56, "fig8": fig8, "fig9": fig9}


def run_figure(figure_id: str, out_dir, desk: Desk | None = None, seed: int = 1,
               scale: float = 1.0, header: str = "", jobs: int = 1) -> list[str]:
    if figure_id not in FIGURES:
        raise ConfigError(f"unknown figure id {figure_id!r}; know {sorted(FIGURES)}")
    desk = desk or desk_setup()
    return FIGURES[figure_id](out_dir, desk, seed, scale, header, jobs)
