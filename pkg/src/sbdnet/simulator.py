"""Exact event-driven simulation of the spatial link birth-death dynamics.

Links arrive as a space-time Poisson process (receiver uniform on the torus,
transmitter at uniform angle on the radius-T circle, file size from the
configured distribution) and depart when the time-integral of their rate
reaches their file size.

Event-loop invariant: between events every link's rate is constant, so the
death candidate of link i sits at now + residual_i / R_i while the next
birth is read off a pre-drawn Poisson arrival stream.  The earliest
candidate fires; all residual workloads are decremented by elapsed * R_i
before the event is applied.  This residual-workload scheme is exact for
both exponential and Pareto files, and makes each trajectory a
deterministic function of the arrival stream: identical seeds give
bit-identical runs, and runs sharing a seed are coupled through common
arrivals and file sizes (the basis of the attenuation-monotonicity test).

Interference is maintained incrementally: a birth adds its transmitter's
gain at every live receiver (O(N)), a death subtracts it.  Rates change
globally at every event because the attenuation has full support, so the
death candidate scan is O(N) per event; there is no spatial index (desk
scale keeps N in the low thousands).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from ._kernels import KernelSet, get_kernels
from .errors import ConfigError, NumericsError, PreconditionError
from .network import ChannelParams, LinkConfiguration
from .rng import substream
from .torus import TorusDomain

EV_BIRTH = 0
EV_DEATH = 1


@dataclass(frozen=True)
class FileSizeDist:
    """File-size law: exponential, or Pareto with finite mean (shape > 1,
    scale chosen so the mean equals ``mean``)."""

    kind: str
    mean: float
    shape: float | None = None

    def __post_init__(self):
        if self.kind not in ("exponential", "pareto"):
            raise ConfigError(f"unknown file-size distribution {self.kind!r}")
        if not self.mean > 0:
            raise ConfigError("file-size mean must be > 0")
        if self.kind == "pareto":
            if self.shape is None or not self.shape > 1.0:
                raise ConfigError("Pareto shape must be > 1 for a finite mean")

    def sampler(self) -> Callable[[np.random.Generator, int], np.ndarray]:
        if self.kind == "exponential":
            mean = self.mean
            return lambda rng, size: rng.exponential(mean, size)
        a = float(self.shape)
        scale = self.mean * (a - 1.0) / a
        return lambda rng, size: scale * (1.0 + rng.pareto(a, size))


@dataclass(frozen=True)
class SimulationConfig:
    lam: float
    channel: ChannelParams
    domain: TorusDomain
    T: float
    file_dist: FileSizeDist
    horizon: float
    warmup: float
    seed: int
    snapshot_times: tuple[float, ...] = ()
    max_links: int = 100_000
    record_events: bool = False
    traj_samples: int = 2048
    beta_batches: int = 20

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError("arrival intensity must be >= 0")
        if not self.horizon > 0:
            raise ConfigError("horizon must be > 0")
        if not 0 <= self.warmup < self.horizon:
            raise ConfigError("need 0 <= warmup < horizon")
        if self.channel.pathloss.unbounded_at_origin:
            raise ConfigError(
                "attenuation is unbounded at the origin, so its spatial integral "
                "diverges and no arrival rate admits a stationary regime; the "
                "simulator only accepts bounded models")
        if abs(self.file_dist.mean - self.channel.L) > 1e-9 * self.channel.L:
            raise ConfigError("file-size mean must equal channel.L")
        if not 0 <= self.T <= self.domain.half_side:
            raise ConfigError("link length must satisfy 0 <= T <= Q")
        for t in self.snapshot_times:
            if not 0 <= t <= self.horizon:
                raise ConfigError("snapshot times must lie in [0, horizon]")

    def replace(self, **kw) -> "SimulationConfig":
        return replace(self, **kw)


@dataclass
class RunMetrics:
    beta_hat: float
    beta_se: float
    w_hat: float
    delay_samples: np.ndarray
    traj_t: np.ndarray
    traj_n: np.ndarray
    births: int
    deaths: int
    snapshots: list[LinkConfiguration]
    death_records: dict[str, np.ndarray]
    event_log: dict[str, np.ndarray] | None
    capped: bool
    end_time: float
    n_final: int
    lam: float
    horizon: float
    warmup: float
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "beta_hat": self.beta_hat,
            "w_hat": self.w_hat,
            "births": self.births,
            "deaths": self.deaths,
            "lambda": self.lam,
            "horizon": self.horizon,
            "warmup": self.warmup,
            "seed": self.seed,
            "beta_se": self.beta_se,
            "capped": self.capped,
            "delay_samples": [float(v) for v in self.delay_samples],
            "n_trajectory": [[float(t), int(n)] for t, n in zip(self.traj_t, self.traj_n)],
        }


class _Grow:
    """Append-only float/int buffer with doubling growth."""

    def __init__(self, dtype, cap=1024):
        self.a = np.empty(cap, dtype=dtype)
        self.n = 0

    def push(self, v):
        if self.n == self.a.size:
            self.a = np.concatenate([self.a, np.empty(self.a.size, self.a.dtype)])
        self.a[self.n] = v
        self.n += 1

    def view(self):
        return self.a[:self.n].copy()


class _ArrivalStream:
    """Pre-drawn marked Poisson arrivals, refilled in fixed-size blocks so
    the i-th arrival is a function of (seed, i) alone."""

    BLOCK = 4096

    def __init__(self, rng, rate, domain: TorusDomain, T, file_sampler, start_time):
        self.rng = rng
        self.rate = rate
        self.domain = domain
        self.T = T
        self.sampler = file_sampler
        self.last_t = start_time
        self.i = 0
        self.m = 0
        self.t = self.x = self.y = self.ang = self.file = None

    def _refill(self):
        k = self.BLOCK
        q = self.domain.half_side
        dts = self.rng.exponential(1.0 / self.rate, k)
        self.t = self.last_t + np.cumsum(dts)
        self.x = self.rng.uniform(-q, q, k)
        self.y = self.rng.uniform(-q, q, k)
        self.ang = self.rng.uniform(0.0, 2.0 * math.pi, k)
        self.file = self.sampler(self.rng, k)
        self.last_t = self.t[-1]
        self.i = 0
        self.m = k

    def peek(self) -> float:
        if self.rate <= 0:
            return math.inf
        if self.i >= self.m:
            self._refill()
        return float(self.t[self.i])

    def pop(self):
        t = self.peek()
        i = self.i
        self.i += 1
        return t, float(self.x[i]), float(self.y[i]), float(self.ang[i]), float(self.file[i])


class _Accum:
    """Post-warmup time averages of the link count, with batch means."""

    def __init__(self, warmup, horizon, batches, traj_grid):
        self.w = warmup
        self.h = horizon
        self.batch = np.zeros(batches)
        self.bw = (horizon - warmup) / batches
        self.grid = traj_grid
        self.gi = 0
        self.traj_n = np.zeros(traj_grid.size, dtype=np.int64)

    def interval(self, t0, t1, n):
        while self.gi < self.grid.size and self.grid[self.gi] <= t1:
            self.traj_n[self.gi] = n
            self.gi += 1
        a = max(t0, self.w)
        b = min(t1, self.h)
        if b <= a:
            return
        b0 = min(int((a - self.w) / self.bw), self.batch.size - 1)
        b1 = min(int((b - self.w) / self.bw), self.batch.size - 1)
        for k in range(b0, b1 + 1):
            lo = max(a, self.w + k * self.bw)
            hi = min(b, self.w + (k + 1) * self.bw)
            if hi > lo:
                self.batch[k] += n * (hi - lo)

    def beta(self, area):
        means = self.batch / (self.bw * area)
        m = means.mean()
        se = means.std(ddof=1) / math.sqrt(means.size) if means.size > 1 else 0.0
        return float(m), float(se)


class Engine:
    """Mutable simulation state driven one event at a time."""

    def __init__(self, domain: TorusDomain, channel: ChannelParams, T: float,
                 lam: float, file_sampler, arrival_rng, kernels: KernelSet | None = None,
                 start_time: float = 0.0, init: LinkConfiguration | None = None,
                 max_links: int = 100_000, record_events: bool = False):
        self.dom = domain
        self.ch = channel
        self.T = float(T)
        self.kern = kernels or get_kernels()
        self.pl = channel.pathloss.kernel_params()
        self.sig = float(channel.pathloss.evaluate(T))
        self.per = domain.period
        self.max_links = max_links
        self.now = float(start_time)
        self.capped = False
        self.births = 0
        self.deaths = 0
        self.stats: _Accum | None = None

        cap = 1024
        n0 = init.n if init is not None else 0
        while cap < n0 + 64:
            cap *= 2
        self.cap = cap
        self.n = 0
        self.rx_x = np.zeros(cap)
        self.rx_y = np.zeros(cap)
        self.tx_x = np.zeros(cap)
        self.tx_y = np.zeros(cap)
        self.residual = np.zeros(cap)
        self.birth_t = np.zeros(cap)
        self.file0 = np.zeros(cap)
        self.intf = np.zeros(cap)
        self.ids = np.zeros(cap, dtype=np.int64)
        self.next_id = 0

        self.death_id = _Grow(np.int64)
        self.death_birth = _Grow(np.float64)
        self.death_time = _Grow(np.float64)
        self.death_file = _Grow(np.float64)

        self.log = None
        if record_events:
            self.log = {k: _Grow(d) for k, d in (
                ("kind", np.int8), ("time", np.float64), ("link_id", np.int64),
                ("rx_x", np.float64), ("rx_y", np.float64),
                ("tx_x", np.float64), ("tx_y", np.float64))}

        if init is not None:
            # seeded links keep their original birth times but log a
            # synthetic birth at the start so the event log stays ordered
            for i in range(init.n):
                self._append_link(init.rx[i, 0], init.rx[i, 1], init.tx[i, 0], init.tx[i, 1],
                                  float(init.residual[i]), float(init.birth[i]),
                                  int(init.ids[i]), log_birth=record_events,
                                  log_time=self.now)
            self.next_id = int(init.ids.max()) + 1 if init.n else 0

        self.arrivals = _ArrivalStream(arrival_rng, lam * domain.area(), domain, T,
                                       file_sampler, self.now)

    # ---- state editing ---------------------------------------------------

    def _grow(self):
        new = self.cap * 2
        for name in ("rx_x", "rx_y", "tx_x", "tx_y", "residual", "birth_t",
                     "file0", "intf", "ids"):
            old = getattr(self, name)
            arr = np.zeros(new, dtype=old.dtype)
            arr[:self.cap] = old
            setattr(self, name, arr)
        self.cap = new

    def _log_event(self, kind, t, lid, rx, ry, tx, ty):
        if self.log is None:
            return
        for key, v in (("kind", kind), ("time", t), ("link_id", lid),
                       ("rx_x", rx), ("rx_y", ry), ("tx_x", tx), ("tx_y", ty)):
            self.log[key].push(v)

    def _append_link(self, rx, ry, tx, ty, file_bits, birth_time, link_id,
                     log_birth=True, log_time=None):
        if self.n + 1 > self.cap:
            self._grow()
        n = self.n
        inew = self.kern.sum_gains_at_point(rx, ry, self.tx_x, self.tx_y, n,
                                            self.per, *self.pl)
        self.kern.add_point_gains(tx, ty, self.rx_x, self.rx_y, n, self.per,
                                  *self.pl, self.intf, 1.0)
        self.rx_x[n] = rx
        self.rx_y[n] = ry
        self.tx_x[n] = tx
        self.tx_y[n] = ty
        self.residual[n] = file_bits
        self.birth_t[n] = birth_time
        self.file0[n] = file_bits
        self.intf[n] = inew
        self.ids[n] = link_id
        self.n = n + 1
        if log_birth:
            self._log_event(EV_BIRTH, birth_time if log_time is None else log_time,
                            link_id, rx, ry, tx, ty)
        return link_id

    def add_link(self, rx, tx, file_bits, birth_time=None, link_id=None):
        """Inject a link by hand (used by steady-state continuation runs)."""
        bt = self.now if birth_time is None else birth_time
        lid = self.next_id if link_id is None else link_id
        self.next_id = max(self.next_id, lid + 1)
        rxw = self.dom.wrap(rx)
        txw = self.dom.wrap(tx)
        return self._append_link(rxw[0], rxw[1], txw[0], txw[1], file_bits, bt, lid)

    def _remove_link(self, i):
        self.kern.add_point_gains(self.tx_x[i], self.tx_y[i], self.rx_x, self.rx_y,
                                  self.n, self.per, *self.pl, self.intf, -1.0)
        last = self.n - 1
        if i != last:
            for name in ("rx_x", "rx_y", "tx_x", "tx_y", "residual", "birth_t",
                         "file0", "intf", "ids"):
                getattr(self, name)[i] = getattr(self, name)[last]
        self.n = last

    def _drain_to(self, t):
        dt = t - self.now
        if self.stats is not None:
            self.stats.interval(self.now, t, self.n)
        if dt > 0 and self.n > 0:
            self.kern.drain_residuals(self.residual, self.intf, self.n,
                                      self.ch.C, self.ch.N0, self.sig, dt)
        self.now = t

    # ---- event loop --------------------------------------------------------

    def step(self, t_limit=math.inf):
        """Fire the next event if it happens by t_limit, else drain to
        t_limit and return None.  Returns ("B"|"D", time, link_id)."""
        tb = self.arrivals.peek()
        idx, dtd = self.kern.death_candidate(self.residual, self.intf, self.n,
                                             self.ch.C, self.ch.N0, self.sig)
        td = self.now + max(dtd, 0.0) if idx >= 0 else math.inf
        te = min(tb, td)
        if te > t_limit:
            self._drain_to(t_limit)
            return None
        if tb <= td:
            if self.n >= self.max_links:
                self._drain_to(te)
                self.capped = True
                return ("cap", te, -1)
            self._drain_to(te)
            t, x, y, ang, fb = self.arrivals.pop()
            rx = np.array([x, y])
            tx = self.dom.wrap(rx + self.T * np.array([math.cos(ang), math.sin(ang)]))
            lid = self.next_id
            self.next_id += 1
            self._append_link(x, y, tx[0], tx[1], fb, te, lid)
            self.births += 1
            return ("B", te, lid)
        self._drain_to(te)
        lid = int(self.ids[idx])
        self.residual[idx] = 0.0
        self.death_id.push(lid)
        self.death_birth.push(self.birth_t[idx])
        self.death_time.push(te)
        self.death_file.push(self.file0[idx])
        self._log_event(EV_DEATH, te, lid, self.rx_x[idx], self.rx_y[idx],
                        self.tx_x[idx], self.tx_y[idx])
        self._remove_link(idx)
        self.deaths += 1
        return ("D", te, lid)

    def advance_to(self, t):
        while not self.capped:
            if self.step(t) is None:
                return

    def snapshot(self) -> LinkConfiguration:
        n = self.n
        rx = np.column_stack([self.rx_x[:n], self.rx_y[:n]])
        tx = np.column_stack([self.tx_x[:n], self.tx_y[:n]])
        return LinkConfiguration(self.dom, self.T, self.ids[:n], rx, tx,
                                 self.residual[:n], self.birth_t[:n])


def _build_engine(cfg: SimulationConfig, kernels=None,
                  init: LinkConfiguration | None = None) -> Engine:
    rng = substream(cfg.seed, 0)
    return Engine(cfg.domain, cfg.channel, cfg.T, cfg.lam, cfg.file_dist.sampler(),
                  rng, kernels=kernels, init=init, max_links=cfg.max_links,
                  record_events=cfg.record_events)


def run(cfg: SimulationConfig, init: LinkConfiguration | None = None,
        _kernels=None) -> RunMetrics:
    """Simulate the dynamics over [0, horizon].  Deterministic given seed."""
    eng = _build_engine(cfg, kernels=_kernels, init=init)
    grid = np.linspace(0.0, cfg.horizon, cfg.traj_samples)
    eng.stats = _Accum(cfg.warmup, cfg.horizon, cfg.beta_batches, grid)

    snaps: list[LinkConfiguration] = []
    for ts in sorted(cfg.snapshot_times):
        eng.advance_to(ts)
        if eng.capped:
            break
        snaps.append(eng.snapshot())
    eng.advance_to(cfg.horizon)

    st = eng.stats
    st.traj_n[st.gi:] = eng.n
    beta_hat, beta_se = st.beta(cfg.domain.area())
    births_t = eng.death_birth.view()
    d_times = eng.death_time.view()
    sel = births_t > cfg.warmup
    delays = (d_times - births_t)[sel]
    w_hat = float(delays.mean()) if delays.size else math.nan

    log = None
    if eng.log is not None:
        log = {k: g.view() for k, g in eng.log.items()}
    death_records = {
        "link_id": eng.death_id.view(),
        "birth_time": births_t,
        "death_time": d_times,
        "file_bits": eng.death_file.view(),
    }
    return RunMetrics(
        beta_hat=beta_hat, beta_se=beta_se, w_hat=w_hat, delay_samples=delays,
        traj_t=grid, traj_n=st.traj_n.copy(), births=eng.births, deaths=eng.deaths,
        snapshots=snaps, death_records=death_records, event_log=log,
        capped=eng.capped, end_time=eng.now, n_final=eng.n,
        lam=cfg.lam, horizon=cfg.horizon, warmup=cfg.warmup, seed=cfg.seed)


# ---------------------------------------------------------------------------
# experiment procedures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeResult:
    lam: float
    verdict: str  # "stable-looking" | "growing"
    slope: float
    slope_se: float
    endpoint: float
    capped: bool


def _window_fit(metrics: RunMetrics, window: float):
    t, n = metrics.traj_t, metrics.traj_n.astype(np.float64)
    sel = t >= metrics.end_time - window
    t, n = t[sel], n[sel]
    if t.size < 3:
        raise ConfigError("growth window holds too few trajectory samples")
    tc = t - t.mean()
    sxx = float(np.sum(tc * tc))
    slope = float(np.sum(tc * n) / sxx)
    resid = n - n.mean() - slope * tc
    dof = max(t.size - 2, 1)
    se = math.sqrt(max(float(np.sum(resid**2)) / dof, 0.0) / sxx)
    return slope, se, float(n[-1]), float(n.mean())


def phase_transition_probe(cfg: SimulationConfig, lambdas: Sequence[float],
                           growth_window: float) -> list[ProbeResult]:
    """Classify each arrival rate as stable-looking or growing from the tail
    of its link-count trajectory, against the run at the smallest rate as
    the matched sub-critical baseline."""
    if growth_window > cfg.horizon:
        raise ConfigError("growth window longer than horizon")
    if not lambdas:
        raise ConfigError("need at least one arrival rate")
    runs = {lam: run(cfg.replace(lam=lam, snapshot_times=(), record_events=False))
            for lam in lambdas}
    base = runs[min(lambdas)]
    _, _, _, base_mean = _window_fit(base, growth_window)
    out = []
    for lam in lambdas:
        m = runs[lam]
        slope, se, endpoint, _ = _window_fit(m, growth_window)
        growing = m.capped or (slope > 3.0 * se and endpoint > 2.0 * base_mean)
        out.append(ProbeResult(lam, "growing" if growing else "stable-looking",
                               slope, se, endpoint, m.capped))
    return out


def empirical_ccdf(samples, grid) -> list[tuple[float, float]]:
    s = np.sort(np.asarray(samples, dtype=np.float64))
    if s.size == 0:
        raise PreconditionError("no delay samples")
    out = []
    for t in grid:
        out.append((float(t), float(1.0 - np.searchsorted(s, t, side="right") / s.size)))
    return out


def delay_ccdf(metrics, grid) -> list[tuple[float, float]]:
    """Empirical P(delay > t) on the grid; needs >= 1000 samples for the
    tail to mean much."""
    samples = metrics.delay_samples if isinstance(metrics, RunMetrics) else metrics
    return empirical_ccdf(samples, grid)


def _pearson_ci(x, y):
    x = np.asarray(x)
    y = np.asarray(y)
    n = x.size
    r = float(np.corrcoef(x, y)[0, 1])
    z = math.atanh(max(min(r, 1 - 1e-12), -1 + 1e-12))
    h = 1.959963984540054 / math.sqrt(n - 3)
    return r, math.tanh(z - h), math.tanh(z + h)


def delay_correlation(cfg: SimulationConfig, distances: Sequence[float],
                      replications: int, burn_pool: int = 10,
                      pair_file_seeds: tuple[int, int] | None = None,
                      t_max_factor: float = 500.0):
    """Correlation of the delays of two links injected simultaneously at a
    given separation into a steady-state sample, versus that separation.

    For each replication: take a burned-in configuration, inject two extra
    links at wraparound distance d with independent file sizes, continue the
    dynamics until both die, record the delay pair.  Pearson rho with a
    Fisher-transform normal CI across replications.
    """
    if cfg.T != 0:
        raise ConfigError("delay-correlation procedure is defined for T = 0")
    if replications < 100:
        raise PreconditionError("need >= 100 replications per distance")
    if pair_file_seeds is not None and pair_file_seeds[0] == pair_file_seeds[1]:
        raise ConfigError("the pair's file sizes must be drawn independently")
    from .heuristics import critical_lambda  # local import avoids a cycle
    from .torus import pathloss_integral_a
    a = pathloss_integral_a(cfg.channel.pathloss, cfg.domain)
    lam_c = critical_lambda(cfg.channel, cfg.T, a)
    if cfg.lam >= lam_c:
        raise ConfigError(f"supercritical arrival rate {cfg.lam} >= {lam_c}")

    snap_times = tuple(cfg.warmup + (i + 1) * (cfg.horizon - cfg.warmup) / burn_pool
                       for i in range(burn_pool))
    burned = run(cfg.replace(snapshot_times=snap_times, record_events=False,
                             seed=cfg.seed)).snapshots
    sampler = cfg.file_dist.sampler()
    solo = cfg.channel.C * math.log2(1.0 + cfg.channel.pathloss.evaluate(cfg.T)
                                     / cfg.channel.N0)
    t_max = t_max_factor * cfg.channel.L / solo
    q = cfg.domain.half_side

    results = []
    for di, d in enumerate(distances):
        pairs = np.empty((replications, 2))
        for r in range(replications):
            state = burned[r % len(burned)]
            place = substream(cfg.seed, 11, di, r)
            cx, cy = place.uniform(-q, q, 2)
            ang = place.uniform(0.0, 2.0 * math.pi)
            p1 = cfg.domain.wrap(np.array([cx, cy]))
            p2 = cfg.domain.wrap(np.array([cx + d * math.cos(ang),
                                           cy + d * math.sin(ang)]))
            if pair_file_seeds is None:
                fa = float(sampler(substream(cfg.seed, 12, di, r, 0), 1)[0])
                fb = float(sampler(substream(cfg.seed, 12, di, r, 1), 1)[0])
            else:
                fa = float(sampler(substream(pair_file_seeds[0], 12, di, r), 1)[0])
                fb = float(sampler(substream(pair_file_seeds[1], 12, di, r), 1)[0])
            eng = Engine(cfg.domain, cfg.channel, cfg.T, cfg.lam, sampler,
                         substream(cfg.seed, 13, di, r), init=state,
                         max_links=cfg.max_links)
            ida = eng.add_link(p1, p1, fa)
            idb = eng.add_link(p2, p2, fb)
            t0 = eng.now
            waiting = {ida, idb}
            deaths = {}
            while waiting and eng.now < t0 + t_max:
                ev = eng.step(t0 + t_max)
                if ev is None:
                    break
                kind, te, lid = ev
                if kind == "D" and lid in waiting:
                    deaths[lid] = te - t0
                    waiting.discard(lid)
            if waiting:
                raise NumericsError("injected links failed to die within the time cap")
            pairs[r] = (deaths[ida], deaths[idb])
        rho, lo, hi = _pearson_ci(pairs[:, 0], pairs[:, 1])
        results.append((float(d), rho, lo, hi))
    return results
