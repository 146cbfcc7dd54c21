"""Configurations of live links and the rate/interference functionals.

A configuration is a marked point set on the torus: receiver positions with
their transmitter marks at wraparound distance T, plus residual file
workloads.  Every link decodes against thermal noise plus the summed
attenuated power of all other transmitters:

    R = C log2(1 + l(T) / (N0 + I)),     I = sum_{other links} l(dist(rx, tx)).

Exclusion of the own transmitter from I is by link identity, not geometry,
so coincident transmitters are handled correctly.  Optional fast fading
multiplies every term by an independent unit-mean draw; the multi-antenna
variant (equal power split, no transmitter channel knowledge, independent
unit-variance complex-normal entries) sums the per-eigenmode rates of H H+.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from ._kernels import get_kernels
from .errors import ConfigError
from .rng import substream
from .torus import PathLossModel, TorusDomain, torus_distance

SNAPSHOT_HEADER = "link_id,rx_x,rx_y,tx_x,tx_y,residual_bits,birth_time"


@dataclass(frozen=True)
class ChannelParams:
    """Constants of the rate formula plus the attenuation model."""

    C: float
    N0: float
    L: float
    pathloss: PathLossModel

    def __post_init__(self):
        if not self.C > 0:
            raise ConfigError("C must be > 0")
        if not self.N0 > 0:
            raise ConfigError("thermal noise N0 must be > 0")
        if not self.L > 0:
            raise ConfigError("mean file size L must be > 0")


@dataclass(frozen=True)
class Link:
    """One live transmitter-receiver pair."""

    id: int
    rx: tuple[float, float]
    tx: tuple[float, float]
    residual_bits: float
    birth_time: float


class LinkConfiguration:
    """Marked point set of live links, stored as flat arrays."""

    def __init__(self, domain: TorusDomain, T: float, ids, rx, tx, residual=None, birth=None):
        self.domain = domain
        self.T = float(T)
        self.ids = np.asarray(ids, dtype=np.int64).copy()
        self.rx = np.asarray(rx, dtype=np.float64).reshape(-1, 2).copy()
        self.tx = np.asarray(tx, dtype=np.float64).reshape(-1, 2).copy()
        n = self.ids.size
        self.residual = (np.full(n, np.nan) if residual is None
                         else np.asarray(residual, dtype=np.float64).copy())
        self.birth = (np.zeros(n) if birth is None
                      else np.asarray(birth, dtype=np.float64).copy())
        if not (self.rx.shape[0] == self.tx.shape[0] == n
                == self.residual.size == self.birth.size):
            raise ConfigError("inconsistent array lengths in link configuration")

    @classmethod
    def empty(cls, domain: TorusDomain, T: float) -> "LinkConfiguration":
        return cls(domain, T, np.empty(0, np.int64), np.empty((0, 2)), np.empty((0, 2)))

    def __len__(self) -> int:
        return int(self.ids.size)

    @property
    def n(self) -> int:
        return int(self.ids.size)

    def link(self, i: int) -> Link:
        return Link(int(self.ids[i]), tuple(self.rx[i]), tuple(self.tx[i]),
                    float(self.residual[i]), float(self.birth[i]))

    def index_of(self, link_id: int) -> int:
        hits = np.nonzero(self.ids == link_id)[0]
        if hits.size != 1:
            raise ConfigError(f"link id {link_id} not present exactly once")
        return int(hits[0])

    def validate(self, tol: float = 1e-9) -> None:
        if np.unique(self.ids).size != self.ids.size:
            raise ConfigError("link ids must be unique")
        scale = tol * max(self.T, 1.0)
        for i in range(self.n):
            d = torus_distance(self.rx[i], self.tx[i], self.domain)
            if abs(d - self.T) > scale:
                raise ConfigError(f"link {self.ids[i]}: rx-tx distance {d} != T={self.T}")
        live = self.residual[np.isfinite(self.residual)]
        if np.any(live < 0):
            raise ConfigError("residual workloads must be >= 0")

    def translated(self, shift) -> "LinkConfiguration":
        """Torus-translate every point by the given vector."""
        s = np.asarray(shift, dtype=np.float64)
        return LinkConfiguration(self.domain, self.T, self.ids,
                                 self.domain.wrap(self.rx + s),
                                 self.domain.wrap(self.tx + s),
                                 self.residual, self.birth)

    # ---- snapshot wire format -------------------------------------------

    def to_csv(self, path_or_buf) -> None:
        buf = path_or_buf if hasattr(path_or_buf, "write") else io.StringIO()
        buf.write(SNAPSHOT_HEADER + "\n")
        for i in range(self.n):
            buf.write("%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n" % (
                self.ids[i], self.rx[i, 0], self.rx[i, 1], self.tx[i, 0], self.tx[i, 1],
                self.residual[i], self.birth[i]))
        if not hasattr(path_or_buf, "write"):
            with open(path_or_buf, "w") as fh:
                fh.write(buf.getvalue())

    @classmethod
    def from_csv(cls, path, domain: TorusDomain, T: float) -> "LinkConfiguration":
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
        if not lines or lines[0] != SNAPSHOT_HEADER:
            raise ConfigError(f"{path}: not a link-snapshot CSV")
        rows = [ln.split(",") for ln in lines[1:]]
        ids = np.array([int(r[0]) for r in rows], dtype=np.int64)
        vals = np.array([[float(v) for v in r[1:]] for r in rows], dtype=np.float64)
        vals = vals.reshape(-1, 6)
        return cls(domain, T, ids, vals[:, 0:2], vals[:, 2:4], vals[:, 4], vals[:, 5])


def _kernel_interference(cfg: LinkConfiguration, p: ChannelParams, exclude: int | None):
    k = get_kernels()
    out = np.empty(cfg.n)
    k.interference_all(cfg.rx[:, 0], cfg.rx[:, 1], cfg.tx[:, 0], cfg.tx[:, 1],
                       cfg.n, cfg.domain.period, *p.pathloss.kernel_params(), out)
    return out


def interference(cfg: LinkConfiguration, p: ChannelParams, link_id: int | None = None,
                 at=None) -> float:
    """Summed attenuated power at a receiver.

    Either ``link_id`` names the tagged link (its own transmitter is
    excluded, by identity) or ``at`` gives a probe location with no
    exclusion.
    """
    if (link_id is None) == (at is None):
        raise ConfigError("pass exactly one of link_id / at")
    kern = get_kernels()
    pl = p.pathloss.kernel_params()
    per = cfg.domain.period
    if at is not None:
        x, y = float(at[0]), float(at[1])
        return kern.sum_gains_at_point(x, y, cfg.tx[:, 0], cfg.tx[:, 1], cfg.n, per, *pl)
    i = cfg.index_of(link_id)
    total = kern.sum_gains_at_point(cfg.rx[i, 0], cfg.rx[i, 1],
                                    cfg.tx[:, 0], cfg.tx[:, 1], cfg.n, per, *pl)
    own = float(p.pathloss.evaluate(torus_distance(cfg.rx[i], cfg.tx[i], cfg.domain)))
    return max(total - own, 0.0)


def interference_per_link(cfg: LinkConfiguration, p: ChannelParams) -> np.ndarray:
    """Interference at every receiver, own transmitter excluded."""
    return _kernel_interference(cfg, p, None)


def shannon_rate(cfg: LinkConfiguration, p: ChannelParams, link_id: int) -> float:
    """Instantaneous rate of the tagged link, strictly decreasing in I."""
    i = cfg.index_of(link_id)
    sig = float(p.pathloss.evaluate(torus_distance(cfg.rx[i], cfg.tx[i], cfg.domain)))
    inter = interference(cfg, p, link_id=link_id)
    return p.C * np.log2(1.0 + sig / (p.N0 + inter))


def rates_per_link(cfg: LinkConfiguration, p: ChannelParams) -> np.ndarray:
    sig = float(p.pathloss.evaluate(cfg.T))
    return p.C * np.log2(1.0 + sig / (p.N0 + interference_per_link(cfg, p)))


def workload_derivative(cfg: LinkConfiguration, p: ChannelParams) -> float:
    """Total service rate (bits/time) of the configuration; divide by L for
    the death intensity."""
    if cfg.n == 0:
        return 0.0
    return float(np.sum(rates_per_link(cfg, p)))


def unit_exponential(rng: np.random.Generator, size) -> np.ndarray:
    """Rayleigh power fading: unit-mean exponential draws."""
    return rng.exponential(1.0, size)


def degenerate_unit(rng: np.random.Generator, size) -> np.ndarray:
    return np.ones(size)


def faded_rate(cfg: LinkConfiguration, p: ChannelParams, link_id: int,
               fade_sampler=unit_exponential, mc_samples: int = 1000,
               seed: int = 0) -> tuple[float, float]:
    """Monte Carlo fast-fading rate with i.i.d. unit-mean fades on every
    term of every sample.  Returns (estimate, standard error)."""
    if mc_samples < 1:
        raise ConfigError("mc_samples must be >= 1")
    i = cfg.index_of(link_id)
    kern = get_kernels()
    pl = p.pathloss.kernel_params()
    per = cfg.domain.period
    gains = np.empty(cfg.n)
    kern.gains_to_point(cfg.rx[i, 0], cfg.rx[i, 1], cfg.tx[:, 0], cfg.tx[:, 1],
                        cfg.n, per, *pl, gains)
    sig = float(p.pathloss.evaluate(torus_distance(cfg.rx[i], cfg.tx[i], cfg.domain)))
    others = np.delete(gains, i)
    rng = substream(seed, 3, link_id)
    h_sig = fade_sampler(rng, mc_samples)
    if others.size:
        h_int = fade_sampler(rng, (mc_samples, others.size))
        inter = h_int @ others
    else:
        inter = np.zeros(mc_samples)
    vals = p.C * np.log2(1.0 + h_sig * sig / (p.N0 + inter))
    se = float(vals.std(ddof=1) / np.sqrt(mc_samples)) if mc_samples > 1 else 0.0
    return float(vals.mean()), se


@dataclass(frozen=True)
class MimoConfig:
    """Antenna counts and Monte Carlo depth for the multi-antenna rate."""

    Xt: int
    Xr: int
    mc_samples: int = 2000

    def __post_init__(self):
        if self.Xt < 1 or self.Xr < 1:
            raise ConfigError("antenna counts must be >= 1")
        if self.mc_samples < 1:
            raise ConfigError("mc_samples must be >= 1")


def mimo_channel_draws(m: MimoConfig, seed: int = 0) -> np.ndarray:
    """(mc, Xr, Xt) i.i.d. unit-variance complex-normal channel matrices.

    Cached in the sense that the same seed always reproduces the same draws.
    """
    rng = substream(seed, 4)
    shape = (m.mc_samples, m.Xr, m.Xt)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def mimo_indep_rate(cfg: LinkConfiguration, p: ChannelParams, link_id: int,
                    m: MimoConfig, seed: int = 0,
                    interference_power: float | None = None) -> tuple[float, float]:
    """Equal-power-split multi-antenna rate against scalar interference.

    Per draw: C * sum_i log2(1 + sigma_i(H H+) / (Xt (N0 + I))).  Returns
    (estimate, standard error).  ``interference_power`` overrides the
    configuration-derived I, e.g. for limit studies.
    """
    if interference_power is None:
        inter = interference(cfg, p, link_id=link_id)
    else:
        inter = float(interference_power)
    h = mimo_channel_draws(m, seed)
    gram = h @ np.conj(np.swapaxes(h, 1, 2))
    sigma = np.linalg.eigvalsh(gram)
    vals = p.C * np.sum(np.log2(1.0 + sigma / (m.Xt * (p.N0 + inter))), axis=1)
    se = float(vals.std(ddof=1) / np.sqrt(m.mc_samples)) if m.mc_samples > 1 else 0.0
    return float(vals.mean()), se
