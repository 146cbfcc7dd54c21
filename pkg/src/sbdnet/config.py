"""Plain-text experiment configuration.

Format: one ``key = value`` per line, ``#`` comments, ``[section]`` headers.
Unknown sections or keys are rejected so a typo cannot silently fall back to
a default.  Every run is reproducible from the file plus the master seed.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .network import ChannelParams
from .simulator import FileSizeDist, SimulationConfig
from .torus import Bounded, PathLossModel, PowerLaw, Tabulated, TorusDomain


def _parse_bool(s: str) -> bool:
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def _parse_floats(s: str) -> tuple[float, ...]:
    if not s.strip():
        return ()
    return tuple(float(v) for v in s.split(","))


_SCHEMA = {
    "domain": {"q": float},
    "channel": {
        "c": float, "n0": float, "l": float,
        "pathloss": str, "k": float, "alpha": float,
        "table_r": _parse_floats, "table_v": _parse_floats,
    },
    "simulation": {
        "lambda": float, "lambda_frac": float, "t": float,
        "horizon": float, "warmup": float, "seed": int,
        "snapshot_times": _parse_floats, "snapshot_count": int,
        "file_dist": str, "pareto_shape": float,
        "max_links": int, "record_events": _parse_bool,
    },
    "heuristics": {
        "lambdas": _parse_floats, "lambda_fracs": _parse_floats, "tol": float,
    },
    "stats": {
        "radii": _parse_floats, "s_grid": _parse_floats, "probes": int,
    },
    "chain": {
        "epsilon": float, "lambda": float, "lambda_frac": float,
        "horizon": float, "seed": int, "t_end": float, "samples": int,
    },
    "figures": {"scale": float, "jobs": int},
}

_DEFAULTS = {
    "domain": {"q": 5.0},
    "channel": {"c": 1.0, "n0": 1.0, "l": 1.0, "pathloss": "bounded",
                "k": 1.0, "alpha": 4.0, "table_r": (), "table_v": ()},
    "simulation": {"lambda": None, "lambda_frac": None, "t": 0.0,
                   "horizon": 200.0, "warmup": 50.0, "seed": 1,
                   "snapshot_times": (), "snapshot_count": 0,
                   "file_dist": "exponential", "pareto_shape": 2.5,
                   "max_links": 100_000, "record_events": False},
    "heuristics": {"lambdas": (), "lambda_fracs": (), "tol": 1e-8},
    "stats": {"radii": (0.25, 0.5, 0.75, 1.0, 1.5, 2.0), "s_grid": (0.5, 1.0, 2.0, 4.0),
              "probes": 256},
    "chain": {"epsilon": 1.0, "lambda": None, "lambda_frac": 0.5,
              "horizon": 50.0, "seed": 1, "t_end": 10.0, "samples": 512},
    "figures": {"scale": 1.0, "jobs": 1},
}


@dataclass
class ExperimentConfig:
    values: dict
    text: str = ""
    explicit: set = field(default_factory=set)

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    def get(self, section: str, key: str):
        return self.values[section][key]

    def was_set(self, section: str, key: str) -> bool:
        return (section, key) in self.explicit

    # ---- model assembly ----------------------------------------------------

    def domain(self) -> TorusDomain:
        return TorusDomain(self.get("domain", "q"))

    def pathloss(self) -> PathLossModel:
        kind = self.get("channel", "pathloss").lower()
        if kind == "bounded":
            return Bounded(self.get("channel", "k"), self.get("channel", "alpha"))
        if kind == "powerlaw":
            return PowerLaw(self.get("channel", "alpha"))
        if kind == "tabulated":
            r = np.array(self.get("channel", "table_r"))
            v = np.array(self.get("channel", "table_v"))
            return Tabulated(r, v)
        raise ConfigError(f"unknown pathloss variant {kind!r}")

    def channel(self) -> ChannelParams:
        return ChannelParams(self.get("channel", "c"), self.get("channel", "n0"),
                             self.get("channel", "l"), self.pathloss())

    def resolve_lambda(self, section: str = "simulation") -> float:
        lam = self.values[section].get("lambda")
        frac = self.values[section].get("lambda_frac")
        if self.was_set(section, "lambda") and self.was_set(section, "lambda_frac"):
            raise ConfigError(f"[{section}] must set only one of lambda / lambda_frac")
        if self.was_set(section, "lambda") or frac is None:
            if lam is None:
                raise ConfigError(f"[{section}] needs lambda or lambda_frac")
            return float(lam)
        from .heuristics import critical_lambda
        from .torus import pathloss_integral_a
        a = pathloss_integral_a(self.pathloss(), self.domain())
        lam_c = critical_lambda(self.channel(), self.get("simulation", "t"), a)
        return float(frac) * lam_c

    def file_dist(self) -> FileSizeDist:
        kind = self.get("simulation", "file_dist")
        mean = self.get("channel", "l")
        if kind == "pareto":
            return FileSizeDist("pareto", mean, self.get("simulation", "pareto_shape"))
        return FileSizeDist(kind, mean)

    def simulation(self, seed_override: int | None = None) -> SimulationConfig:
        sim = self.values["simulation"]
        horizon = sim["horizon"]
        snaps = sim["snapshot_times"]
        if not snaps and sim["snapshot_count"] > 0:
            w = sim["warmup"]
            k = sim["snapshot_count"]
            snaps = tuple(w + (i + 1) * (horizon - w) / k for i in range(k))
        return SimulationConfig(
            lam=self.resolve_lambda(),
            channel=self.channel(),
            domain=self.domain(),
            T=sim["t"],
            file_dist=self.file_dist(),
            horizon=horizon,
            warmup=sim["warmup"],
            seed=int(seed_override if seed_override is not None else sim["seed"]),
            snapshot_times=tuple(snaps),
            max_links=sim["max_links"],
            record_events=sim["record_events"],
        )


def parse_config(text: str) -> ExperimentConfig:
    values = {sec: dict(defaults) for sec, defaults in _DEFAULTS.items()}
    explicit: set = set()
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in _SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, _, val = line.partition("=")
        key = key.strip().lower()
        val = val.strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{section}]")
        conv = _SCHEMA[section][key]
        try:
            values[section][key] = conv(val)
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
        explicit.add((section, key))
    for sec in ("simulation", "chain"):
        if (sec, "lambda") in explicit and (sec, "lambda_frac") in explicit:
            raise ConfigError(f"[{sec}] must set only one of lambda / lambda_frac")
    return ExperimentConfig(values, text, explicit)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
