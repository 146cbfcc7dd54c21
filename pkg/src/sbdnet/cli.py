"""Batch experiment runner.

Subcommands: ``simulate``, ``heuristics``, ``stats``, ``figures``,
``chain``.  Every artifact file begins with a comment line recording the
sha256 of the governing configuration and the master seed.  Exit codes:
0 success, 2 configuration error, 3 numerical error, 4 statistical
precondition not met.
"""
from __future__ import annotations

import argparse
import glob as globmod
import hashlib
import io
import json
import math
import os
import sys

import numpy as np

from .chain import build_tessellation, fluid_ode, simulate_cell_chain
from .config import load_config
from .errors import ConfigError, NumericsError, PreconditionError
from .heuristics import critical_lambda, heuristics_sweep
from .network import LinkConfiguration
from .recipes import desk_setup, run_figure
from .simulator import run
from .spatial_stats import binomial_surrogate, palm_laplace_interference, \
    rate_conservation_check, ripley_k
from .torus import pathloss_integral_a


def _header(cfg_hash: str, seed: int) -> str:
    return f"# config_sha256={cfg_hash} master_seed={seed}\n"


def _write_with_header(path, header: str, body: str) -> None:
    with open(path, "w") as fh:
        fh.write(header)
        fh.write(body)


def read_metrics(path) -> dict:
    """Load a metrics JSON artifact, skipping leading comment lines."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return json.loads("".join(lines))


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    sim = cfg.simulation(seed_override=args.seed).replace(record_events=True)
    os.makedirs(args.out, exist_ok=True)
    header = _header(cfg.sha256, sim.seed)
    metrics = run(sim)

    body = json.dumps(metrics.to_json_dict(), indent=None, separators=(",", ":"))
    _write_with_header(os.path.join(args.out, "metrics.json"), header, body + "\n")

    log = metrics.event_log
    lines = ["kind,time,link_id,rx_x,rx_y,tx_x,tx_y"]
    for i in range(log["time"].size):
        kind = "B" if log["kind"][i] == 0 else "D"
        lines.append("%s,%.17g,%d,%.17g,%.17g,%.17g,%.17g" % (
            kind, log["time"][i], log["link_id"][i], log["rx_x"][i],
            log["rx_y"][i], log["tx_x"][i], log["tx_y"][i]))
    _write_with_header(os.path.join(args.out, "events.csv"), header,
                       "\n".join(lines) + "\n")

    for i, snap in enumerate(metrics.snapshots):
        path = os.path.join(args.out, f"snapshot_{i:04d}.csv")
        buf = io.StringIO()
        snap.to_csv(buf)
        _write_with_header(path, header, buf.getvalue())
    print(f"wrote metrics.json, events.csv and {len(metrics.snapshots)} snapshots to {args.out}")
    return 0


def _cmd_heuristics(args) -> int:
    cfg = load_config(args.config)
    p = cfg.channel()
    domain = cfg.domain()
    T = cfg.get("simulation", "t")
    tol = cfg.get("heuristics", "tol")
    lambdas = list(cfg.get("heuristics", "lambdas"))
    fracs = cfg.get("heuristics", "lambda_fracs")
    if fracs:
        a = pathloss_integral_a(p.pathloss, domain)
        lam_c = critical_lambda(p, T, a)
        lambdas += [f * lam_c for f in fracs]
    if not lambdas:
        raise ConfigError("[heuristics] needs lambdas or lambda_fracs")
    rows = heuristics_sweep(sorted(lambdas), p, T, domain, tol)
    os.makedirs(args.out, exist_ok=True)
    lines = ["lambda,beta_f,beta_s,beta_l,lambda_c,status_f,status_s,defect_f,defect_s"]
    for r in rows:
        lines.append("%.12g,%.12g,%.12g,%.12g,%.12g,%s,%s,%.3g,%.3g" % (
            r["lambda"], r["beta_f"], r["beta_s"], r["beta_l"], r["lambda_c"],
            r["status_f"], r["status_s"], r["defect_f"], r["defect_s"]))
    seed = cfg.get("simulation", "seed") if args.seed is None else args.seed
    path = os.path.join(args.out, "heuristics_sweep.csv")
    _write_with_header(path, _header(cfg.sha256, seed), "\n".join(lines) + "\n")
    print(f"wrote {path}")
    return 0


def _cmd_stats(args) -> int:
    cfg = load_config(args.config)
    domain = cfg.domain()
    p = cfg.channel()
    T = cfg.get("simulation", "t")
    files = sorted(globmod.glob(args.snapshots))
    if not files:
        raise PreconditionError(f"no snapshot files match {args.snapshots!r}")
    snaps = [LinkConfiguration.from_csv(f, domain, T) for f in files]
    snaps = [s for s in snaps if s.n >= 2]
    if not snaps:
        raise PreconditionError("all snapshots have fewer than 2 links")
    seed = cfg.get("simulation", "seed") if args.seed is None else args.seed
    header = _header(cfg.sha256, seed)
    os.makedirs(args.out, exist_ok=True)

    radii = np.asarray(cfg.get("stats", "radii"))
    kc = ripley_k(snaps, radii)
    lines = ["r,k_hat,k_ppp,ci_lo,ci_hi"]
    for r, k, lo, hi in kc:
        lines.append("%.12g,%.12g,%.12g,%.12g,%.12g" % (r, k, math.pi * r * r, lo, hi))
    _write_with_header(os.path.join(args.out, "k_function.csv"), header,
                       "\n".join(lines) + "\n")

    s_grid = np.asarray(cfg.get("stats", "s_grid"))
    lp = palm_laplace_interference(snaps, s_grid, p)
    surro = binomial_surrogate(snaps, seed=seed)
    lp_ppp = palm_laplace_interference(surro, s_grid, p)
    lines = ["s,laplace_phi,laplace_ppp,phi_ci_lo,phi_ci_hi,ppp_ci_lo,ppp_ci_hi"]
    for (s, est), (_, est2) in zip(lp, lp_ppp):
        lines.append("%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g" % (
            s, est.value, est2.value, *est.ci, *est2.ci))
    _write_with_header(os.path.join(args.out, "laplace.csv"), header,
                       "\n".join(lines) + "\n")

    lam = cfg.resolve_lambda()
    rc = rate_conservation_check(snaps, p, lam)
    lines = ["lhs,rhs,rhs_se,relative_gap",
             "%.12g,%.12g,%.12g,%.12g" % (rc["lhs"], rc["rhs"].value,
                                          rc["rhs"].std_error, rc["relative_gap"])]
    _write_with_header(os.path.join(args.out, "rate_conservation.csv"), header,
                       "\n".join(lines) + "\n")
    print(f"wrote k_function.csv, laplace.csv, rate_conservation.csv to {args.out}")
    return 0


def _cmd_figures(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    desk = None
    cfg_hash = hashlib.sha256(b"desk-defaults").hexdigest()
    if args.config:
        cfg = load_config(args.config)
        desk = desk_setup(cfg.channel(), cfg.domain(), cfg.get("simulation", "t"))
        cfg_hash = cfg.sha256
    seed = 1 if args.seed is None else args.seed
    paths = run_figure(args.id, args.out, desk=desk, seed=seed, scale=args.scale,
                       header=_header(cfg_hash, seed), jobs=args.jobs)
    print("wrote " + ", ".join(paths))
    return 0


def _cmd_chain(args) -> int:
    cfg = load_config(args.config)
    domain = cfg.domain()
    p = cfg.channel()
    eps = cfg.get("chain", "epsilon")
    tess = build_tessellation(domain, p.pathloss, eps)
    if cfg.was_set("chain", "lambda"):
        lam = cfg.get("chain", "lambda")
    else:
        lam = cfg.get("chain", "lambda_frac") * tess.stability_bound(p)
    seed = cfg.get("chain", "seed") if args.seed is None else args.seed
    horizon = cfg.get("chain", "horizon")
    samples = cfg.get("chain", "samples")
    header = _header(cfg.sha256, seed)
    os.makedirs(args.out, exist_ok=True)

    grid = np.linspace(0.0, horizon, samples)
    times, counts = simulate_cell_chain(tess, lam, p, horizon, seed, sample_times=grid)
    cols = "time," + ",".join(f"cell_{i}" for i in range(tess.n_cells))
    lines = [cols]
    for t, row in zip(times, counts):
        lines.append("%.12g," % t + ",".join(str(int(v)) for v in row))
    _write_with_header(os.path.join(args.out, "chain_trajectory.csv"), header,
                       "\n".join(lines) + "\n")

    x0 = np.zeros(tess.n_cells)
    x0[0] = 1.0
    fl = fluid_ode(tess, lam, p, x0, cfg.get("chain", "t_end"))
    lines = [cols]
    for t, row in zip(fl.times, fl.states):
        lines.append("%.12g," % t + ",".join("%.12g" % v for v in row))
    _write_with_header(os.path.join(args.out, "fluid_trajectory.csv"), header,
                       "\n".join(lines) + "\n")
    print(f"wrote chain_trajectory.csv, fluid_trajectory.csv to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sbdnet",
                                 description="spatial link birth-death experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="experiment config file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="master seed override")
        sp.add_argument("--jobs", type=int, default=1, help="parallel worker bound")

    sp = sub.add_parser("simulate", help="run the link dynamics, emit metrics/events/snapshots")
    common(sp)
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("heuristics", help="steady-state prediction sweep")
    common(sp)
    sp.set_defaults(func=_cmd_heuristics)

    sp = sub.add_parser("stats", help="Palm statistics over snapshot files")
    common(sp)
    sp.add_argument("--snapshots", required=True, help="glob of snapshot CSVs")
    sp.set_defaults(func=_cmd_stats)

    sp = sub.add_parser("figures", help="canned experiment recipes")
    common(sp, config_required=False)
    sp.add_argument("--id", required=True, help="fig2 | fig3 | fig5-6 | fig8 | fig9")
    sp.add_argument("--scale", type=float, default=1.0,
                    help="sample-size multiplier (smoke runs use < 1)")
    sp.set_defaults(func=_cmd_figures)

    sp = sub.add_parser("chain", help="cell-chain and fluid trajectories")
    common(sp)
    sp.set_defaults(func=_cmd_chain)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except PreconditionError as exc:
        print(f"statistical precondition not met: {exc}", file=sys.stderr)
        return 4
    except NumericsError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
