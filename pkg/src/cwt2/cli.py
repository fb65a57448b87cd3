"""Command-line entry point: ``cwt2 <subcommand> --config FILE ...``.

Exit codes: 0 success, 2 configuration error, 3 numerical error, 4 verdict FAIL.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from cwt2.artifacts import dump_noise, dump_snapshot, write_csv
from cwt2.concentration import LipFunctional, hoeffding_tail_check, mgf_bound_check
from cwt2.config import ExperimentConfig, parse_probes
from cwt2.errors import ConfigError, NumericalError
from cwt2.girsanov_coupling import gronwall_certificate, relative_entropy, simulate
from cwt2.spectral_noise import SpatialCovariance, sample_noise
from cwt2.transport_metrics import Projection, t2_check
from cwt2.wave_solver import m_of_t

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_FAIL = 0, 2, 3, 4


def _header(cfg: ExperimentConfig, command: str, **extra):
    return {"command": command, "config": cfg.to_dict(), "config_hash": cfg.digest(), **extra}


def _replicas(cfg, args):
    return cfg.replicas if args.replicas is None else args.replicas


def cmd_sample_noise(cfg, args):
    out = Path(args.out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    grid, cov = cfg.grid, cfg.cov
    rows = []
    for r in range(_replicas(cfg, args)):
        for step in range(args.steps):
            inc = sample_noise(grid, cov, (cfg.seed, r, step))
            name = f"noise_r{r:05d}_s{step:04d}.bin"
            dump_noise(out / name, inc.slab, grid.box_length, grid.dt)
            rows.append((r, step, float(inc.slab.mean()), float(inc.slab.var()), name))
    write_csv(out / "noise.csv", _header(cfg, "sample-noise"), ["replica", "step", "mean", "var", "file"], rows)
    return EXIT_OK


def cmd_solve(cfg, args):
    out = Path(args.out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = cfg.grid
    probes = cfg.probe_points()
    res = simulate(grid, cfg.cov, cfg.make_drift(), cfg.make_init(), cfg.seed, _replicas(cfg, args),
                   probes=probes, keep_final=True, threads=args.threads, dealias=cfg.dealias)
    rows = []
    for i, r in enumerate(res.replicas):
        field = res.final_v[i]
        name = f"snapshot_r{int(r):05d}.bin"
        dump_snapshot(out / name, field, grid.box_length, grid.dt, grid.T)
        rows.append((int(r), grid.T, float(field.min()), float(field.max()), *res.probes_v[i], name))
    cols = ["replica", "t", "u_min", "u_max"] + [f"probe{m}" for m in range(len(probes))] + ["file"]
    write_csv(out / "solve.csv", _header(cfg, "solve", probes=probes), cols, rows)
    return EXIT_OK


def cmd_couple(cfg, args):
    shift_spec = args.shift or cfg.shift
    shift = cfg.make_shift(shift_spec)
    M_T, C = cfg.transport_constant()
    res = simulate(cfg.grid, cfg.cov, cfg.make_drift(), cfg.make_init(), cfg.seed, _replicas(cfg, args),
                   shift=shift, threads=args.threads, dealias=cfg.dealias)
    records = res.records()
    rows = [(r.replica, r.eta_T, r.i1_max, r.i2_max, r.rn_log_weight, r.norm_sq, C) for r in records]
    cols = ["replica", "eta_T", "i1_max", "i2_max", "rn_log_weight", "norm_sq", "C"]
    out = Path(args.out or Path(cfg.out) / "couple.csv")
    report = gronwall_certificate(records, cfg.T, cfg.make_drift().K, M_T)
    write_csv(out, _header(cfg, "couple", shift=shift_spec, M_T=M_T), cols, rows)
    print(f"mean eta(T)={report.mean_eta:.6g} C={report.C:.6g} |h|^2={report.norm_sq:.6g} "
          f"ratio={report.ratio:.6g} verdict={report.verdict}")
    return EXIT_OK


def cmd_verify_t2(cfg, args):
    shift_spec = args.shift or cfg.shift
    shift = cfg.make_shift(shift_spec)
    probe_spec = args.probes if args.probes is not None else cfg.probes
    probes = parse_probes(probe_spec, cfg.n_steps, cfg.points_per_axis)
    proj = Projection(probes)
    rep = t2_check(proj, shift, _replicas(cfg, args), cfg, n_boot=args.bootstrap, threads=args.threads)
    label = ";".join(f"{p[0]}:{p[1]},{p[2]},{p[3]}" for p in probes)
    out = Path(args.out or Path(cfg.out) / "verify_t2.csv")
    write_csv(out, _header(cfg, "verify-t2", shift=shift_spec),
              ["probes", "D", "error", "H", "C", "B", "verdict"],
              [(label, rep.D, rep.error, rep.entropy, rep.C, rep.B, rep.verdict)])
    print(f"D={rep.D:.6g} +/- {rep.error:.3g}  B={rep.B:.6g}  H={rep.entropy:.6g}  verdict={rep.verdict}"
          + (f"  [{rep.note}]" if rep.note else ""))
    return EXIT_OK if rep.verdict == "PASS" else EXIT_FAIL


def cmd_concentration(cfg, args):
    n = _replicas(cfg, args)
    if args.functional == "probe":
        func = LipFunctional("probe", probes=cfg.probe_points())
        rep = mgf_bound_check(func, cfg, n, threads=args.threads)
        rows = [("mgf", r.lam, r.estimate, r.stderr, r.bound, "PASS" if r.passed else "FAIL") for r in rep.rows]
        rows += [("mgf", lam, "", "", "", "TRUNCATED") for lam in rep.truncated]
    else:
        func = LipFunctional("time_sup", v_name=args.v)
        values = func.evaluate(cfg, n, threads=args.threads)
        mrep = mgf_bound_check(func, cfg, n, values=values)
        trep = hoeffding_tail_check(func, cfg, n, values=values)
        rows = [("mgf", r.lam, r.estimate, r.stderr, r.bound, "PASS" if r.passed else "FAIL") for r in mrep.rows]
        rows += [("tail", r.r, r.frequency, r.sigma, r.bound,
                  ("PASS" if r.passed else "FAIL") + (" vacuous" if r.vacuous else "")) for r in trep.rows]
        rep = mrep if mrep.verdict != "PASS" else trep
    out = Path(args.out or Path(cfg.out) / "concentration.csv")
    _, C = cfg.transport_constant()
    write_csv(out, _header(cfg, "concentration", functional=args.functional, V=args.v, C=C),
              ["check", "parameter", "estimate", "spread", "bound", "verdict"], rows)
    print(f"C={C:.6g} verdict={rep.verdict}")
    return EXIT_OK if rep.verdict == "PASS" else EXIT_FAIL


def cmd_mconst(cfg, args):
    beta = args.beta if args.beta is not None else cfg.beta
    T = args.T if args.T is not None else cfg.T
    cov = SpatialCovariance(beta, cfg.amplitude)
    M_T = m_of_t(T, cov)
    K = cfg.make_drift().K
    print(f"M(T)={M_T:.6f}")
    print(f"C(T,K)={T * M_T * math.exp(T**4 * K**2 / 2):.6f}")
    return EXIT_OK


COMMANDS = {
    "sample-noise": cmd_sample_noise,
    "solve": cmd_solve,
    "couple": cmd_couple,
    "verify-t2": cmd_verify_t2,
    "concentration": cmd_concentration,
    "mconst": cmd_mconst,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="cwt2", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "mconst", help="TOML experiment config")
        p.add_argument("--threads", type=int, default=None, help="worker threads (env CWT2_THREADS)")
        if name != "mconst":
            p.add_argument("--replicas", type=int, default=None)
            p.add_argument("--out", default=None)
        if name == "sample-noise":
            p.add_argument("--steps", type=int, default=1, help="time slabs dumped per replica")
        if name in ("couple", "verify-t2"):
            p.add_argument("--shift", default=None, help="e.g. 'bump:amp=1,width=0.5,levels=1/0'")
        if name == "verify-t2":
            p.add_argument("--probes", default=None, help="e.g. 'end:8,8,8;16:4,4,4'")
            p.add_argument("--bootstrap", type=int, default=200)
        if name == "concentration":
            p.add_argument("--functional", choices=["probe", "time_sup"], default="probe")
            p.add_argument("--v", default="identity", help="V for the time_sup functional")
        if name == "mconst":
            p.add_argument("--beta", type=float, default=None)
            p.add_argument("--T", type=float, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        if getattr(args, "replicas", None) is not None and args.replicas < 1:
            raise ConfigError("--replicas must be at least 1")
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        where = f"{args.config}: " if args.config else ""
        print(f"config error: {where}{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
