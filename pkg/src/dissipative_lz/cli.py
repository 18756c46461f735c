"""Command-line entry point.

Exit codes: 0 success, 1 configuration or domain error, 2 numerical
breakdown, 3 input/output error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analytics import lz_standard, multimode_final, single_mode_final
from .bath import integrated_quantities
from .config import HELP, SECTIONS, SimulationConfig, defaults_toml, load, to_document
from .errors import ConfigError, LZError, OutputError
from .fock import FockConfig, fock_evolve
from .integrator import steady_state_probability
from .state import Trajectory
from .sweep import SweepSpec, convergence_scan, run_sweep, simulate

log = logging.getLogger("dissipative_lz")

TRAJECTORY_HEADER = ("t", "p_down", "p_up", "norm", "sigma_z", "energy")
BOSON_HEADER = ("t", "omega_q", "n_q")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def _write_text(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def _csv(header, rows) -> str:
    out = [",".join(header)]
    out.extend(",".join(fmt(v) for v in r) for r in rows)
    return "\n".join(out) + "\n"


def write_trajectory(traj: Trajectory, outdir: Path, formats=("csv",)):
    if "csv" in formats:
        cols = (traj.times, traj.p_down, traj.p_up, traj.norm, traj.sigma_z, traj.energy)
        _write_text(outdir / "trajectory.csv", _csv(TRAJECTORY_HEADER, zip(*cols)))
        rows = ((t, w, n) for t, nq in zip(traj.times, traj.boson_numbers)
                for w, n in zip(traj.omegas, nq))
        _write_text(outdir / "bosons.csv", _csv(BOSON_HEADER, rows))
    if "npz" in formats:
        extra = {}
        if traj.snapshots:
            extra = dict(snapshot_t=np.array([s.t for s in traj.snapshots]),
                         snapshot_A=np.array([s.A for s in traj.snapshots]),
                         snapshot_B=np.array([s.B for s in traj.snapshots]),
                         snapshot_f=np.array([s.f for s in traj.snapshots]))
        try:
            outdir.mkdir(parents=True, exist_ok=True)
            np.savez(outdir / "trajectory.npz", t=traj.times, p_down=traj.p_down, p_up=traj.p_up,
                     norm=traj.norm, sigma_z=traj.sigma_z, energy=traj.energy,
                     boson_numbers=traj.boson_numbers, omega_q=traj.omegas, **extra)
        except OSError as exc:
            raise OutputError(f"cannot write {outdir / 'trajectory.npz'}: {exc}") from exc


def write_meta(cfg: SimulationConfig, outdir: Path, command: str, extra=None):
    doc = to_document(cfg)
    prov = dict(tool="dissipative_lz", version=__version__, command=command)
    if extra:
        prov.update(extra)
    doc["provenance"] = prov
    _write_text(outdir / "meta.json", json.dumps(doc, indent=2, sort_keys=False, allow_nan=True) + "\n")


def _config(args) -> SimulationConfig:
    if not args.config:
        raise ConfigError("--config PATH is required for this subcommand")
    cfg = load(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _outdir(args, cfg: SimulationConfig) -> Path:
    return Path(args.out if args.out is not None else cfg.output["directory"])


def cmd_run(args) -> int:
    cfg = _config(args)
    out = _outdir(args, cfg)
    traj = simulate(cfg)
    write_trajectory(traj, out, cfg.output["formats"])
    p, flat = steady_state_probability(traj, cfg.run)
    write_meta(cfg, out, "run")
    for w in traj.warnings:
        log.warning(w)
    print(json.dumps(dict(p_final=p, flat=flat, norm_drift=traj.max_norm_drift)))
    return 0


def cmd_oracle(args) -> int:
    cfg = _config(args)
    out = _outdir(args, cfg)
    model = cfg.model()
    n_max = cfg.oracle["n_max"]
    fc = FockConfig(cfg.qubit, model.modes, None if n_max < 0 else n_max, cfg.run)
    traj = fock_evolve(fc, check_truncation=cfg.oracle["check_truncation"])
    write_trajectory(traj, out, [f for f in cfg.output["formats"] if f == "csv"] or ["csv"])
    p, flat = steady_state_probability(traj, cfg.run)
    write_meta(cfg, out, "oracle", dict(n_max_used=fc.resolved_n_max))
    print(json.dumps(dict(p_final=p, flat=flat, n_max=fc.resolved_n_max)))
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    out = _outdir(args, cfg)
    spec = SweepSpec(cfg, dict(cfg.sweep["axes"]), cfg.sweep["cap"])
    keep = cfg.sweep["save_trajectories"]
    rows, trajs = run_sweep(spec, threads=args.threads, keep_trajectories=keep)
    names = list(spec.axes)
    header = names + ["p_final", "flat", "norm_drift", "status"]
    body = [[r[n] for n in names] + [r["p_final"], r["flat"], r["norm_drift"], _status(r["status"])]
            for r in rows]
    text = [",".join(header)] + [",".join(fmt(v) if not isinstance(v, str) else v for v in b) for b in body]
    _write_text(out / "sweep.csv", "\n".join(text) + "\n")
    for idx, traj in sorted(trajs.items()):
        write_trajectory(traj, out / "runs" / f"{idx:04d}", cfg.output["formats"])
    write_meta(cfg, out, "sweep", dict(runs=[dict(index=r["index"], seed=r["seed"],
                                                  status=r["status"]) for r in rows]))
    failed = sum(r["status"] != "ok" for r in rows)
    print(json.dumps(dict(runs=len(rows), failed=failed)))
    return 0


def _status(s: str) -> str:
    # keep the CSV single-line and comma free
    s = s.splitlines()[0] if s else s
    return s.split(":")[0].strip() if s != "ok" else "ok"


def cmd_converge(args) -> int:
    cfg = _config(args)
    out = _outdir(args, cfg)
    cv = cfg.converge
    res = convergence_scan(cv["kind"], cv["values"], cfg, threads=args.threads, threshold=cv["threshold"])
    lines = ["value_a,value_b,sup_diff,converged"]
    for a, b, d in zip(res.values[:-1], res.values[1:], res.differences):
        lines.append(f"{fmt(a)},{fmt(b)},{fmt(d)},{fmt(bool(d <= res.threshold))}")
    _write_text(out / "converge.csv", "\n".join(lines) + "\n")
    for v, traj in zip(res.values, res.trajectories):
        if traj is not None:
            write_trajectory(traj, out / "runs" / f"{cv['kind']}={fmt(v)}", ["csv"])
    write_meta(cfg, out, "converge", dict(statuses=res.statuses))
    print(json.dumps(dict(kind=res.kind, differences=res.differences, converged=res.converged)))
    return 0


def cmd_analytic(args) -> int:
    v = args.v
    out = dict(lz_standard=lz_standard(args.delta, v))
    if args.gamma is not None:
        out["single_mode_final"] = single_mode_final(args.delta, args.gamma, v)
    S, E0 = args.S, args.E0
    if args.config:
        cfg = load(args.config)
        S, E0 = integrated_quantities(cfg.model().modes)
    if S is not None:
        out["multimode_final"] = multimode_final(args.delta, v, args.theta, S, 0.0 if E0 is None else E0)
        out["S"] = S
        out["E0"] = E0
    print(json.dumps(out))
    return 0


def cmd_defaults(args) -> int:
    text = defaults_toml()
    if args.out:
        _write_text(Path(args.out) / "defaults.toml", text)
    else:
        sys.stdout.write(text)
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors are configuration errors (exit 1), not breakdowns (2)
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _defaults_epilog() -> str:
    lines = ["config keys and defaults:"]
    for name, sec in SECTIONS.items():
        for key, val in sec.items():
            lines.append(f"  {name}.{key} = {val!r}: {HELP[f'{name}.{key}']}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML or JSON config (meta.json is accepted)")
    common.add_argument("--out", metavar="DIR", help="output directory (default: output.directory)")
    common.add_argument("--threads", metavar="K", type=int, default=1,
                        help="worker processes for sweeps (0 = one per CPU)")
    common.add_argument("--seed", metavar="U64", type=int, help="override run.seed")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="dissipative-lz", description="Multi-D2 Landau-Zener simulator",
                formatter_class=argparse.RawDescriptionHelpFormatter, epilog=_defaults_epilog())
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("run", parents=[common], help="propagate the variational state").set_defaults(fn=cmd_run)
    sub.add_parser("oracle", parents=[common], help="exact truncated-Fock evolution").set_defaults(fn=cmd_oracle)
    sub.add_parser("sweep", parents=[common], help="Cartesian parameter sweep").set_defaults(fn=cmd_sweep)
    sub.add_parser("converge", parents=[common], help="convergence scan").set_defaults(fn=cmd_converge)
    a = sub.add_parser("analytic", parents=[common], help="closed-form final probabilities as JSON")
    a.add_argument("--delta", type=float, default=0.0)
    a.add_argument("--gamma", type=float)
    a.add_argument("--v", type=float, default=1.0)
    a.add_argument("--theta", type=float, default=math.pi / 2)
    a.add_argument("--S", type=float, help="sum of gamma_q^2 (or give --config)")
    a.add_argument("--E0", type=float, help="sum of gamma_q^2 / omega_q")
    a.set_defaults(fn=cmd_analytic)
    sub.add_parser("defaults", parents=[common], help="print every config key with its default") \
        .set_defaults(fn=cmd_defaults)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 0:
        print("error: --threads must be >= 0", file=sys.stderr)
        return 1
    try:
        return args.fn(args)
    except LZError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return OutputError.exit_code


if __name__ == "__main__":
    sys.exit(main())
