"""Command line interface.

Subcommands: exact, mc, contours, walk, experiment.  Global flags --seed,
--out-dir, --threads (SCHN_THREADS is the environment fallback).  Exit codes:
0 all asserted properties pass, 2 a property failed, 1 execution error.
"""

import argparse
import json
import sys
from pathlib import Path

from . import walk as walk_mod
from .config import ConfigError, load_config
from .contours import dump_contours_csv, extract_contours
from .exact import brute_probability, transfer_probability
from .experiments import OracleGateError, run_experiment, write_csv
from .lattice import FrozenSpec, Lattice, ModelParams, Segment, build_lattice
from .mc import Schedule, SitePlus, resolve_threads, run_chain, run_sampler


def _parse_site(text):
    x, y = text.split(",")
    return int(x), int(y)


def _parse_segment(text):
    # x0:x1:y[:value]
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise ConfigError(f"segment must be x0:x1:y[:value], got {text!r}")
    x0, x1, y = int(parts[0]), int(parts[1]), int(parts[2])
    value = int(parts[3]) if len(parts) == 4 else 1
    return Segment(x0, x1, y, value)


def _geometry(args):
    segments = tuple(_parse_segment(s) for s in (args.segment or []))
    spec = FrozenSpec(args.ring, segments)
    if args.box is not None:
        return build_lattice(args.box, spec)
    x0, x1, y0, y1 = (int(t) for t in args.rect.split(","))
    return Lattice(x0, x1, y0, y1, spec)


def _add_geometry_args(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--box", type=int, help="half-side of a centred square box")
    g.add_argument("--rect", help="xmin,xmax,ymin,ymax rectangle")
    p.add_argument("--ring", type=int, default=-1, choices=(-1, 1))
    p.add_argument("--segment", action="append",
                   help="frozen run x0:x1:y[:value]; repeatable")
    p.add_argument("--beta", type=float, required=True)


def _emit(obj):
    json.dump(obj, sys.stdout, sort_keys=True, indent=2)
    sys.stdout.write("\n")


def cmd_exact(args):
    lat = _geometry(args)
    params = ModelParams(args.beta)
    event = [(_parse_site(args.site), 1)]
    out = {}
    if args.method in ("brute", "both"):
        r = brute_probability(lat, params, event)
        out["brute"] = {"probability": r.probability,
                        "log_partition": r.log_partition}
    if args.method in ("transfer", "both"):
        r = transfer_probability(lat, params, event)
        out["transfer"] = {"probability": r.probability,
                           "log_partition": r.log_partition}
    _emit({"site": list(_parse_site(args.site)), "beta": args.beta, **out})
    return 0


def cmd_mc(args):
    lat = _geometry(args)
    params = ModelParams(args.beta)
    sched = Schedule(args.burn_in, args.sweeps, args.thin)
    obs = {"p_plus": SitePlus(_parse_site(args.site))}
    est = run_chain(lat, params, sched, args.seed, obs, method=args.method,
                    replicas=args.replicas, threads=args.threads,
                    stream_path=args.stream)
    e = est["p_plus"]
    _emit({"site": list(_parse_site(args.site)), "beta": args.beta,
           "mean": e.mean, "stderr": e.stderr, "n_samples": e.n_samples,
           "batch_count": e.batch_count})
    return 0


def cmd_contours(args):
    lat = _geometry(args)
    params = ModelParams(args.beta)
    sched = Schedule(args.burn_in, args.samples * args.thin, args.thin)
    collected = []
    counter = [0]

    def on_sample(grid, sweep):
        from .lattice import SpinConfiguration
        cfg = SpinConfiguration.__new__(SpinConfiguration)
        cfg.lattice = lat
        cfg.grid = grid
        collected.append((counter[0], extract_contours(cfg)))
        counter[0] += 1

    run_sampler(lat, params, sched, (args.seed, 0), on_sample, args.method)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "contours.csv"
    dump_contours_csv(path, collected)
    n_contours = sum(len(c) for _, c in collected)
    _emit({"samples": len(collected), "contours": n_contours,
           "artifact": str(path)})
    return 0


def cmd_walk(args):
    if args.law == "simple":
        steps = walk_mod.simple_steps()
    elif args.law == "parametric":
        steps = walk_mod.parametric_steps(args.c, args.q)
    else:
        steps, rep = walk_mod.build_steps_from_animals(args.beta, args.cutoff)
        if rep.flagged:
            print(f"warning: fragment cutoff {args.cutoff} leaves "
                  f"{rep.tail_estimate!r} of mass unresolved", file=sys.stderr)
    n_list = [int(t) for t in args.n_list.split(",")]
    report = walk_mod.scaling_suite(steps, args.u, args.v, n_list)
    rows = [[N, args.u, vv, "dp", r.probability, 0.0, r.height_cap,
             r.cap_sensitivity] for N, vv, r in report.bulk_points]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"walk_{args.law}.csv"
    write_csv(path, ["N", "u", "v", "method", "probability", "stderr",
                     "height_cap", "cap_sensitivity"], rows)
    _emit({"law": args.law, "exponent": report.exponent,
           "r_squared": report.r_squared,
           "middle_ratio_spread": report.middle_ratio_spread,
           "diffusive_cauchy": report.diffusive_cauchy,
           "artifact": str(path)})
    return 0


def cmd_experiment(args):
    cfg = load_config(args.config)
    out_dir = args.out_dir or cfg.get("out_dir") or "out"
    result = run_experiment(cfg, out_dir, threads=args.threads)
    failed = [v.prop for v in result.verdicts if not v.passed]
    _emit({"experiment": result.experiment,
           "verdicts_passed": len(result.verdicts) - len(failed),
           "verdicts_failed": failed,
           "out_dir": str(out_dir)})
    return 0 if result.all_passed else 2


def build_parser():
    p = argparse.ArgumentParser(prog="schn")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out-dir", default="out")
    p.add_argument("--threads", type=int, default=None)
    # the same flags are accepted after the subcommand; SUPPRESS keeps the
    # subparser from clobbering values given before it
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out-dir", default=argparse.SUPPRESS)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("exact", parents=[common],
                        help="exact probability of a one-site event")
    _add_geometry_args(pe)
    pe.add_argument("--site", required=True, help="x,y")
    pe.add_argument("--method", choices=("brute", "transfer", "both"),
                    default="both")
    pe.set_defaults(fn=cmd_exact)

    pm = sub.add_parser("mc", parents=[common],
                        help="Monte Carlo estimate of a one-site event")
    _add_geometry_args(pm)
    pm.add_argument("--site", required=True, help="x,y")
    pm.add_argument("--method", choices=("heatbath", "metropolis"),
                    default="heatbath")
    pm.add_argument("--burn-in", type=int, default=200)
    pm.add_argument("--sweeps", type=int, default=2000)
    pm.add_argument("--thin", type=int, default=1)
    pm.add_argument("--replicas", type=int, default=1)
    pm.add_argument("--stream", default=None,
                    help="write retained samples as a packed raster stream")
    pm.set_defaults(fn=cmd_mc)

    pc = sub.add_parser("contours", parents=[common],
                        help="sample configurations and dump contours")
    _add_geometry_args(pc)
    pc.add_argument("--method", choices=("heatbath", "metropolis"),
                    default="heatbath")
    pc.add_argument("--burn-in", type=int, default=200)
    pc.add_argument("--samples", type=int, default=100)
    pc.add_argument("--thin", type=int, default=2)
    pc.set_defaults(fn=cmd_contours)

    pw = sub.add_parser("walk", parents=[common],
                        help="ballot scaling report for a step law")
    pw.add_argument("--law", choices=("simple", "parametric", "animal"),
                    default="simple")
    pw.add_argument("--beta", type=float, default=2.0)
    pw.add_argument("--cutoff", type=int, default=8)
    pw.add_argument("--c", type=float, default=0.6931471805599453)
    pw.add_argument("--q", type=float, default=0.5)
    pw.add_argument("--u", type=int, default=1)
    pw.add_argument("--v", type=int, default=1)
    pw.add_argument("--n-list", default="64,128,256,512")
    pw.set_defaults(fn=cmd_walk)

    px = sub.add_parser("experiment", parents=[common],
                        help="run a config-driven experiment")
    px.add_argument("config")
    px.set_defaults(fn=cmd_experiment)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except OracleGateError as exc:
        print(f"oracle gate failed: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
