"""Command line interface.

Subcommands:
  gen     write a synthetic dataset to a libsvm-format text file
  run     execute an experiment grid and write/append a results CSV
  sweep   run with the default sketch-size grid (5 10 20 40 80)
  verify  run named verification suites and print a report

Every flag can also come from a key-value config file (``--config``),
one ``key = value`` per line with keys named like the long flags.
"""

import argparse
import json
import sys

from .bench import (ExperimentConfig, records_to_csv, run as run_experiments,
                    suite_names, verify)
from .datagen import SyntheticConfig, gen_synthetic, save_libsvm
from .errors import RandredError

DEFAULT_M_GRID = (5, 10, 20, 40, 80)


def _read_config_file(path):
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, val = line.partition("=")
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _add_synthetic_flags(p):
    p.add_argument("--decay", choices=("exp", "poly"), default="exp")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--d", type=int, default=200)
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--t", type=int, default=10)
    p.add_argument("--data-seed", type=int, default=0)


def _csv_list(text):
    return tuple(tok.strip() for tok in text.split(",") if tok.strip())


def _int_list(text):
    return tuple(int(tok) for tok in _csv_list(text))


def build_parser():
    parser = argparse.ArgumentParser(prog="randred", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", help="key-value config file providing defaults")
    sub = parser.add_subparsers(dest="command", required=True)
    children = {}

    p_gen = sub.add_parser("gen", help="generate a synthetic dataset")
    children["gen"] = p_gen
    _add_synthetic_flags(p_gen)
    p_gen.add_argument("--out", required=True, help="output libsvm path")

    for name, mgrid in (("run", None), ("sweep", DEFAULT_M_GRID)):
        p = sub.add_parser(name, help="run an experiment grid"
                           + (" over the default m grid" if mgrid else ""))
        children[name] = p
        p.add_argument("--data", help="libsvm dataset path (otherwise synthetic)")
        _add_synthetic_flags(p)
        p.add_argument("--methods", type=_csv_list, default=("full", "nor"))
        p.add_argument("--kinds", type=_csv_list, default=("rg",))
        if mgrid is None:
            p.add_argument("--m", dest="m_grid", type=_int_list, default=(20,))
        else:
            p.set_defaults(m_grid=mgrid)
        p.add_argument("--seeds", type=_int_list, default=(0,))
        p.add_argument("--lam", type=float, default=0.01)
        p.add_argument("--loss", choices=("hinge", "softmax"), default="hinge")
        p.add_argument("--gap-tol", type=float, default=1e-3)
        p.add_argument("--metric", choices=("error_rate", "auprc"),
                       default="error_rate")
        p.add_argument("--hash-blocks", type=int, default=1)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--no-timing", action="store_true",
                       help="zero the timing columns (reproducible CSV)")
        p.add_argument("--append", action="store_true",
                       help="append to an existing CSV instead of rewriting")
        p.add_argument("--out", required=True, help="output CSV path")

    p_ver = sub.add_parser("verify", help="run verification suites")
    children["verify"] = p_ver
    p_ver.add_argument("--suite", action="append", dest="suites",
                       choices=suite_names() + ("all",), required=True)
    p_ver.add_argument("--trials", type=int, default=None)
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--json", dest="json_out",
                       help="also write the reports as JSON to this path")
    return parser, children


def _apply_config_file(parser, children, argv):
    # The config file supplies defaults; explicit flags still win.  The
    # defaults must land on the subparsers: argparse subcommands parse
    # into a fresh namespace and would shadow parent-level defaults.
    pre, _ = parser.parse_known_args(argv)
    if getattr(pre, "config", None):
        raw = _read_config_file(pre.config)
        typed = {}
        for key, val in raw.items():
            if key in ("methods", "kinds"):
                typed[key] = _csv_list(val)
            elif key in ("m", "m_grid", "seeds"):
                typed["m_grid" if key == "m" else key] = _int_list(val)
            elif key in ("d", "n", "t", "data_seed", "hash_blocks", "workers",
                         "trials", "seed"):
                typed[key] = int(val)
            elif key in ("tau", "lam", "gap_tol"):
                typed[key] = float(val)
            else:
                typed[key] = val
        for child in children.values():
            known = {a.dest for a in child._actions}
            child.set_defaults(**{k: v for k, v in typed.items() if k in known})


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser, children = build_parser()
    _apply_config_file(parser, children, argv)
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except RandredError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _synth_config(args):
    return SyntheticConfig(d=args.d, n=args.n, t=args.t, decay=args.decay,
                           tau=args.tau, seed=args.data_seed)


def _dispatch(args):
    if args.command == "gen":
        ds = gen_synthetic(_synth_config(args))
        save_libsvm(ds.X, ds.labels, args.out)
        print(f"wrote {ds.name}: {ds.dim} x {ds.n} -> {args.out}")
        return 0
    if args.command in ("run", "sweep"):
        dataset = args.data if args.data else _synth_config(args)
        config = ExperimentConfig(
            dataset=dataset, methods=args.methods, kinds=args.kinds,
            m_grid=args.m_grid, seeds=args.seeds, lam=args.lam,
            loss=args.loss, gap_tol=args.gap_tol, metric=args.metric,
            hash_blocks=args.hash_blocks)
        records = run_experiments(config, workers=args.workers,
                                  measure_time=not args.no_timing)
        records_to_csv(records, args.out, append=args.append)
        failed = sum(1 for r in records if r.status != "ok")
        print(f"wrote {len(records)} records to {args.out}"
              + (f" ({failed} failed)" if failed else ""))
        return 0
    if args.command == "verify":
        suites = list(args.suites)
        if "all" in suites:
            suites = list(suite_names())
        reports = []
        for suite in suites:
            kwargs = {"seed": args.seed}
            if args.trials is not None:
                key = "instances" if suite == "fast-projector" else "trials"
                if suite != "jl":
                    kwargs[key] = args.trials
            report = verify(suite, **kwargs)
            reports.append(report)
            for line in report.lines():
                print(line)
        if args.json_out:
            with open(args.json_out, "w", encoding="utf-8") as fh:
                fh.write("[" + ",".join(r.to_json() for r in reports) + "]\n")
        return 0 if all(r.passed for r in reports) else 1
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
