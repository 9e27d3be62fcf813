"""figplots: render a randred results CSV into a chart."""

import argparse
import sys

from .render import NoDataError, PlotSpec, SchemaError, render


def build_parser():
    p = argparse.ArgumentParser(prog="figplots", description=__doc__)
    p.add_argument("--csv", required=True, help="input results CSV")
    p.add_argument("--out", required=True, help="output image path (.png keeps "
                   "the aggregated values in the image metadata)")
    p.add_argument("--metric", help="only plot rows with this metric name")
    p.add_argument("--methods", help="comma-separated method filter")
    p.add_argument("--operators", help="comma-separated operator filter")
    p.add_argument("--timing", action="store_true",
                   help="stacked reduce/optimize time bars instead of the metric")
    p.add_argument("--title")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    split = lambda s: tuple(t.strip() for t in s.split(",") if t.strip())
    spec = PlotSpec(
        csv_path=args.csv, out_path=args.out, metric=args.metric,
        methods=split(args.methods) if args.methods else None,
        operators=split(args.operators) if args.operators else None,
        timing=args.timing, title=args.title)
    try:
        result = render(spec)
    except (SchemaError, NoDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    note = f" ({result.excluded_rows} failed rows excluded)" \
        if result.excluded_rows else ""
    print(f"wrote {result.out_path}: {len(result.aggregates)} series over "
          f"{result.n_rows} rows{note}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
