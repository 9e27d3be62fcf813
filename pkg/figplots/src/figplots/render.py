"""Render benchmark CSV files into sweep charts.

The input schema is the results CSV written by the ``randred`` runner:

    dataset,method,operator,m,seed,metric,value,approx_error,
    reduce_time_ms,opt_time_ms,status

One line is drawn per (method, operator) series against the sketch size
``m`` with a mean +- one-standard-deviation band over seeds.  Rows whose
status is not ``ok`` are excluded and counted in the figure footer.  The
aggregated values are embedded in the PNG metadata (key
``figplots:aggregates``) exactly as computed, so a reader can audit the
chart against the CSV without re-rendering.

Aggregation arithmetic is deliberately pinned: means are exact
compensated sums (``math.fsum``) divided by the count, and the deviation
is the population standard deviation computed the same way.
"""

import csv
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

REQUIRED_COLUMNS = ("dataset", "method", "operator", "m", "seed", "metric",
                    "value", "approx_error", "reduce_time_ms", "opt_time_ms",
                    "status")
METADATA_KEY = "figplots:aggregates"


class SchemaError(ValueError):
    """The CSV is missing a column the renderer needs."""

    def __init__(self, column):
        super().__init__(f"CSV is missing required column {column!r}")
        self.column = column


class NoDataError(ValueError):
    """Filters left nothing to plot."""


@dataclass(frozen=True)
class PlotSpec:
    csv_path: str
    out_path: str
    metric: Optional[str] = None          # filter on the metric column
    methods: Optional[Sequence[str]] = None
    operators: Optional[Sequence[str]] = None
    timing: bool = False                  # bars of reduce/optimize times
    title: Optional[str] = None


@dataclass(frozen=True)
class RenderResult:
    out_path: str
    aggregates: dict       # series label -> {m: (mean, std)} (or timing dict)
    excluded_rows: int
    n_rows: int


def read_rows(csv_path):
    """Parse the CSV, validating the schema before anything else."""
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in REQUIRED_COLUMNS:
            if col not in header:
                raise SchemaError(col)
        return list(reader)


def _mean_std(values):
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    return mean, math.sqrt(var)


def _series_label(method, operator):
    if operator in ("", "-"):
        return method.upper()
    return f"{method.upper()}-{operator.upper()}"


def _select(rows, spec):
    kept = []
    excluded = 0
    for row in rows:
        if row["status"] != "ok":
            excluded += 1
            continue
        if spec.metric is not None and row["metric"] != spec.metric:
            continue
        if spec.methods and row["method"] not in spec.methods:
            continue
        if spec.operators and row["operator"] not in spec.operators:
            continue
        kept.append(row)
    return kept, excluded


def aggregate(rows, spec: PlotSpec):
    """Group kept rows by (method, operator) series and sketch size.

    Returns ``(aggregates, excluded, kept_count)`` where aggregates maps
    series label -> {m: (mean, std)} of the chosen column over seeds.
    """
    kept, excluded = _select(rows, spec)
    if not kept:
        raise NoDataError("no rows match the requested metric/method/operator")
    columns = ("reduce_time_ms", "opt_time_ms") if spec.timing else ("value",)
    bucket = {}
    for row in kept:
        label = _series_label(row["method"], row["operator"])
        m = int(row["m"])
        for col in columns:
            if row[col] == "":
                continue
            bucket.setdefault((label, col), {}).setdefault(m, []).append(
                float(row[col]))
    out = {}
    for (label, col), per_m in sorted(bucket.items()):
        key = label if not spec.timing else f"{label}:{col}"
        out[key] = {m: _mean_std(vals) for m, vals in sorted(per_m.items())}
    if not out:
        raise NoDataError("matching rows carry no plottable values")
    return out, excluded, len(kept)


def _draw_metric_lines(ax, aggregates, spec):
    for label, per_m in aggregates.items():
        ms = sorted(per_m)
        means = [per_m[m][0] for m in ms]
        stds = [per_m[m][1] for m in ms]
        line, = ax.plot(ms, means, marker="o", label=label)
        lo = [mu - sd for mu, sd in zip(means, stds)]
        hi = [mu + sd for mu, sd in zip(means, stds)]
        ax.fill_between(ms, lo, hi, alpha=0.15, color=line.get_color())
    ax.set_xlabel("sketch size m")
    ax.set_ylabel(spec.metric or "metric value")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)


def _draw_timing_bars(ax, aggregates):
    labels = sorted({k.rsplit(":", 1)[0] for k in aggregates})
    ms = sorted({m for per_m in aggregates.values() for m in per_m})
    width = 0.8 / max(len(labels), 1)
    for i, label in enumerate(labels):
        reduce_means = [aggregates.get(f"{label}:reduce_time_ms", {}).get(m, (0.0, 0.0))[0]
                        for m in ms]
        opt_means = [aggregates.get(f"{label}:opt_time_ms", {}).get(m, (0.0, 0.0))[0]
                     for m in ms]
        xs = [j + i * width for j in range(len(ms))]
        ax.bar(xs, reduce_means, width=width, label=f"{label} reduce")
        ax.bar(xs, opt_means, width=width, bottom=reduce_means,
               label=f"{label} optimize")
    ax.set_xticks([j + 0.4 - width / 2 for j in range(len(ms))])
    ax.set_xticklabels([str(m) for m in ms])
    ax.set_xlabel("sketch size m")
    ax.set_ylabel("time (ms)")
    ax.legend(fontsize=7)


def render(spec: PlotSpec) -> RenderResult:
    """Render the chart and return what was drawn.

    The CSV is read-only; the aggregates embedded in the PNG metadata are
    byte-for-byte the JSON of the returned ``aggregates`` mapping.
    """
    rows = read_rows(spec.csv_path)
    aggregates, excluded, kept = aggregate(rows, spec)
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    if spec.timing:
        _draw_timing_bars(ax, aggregates)
    else:
        _draw_metric_lines(ax, aggregates, spec)
    if spec.title:
        ax.set_title(spec.title)
    if excluded:
        fig.text(0.99, 0.01, f"excluded {excluded} failed row(s)",
                 ha="right", fontsize=7, color="0.4")
    fig.tight_layout()
    payload = json.dumps({"aggregates": {k: {str(m): list(v)
                                             for m, v in per_m.items()}
                                         for k, per_m in aggregates.items()},
                          "excluded_rows": excluded},
                         sort_keys=True)
    metadata = {METADATA_KEY: payload} if str(spec.out_path).endswith(".png") \
        else None
    fig.savefig(spec.out_path, metadata=metadata)
    plt.close(fig)
    return RenderResult(out_path=str(spec.out_path), aggregates=aggregates,
                        excluded_rows=excluded, n_rows=kept)


def read_embedded_aggregates(png_path):
    """Recover the aggregates JSON embedded by :func:`render`."""
    from PIL import Image

    with Image.open(png_path) as img:
        payload = img.info.get(METADATA_KEY) or img.text[METADATA_KEY]
    return json.loads(payload)
