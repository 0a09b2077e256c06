"""Render experiment figures from the workbench's result CSVs.

Four figure kinds cover the comparative plots: aggregate throughput versus
network size, per-user throughput CDF, aggregate throughput versus density,
and the dynamic growing-network series. Rendering never transforms the
numbers: plotted values are exactly the values read from the CSV.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

KINDS = ("size", "cdf", "density", "dynamic")

# One fixed style per scheme so every figure is cross-comparable.
SCHEME_STYLES = {
    "gaa": dict(color="#d62728", marker="o"),
    "gda": dict(color="#d62728", marker="o"),
    "bpf": dict(color="#1f77b4", marker="s"),
    "smartassoc": dict(color="#2ca02c", marker="^"),
    "greedy": dict(color="#9467bd", marker="v"),
    "ssf": dict(color="#7f7f7f", marker="x"),
}
FALLBACK_STYLE = dict(color="#17becf", marker="d")


class RenderError(ValueError):
    pass


@dataclass
class FigureSpec:
    kind: str
    input_csv: str
    output_path: str
    value_column: str | None = None
    title: str = ""
    styles: dict = field(default_factory=lambda: SCHEME_STYLES)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise RenderError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")


def _read_rows(path: str) -> list[dict]:
    p = Path(path)
    if not p.exists():
        raise RenderError(f"input CSV not found: {p}")
    with open(p, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise RenderError(f"no data rows in {p}")
    return rows


def _require_columns(rows: list[dict], columns) -> None:
    have = rows[0].keys()
    for col in columns:
        if col not in have:
            raise RenderError(f"missing required column {col!r}")


def _by_scheme(rows: list[dict]) -> dict[str, list[dict]]:
    out: dict[str, list[dict]] = {}
    for row in rows:
        out.setdefault(row["scheme"], []).append(row)
    if not out:
        raise RenderError("empty selection: no schemes present")
    return out


def _style(spec: FigureSpec, scheme: str) -> dict:
    return spec.styles.get(scheme, FALLBACK_STYLE)


def _line_figure(spec: FigureSpec, rows, x_col: str, x_label: str, title: str):
    _require_columns(rows, ("scheme", x_col, "agg_mbps", "ci_lo", "ci_hi"))
    fig, ax = plt.subplots(figsize=(7, 5))
    for scheme, group in sorted(_by_scheme(rows).items()):
        pts = sorted(
            ((float(r[x_col]), float(r["agg_mbps"]), float(r["ci_lo"]), float(r["ci_hi"])) for r in group),
        )
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        los = [p[2] for p in pts]
        his = [p[3] for p in pts]
        st = _style(spec, scheme)
        ax.plot(xs, ys, label=scheme, **st)
        ax.fill_between(xs, los, his, alpha=0.15, color=st["color"], linewidth=0)
    ax.set_xlabel(x_label)
    ax.set_ylabel("Aggregate throughput (Mbps)")
    ax.set_title(spec.title or title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    return fig


def _cdf_figure(spec: FigureSpec, rows):
    value_col = spec.value_column
    if value_col is None:
        value_col = (
            "user_throughput_mbps" if "user_throughput_mbps" in rows[0] else "agg_mbps"
        )
    _require_columns(rows, ("scheme", value_col))
    fig, ax = plt.subplots(figsize=(7, 5))
    for scheme, group in sorted(_by_scheme(rows).items()):
        vals = sorted(float(r[value_col]) for r in group)
        fracs = [(k + 1) / len(vals) for k in range(len(vals))]
        st = _style(spec, scheme)
        ax.step(vals, fracs, where="post", label=scheme, color=st["color"])
    ax.set_xlabel(f"{value_col.replace('_', ' ')} (Mbps)")
    ax.set_ylabel("Cumulative fraction of users")
    ax.set_ylim(0.0, 1.02)
    ax.set_title(spec.title or "Per-user throughput distribution")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return fig


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the written image path."""
    rows = _read_rows(spec.input_csv)
    if spec.kind == "size":
        fig = _line_figure(spec, rows, "n_sta", "Network size (STAs)", "Aggregate throughput vs network size")
    elif spec.kind == "density":
        fig = _line_figure(spec, rows, "density", "STA density", "Aggregate throughput vs density")
    elif spec.kind == "dynamic":
        fig = _line_figure(
            spec, rows, "n_sta", "Network size (STAs)", "Dynamic scenario: throughput vs size"
        )
    else:
        fig = _cdf_figure(spec, rows)
    out = Path(spec.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return str(out)
