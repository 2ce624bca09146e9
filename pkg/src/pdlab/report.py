"""CSV tables, SVG figures and run manifests."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

from .harness import SweepRow
from .metrics import PairReport

SCHEMA_VERSION = 1

PAIRS_HEADER = [
    "pair_index", "log2_z", "init_mode", "activation", "arch", "optimizer",
    "excess_loss_a", "excess_loss_b", "relative_pd", "diff_cosine",
]
SWEEP_HEADER = ["variant", "log2_z", "mean_pd", "se_pd", "mean_loss", "se_loss"]
WEIGHTS_HEADER = ["layer_id", "param_index", "value_a", "value_b"]


def fmt(x: float) -> str:
    """10 significant digits; missing (NaN) values become an empty field."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.10g}"


def _write(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def write_pairs_csv(reports: Sequence[PairReport], path) -> Path:
    rows = [
        [r.pair_index, r.log2_z, r.init_mode, r.activation, r.arch, r.optimizer,
         fmt(r.excess_loss_a), fmt(r.excess_loss_b), fmt(r.relative_pd), fmt(r.diff_cosine)]
        for r in reports
    ]
    return _write(path, PAIRS_HEADER, rows)


def write_sweep_csv(rows: Sequence[SweepRow], path) -> Path:
    out = [[r.variant, r.log2_z, fmt(r.mean_pd), fmt(r.se_pd), fmt(r.mean_loss), fmt(r.se_loss)] for r in rows]
    return _write(path, SWEEP_HEADER, out)


def write_weights_csv(rows, path) -> Path:
    return _write(path, WEIGHTS_HEADER, [[name, i, fmt(a), fmt(b)] for name, i, a, b in rows])


def _float(text: str) -> float:
    return float(text) if text else float("nan")


def read_sweep_csv(path) -> list[SweepRow]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SWEEP_HEADER:
            raise ValueError(f"{path}: not a sweep table (header {reader.fieldnames})")
        return [
            SweepRow(
                r["variant"], int(r["log2_z"]), _float(r["mean_pd"]), _float(r["se_pd"]),
                _float(r["mean_loss"]), _float(r["se_loss"]), 0,
            )
            for r in reader
        ]


def write_manifest(path, **fields) -> Path:
    path = Path(path)
    path.write_text(json.dumps({"schema_version": SCHEMA_VERSION, **fields}, indent=2, sort_keys=True) + "\n")
    return path


# -- SVG ------------------------------------------------------------------------

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


@dataclass
class FigureSpec:
    kind: str  # "pd_vs_logz" or "pd_vs_loss"
    series: list[tuple[str, list[tuple]]] = field(default_factory=list)
    log_x: bool = False
    log_y: bool = True
    x_label: str = ""
    y_label: str = "relative PD"
    note: str = ""


def figure_specs(rows: Sequence[SweepRow]) -> tuple[FigureSpec, FigureSpec]:
    by_variant: dict[str, list[SweepRow]] = {}
    for r in rows:
        by_variant.setdefault(r.variant, []).append(r)
    logz = FigureSpec("pd_vs_logz", x_label="log2 z")
    loss = FigureSpec("pd_vs_loss", x_label="excess loss L (nats)")
    for label, rs in by_variant.items():
        rs = sorted(rs, key=lambda r: r.log2_z)
        logz.series.append((label, [(r.log2_z, r.mean_pd) for r in rs]))
        loss.series.append((label, [(r.mean_loss, r.mean_pd, r.log2_z) for r in rs]))
    xs = [p[0] for _, pts in loss.series for p in pts if p[0] > 0]
    loss.log_x = bool(xs) and max(xs) / min(xs) > 10
    return logz, loss


def _n(x: float) -> str:
    return f"{x:.2f}"


def decade_ticks(lo: float, hi: float) -> list[float]:
    """Powers of ten covering ``[lo, hi]`` (both positive)."""
    a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
    if a == b:
        b += 1
    return [10.0 ** k for k in range(a, b + 1)]


def linear_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    k = math.floor(lo / step)
    ticks = [round(k * step, 12)]
    while ticks[-1] < hi:
        k += 1
        ticks.append(round(k * step, 12))
    return ticks


def _tick_label(v: float, log: bool) -> str:
    if log:
        return f"1e{int(round(math.log10(v)))}"
    return f"{v:g}"


def render_svg(fig: FigureSpec, width: int = 720, height: int = 440) -> str:
    left, right, top, bottom = 70, 190, 20, 50
    pw, ph = width - left - right, height - top - bottom
    points = [p for _, pts in fig.series for p in pts]
    shown = [p for p in points if p[1] > 0 and (not fig.log_x or p[0] > 0)] if fig.log_y else list(points)
    dropped = len(points) - len(shown)

    def axis(values, log):
        if not values:
            return ([1e-3, 1.0] if log else [0.0, 1.0])
        lo, hi = min(values), max(values)
        return decade_ticks(lo, hi) if log else linear_ticks(lo, hi)

    xt = axis([p[0] for p in shown], fig.log_x)
    yt = axis([p[1] for p in shown], fig.log_y)

    def scale(v, ticks, log, size, flip):
        lo, hi = ticks[0], ticks[-1]
        if log:
            f = (math.log10(v) - math.log10(lo)) / (math.log10(hi) - math.log10(lo))
        else:
            f = (v - lo) / (hi - lo)
        return (1 - f) * size if flip else f * size

    def X(v):
        return left + scale(v, xt, fig.log_x, pw, False)

    def Y(v):
        return top + scale(v, yt, fig.log_y, ph, True)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f"<desc>{escape(fig.kind)}{'; ' + escape(fig.note) if fig.note else ''}"
        f"{f'; {dropped} nonpositive points omitted' if dropped else ''}</desc>",
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="white" stroke="black"/>',
    ]
    for t in xt:
        x = _n(X(t))
        out.append(f'<line x1="{x}" y1="{top}" x2="{x}" y2="{top + ph}" stroke="#dddddd"/>')
        out.append(f'<text x="{x}" y="{top + ph + 15}" text-anchor="middle">{_tick_label(t, fig.log_x)}</text>')
    for t in yt:
        y = _n(Y(t))
        out.append(f'<line x1="{left}" y1="{y}" x2="{left + pw}" y2="{y}" stroke="#dddddd"/>')
        out.append(f'<text x="{left - 5}" y="{y}" text-anchor="end" dominant-baseline="middle">{_tick_label(t, fig.log_y)}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 12}" text-anchor="middle">{escape(fig.x_label)}</text>')
    out.append(
        f'<text x="15" y="{top + ph / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 15 {top + ph / 2:.2f})">{escape(fig.y_label)}</text>'
    )
    for i, (label, pts) in enumerate(fig.series):
        color = PALETTE[i % len(PALETTE)]
        pts = [p for p in pts if p in shown]
        if len(pts) > 1:
            path = " ".join(f"{_n(X(p[0]))},{_n(Y(p[1]))}" for p in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for p in pts:
            out.append(f'<circle cx="{_n(X(p[0]))}" cy="{_n(Y(p[1]))}" r="3.5" fill="{color}"/>')
            if len(p) > 2:
                out.append(f'<text x="{_n(X(p[0]) + 5)}" y="{_n(Y(p[1]) - 5)}" fill="{color}">{p[2]}</text>')
        ly = top + 10 + 18 * i
        out.append(f'<rect x="{left + pw + 12}" y="{ly - 5}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{left + pw + 28}" y="{ly}" dominant-baseline="middle">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_figures(rows: Sequence[SweepRow], outdir, note: str = "") -> list[Path]:
    """Write ``pd_vs_logz.svg`` and ``pd_vs_loss.svg``; returns their paths."""
    if not rows:
        raise ValueError("no sweep rows to plot")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for fig in figure_specs(rows):
        fig.note = note
        path = outdir / f"{fig.kind}.svg"
        path.write_text(render_svg(fig))
        paths.append(path)
    return paths
