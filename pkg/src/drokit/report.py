"""Report emission: canonical JSON, per-method CSV series, and SVG panels.

The SVG writer is deliberately hand-rolled with fixed number formatting so a
given report always renders byte-identical files (golden-file friendly).
Each panel shows, per method, the mean line and the 10%-90% quantile band
across sample sizes, with a dotted reference line where available.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .errors import EmptyReport
from .experiments import ComparisonReport

_PALETTE = {
    "bnwdro": "#c0392b",
    "wdro": "#2471a3",
    "mdro": "#1e8449",
    "saa": "#7d6608",
}
_FALLBACK_COLORS = ("#8e44ad", "#d35400", "#16a085", "#2c3e50")

_PANELS = (
    ("certificate", "certificate"),
    ("out_of_sample", "out-of-sample cost"),
    ("reliability", "reliability"),
)


def report_payload(report: ComparisonReport, config_echo: dict | None = None) -> dict:
    return {
        "schema": "drokit-report/1",
        "experiment": report.experiment,
        "methods": list(report.methods),
        "n_list": list(report.n_list),
        "reference": report.reference,
        "config": config_echo or {},
        "trials": list(report.rows),
        "summary": report.summary(),
    }


def emit_report(report: ComparisonReport, out_dir, config_echo: dict | None = None) -> list:
    """Write report.json, per-method CSV series and one SVG per panel.

    Returns the list of written paths. Refuses empty reports.
    """
    if not report.rows:
        raise EmptyReport("no trials to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    payload = report_payload(report, config_echo)
    report_path = out / "report.json"
    report_path.write_text(
        json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )
    written.append(report_path)

    summary = report.summary()
    for method in report.methods:
        rows = [s for s in summary if s["method"] == method]
        for metric, _label in _PANELS:
            path = out / f"{method}_{metric}.csv"
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["N", "mean", "q10", "q90"])
                for s in rows:
                    if metric == "reliability":
                        cov = s["reliability"]
                        writer.writerow([s["N"], repr(cov), repr(cov), repr(cov)])
                    else:
                        writer.writerow(
                            [
                                s["N"],
                                repr(s[metric]["mean"]),
                                repr(s[metric]["q10"]),
                                repr(s[metric]["q90"]),
                            ]
                        )
            written.append(path)

    for metric, label in _PANELS:
        path = out / f"{metric}.svg"
        path.write_text(render_panel(report, metric, label), encoding="utf-8")
        written.append(path)
    return written


def _series(report: ComparisonReport, method: str, metric: str):
    xs, mean, q10, q90 = [], [], [], []
    for s in report.summary():
        if s["method"] != method:
            continue
        xs.append(s["N"])
        if metric == "reliability":
            mean.append(s["reliability"])
            q10.append(s["reliability"])
            q90.append(s["reliability"])
        else:
            mean.append(s[metric]["mean"])
            q10.append(s[metric]["q10"])
            q90.append(s[metric]["q90"])
    return xs, mean, q10, q90


def render_panel(report: ComparisonReport, metric: str, label: str) -> str:
    """One line-plus-band SVG panel; deterministic text output."""
    width, height = 640.0, 420.0
    ml, mr, mt, mb = 70.0, 20.0, 30.0, 50.0

    all_vals = []
    series = {}
    for method in report.methods:
        xs, mean, q10, q90 = _series(report, method, metric)
        if xs:
            series[method] = (xs, mean, q10, q90)
            all_vals.extend(q10 + q90 + mean)
    if report.reference is not None and metric != "reliability":
        all_vals.append(report.reference)
    if not series:
        raise EmptyReport(f"no data for panel {metric}")

    n_positions = {n: i for i, n in enumerate(sorted({n for n in report.n_list}))}
    lo = min(all_vals)
    hi = max(all_vals)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.06 * (hi - lo)
    lo, hi = lo - pad, hi + pad

    def sx(n):
        span = max(len(n_positions) - 1, 1)
        return ml + (width - ml - mr) * n_positions[n] / span

    def sy(v):
        return mt + (height - mt - mb) * (hi - v) / (hi - lo)

    def f(v):
        return format(v, ".2f")

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(width)}" height="{int(height)}" '
        f'viewBox="0 0 {int(width)} {int(height)}">',
        f'<rect width="{int(width)}" height="{int(height)}" fill="white"/>',
        f'<text x="{f(width / 2)}" y="18" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{label}</text>',
        f'<line x1="{f(ml)}" y1="{f(height - mb)}" x2="{f(width - mr)}" y2="{f(height - mb)}" '
        'stroke="black" stroke-width="1"/>',
        f'<line x1="{f(ml)}" y1="{f(mt)}" x2="{f(ml)}" y2="{f(height - mb)}" '
        'stroke="black" stroke-width="1"/>',
    ]
    for n in sorted(n_positions):
        parts.append(
            f'<text x="{f(sx(n))}" y="{f(height - mb + 18)}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{n}</text>'
        )
    for k in range(5):
        v = lo + (hi - lo) * k / 4
        parts.append(
            f'<text x="{f(ml - 6)}" y="{f(sy(v) + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{format(v, ".3g")}</text>'
        )
    if report.reference is not None and metric != "reliability":
        yv = f(sy(report.reference))
        parts.append(
            f'<line x1="{f(ml)}" y1="{yv}" x2="{f(width - mr)}" y2="{yv}" '
            'stroke="black" stroke-width="1" stroke-dasharray="2,3"/>'
        )
    fallback = iter(_FALLBACK_COLORS)
    for li, (method, (xs, mean, q10, q90)) in enumerate(series.items()):
        color = _PALETTE.get(method) or next(fallback)
        band = [f"{f(sx(n))},{f(sy(v))}" for n, v in zip(xs, q10)]
        band += [f"{f(sx(n))},{f(sy(v))}" for n, v in zip(reversed(xs), reversed(q90))]
        parts.append(
            f'<polygon points="{" ".join(band)}" fill="{color}" fill-opacity="0.15" stroke="none"/>'
        )
        line = " ".join(f"{f(sx(n))},{f(sy(v))}" for n, v in zip(xs, mean))
        parts.append(
            f'<polyline points="{line}" fill="none" stroke="{color}" '
            'stroke-width="1.5" stroke-dasharray="6,3"/>'
        )
        ly = mt + 14 + 16 * li
        parts.append(
            f'<line x1="{f(width - mr - 120)}" y1="{f(ly - 4)}" x2="{f(width - mr - 96)}" '
            f'y2="{f(ly - 4)}" stroke="{color}" stroke-width="1.5" stroke-dasharray="6,3"/>'
        )
        parts.append(
            f'<text x="{f(width - mr - 90)}" y="{f(ly)}" font-family="sans-serif" '
            f'font-size="11">{method}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
