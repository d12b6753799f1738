"""Render reports and sweeps: text tables, CSV, and SVG line charts."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Sequence

from .errors import DatasetFormatError, InvalidParamsError
from .evaluation import Report, SweepResult

METRIC_COLUMNS = ("precision", "recall", "f1", "accuracy")


def render_table(rows: Sequence[dict[str, Any]], columns: Sequence[str],
                 headers: Sequence[str] | None = None) -> str:
    """A plain fixed-width text table (no dependencies, stable output)."""
    headers = list(headers or columns)
    rendered = [[_cell(row.get(col)) for col in columns] for row in rows]
    widths = [
        max(len(headers[i]), *(len(r[i]) for r in rendered)) if rendered else len(headers[i])
        for i in range(len(columns))
    ]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip(),
        "  ".join("-" * widths[i] for i in range(len(columns))),
    ]
    for r in rendered:
        lines.append("  ".join(r[i].ljust(widths[i]) for i in range(len(columns))).rstrip())
    return "\n".join(lines) + "\n"


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


def report_summary_rows(reports: Sequence[Report],
                        settings: Sequence[str] | None = None) -> list[dict[str, Any]]:
    rows = []
    for i, report in enumerate(reports):
        cfg = report.config
        setting = settings[i] if settings else (
            f"dps={'on' if cfg.dps_enabled else 'off'},vg={'on' if cfg.vg_enabled else 'off'}")
        rows.append({
            "setting": setting,
            "precision": report.metrics.precision,
            "recall": report.metrics.recall,
            "f1": report.metrics.f1,
            "accuracy": report.metrics.accuracy,
            "weighted_f1": report.metrics.weighted_f1,
            "mean_retained": report.mean_retained,
        })
    return rows


def render_report_table(reports: Sequence[Report],
                        settings: Sequence[str] | None = None) -> str:
    rows = report_summary_rows(reports, settings)
    return render_table(
        rows,
        columns=("setting", *METRIC_COLUMNS, "weighted_f1", "mean_retained"),
        headers=("Setting", "Precision", "Recall", "F1-score", "Accuracy",
                 "Weighted-F1", "Mean shots"),
    )


def render_sweep_table(result: SweepResult) -> str:
    return render_report_table(result.reports, result.settings)


def write_sweep_csv(result: SweepResult, path: str | Path) -> Path:
    """One row per swept configuration, consumable by any plotting tool."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fieldnames = ["axis", "setting", "precision", "recall", "f1", "weighted_f1",
                  "accuracy", "mean_retained", "unparseable"]
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames)
        writer.writeheader()
        for row in result.rows():
            writer.writerow({"axis": result.axis, **row})
    return path


def read_sweep_csv(path: str | Path) -> list[dict[str, str]]:
    path = Path(path)
    if not path.exists():
        raise DatasetFormatError(f"sweep CSV not found: {path}")
    with path.open(newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def load_report(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise DatasetFormatError(f"report file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{path}: invalid JSON ({exc})") from exc


def report_dict_row(report: dict[str, Any]) -> dict[str, Any]:
    cfg = report.get("config", {})
    m = report.get("metrics", {})
    return {
        "setting": (f"dps={'on' if cfg.get('dps_enabled') else 'off'},"
                    f"vg={'on' if cfg.get('vg_enabled') else 'off'}"),
        "precision": m.get("precision", 0.0),
        "recall": m.get("recall", 0.0),
        "f1": m.get("f1", 0.0),
        "accuracy": m.get("accuracy", 0.0),
        "weighted_f1": m.get("weighted_f1", 0.0),
        "mean_retained": report.get("retained_shots", {}).get("mean", 0.0),
    }


def render_line_chart_svg(
    points: Sequence[tuple[float, float]],
    x_label: str,
    y_label: str,
    title: str = "",
    width: int = 640,
    height: int = 400,
) -> str:
    """A minimal, deterministic SVG line chart (polyline + labelled axes)."""
    if len(points) < 2:
        raise InvalidParamsError("a line chart needs at least two points")
    margin = 56
    plot_w = width - 2 * margin
    plot_h = height - 2 * margin
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    x_min, x_max = min(xs), max(xs)
    y_min, y_max = min(ys), max(ys)
    if x_max == x_min:
        x_max = x_min + 1.0
    if y_max == y_min:
        y_max = y_min + 1.0

    def px(x: float) -> float:
        return margin + (x - x_min) / (x_max - x_min) * plot_w

    def py(y: float) -> float:
        return height - margin - (y - y_min) / (y_max - y_min) * plot_h

    out = io.StringIO()
    out.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
              f'height="{height}" viewBox="0 0 {width} {height}">\n')
    out.write(f'<rect width="{width}" height="{height}" fill="white"/>\n')
    if title:
        out.write(f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" '
                  f'font-size="16" font-family="sans-serif">{_esc(title)}</text>\n')
    # axes
    out.write(f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
              f'y2="{height - margin}" stroke="black"/>\n')
    out.write(f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
              f'y2="{height - margin}" stroke="black"/>\n')
    out.write(f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" '
              f'font-size="13" font-family="sans-serif">{_esc(x_label)}</text>\n')
    out.write(f'<text x="16" y="{height / 2:.1f}" text-anchor="middle" font-size="13" '
              f'font-family="sans-serif" transform="rotate(-90 16 {height / 2:.1f})">'
              f'{_esc(y_label)}</text>\n')
    # ticks
    for i in range(5):
        xv = x_min + (x_max - x_min) * i / 4
        yv = y_min + (y_max - y_min) * i / 4
        out.write(f'<text x="{px(xv):.1f}" y="{height - margin + 18}" text-anchor="middle" '
                  f'font-size="11" font-family="sans-serif">{xv:.3g}</text>\n')
        out.write(f'<text x="{margin - 8}" y="{py(yv) + 4:.1f}" text-anchor="end" '
                  f'font-size="11" font-family="sans-serif">{yv:.3g}</text>\n')
    coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in points)
    out.write(f'<polyline points="{coords}" fill="none" stroke="#1f6fb2" stroke-width="2"/>\n')
    for x, y in points:
        out.write(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="#1f6fb2"/>\n')
    out.write("</svg>\n")
    return out.getvalue()


def _esc(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def plot_sweep_metric(csv_path: str | Path, metric: str, out_path: str | Path) -> Path:
    """Plot one metric against the swept setting from a sweep CSV."""
    rows = read_sweep_csv(csv_path)
    if not rows:
        raise DatasetFormatError(f"sweep CSV {csv_path} is empty")
    if metric not in rows[0]:
        raise InvalidParamsError(
            f"metric {metric!r} not in sweep CSV columns {sorted(rows[0])}")
    axis = rows[0].get("axis", "setting")
    points = []
    for i, row in enumerate(rows):
        points.append((_setting_value(row.get("setting", ""), i), float(row[metric])))
    svg = render_line_chart_svg(
        points,
        x_label=_AXIS_LABELS.get(axis, axis),
        y_label=metric,
        title=f"{metric} vs {_AXIS_LABELS.get(axis, axis)}",
    )
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(svg, encoding="utf-8")
    return out_path


_AXIS_LABELS = {
    "threshold": "DPS threshold",
    "shots": "shots",
    "modality": "modality",
    "grid": "configuration",
}


def _setting_value(setting: str, fallback: int) -> float:
    """Extract a numeric x-value from a sweep setting like "th=0.7" or "6-shot"."""
    text = setting
    if "=" in text:
        text = text.split("=", 1)[1]
    if text.endswith("-shot"):
        text = text[: -len("-shot")]
    try:
        return float(text)
    except ValueError:
        return float(fallback)
