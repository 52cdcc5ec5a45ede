"""CSV, SVG and JSON writers for simulation records and metrics."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .kernel import COLUMNS

# 12 significant digits round-trips every value we print and stays stable
FLOAT_FORMAT = "{:.12g}"


def _fmt(x: float) -> str:
    if math.isnan(x):
        return "nan"
    return FLOAT_FORMAT.format(x)


def csv_text(record: np.ndarray, columns: Sequence[str] = COLUMNS) -> str:
    """Record rows as CSV text with a header row; empty input gives the header only."""
    record = np.asarray(record, dtype=float).reshape(-1, len(columns))
    lines = [",".join(columns)]
    for row in record:
        lines.append(",".join(_fmt(float(x)) for x in row))
    return "\n".join(lines) + "\n"


def _write(path: Path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def emit_csv(record: np.ndarray, path: str | Path, columns: Sequence[str] = COLUMNS) -> Path:
    return _write(Path(path), csv_text(record, columns))


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _clean(obj):
    # JSON has no NaN/inf; report them as null
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def report_text(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True, default=_json_default) + "\n"


def emit_report(report: dict, path: str | Path) -> Path:
    return _write(Path(path), report_text(report))


# --- SVG ---------------------------------------------------------------------

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
WIDTH, HEIGHT = 900, 300
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 150, 30, 40
MAX_POINTS = 2000


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (m * step) <= n:
            step *= m
            break
    first = math.ceil(lo / step) * step
    return [first + k * step for k in range(int((hi - first) / step + 1e-9) + 1)]


def _thin(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if x.size <= MAX_POINTS:
        return x, y
    # keep min and max of each bucket so peaks survive thinning
    edges = np.linspace(0, x.size, MAX_POINTS // 2 + 1).astype(int)
    xs, ys = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        seg = y[a:b]
        i, j = a + int(np.argmin(seg)), a + int(np.argmax(seg))
        for k in sorted((i, j)):
            xs.append(x[k])
            ys.append(y[k])
    return np.asarray(xs), np.asarray(ys)


def svg_line_plot(series: Iterable[tuple[str, np.ndarray, np.ndarray]], title: str,
                  xlabel: str = "t [s]", ylabel: str = "") -> str:
    series = [(name, np.asarray(x, float), np.asarray(y, float)) for name, x, y in series]
    finite = [(x[np.isfinite(y)], y[np.isfinite(y)]) for _, x, y in series]
    xs = np.concatenate([f[0] for f in finite]) if finite else np.zeros(0)
    ys = np.concatenate([f[1] for f in finite]) if finite else np.zeros(0)
    x0, x1 = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
    y0, y1 = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y0, y1 = y0 - 1.0, y1 + 1.0
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def px(v):
        return MARGIN_L + (v - x0) / (x1 - x0) * pw

    def py(v):
        return MARGIN_T + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="18" text-anchor="middle" font-size="13">{title}</text>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for v in _ticks(x0, x1):
        X = px(v)
        out.append(f'<line x1="{X:.1f}" y1="{MARGIN_T + ph}" x2="{X:.1f}" y2="{MARGIN_T + ph + 4}" stroke="#444"/>')
        out.append(f'<text x="{X:.1f}" y="{MARGIN_T + ph + 16}" text-anchor="middle">{v:g}</text>')
    for v in _ticks(y0, y1):
        Y = py(v)
        out.append(f'<line x1="{MARGIN_L}" y1="{Y:.1f}" x2="{MARGIN_L + pw}" y2="{Y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{MARGIN_L - 6}" y="{Y + 4:.1f}" text-anchor="end">{v:g}</text>')
    out.append(f'<text x="{MARGIN_L + pw / 2:.1f}" y="{HEIGHT - 6}" text-anchor="middle">{xlabel}</text>')
    if ylabel:
        out.append(f'<text x="14" y="{MARGIN_T + ph / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {MARGIN_T + ph / 2:.1f})">{ylabel}</text>')
    for k, (name, x, y) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        ok = np.isfinite(y)
        x, y = _thin(x[ok], y[ok])
        if x.size:
            pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(x, y))
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{pts}"/>')
        ly = MARGIN_T + 12 + 16 * k
        lx = MARGIN_L + pw + 10
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 24}" y="{ly}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg_plots(record: np.ndarray, directory: str | Path, prefix: str = "run") -> list[Path]:
    """Write the four standard figures and return their paths."""
    directory = Path(directory)
    rec = np.asarray(record, dtype=float).reshape(-1, len(COLUMNS))
    col = {name: rec[:, i] for i, name in enumerate(COLUMNS)}
    t = col["t"]
    figs = {
        "overview": [
            svg_line_plot([(f"v_pcc_{p}", t, col[f"v_pcc_{p}"]) for p in "abc"], "PCC voltage", ylabel="V"),
            svg_line_plot([(f"i_f_{p}", t, col[f"i_f_{p}"]) for p in "abc"], "Converter current", ylabel="A"),
        ],
        "currents_dq": [
            svg_line_plot([("i_d", t, col["i_d"]), ("i_d_ref_sat", t, col["i_d_ref_sat"])], "d-axis current",
                          ylabel="A"),
            svg_line_plot([("i_q", t, col["i_q"]), ("i_q_ref_sat", t, col["i_q_ref_sat"])], "q-axis current",
                          ylabel="A"),
        ],
        "power_frequency": [
            svg_line_plot([("P", t, col["P"]), ("Q", t, col["Q"])], "Output power", ylabel="W, var"),
            svg_line_plot([("omega_c", t, col["omega_c"])], "Converter frequency", ylabel="rad/s"),
        ],
        "angles": [
            svg_line_plot([("phi", t, col["phi"]), ("phi_flux", t, col["phi_flux"])], "Current phase angle",
                          ylabel="rad"),
        ],
    }
    paths = []
    for name, panels in figs.items():
        # stack the panels into one document
        body = []
        for k, panel in enumerate(panels):
            inner = panel.split("\n", 1)[1].rsplit("</svg>", 1)[0]
            body.append(f'<g transform="translate(0 {k * HEIGHT})">\n{inner}</g>')
        doc = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT * len(panels)}" '
               f'viewBox="0 0 {WIDTH} {HEIGHT * len(panels)}">\n' + "\n".join(body) + "\n</svg>\n")
        paths.append(_write(directory / f"{prefix}_{name}.svg", doc))
    return paths


__all__ = [
    "csv_text",
    "emit_csv",
    "emit_report",
    "emit_svg_plots",
    "report_text",
    "svg_line_plot",
]
