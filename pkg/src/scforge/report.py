"""Artifact writers: deterministic JSON, CSV tables, SVG line plots and OBJ meshes.

JSON output is byte-for-byte reproducible: keys are sorted, floats use the
shortest representation that round-trips, non-finite floats become strings
and nothing time-dependent is written (timings go to a separate file).
"""

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np


def plain(obj):
    """Convert numpy scalars/arrays, tuples and non-finite floats to JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, complex):
        return {"re": plain(obj.real), "im": plain(obj.imag)}
    return obj


def dumps(obj):
    return json.dumps(plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def seed_hash(cfg):
    """SHA-256 of the canonical seed block and corruption knobs."""
    block = {"seed": cfg.to_dict()["seed"], "corrupt": cfg.corrupt}
    return hashlib.sha256(dumps(block).encode()).hexdigest()


def write_csv(path, rows, columns=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if columns is None:
        columns = []
        for row in rows:
            columns.extend(k for k in row if k not in columns)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _cell(row.get(k)) for k in columns})
    return path


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


# -- SVG --------------------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def svg_plot(series, title, xlabel, ylabel, logx=False, logy=True, width=640, height=420):
    """Polyline plot of ``series`` = {label: (xs, ys)}; non-positive values are dropped on log axes."""
    pad_l, pad_r, pad_t, pad_b = 70, 170, 40, 50
    clean = {}
    for label, (xs, ys) in series.items():
        pts = [(float(x), float(y)) for x, y in zip(xs, ys)
               if x is not None and y is not None and math.isfinite(float(x)) and math.isfinite(float(y))
               and (not logx or float(x) > 0) and (not logy or float(y) > 0)]
        if pts:
            clean[label] = pts
    tx = (lambda x: math.log10(x)) if logx else (lambda x: x)
    ty = (lambda y: math.log10(y)) if logy else (lambda y: y)
    allx = [tx(x) for pts in clean.values() for x, _ in pts] or [0.0, 1.0]
    ally = [ty(y) for pts in clean.values() for _, y in pts] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b
    sx = lambda x: pad_l + (tx(x) - x0) / (x1 - x0) * pw
    sy = lambda y: pad_t + ph - (ty(y) - y0) / (y1 - y0) * ph
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{_esc(title)}</text>',
           f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for frac in (0.0, 0.5, 1.0):
        yv, xv = y0 + frac * (y1 - y0), x0 + frac * (x1 - x0)
        ypix, xpix = pad_t + ph - frac * ph, pad_l + frac * pw
        ylab = f"1e{yv:.1f}" if logy else f"{yv:.3g}"
        xlab = f"1e{xv:.1f}" if logx else f"{xv:.3g}"
        out.append(f'<text x="{pad_l - 6}" y="{ypix + 4:.1f}" text-anchor="end">{ylab}</text>')
        out.append(f'<text x="{xpix:.1f}" y="{pad_t + ph + 16}" text-anchor="middle">{xlab}</text>')
    out.append(f'<text x="{pad_l + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="16" y="{pad_t + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {pad_t + ph / 2:.1f})">{_esc(ylabel)}</text>')
    for i, (label, pts) in enumerate(clean.items()):
        color = _COLORS[i % len(_COLORS)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        for x, y in pts:
            out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2.5" fill="{color}"/>')
        ly = pad_t + 14 + 16 * i
        out.append(f'<line x1="{pad_l + pw + 10}" y1="{ly - 4}" x2="{pad_l + pw + 28}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{pad_l + pw + 32}" y="{ly}">{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_svg(path, *args, **kwargs):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(svg_plot(*args, **kwargs))
    return path


# -- OBJ --------------------------------------------------------------------------------

def pca_project(points, dim=3):
    """Project (..., m) points onto their top ``dim`` principal axes (identity when m <= dim)."""
    pts = np.asarray(points, dtype=float)
    flat = pts.reshape(-1, pts.shape[-1])
    if flat.shape[1] <= dim:
        out = np.zeros((flat.shape[0], dim))
        out[:, :flat.shape[1]] = flat
        return out.reshape(pts.shape[:-1] + (dim,))
    center = flat.mean(axis=0)
    _, _, Vt = np.linalg.svd(flat - center, full_matrices=False)
    # fix the sign of each axis so the projection is deterministic
    for i in range(dim):
        k = int(np.argmax(np.abs(Vt[i])))
        if Vt[i, k] < 0:
            Vt[i] = -Vt[i]
    return ((flat - center) @ Vt[:dim].T).reshape(pts.shape[:-1] + (dim,))


def obj_text(points, mask=None, comment=None):
    """Triangulated OBJ of a grid of 3-d points; quads touching masked-out nodes are dropped."""
    P = np.asarray(points, dtype=float)
    nu, nv = P.shape[:2]
    lines = [f"# {comment}"] if comment else []
    for p in P.reshape(-1, 3):
        lines.append("v " + " ".join(repr(float(x)) for x in p))
    ok = np.ones((nu, nv), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    idx = lambda i, j: i * nv + j + 1
    for i in range(nu - 1):
        for j in range(nv - 1):
            if ok[i, j] and ok[i + 1, j] and ok[i, j + 1] and ok[i + 1, j + 1]:
                a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
                lines.append(f"f {a} {b} {c}")
                lines.append(f"f {a} {c} {d}")
    return "\n".join(lines) + "\n"


def write_obj(path, points, mask=None, comment=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    P = np.asarray(points, dtype=float)
    if P.shape[-1] != 3:
        P = pca_project(P, 3)
    path.write_text(obj_text(P, mask, comment))
    return path
