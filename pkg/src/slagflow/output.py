"""Deterministic report, time-series and SVG snapshot writers."""

import csv
import json
import re
from pathlib import Path

import numpy as np

from .flow import CSV_COLUMNS


def _plain(obj):
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj):
    """Canonical JSON: sorted keys, two-space indent, trailing newline.

    Re-reading and re-dumping reproduces the same bytes.
    """
    return json.dumps(obj, sort_keys=True, indent=2, default=_plain, allow_nan=True) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def write_timeseries(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([repr(float(x)) for x in r])


def read_timeseries(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(x) for x in row] for row in rows[1:]]).reshape(-1, len(rows[0]))


# ---------------------------------------------------------------------------
# svg


def _bounds(curves, roots, refs):
    pts = [np.asarray(roots, dtype=complex)]
    pts += [np.asarray(c, dtype=complex) for c in curves]
    pts += [np.asarray(r, dtype=complex) for r in refs]
    z = np.concatenate(pts)
    lo = complex(z.real.min(), z.imag.min())
    hi = complex(z.real.max(), z.imag.max())
    pad = 0.1 * max(hi.real - lo.real, hi.imag - lo.imag, 1e-3)
    return lo - complex(pad, pad), hi + complex(pad, pad)


def _points_attr(z):
    return " ".join(f"{float(x.real)!r},{float(x.imag)!r}" for x in np.asarray(z, dtype=complex))


def render_svg(curves, roots, references=(), size=640, label=""):
    """Curves in black, roots as dots, reference connectors in light grey.

    Geometry is written in world coordinates inside one transformed group so
    that the exact sample points can be read back.
    """
    lo, hi = _bounds(curves, roots, references)
    span = max(hi.real - lo.real, hi.imag - lo.imag)
    scale = float(size / span)
    stroke = 1.5 / scale
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<g transform="matrix({scale!r},0,0,{-scale!r},{float(-lo.real * scale)!r},{float(hi.imag * scale)!r})">',
    ]
    for ref in references:
        lines.append(
            f'<polyline class="reference" fill="none" stroke="#bbbbbb" stroke-width="{2 * stroke!r}" '
            f'points="{_points_attr(ref)}"/>'
        )
    for c in curves:
        lines.append(
            f'<polyline class="curve" fill="none" stroke="black" stroke-width="{stroke!r}" points="{_points_attr(c)}"/>'
        )
    for r in roots:
        r = complex(r)
        lines.append(f'<circle class="root" cx="{r.real!r}" cy="{r.imag!r}" r="{3 * stroke!r}" fill="#c0392b"/>')
    lines.append("</g>")
    if label:
        lines.append(f'<text x="8" y="20" font-family="monospace" font-size="14">{label}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_svg(path, curves, roots, references=(), label=""):
    Path(path).write_text(render_svg(curves, roots, references, label=label))


_POLY = re.compile(r'<polyline class="(\w+)"[^>]*points="([^"]*)"')


def read_svg_polylines(path):
    """``{"curve": [...], "reference": [...]}`` arrays of complex points from a snapshot."""
    out = {"curve": [], "reference": []}
    for kind, pts in _POLY.findall(Path(path).read_text()):
        xy = [tuple(map(float, pair.split(","))) for pair in pts.split()]
        out.setdefault(kind, []).append(np.array([complex(x, y) for x, y in xy]))
    return out
