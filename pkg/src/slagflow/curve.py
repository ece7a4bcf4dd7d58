"""Discrete curves in the complex plane with endpoints pinned at roots of p."""

from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import comb

from . import _kernels as _k
from .config import DEFAULT
from .errors import ConfigError, TooFewPoints


@dataclass(frozen=True, eq=False)
class MarkedCurve:
    """Points z_0..z_N; ``left_root``/``right_root`` index p.roots or None (free end).

    ``grading_offset`` adds 2 pi per unit to the phase lift. ``sheet`` shifts
    the lift of arg p by 2 pi per unit, which moves the phase by (n - 2) pi;
    for odd n this is the only way to reach the odd multiples of pi a piece
    cut from a longer curve may need.
    """

    points: np.ndarray
    left_root: Optional[int] = None
    right_root: Optional[int] = None
    time: float = 0.0
    grading_offset: int = 0
    sheet: int = 0

    def __post_init__(self):
        pts = np.array(self.points, dtype=complex)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def phase_shift(self, n):
        """Constant added to the pointwise phase lift."""
        return 2 * np.pi * self.grading_offset + (n - 2) * np.pi * self.sheet

    def __len__(self):
        return self.points.size

    @property
    def n_segments(self):
        return self.points.size - 1

    def spacing(self):
        return np.abs(np.diff(self.points))

    def length(self):
        return float(np.sum(self.spacing()))

    def arclength(self):
        return np.concatenate(([0.0], np.cumsum(self.spacing())))

    def with_points(self, points, **changes):
        return replace(self, points=points, **changes)

    def reversed(self):
        return replace(self, points=self.points[::-1], left_root=self.right_root, right_root=self.left_root)

    def pin(self, p):
        """Snap pinned endpoints exactly onto their roots."""
        pts = self.points.copy()
        if self.left_root is not None:
            pts[0] = p.roots[self.left_root]
        if self.right_root is not None:
            pts[-1] = p.roots[self.right_root]
        return self.with_points(pts)

    def to_json(self):
        return {
            "points": [[z.real, z.imag] for z in self.points],
            "left_root": self.left_root,
            "right_root": self.right_root,
            "time": self.time,
            "grading_offset": self.grading_offset,
            "sheet": self.sheet,
        }

    @classmethod
    def from_json(cls, data):
        return cls(
            np.array([complex(a, b) for a, b in data["points"]]),
            data.get("left_root"),
            data.get("right_root"),
            float(data.get("time", 0.0)),
            int(data.get("grading_offset", 0)),
            int(data.get("sheet", 0)),
        )


class Differential(NamedTuple):
    tangent: np.ndarray
    normal: np.ndarray
    curvature: np.ndarray
    s: np.ndarray


def fd_weights(x0, xs, m):
    """Fornberg weights for derivatives 0..m at ``x0`` on the nodes ``xs``."""
    xs = np.asarray(xs, dtype=float)
    n = xs.size
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def _stencil_derivatives(z, s, k, idx, m=2):
    w = _k.fd_weights(s[k], np.ascontiguousarray(s[idx]), m)
    return w[:, 1] @ z[idx], w[:, 2] @ z[idx]


def derivatives(points, order=2):
    """First and second arclength derivatives (chord-length parameter).

    ``order=2``: centred 3-point stencils inside, one-sided 4-point stencils at
    the ends. ``order=4``: 5-point centred, 6-point one-sided.
    """
    z = np.asarray(points, dtype=complex)
    n = z.size
    if n < 5:
        raise TooFewPoints(f"need at least 5 points, got {n}")
    s = np.concatenate(([0.0], np.cumsum(np.abs(np.diff(z)))))
    d1 = np.empty(n, dtype=complex)
    d2 = np.empty(n, dtype=complex)
    if order == 2:
        h1 = s[1:-1] - s[:-2]
        h2 = s[2:] - s[1:-1]
        hs = h1 + h2
        zm, z0, zp = z[:-2], z[1:-1], z[2:]
        d1[1:-1] = -h2 / (h1 * hs) * zm + (h2 - h1) / (h1 * h2) * z0 + h1 / (h2 * hs) * zp
        d2[1:-1] = 2 * (zm / (h1 * hs) - z0 / (h1 * h2) + zp / (h2 * hs))
        ends = [(0, [0, 1, 2, 3]), (n - 1, [n - 1, n - 2, n - 3, n - 4])]
    elif order == 4:
        if n < 7:
            raise TooFewPoints("order 4 needs at least 7 points")
        for k in range(2, n - 2):
            d1[k], d2[k] = _stencil_derivatives(z, s, k, np.arange(k - 2, k + 3))
        ends = [
            (0, list(range(6))),
            (1, list(range(6))),
            (n - 2, list(range(n - 6, n))),
            (n - 1, list(range(n - 6, n))),
        ]
    else:
        raise ValueError("order must be 2 or 4")
    for k, idx in ends:
        d1[k], d2[k] = _stencil_derivatives(z, s, k, np.asarray(idx))
    return d1, d2, s


def differential_quantities(c, order=2):
    """Unit tangent, unit normal (i * tangent) and signed curvature at every point.

    Curvature is positive when the curve bends toward the normal.
    """
    pts = c.points if isinstance(c, MarkedCurve) else np.asarray(c, dtype=complex)
    d1, d2, s = derivatives(pts, order)
    speed = np.abs(d1)
    t = d1 / speed
    kappa = np.imag(np.conj(d1) * d2) / speed**3
    return Differential(t, 1j * t, kappa, s)


def _spline(points):
    z = np.asarray(points, dtype=complex)
    s = np.concatenate(([0.0], np.cumsum(np.abs(np.diff(z)))))
    return CubicSpline(s, z), s[-1]


def resample(c, target_h, n_min=DEFAULT.n_min):
    """Redistribute points uniformly in arclength at spacing close to ``target_h``.

    Endpoints are kept exactly; interior points lie on a cubic spline through
    the input points.
    """
    spl, total = _spline(c.points)
    fine = np.linspace(0.0, total, 16 * c.points.size + 1)
    zf = spl(fine)
    arc = np.concatenate(([0.0], np.cumsum(np.abs(np.diff(zf)))))
    n_seg = max(n_min, int(round(arc[-1] / target_h)))
    targets = np.linspace(0.0, arc[-1], n_seg + 1)
    out = spl(np.interp(targets, arc, fine))
    out[0], out[-1] = c.points[0], c.points[-1]
    return c.with_points(out)


def resample_count(c, n_segments):
    """Resample to exactly ``n_segments`` equal arclength pieces."""
    target = c.length() / n_segments
    out = resample(c, target, n_min=1)
    if out.n_segments != n_segments:
        spl, total = _spline(out.points)
        s = np.linspace(0, total, n_segments + 1)
        pts = spl(s)
        pts[0], pts[-1] = c.points[0], c.points[-1]
        out = c.with_points(pts)
    return out


def spacing_ok(c, target_h, numerics=DEFAULT):
    h = c.spacing()
    return bool(h.min() >= numerics.h_min_factor * target_h and h.max() <= numerics.h_max_factor * target_h)


def point_to_polyline(points, poly):
    """Distance from each point to the polyline ``poly``."""
    a = np.asarray(poly[:-1], dtype=complex)
    b = np.asarray(poly[1:], dtype=complex)
    q = np.asarray(points, dtype=complex)[:, None]
    ab = b - a
    denom = np.where(np.abs(ab) > 0, np.abs(ab) ** 2, 1.0)
    u = np.clip(np.real((q - a) * np.conj(ab)) / denom, 0.0, 1.0)
    return np.min(np.abs(q - (a + u * ab)), axis=1)


def hausdorff(a, b):
    pa = a.points if isinstance(a, MarkedCurve) else np.asarray(a)
    pb = b.points if isinstance(b, MarkedCurve) else np.asarray(b)
    return float(max(point_to_polyline(pa, pb).max(), point_to_polyline(pb, pa).max()))


def min_root_distance(c, p, end_guard):
    """Closest approach of interior points to any root.

    A pinned endpoint's own root is ignored for points within arclength
    ``end_guard`` of that endpoint. Returns ``(distance, root, point)``;
    indices are -1 when nothing qualifies.
    """
    z = c.points
    s = c.arclength()
    roots = p.root_array
    d = np.abs(z[1:-1, None] - roots[None, :])
    si = s[1:-1]
    if c.left_root is not None:
        d[si < end_guard, c.left_root] = np.inf
    if c.right_root is not None:
        d[si > s[-1] - end_guard, c.right_root] = np.inf
    if d.size == 0 or not np.isfinite(d).any():
        return np.inf, -1, -1
    k, r = np.unravel_index(np.argmin(d), d.shape)
    return float(d[k, r]), int(r), int(k) + 1


def segment(za, zb, n_segments):
    return np.linspace(0.0, 1.0, n_segments + 1) * (zb - za) + za


def arc(za, zb, bulge, n_segments):
    """Circular arc from za to zb with signed sagitta (positive = left of za->zb)."""
    chord = zb - za
    if abs(bulge) < 1e-9 * abs(chord):
        return segment(za, zb, n_segments)
    half = abs(chord) / 2
    e = chord / abs(chord)
    nu = 1j * e
    sag = abs(bulge)
    radius = (half**2 + sag**2) / (2 * sag)
    side = np.sign(bulge)
    center = (za + zb) / 2 - side * nu * (radius - sag)
    a0 = np.angle(za - center)
    # central angle from sag = R (1 - cos(theta/2)); a left bulge runs clockwise
    sweep = -side * 2 * np.arccos(1 - sag / radius)
    ang = a0 + sweep * np.linspace(0.0, 1.0, n_segments + 1)
    pts = center + radius * np.exp(1j * ang)
    pts[0], pts[-1] = za, zb
    return pts


def sine_bump(za, zb, amplitude, n_segments, mode=1):
    """Segment displaced along its left normal by ``amplitude * sin(mode*pi*u)``."""
    u = np.linspace(0.0, 1.0, n_segments + 1)
    e = (zb - za) / abs(zb - za)
    pts = za + (zb - za) * u + amplitude * np.sin(mode * np.pi * u) * 1j * e
    pts[0], pts[-1] = za, zb
    return pts


def bezier(control, n_segments):
    """Bezier curve with complex control points, sampled uniformly in the parameter."""
    ctrl = np.asarray(control, dtype=complex)
    u = np.linspace(0.0, 1.0, n_segments + 1)[:, None]
    deg = ctrl.size - 1
    k = np.arange(deg + 1)[None, :]
    basis = comb(deg, k) * u**k * (1 - u) ** (deg - k)
    return basis @ ctrl


def root_index(p, value, name):
    if isinstance(value, int):
        if not 0 <= value < len(p.roots):
            raise ConfigError(f"initial_curve.{name}: root index {value} out of range")
        return value
    target = complex(*value) if isinstance(value, (list, tuple)) else complex(value)
    d = np.abs(p.root_array - target)
    k = int(np.argmin(d))
    if d[k] > 1e-6 * (1 + abs(target)):
        raise ConfigError(f"initial_curve.{name}: {value} is not a root of p")
    return k


def from_config(doc, p, numerics=DEFAULT):
    """Initial curve from a config block; see README for the accepted shapes."""
    kind = doc.get("type")
    n_seg = int(doc.get("n_points", numerics.n_points))
    if kind == "points":
        try:
            pts = np.array([complex(a, b) for a, b in doc["data"]])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"initial_curve.data: {exc}") from exc
        left = _maybe_root(p, pts[0], doc.get("left_root"))
        right = _maybe_root(p, pts[-1], doc.get("right_root"))
        c = MarkedCurve(pts, left, right)
        c = c.pin(p)
        return resample_count(c, n_seg) if doc.get("resample", True) else c
    if "from" not in doc or "to" not in doc:
        raise ConfigError("initial_curve: 'from' and 'to' root references are required")
    a = root_index(p, doc["from"], "from")
    b = root_index(p, doc["to"], "to")
    za, zb = p.roots[a], p.roots[b]
    if kind == "segment":
        pts = segment(za, zb, n_seg)
    elif kind == "arc":
        pts = arc(za, zb, float(doc.get("bulge", 0.0)), n_seg)
    elif kind == "sine":
        pts = sine_bump(za, zb, float(doc.get("amplitude", 0.0)), n_seg, int(doc.get("mode", 1)))
    else:
        raise ConfigError(f"initial_curve.type: unknown curve type {kind!r}")
    c = MarkedCurve(pts, a, b, 0.0, int(doc.get("grading_offset", 0)))
    return resample_count(c, n_seg)


def _maybe_root(p, z, ref):
    if ref is not None:
        return root_index(p, ref, "root")
    d = np.abs(p.root_array - z)
    k = int(np.argmin(d))
    return k if d[k] < 1e-9 else None
