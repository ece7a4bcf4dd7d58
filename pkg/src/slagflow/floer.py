"""Floer index arithmetic, splittings of graded classes, stability and Jordan-Holder pieces.

A class of paths between two roots is described by its end roots and a
winding word: loops ``(root, +1 | -1)`` traversed from the start root before
running along the reference path to the end root. Reference paths are
straight, detouring around intermediate roots on a circle of radius
``0.1 * separation`` that keeps the root on the traveller's right. Two paths
are identified when the closed loop formed by one and the reverse of the
other has zero winding number around every root other than the end roots.
"""

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import DEFAULT
from .curve import MarkedCurve
from .errors import NonTerminating, NotFound, NotIntegral
from .geometry import LagClass, lift_phase, period, phase_profile, weighted_measure, weighted_volume
from .polynomial import continued_arg
from .slag import slag_connect

# ---------------------------------------------------------------------------
# index arithmetic


@dataclass(frozen=True)
class GradedIntersection:
    n: int
    alphas: tuple
    theta1: float

    def __post_init__(self):
        a = tuple(float(x) for x in self.alphas)
        if len(a) != self.n:
            raise ValueError(f"expected {self.n} angles, got {len(a)}")
        if any(not 0 < x < np.pi for x in a):
            raise ValueError("angles must lie strictly inside (0, pi)")
        object.__setattr__(self, "alphas", a)

    def dual(self):
        """The same point with the roles of the two Lagrangians exchanged."""
        return GradedIntersection(self.n, tuple(np.pi - x for x in self.alphas), -self.theta1)

    def regraded(self, shift):
        """Shift the grading of the first Lagrangian by ``shift`` (a multiple of pi)."""
        return GradedIntersection(self.n, self.alphas, self.theta1 - shift)


def floer_index(x, idx_tol=DEFAULT.idx_tol):
    """(sum of angles - theta1) / pi; must be an integer."""
    value = (sum(x.alphas) - x.theta1) / np.pi
    k = round(value)
    if abs(value - k) > idx_tol:
        raise NotIntegral(f"index {value:.9g} is not an integer")
    return int(k)


def gradable_connect_sum(x, idx_tol=DEFAULT.idx_tol):
    return floer_index(x, idx_tol) == 1


# ---------------------------------------------------------------------------
# paths and winding


def winding_number(closed, point):
    """Winding number of the closed polyline ``closed`` around ``point``."""
    z = np.asarray(closed, dtype=complex) - point
    z = np.append(z, z[0])
    return float(np.sum(np.angle(z[1:] / z[:-1])) / (2 * np.pi))


def _densify(points, h):
    out = [points[0]]
    for a, b in zip(points[:-1], points[1:]):
        k = max(1, int(np.ceil(abs(b - a) / h)))
        out.extend(a + (b - a) * np.arange(1, k + 1) / k)
    return np.asarray(out, dtype=complex)


def _clean(points):
    """Drop consecutive duplicate vertices."""
    z = np.asarray(points, dtype=complex)
    scale = 1e-12 * (1 + np.max(np.abs(z)))
    keep = np.concatenate(([True], np.abs(np.diff(z)) > scale))
    return z[keep]


def _arc(centre, radius, a0, a1, clockwise, h):
    sweep = (a1 - a0) % (2 * np.pi)
    if clockwise:
        sweep = sweep - 2 * np.pi if sweep > 0 else sweep
    k = max(8, int(np.ceil(abs(sweep) * radius / h)))
    return centre + radius * np.exp(1j * (a0 + sweep * np.arange(1, k + 1) / k))


@dataclass(frozen=True)
class PathKit:
    """Root data and resolution for building class paths."""

    roots: tuple
    radius: float
    h: float

    @classmethod
    def for_poly(cls, p):
        roots = tuple(p.roots)
        sep = p.separation() if len(roots) > 1 else 1.0
        radius = 0.1 * sep
        return cls(roots, radius, radius / 16)

    def reference(self, za, zb):
        """Straight path with clockwise detours (root on the right) round roots in the way."""
        d = zb - za
        length = abs(d)
        e = d / length
        hits = []
        for r in self.roots:
            if abs(r - za) < 1e-12 or abs(r - zb) < 1e-12:
                continue
            s = np.real((r - za) * np.conj(e))
            off = np.imag((r - za) * np.conj(e))
            if 0 < s < length and abs(off) < self.radius:
                half = np.sqrt(self.radius**2 - off**2)
                hits.append((s, r, s - half, s + half))
        pts = [za]
        for s, r, s_in, s_out in sorted(hits):
            entry, exit_ = za + e * s_in, za + e * s_out
            pts.extend(_densify(np.array([pts[-1], entry]), self.h)[1:])
            pts.extend(_arc(r, self.radius, np.angle(entry - r), np.angle(exit_ - r), True, self.h))
        pts.extend(_densify(np.array([pts[-1], zb]), self.h)[1:])
        return _clean(pts)

    def _loop(self, base, root, sign):
        r = self.roots[root]
        u = (r - base) / abs(r - base)
        touch = r - self.radius * u
        out = self.reference(base, touch)
        a0 = np.angle(touch - r)
        circle = r + self.radius * np.exp(1j * (a0 + sign * 2 * np.pi * np.arange(1, 65) / 64))
        return np.concatenate((out, circle, out[::-1][1:]))

    def _near(self, za, target):
        return za + 0.5 * self.radius * (target - za) / abs(target - za)

    def _hop(self, za, frm, to):
        """Short arc round the start root between two base points at radius radius/2."""
        a0, a1 = np.angle(frm - za), np.angle(to - za)
        sweep = (a1 - a0 + np.pi) % (2 * np.pi) - np.pi
        k = max(2, int(np.ceil(abs(sweep) * 0.5 * self.radius / self.h)))
        return za + 0.5 * self.radius * np.exp(1j * (a0 + sweep * np.arange(1, k + 1) / k))

    def path(self, start, end, word=()):
        """Polyline of the class (start, end, word); loops hang off a small circle round the start."""
        za, zb = self.roots[start], self.roots[end]
        if not word:
            return self.reference(za, zb)
        base = self._near(za, self.roots[word[0][0]])
        pts = [np.array([za]), _densify(np.array([za, base]), self.h)[1:]]
        for i, (r, s) in enumerate(word):
            nxt = self._near(za, self.roots[r])
            if i:
                pts.append(self._hop(za, base, nxt))
            base = nxt
            pts.append(self._loop(base, r, s)[1:])
        last = self._near(za, zb)
        pts.append(self._hop(za, base, last))
        pts.append(self.reference(last, zb)[1:])
        return _clean(np.concatenate(pts))

    def windings(self, closed, skip=()):
        return {
            k: int(round(winding_number(closed, r)))
            for k, r in enumerate(self.roots)
            if k not in skip
        }


def _graded_phase(path, p, n, reference_shift=0.0):
    """Weighted mean phase of ``path`` (polyline) plus ``reference_shift``."""
    c = MarkedCurve(path)
    prof = phase_profile(c, p, n)
    m = weighted_measure(c, p, n)
    return float(np.sum(prof.values * m) / np.sum(m)) + reference_shift, prof.values, m


def class_from_path(p, n, start, end, word, path=None, grading=None, kit=None):
    """LagClass of a path; the phase is lifted next to ``grading`` (default: the path's mean phase)."""
    kit = kit or PathKit.for_poly(p)
    path = kit.path(start, end, word) if path is None else path
    per = period(path, p, n)
    if grading is None:
        grading, _, _ = _graded_phase(path, p, n)
    return LagClass(n, (start, end), tuple(word), per, lift_phase(per, grading))


def class_of_curve(c, p, n, kit=None):
    """LagClass of a pinned curve: its end roots, winding word relative to the reference path,
    period and phase (lifted next to the curve's own weighted mean phase)."""
    kit = kit or PathKit.for_poly(p)
    a, b = c.left_root, c.right_root
    if a is None or b is None:
        raise ValueError("curve must be pinned at both ends")
    ref = kit.reference(kit.roots[a], kit.roots[b])
    closed = np.concatenate((c.points, ref[::-1][1:-1]))
    wind = kit.windings(closed, skip=(a, b))
    word = tuple((k, int(np.sign(w))) for k, w in sorted(wind.items()) for _ in range(abs(w)))
    prof = phase_profile(c, p, n)
    m = weighted_measure(c, p, n)
    grading = float(np.sum(prof.values * m) / np.sum(m))
    per = period(c, p, n)
    return LagClass(n, (a, b), word, per, lift_phase(per, grading))


# ---------------------------------------------------------------------------
# splittings


@dataclass(frozen=True)
class Splitting:
    """A class broken at an intermediate root into two pieces in path order.

    ``side`` says where the root lies relative to the traveller on the
    unsplit path. With the root on the right the first piece is the
    subobject; on the left the second piece is.
    """

    root: int
    side: str  # "left" | "right"
    first: LagClass
    second: LagClass
    winding: tuple = ()

    def __iter__(self):
        return iter((self.first, self.second))

    @property
    def sub(self):
        return self.first if self.side == "right" else self.second

    @property
    def quotient(self):
        return self.second if self.side == "right" else self.first

    @property
    def destabilizing(self):
        return self.sub.phi >= self.quotient.phi


def _words(kit, bound, exclude):
    letters = [(k, s) for k in range(len(kit.roots)) if k not in exclude for s in (1, -1)]
    out = [()]
    for length in range(1, bound + 1):
        for w in itertools.product(letters, repeat=length):
            # a loop followed by its inverse is the empty word
            if any(w[i][0] == w[i + 1][0] and w[i][1] == -w[i + 1][1] for i in range(len(w) - 1)):
                continue
            out.append(tuple(w))
    return out


def _joined(kit, first, second, root, side):
    """first + detour round ``root`` + second; returns points and the index ranges of the parts."""
    r = kit.roots[root]
    outside_a = np.nonzero(np.abs(first - r) >= kit.radius)[0]
    ia = outside_a[-1]
    outside_b = np.nonzero(np.abs(second - r) >= kit.radius)[0]
    ib = outside_b[0]
    a_part = first[: ia + 1]
    b_part = second[ib:]
    arc = _arc(r, kit.radius, np.angle(a_part[-1] - r), np.angle(b_part[0] - r), side == "right", kit.h)
    arc = np.concatenate(([a_part[-1]], arc))
    ra = r + kit.radius * (a_part[-1] - r) / abs(a_part[-1] - r)
    rb = r + kit.radius * (b_part[0] - r) / abs(b_part[0] - r)
    a_part = _clean(np.concatenate((a_part, [ra])))
    b_part = _clean(np.concatenate(([rb], b_part)))
    pts = _clean(np.concatenate((a_part, arc[1:-1], b_part)))
    return pts, len(a_part), len(pts) - len(b_part)


def _part_mean(values, weights, sl):
    return float(np.sum(values[sl] * weights[sl]) / np.sum(weights[sl]))


def enumerate_splittings(L, p, n, bound=DEFAULT.winding_bound, parent_path=None, kit=None, find_slag=False):
    """All splittings of ``L`` through an intermediate root with winding words of length <= ``bound``.

    Each piece pair is homologous to ``L`` (with the detour side recorded).
    Phases are graded continuously along the joined path, normalised so
    that the joined path reproduces ``L.phi``.
    """
    kit = kit or PathKit.for_poly(p)
    a, b = L.root_pair
    parent = kit.path(a, b, L.winding) if parent_path is None else np.asarray(parent_path)
    out = []
    for c in range(len(kit.roots)):
        if c in (a, b):
            continue
        # loops round the parent's own end roots are not enumerated
        for w1 in _words(kit, bound, (a, b, c)):
            first = kit.path(a, c, w1)
            for w2 in _words(kit, bound, (a, b, c)):
                second = kit.path(c, b, w2)
                for side in ("right", "left"):
                    joined, end_a, start_b = _joined(kit, first, second, c, side)
                    closed = np.concatenate((parent, joined[::-1][1:-1]))
                    if any(kit.windings(closed, skip=(a, b)).values()):
                        continue
                    out.append(_graded_pair(L, p, n, c, side, w1, w2, first, second, joined, end_a, start_b))
    if find_slag:
        out = [_with_slag(s, p, n) for s in out]
    return out


def _branch_flip(p, n, joined, start_b, second):
    """+-1 relating the branch of p^((n-2)/2) on ``second`` to its continuation along ``joined``."""
    if not n % 2:
        return 1
    on_joined = continued_arg(p(joined[1:start_b + 2]))[-1]
    # both end samples sit on roots, where arg p is undefined
    own = continued_arg(p(second[1:-1]))
    k = int(np.nonzero(second == joined[start_b + 1])[0][0])
    turns = int(np.round((on_joined - own[k - 1]) / (2 * np.pi)))
    return -1 if turns % 2 else 1


def _graded_pair(L, p, n, c, side, w1, w2, first, second, joined, end_a, start_b):
    mean, values, weights = _graded_phase(joined, p, n)
    per_joined = period(joined, p, n)
    # odd n: the joined path may sit on the other branch, a phase shift of pi
    step = np.pi if n % 2 else 2 * np.pi
    k = int(np.round((L.phi - lift_phase(per_joined, mean)) / step))
    shift = k * step
    flip = -1 if n % 2 and k % 2 else 1
    a, b = L.root_pair
    per1 = flip * period(first, p, n)
    per2 = flip * _branch_flip(p, n, joined, start_b, second) * period(second, p, n)
    phi1 = lift_phase(per1, _part_mean(values, weights, slice(0, end_a)) + shift)
    phi2 = lift_phase(per2, _part_mean(values, weights, slice(start_b, None)) + shift)
    return Splitting(
        c,
        side,
        LagClass(n, (a, c), tuple(w1), per1, phi1),
        LagClass(n, (c, b), tuple(w2), per2, phi2),
        (tuple(w1), tuple(w2)),
    )


def _with_slag(s, p, n, numerics=DEFAULT):
    pieces = []
    for piece in s:
        found = None
        if not piece.winding:
            try:
                slag_connect(p, n, *piece.root_pair, (piece.phi - 0.5, piece.phi + 0.5), numerics=numerics)
                found = True
            except NotFound:
                found = False
        pieces.append(LagClass(piece.n, piece.root_pair, piece.winding, piece.period, piece.phi, found))
    return Splitting(s.root, s.side, pieces[0], pieces[1], s.winding)


# ---------------------------------------------------------------------------
# stability and decomposition


@dataclass
class SplittingVerdict:
    splitting: Splitting
    close_ok: bool
    vclose_ok: bool
    ineq_filtered: bool

    def to_json(self):
        s = self.splitting
        return {
            "root": s.root,
            "side": s.side,
            "winding": [[list(x) for x in w] for w in s.winding],
            "phi1": s.first.phi,
            "phi2": s.second.phi,
            "phi_sub": s.sub.phi,
            "phi_quotient": s.quotient.phi,
            "period1": [s.first.period.real, s.first.period.imag],
            "period2": [s.second.period.real, s.second.period.imag],
            "destabilizing": s.destabilizing,
            "close_ok": self.close_ok,
            "vclose_ok": self.vclose_ok,
            "ineq_filtered": self.ineq_filtered,
        }


@dataclass
class StabilityReport:
    lag_class: LagClass
    sup_theta: float
    inf_theta: float
    volume: float
    splittings: list = field(default_factory=list)
    note: str = "search limited to splittings through roots with bounded winding"

    @property
    def close_ok(self):
        return all(v.close_ok for v in self.splittings)

    @property
    def vclose_ok(self):
        return all(v.vclose_ok for v in self.splittings)

    @property
    def stable(self):
        return not any(v.splitting.destabilizing for v in self.splittings)

    def to_json(self):
        return {
            "class": self.lag_class.to_json(),
            "sup_theta": self.sup_theta,
            "inf_theta": self.inf_theta,
            "weighted_volume": self.volume,
            "close_ok": self.close_ok,
            "vclose_ok": self.vclose_ok,
            "stable": self.stable,
            "splittings": [v.to_json() for v in self.splittings],
            "note": self.note,
        }


def check_stability(c, p, n, bound=DEFAULT.winding_bound, kit=None):
    """Evaluate the phase-window and volume conditions of ``c`` against every splitting.

    close_ok: the ordered phase interval [phi(sub), phi(quotient)] is not
    contained in (inf theta, sup theta); an inverted interval is empty and so
    always contained. vclose_ok: W <= |period1| + |period2|. ineq_filtered:
    some piece phase lies outside [inf theta, sup theta].
    """
    kit = kit or PathKit.for_poly(p)
    prof = phase_profile(c, p, n)
    lo, hi = prof.inf, prof.sup
    vol = weighted_volume(c, p, n)
    L = class_of_curve(c, p, n, kit)
    verdicts = []
    for s in enumerate_splittings(L, p, n, bound, parent_path=c.points, kit=kit):
        x, y = s.sub.phi, s.quotient.phi
        contained = x > y or (lo < x and y < hi)
        vclose = vol <= abs(s.first.period) + abs(s.second.period)
        filtered = not all(lo <= ph <= hi for ph in (s.first.phi, s.second.phi))
        verdicts.append(SplittingVerdict(s, not contained, vclose, filtered))
    return StabilityReport(L, hi, lo, vol, verdicts)


def jordan_holder(L, p, n, bound=DEFAULT.winding_bound, numerics=DEFAULT, kit=None, _depth=0, _limit=None):
    """Graded pieces of ``L``: split off the destabilizing subobject of largest phase
    (ties: smallest |period|) and recurse on the quotient. Pieces are listed
    subobject first."""
    kit = kit or PathKit.for_poly(p)
    if _limit is None:
        _limit = len(kit.roots) * (2 * bound + 1)
    if _depth > _limit:
        raise NonTerminating(f"decomposition deeper than {_limit}")
    if abs(L.period) < numerics.volume_floor:
        return [L]
    candidates = [s for s in enumerate_splittings(L, p, n, bound, kit=kit) if s.destabilizing]
    if not candidates:
        return [L]
    best = min(candidates, key=lambda s: (-s.sub.phi, abs(s.sub.period)))
    kw = dict(bound=bound, numerics=numerics, kit=kit, _depth=_depth + 1, _limit=_limit)
    return [best.sub] + jordan_holder(best.quotient, p, n, **kw)
