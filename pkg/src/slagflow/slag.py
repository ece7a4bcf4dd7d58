"""Constant-phase base curves: shooting from roots, connectors, cones, local model."""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .config import DEFAULT
from .curve import MarkedCurve, resample_count
from .errors import NotFound, ShootStalled
from .polynomial import principal_arg

_MAX_LIFT_STEP = np.pi / 4
# step as a fraction of the distance to a nearby root, where the field turns fastest
_NEAR_STEP = 0.05


@dataclass(frozen=True)
class Shot:
    curve: MarkedCurve
    phi: float
    branch: int
    captured: bool
    reason: str


def start_direction(p, n, root_index, phi, branch=0):
    """Direction of the constant-phase ray leaving a simple root.

    Near the root p ~ p'(z)(t - z), so the phase of a ray of angle b is
    b + (n/2 - 1)(arg p'(z) + b); solving for phase phi gives
    b = (2 phi - (n - 2) arg p'(z)) / n + 4 pi k / n.
    """
    z = p.roots[root_index]
    _, d1 = p.eval_with_derivative(z)
    return (2 * phi - (n - 2) * principal_arg(d1)) / n + 4 * np.pi * branch / n


def cone_directions(p, n, root_index, lower, upper):
    """Boundary directions of phases ``lower``/``upper`` at a root and the width (upper - lower)/n."""
    if upper < lower:
        raise ValueError("upper phase must not be below lower phase")
    a = start_direction(p, n, root_index, lower)
    b = start_direction(p, n, root_index, upper)
    return (a, b), (upper - lower) / n


def _geometry(p, numerics):
    roots = p.root_array
    centre = roots.mean()
    diameter = max(1.0, float(np.max(np.abs(roots - centre))) * 2) if roots.size > 1 else 1.0
    return centre, diameter


class _Field:
    """exp(i(phi - (n/2 - 1) arg p)) with arg p continued from a reference point."""

    def __init__(self, p, n, phi):
        self.p, self.n, self.phi = p, n, phi

    def __call__(self, t, ref_val, ref_arg):
        val = self.p(t)
        inc = float(np.angle(val / ref_val))
        if abs(inc) > _MAX_LIFT_STEP:
            raise ShootStalled("arg p moved too far within one step")
        return np.exp(1j * (self.phi - (self.n / 2 - 1) * (ref_arg + inc)))


def _trajectory(p, n, root_index, phi, branch, max_length, numerics, target=None, capture=True):
    """RK4 at unit speed; returns points, captured root (or None) and the stop reason."""
    z0 = p.roots[root_index]
    centre, diameter = _geometry(p, numerics)
    sep = p.local_separation(root_index)
    delta0 = numerics.delta0_factor * sep
    beta = start_direction(p, n, root_index, phi, branch)
    start = z0 + delta0 * np.exp(1j * beta)
    _, d1 = p.eval_with_derivative(z0)
    val = p(start)
    # lift of arg p at the start consistent with the branch direction beta
    lift = principal_arg(d1) + beta + float(np.angle(val / (d1 * delta0 * np.exp(1j * beta))))
    field = _Field(p, n, phi)
    h0 = numerics.shoot_step_factor * diameter
    half_box = numerics.box_factor * diameter
    roots = p.root_array
    others = np.array([k for k in range(roots.size) if k != root_index], dtype=int)
    radii = np.array([numerics.capture_factor * p.local_separation(k) for k in others])
    pts = [z0, start]
    length = delta0
    z, zval, zarg = start, val, lift
    while True:
        if length >= max_length:
            return np.array(pts), None, "max_length"
        if abs((z - centre).real) > half_box or abs((z - centre).imag) > half_box:
            return np.array(pts), None, "box"
        dist = np.abs(roots[others] - z) if others.size else np.array([np.inf])
        # the field varies on the scale of the distance to the start root too
        h = min(h0, _NEAR_STEP * abs(z - z0))
        if others.size:
            h = min(h, _NEAR_STEP * max(float(dist.min()), float(radii.min())))
        z, zval, zarg, h = _rk4(p, field, z, zval, zarg, h)
        length += h
        pts.append(z)
        if others.size:
            d = np.abs(roots[others] - z)
            j = int(np.argmin(d))
            hit = others[j]
            if d[j] < radii[j]:
                if capture or hit != target:
                    stop = numerics.delta0_factor * p.local_separation(hit)
                    pts += _close_in(p, field, z, zval, zarg, roots[hit], stop)
                    pts.append(roots[hit])
                    return np.array(pts), int(hit), "captured"
                return np.array(pts), None, "near"
            if target is not None and not capture and hit == target and len(pts) > 3:
                prev = abs(pts[-2] - roots[target])
                if d[j] > prev and d[j] < 0.5 * sep + 10 * h0:
                    pts.append(z)
                    return np.array(pts), None, "passed"


def _rk4(p, field, z, zval, zarg, h):
    """One RK4 step, halving h on lift strain; returns the new point, p there, its arg and h."""
    for _ in range(40):
        try:
            k1 = field(z, zval, zarg)
            k2 = field(z + 0.5 * h * k1, zval, zarg)
            k3 = field(z + 0.5 * h * k2, zval, zarg)
            k4 = field(z + h * k3, zval, zarg)
            nz = z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            nval = p(nz)
            ninc = float(np.angle(nval / zval))
            if abs(ninc) > _MAX_LIFT_STEP:
                raise ShootStalled("lift strain")
            return nz, nval, zarg + ninc, h
        except ShootStalled:
            h *= 0.5
    raise ShootStalled(f"step collapsed near {z:.6g}")


def _close_in(p, field, z, zval, zarg, root, stop):
    """Steps of a fixed fraction of the remaining distance towards a captured root.

    Ends once within ``stop`` (the start offset used when leaving a root) or
    when the distance stops shrinking, so the final chord is as short as the
    first one.
    """
    out = []
    d = abs(z - root)
    while d > stop and len(out) < 400:
        try:
            nz, nval, narg, _ = _rk4(p, field, z, zval, zarg, _NEAR_STEP * d)
        except ShootStalled:
            break
        nd = abs(nz - root)
        if nd >= d:
            break
        z, zval, zarg, d = nz, nval, narg, nd
        out.append(z)
    return out


def _fine(numerics):
    # returned curves are resampled, and the spline error follows the raw spacing
    return numerics.with_(shoot_step_factor=numerics.shoot_step_factor / 10)


def slag_shoot(p, n, root_index, phi, branch=0, max_length=None, numerics=DEFAULT, n_points=None):
    """Constant-phase curve of phase ``phi`` leaving the root ``root_index``.

    Stops at ``max_length`` (default 10 domain diameters), on reaching
    another root (pinned there) or on leaving the domain box. The samples are
    resampled to uniform spacing.
    """
    _, diameter = _geometry(p, numerics)
    if max_length is None:
        max_length = 10 * diameter
    pts, hit, reason = _trajectory(p, n, root_index, phi, branch, max_length, _fine(numerics))
    curve = MarkedCurve(pts, root_index, hit)
    curve = resample_count(curve, n_points or numerics.n_points)
    return Shot(curve, float(phi), int(branch), hit is not None, reason)


def _signed_miss(p, n, a, b, phi, branch, numerics, max_length):
    """Signed distance of root b from the trajectory (positive: b on the left)."""
    pts, hit, reason = _trajectory(p, n, a, phi, branch, max_length, numerics, target=b, capture=False)
    target = p.roots[b]
    if reason == "near":
        # aim of the last step, extended as a line past the target
        d = pts[-1] - pts[-2]
        return float(np.imag(np.conj(d) * (target - pts[-1])) / abs(d))
    seg_a, seg_b = pts[:-1], pts[1:]
    d = seg_b - seg_a
    u = np.clip(np.real((target - seg_a) * np.conj(d)) / np.maximum(np.abs(d) ** 2, 1e-300), 0, 1)
    foot = seg_a + u * d
    k = int(np.argmin(np.abs(target - foot)))
    dist = abs(target - foot[k])
    side = np.sign(np.imag(np.conj(d[k]) * (target - foot[k])))
    return float(side * dist) if side != 0 else 0.0


def slag_connect(p, n, root_a, root_b, window, branch=0, numerics=DEFAULT, max_length=None):
    """Constant-phase connector from ``root_a`` to ``root_b`` with phase in ``window``.

    Bisects on phi over the signed miss at ``root_b``. Returns
    ``(curve, phi_star)``; raises NotFound without a sign change.
    """
    lo, hi = float(window[0]), float(window[1])
    _, diameter = _geometry(p, numerics)
    if max_length is None:
        max_length = 10 * diameter
    f_lo = _signed_miss(p, n, root_a, root_b, lo, branch, numerics, max_length)
    f_hi = _signed_miss(p, n, root_a, root_b, hi, branch, numerics, max_length)
    if f_lo == 0:
        hi = lo
    elif f_hi == 0:
        lo = hi
    elif np.sign(f_lo) == np.sign(f_hi):
        raise NotFound(f"miss does not change sign on [{lo:.6g}, {hi:.6g}]")
    while hi - lo > numerics.bisect_tol:
        mid = 0.5 * (lo + hi)
        f_mid = _signed_miss(p, n, root_a, root_b, mid, branch, numerics, max_length)
        if f_mid == 0:
            lo = hi = mid
            break
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    phi_star = 0.5 * (lo + hi)
    pts, hit, _ = _trajectory(p, n, root_a, phi_star, branch, max_length, _fine(numerics))
    if hit != root_b:
        raise NotFound(f"trajectory at phi={phi_star:.12g} did not reach root {root_b}")
    pts = _join_halves(p, n, pts, root_b, phi_star, max_length, _fine(numerics))
    curve = resample_count(MarkedCurve(pts, root_a, root_b), numerics.n_points)
    return curve, phi_star


def _join_halves(p, n, pts, root_b, phi, max_length, numerics):
    """Blend the second half of a connector into the shot leaving ``root_b``.

    A shot pinned onto its terminal root carries the residual phase error of
    the bisection there; shooting back from that root makes both ends exact.
    The two shots are cross-faded over the middle third so the seam stays
    smooth. Falls back to ``pts`` if the reverse shot misses the first root.
    """
    arc = _arclength(pts)
    total = arc[-1]
    # the reversed curve has phase phi + pi on the branch leaving root_b
    # in the direction the forward shot arrived from
    arrival = float(np.angle(pts[-2] - pts[-1]))
    back = None
    for branch in range(n):
        beta = start_direction(p, n, root_b, phi + np.pi, branch)
        if abs(np.angle(np.exp(1j * (beta - arrival)))) < np.pi / (2 * n):
            try:
                back, hit, _ = _trajectory(p, n, root_b, phi + np.pi, branch, max_length, numerics)
            except ShootStalled:
                return pts
            break
    if back is None or hit is None or p.roots[hit] != pts[0]:
        return pts
    back = back[::-1]
    back_arc = _arclength(back)
    # both halves in the forward arclength; the totals agree to the step error
    back_s = back_arc * (total / back_arc[-1])
    lo, hi = total / 3, 2 * total / 3
    keep = arc < hi
    s_mid = arc[keep]
    w = np.clip((s_mid - lo) / (hi - lo), 0, 1)
    w = w * w * (3 - 2 * w)
    spline = CubicSpline(back_s, np.column_stack([back.real, back.imag]))
    other = spline(s_mid)
    blended = (1 - w) * pts[keep] + w * (other[:, 0] + 1j * other[:, 1])
    return np.concatenate([blended, back[back_s > hi]])


def _arclength(z):
    return np.concatenate([[0.0], np.cumsum(np.abs(np.diff(z)))])


@dataclass(frozen=True)
class LocalModel:
    points: np.ndarray
    tangent: np.ndarray
    phase: np.ndarray


def local_model_curve(n, c, samples=200, eps=1e-3):
    """The constant-phase curve Im(z^n) = c in the sector 0 < arg z < pi/n.

    Traversed from the ray of angle pi/n towards the real axis, so that
    arg(gamma') + (n - 1) arg(gamma) vanishes identically. ``eps`` trims the
    sector ends (the curve runs off to infinity there).
    """
    if c <= 0:
        raise ValueError("c must be positive")
    ang = np.linspace((1 - eps) * np.pi / n, eps * np.pi / n, samples)
    r = (c / np.sin(n * ang)) ** (1.0 / n)
    z = r * np.exp(1j * ang)
    # x = Re z^n increases along the traversal; dz/dx = z^(1-n)/n
    tangent = z ** (1 - n)
    tangent = tangent / np.abs(tangent)
    t_arg = np.unwrap(np.angle(tangent))
    t_arg += 2 * np.pi * np.round(((1 - n) * ang[0] - t_arg[0]) / (2 * np.pi))
    phase = t_arg + (n - 1) * ang
    return LocalModel(z, tangent, phase)
