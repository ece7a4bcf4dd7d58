"""Reduced flow of the base curve: velocities, time stepping, monitors, surgery.

The curve moves with normal speed

    V = (kappa + (1 - n/2) d_n log|p|) / (1 + |p'|^2 / (4|p|)),

i.e. the arclength derivative of the phase divided by the conformal factor of
the branched double cover. Three algebraically equivalent expressions are
provided; they are computed independently so that their agreement is a check.
"""

import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from . import _kernels as _k
from .config import DEFAULT
from .curve import (
    Differential,
    MarkedCurve,
    bezier,
    differential_quantities,
    min_root_distance,
    resample,
    spacing_ok,
)
from .errors import LiftFailure, NearRoot, SplitFailed, StepRejected
from .geometry import PhaseProfile, phase_profile, phase_statistics
from .polynomial import ComplexPoly

log = logging.getLogger(__name__)

FORMULAS = ("result1", "conformal", "double_cover")
CSV_COLUMNS = (
    "tau",
    "sup_theta",
    "inf_theta",
    "weighted_volume",
    "min_root_dist",
    "max_curvature_dc",
    "dt",
    "theta_bar",
    "l2_phase_var",
)


class Record(NamedTuple):
    tau: float
    sup_theta: float
    inf_theta: float
    weighted_volume: float
    min_root_dist: float
    max_curvature_dc: float
    dt: float
    theta_bar: float
    l2_phase_var: float


@dataclass
class Verdict:
    kind: str  # Converged | SplitAt | StepFailure | MaxTime
    root: Optional[int] = None
    tau: Optional[float] = None
    message: str = ""

    def to_json(self):
        out = {"kind": self.kind}
        if self.root is not None:
            out["root"] = self.root
        if self.tau is not None:
            out["tau"] = self.tau
        if self.message:
            out["message"] = self.message
        return out


@dataclass
class FlowReport:
    series: List[Record] = field(default_factory=list)
    verdict: Optional[Verdict] = None
    children: list = field(default_factory=list)
    final_curve: Optional[MarkedCurve] = None
    steps: int = 0
    rejected: int = 0
    diagnostics: list = field(default_factory=list)

    def leaves(self):
        if not self.children:
            return [self]
        return [leaf for child in self.children for leaf in child.leaves()]


# ---------------------------------------------------------------------------
# local differential data


def _end_stencils(z, root):
    """Quantities near a pinned endpoint from the chart w = sqrt(t - root).

    The doubled curve (-w_2, -w_1, 0, w_1, ...) is smooth through the branch
    point, so stencils there are centred. Returns tangents and curvatures of
    the downstairs curve at nodes 1 and 2, and the curvature of the double
    cover at the branch point (in the w chart, unnormalised).
    """
    w = np.sqrt(z[:5] - root)
    for j in range(2, 5):
        if np.real(w[j] * np.conj(w[j - 1])) < 0:
            w[j] = -w[j]
    nodes = np.concatenate((-w[2:0:-1], w))
    sigma = np.concatenate(([0.0], np.cumsum(np.abs(np.diff(nodes)))))
    out = []
    for centre, lo in ((2, 0), (3, 1), (4, 2)):
        idx = slice(lo, lo + 5)
        cw = _k.fd_weights(sigma[centre], sigma[idx], 2)
        d1 = cw[:, 1] @ nodes[idx]
        d2 = cw[:, 2] @ nodes[idx]
        out.append((d1, d2))
    (b1, b2), rest = out[0], out[1:]
    kappa_branch = np.imag(np.conj(b1) * b2) / np.abs(b1) ** 3
    tangents, kappas = [], []
    for j, (d1, d2) in zip((1, 2), rest):
        tw = d1 / np.abs(d1)
        kw = np.imag(np.conj(d1) * d2) / np.abs(d1) ** 3
        wj = w[j]
        tt = wj * tw
        tangents.append(tt / np.abs(tt))
        kappas.append((kw - np.real(1j * tw / wj)) / np.abs(2 * wj))
    return np.array(tangents), np.array(kappas), float(kappa_branch)


def curve_differentials(c, p, endpoint_mode="double_cover", order=2):
    """Tangent, normal and curvature, with the double-cover chart near pinned ends."""
    dq = differential_quantities(c, order)
    if endpoint_mode != "double_cover":
        return dq, None
    t, kappa = dq.tangent.copy(), dq.curvature.copy()
    branch = []
    z = c.points
    if c.left_root is not None and z.size >= 9:
        tl, kl, kb = _end_stencils(z, z[0])
        t[1:3], kappa[1:3] = tl, kl
        branch.append((0, kb))
    if c.right_root is not None and z.size >= 9:
        tr, kr, kb = _end_stencils(z[::-1], z[-1])
        t[-2:-4:-1], kappa[-2:-4:-1] = -tr, -kr
        branch.append((z.size - 1, kb))
    return Differential(t, 1j * t, kappa, dq.s), branch


def _check_near_root(c, p, eps_root):
    z = c.points[1:-1]
    d = np.abs(z[:, None] - p.root_array[None, :])
    if d.size and d.min() <= eps_root:
        k, r = np.unravel_index(np.argmin(d), d.shape)
        raise NearRoot(f"point {k + 1} is {d[k, r]:.3g} from root {r}")


def velocity_terms(z, normal, kappa, p, n, formula="result1"):
    """Signed normal speed at the points ``z`` with given normals and curvature."""
    val, d1, d2 = p.eval_derivatives(z)
    absp = np.abs(val)
    dn_log_p = np.real(d1 / val * normal)
    if formula == "result1":
        return (kappa + (1 - n / 2) * dn_log_p) / (1 + np.abs(d1) ** 2 / (4 * absp))
    if formula == "conformal":
        g = absp ** (n - 2)
        f = absp ** (n - 1) / (absp + np.abs(d1) ** 2 / 4)
        dn_log_g = (n - 2) * dn_log_p
        return f / g * (kappa - 0.5 * dn_log_g)
    if formula == "double_cover":
        q = absp + np.abs(d1) ** 2 / 4
        big_g = q / absp
        dn_log_q = (absp * dn_log_p + 0.5 * np.real(np.conj(d1) * d2 * normal)) / q
        dn_log_big_g = dn_log_q - dn_log_p
        # mean curvature of the double cover and unit-normal derivatives there,
        # pushed down with the conformal factor big_g
        mcv1 = (kappa - 0.5 * dn_log_big_g) / big_g
        return mcv1 - 0.5 * (n - 1) * dn_log_p / big_g + 0.5 * dn_log_q / big_g
    raise ValueError(f"unknown formula {formula!r}")


def velocity(c, p, n, formula="result1", numerics=DEFAULT, endpoint_mode="double_cover", dq=None, order=2):
    """Normal speed at every point of ``c``; zero at pinned endpoints.

    ``order`` selects 2nd or 4th order stencils for tangent and curvature.
    """
    _check_near_root(c, p, numerics.eps_root)
    if dq is None:
        dq, _ = curve_differentials(c, p, endpoint_mode, order)
    z = c.points
    v = np.zeros(z.size)
    lo = 1 if c.left_root is not None else 0
    hi = z.size - 1 if c.right_root is not None else z.size
    v[lo:hi] = velocity_terms(z[lo:hi], dq.normal[lo:hi], dq.curvature[lo:hi], p, n, formula)
    return v


def formula_disagreement(c, p, n):
    """Largest pointwise relative disagreement among the three velocity formulas.

    All three share one set of discrete normals and curvatures. The
    denominator is floored at 1e-12 times the size of the individual terms so
    that points where V cancels to roundoff do not dominate.
    """
    dq = differential_quantities(c)
    z, nrm, kap = c.points, dq.normal, dq.curvature
    vs = [velocity_terms(z, nrm, kap, p, n, f) for f in FORMULAS]
    val, d1 = p.eval_with_derivative(z)
    floor = 1e-12 * (np.abs(kap) + abs(1 - n / 2) * np.abs(d1 / val))
    worst = 0.0
    for i in range(3):
        for j in range(i + 1, 3):
            den = np.maximum(np.maximum(np.abs(vs[i]), np.abs(vs[j])), floor)
            worst = max(worst, float(np.max(np.abs(vs[i] - vs[j]) / den)))
    return worst


def crosscheck(seed=0, count=100, dimensions=(2, 3, 4, 6), n_points=200, clearance=0.1):
    """Formula agreement on random cubic Bezier curves against random cubic p.

    Curves passing within ``clearance`` of a root are redrawn. Returns a list
    of ``(n, disagreement)``.
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        n = int(dimensions[i % len(dimensions)])
        p = ComplexPoly.from_roots(rng.normal(size=3) + 1j * rng.normal(size=3))
        while True:
            ctrl = rng.uniform(-2, 2, 4) + 1j * rng.uniform(-2, 2, 4)
            z = bezier(ctrl, n_points)
            if np.abs(z[:, None] - p.root_array[None, :]).min() > clearance:
                break
        out.append((n, formula_disagreement(MarkedCurve(z), p, n)))
    return out


def double_cover_curvature(c, p, dq, branch):
    """|curvature| of the lifted closed curve in X^1 at every point."""
    z = c.points
    val, d1, d2 = p.eval_derivatives(z)
    out = np.zeros(z.size)
    lo = 1 if c.left_root is not None else 0
    hi = z.size - 1 if c.right_root is not None else z.size
    sl = slice(lo, hi)
    absp = np.abs(val[sl])
    q = absp + np.abs(d1[sl]) ** 2 / 4
    big_g = q / absp
    nrm = dq.normal[sl]
    dn_log_p = np.real(d1[sl] / val[sl] * nrm)
    dn_log_big_g = (absp * dn_log_p + 0.5 * np.real(np.conj(d1[sl]) * d2[sl] * nrm)) / q - dn_log_p
    out[sl] = np.abs(dq.curvature[sl] - 0.5 * dn_log_big_g) / np.sqrt(big_g)
    for k, kb in branch or ():
        out[k] = abs(kb) / np.sqrt(np.abs(d1[k]))
    return out


# ---------------------------------------------------------------------------
# gradient structure and diagnostics


def first_variation_pairing(c, p, n, psi, formula="result1"):
    """-integral of |p|^((n-2)/2) * G * V * psi ds.

    With W the |p|^(n-2) conformal length, this equals d/de W(gamma + e psi n)
    at e = 0 for normal fields psi vanishing at the ends.
    """
    dq = differential_quantities(c)
    z = c.points
    v = np.zeros(z.size)
    v[1:-1] = velocity_terms(z[1:-1], dq.normal[1:-1], dq.curvature[1:-1], p, n, formula)
    val, d1 = p.eval_with_derivative(z)
    absp = np.abs(val)
    with np.errstate(divide="ignore", invalid="ignore"):
        big_g = np.where(absp > 0, 1 + np.abs(d1) ** 2 / (4 * absp), 0.0)
    f = absp ** ((n - 2) / 2) * big_g * v * np.asarray(psi)
    h = np.abs(np.diff(z))
    return float(-np.sum(0.5 * (f[1:] + f[:-1]) * h))


def weighted_laplacian_diagnostic(c, p, n, theta, measure=None, stretch=None):
    """-Delta^Omega theta = (1/m) d/dS (m d theta/dS) at interior points.

    m = |Omega| R^(n-1) with R = |p|^(1/2) the fibre radius, S the arclength
    of the lifted curve, dS = sqrt(G) ds. ``measure``/``stretch`` override m
    and sqrt(G) as functions of t. Endpoint values are NaN.
    """
    z = c.points
    vals = theta.values if hasattr(theta, "values") else np.asarray(theta)
    mid = 0.5 * (z[1:] + z[:-1])

    def m_of(t):
        if measure is not None:
            return measure(t)
        val, d1 = p.eval_with_derivative(t)
        absp = np.abs(val)
        return 0.5 * absp ** ((n - 1) / 2) / np.sqrt(absp + np.abs(d1) ** 2 / 4)

    def stretch_of(t):
        if stretch is not None:
            return stretch(t)
        val, d1 = p.eval_with_derivative(t)
        return np.sqrt(1 + np.abs(d1) ** 2 / (4 * np.abs(val)))

    ds_mid = np.abs(np.diff(z)) * stretch_of(mid)
    flux = m_of(mid) * np.diff(vals) / ds_mid
    out = np.full(z.size, np.nan)
    out[1:-1] = (flux[1:] - flux[:-1]) / (m_of(z[1:-1]) * 0.5 * (ds_mid[1:] + ds_mid[:-1]))
    return out


def cone_variation(c, profile, window):
    """Largest variation of the tangent angle over any arclength window."""
    s = c.arclength()
    a = profile.tangent_arg
    worst = 0.0
    j = 0
    for i in range(s.size):
        while j < s.size - 1 and s[j + 1] - s[i] <= window:
            j += 1
        seg = a[i : j + 1]
        worst = max(worst, float(seg.max() - seg.min()))
    return worst


# ---------------------------------------------------------------------------
# stepping


@dataclass
class _State:
    curve: MarkedCurve
    profile: PhaseProfile
    volume: float
    min_g: float


@dataclass(frozen=True)
class _Context:
    p: object
    n: int
    numerics: object
    target_h: Optional[float]
    formula: str
    endpoint_mode: str
    coeffs: np.ndarray
    roots: np.ndarray

    @classmethod
    def make(cls, p, n, numerics, target_h, formula, endpoint_mode):
        if formula not in FORMULAS:
            raise ValueError(f"unknown formula {formula!r}")
        return cls(
            p, n, numerics, target_h, formula, endpoint_mode,
            np.asarray(p.coeffs, dtype=complex), p.root_array,
        )

    @property
    def compiled(self):
        return self.formula == "result1"


def _pins(c):
    return c.left_root is not None, c.right_root is not None


def _state(c, ctx):
    pl, pr = _pins(c)
    theta, targ, parg, min_g, flag = _k.phase(c.points, pl, pr, ctx.coeffs, float(ctx.n), c.phase_shift(ctx.n) / (2 * np.pi))
    if flag:
        raise LiftFailure("tangent angle jump" if flag == 1 else "arg p jump")
    vol = _k.volume(c.points, pl, pr, ctx.coeffs, float(ctx.n), _k.GL_NODES, _k.GL_WEIGHTS)
    return _State(c, PhaseProfile(theta, targ, parg), vol, min_g)


def _regrade(st, reference, ctx):
    shift = int(np.round((np.mean(reference) - np.mean(st.profile.values)) / (2 * np.pi)))
    if not shift:
        return st
    c = st.curve.with_points(st.curve.points, grading_offset=st.curve.grading_offset + shift)
    return _state(c, ctx)


def _displacement(c, ctx):
    chart = ctx.endpoint_mode == "double_cover"
    if ctx.compiled:
        if _k.min_interior_root_distance(c.points, ctx.roots) <= ctx.numerics.eps_root:
            _check_near_root(c, ctx.p, ctx.numerics.eps_root)
        pl, pr = _pins(c)
        return _k.displacement(c.points, pl, pr, ctx.coeffs, float(ctx.n), chart)
    dq, _ = curve_differentials(c, ctx.p, ctx.endpoint_mode)
    v = velocity(c, ctx.p, ctx.n, ctx.formula, ctx.numerics, ctx.endpoint_mode, dq=dq)
    return v * dq.normal


def _advance(st, ctx, dt):
    c = st.curve
    new = c.with_points(c.points + dt * _displacement(c, ctx), time=c.time + dt)
    try:
        nxt = _regrade(_state(new, ctx), st.profile.values, ctx)
    except LiftFailure as exc:
        raise StepRejected(str(exc), "lift") from exc
    tol = ctx.numerics.mp_tol
    if nxt.profile.sup > st.profile.sup + tol:
        raise StepRejected(f"sup theta rose by {nxt.profile.sup - st.profile.sup:.3g}", "max_principle")
    if nxt.profile.inf < st.profile.inf - tol:
        raise StepRejected(f"inf theta fell by {st.profile.inf - nxt.profile.inf:.3g}", "max_principle")
    if nxt.volume > st.volume + tol:
        raise StepRejected(f"weighted volume rose by {nxt.volume - st.volume:.3g}", "volume")
    if ctx.target_h is not None and not spacing_ok(nxt.curve, ctx.target_h, ctx.numerics):
        moved = resample(nxt.curve, ctx.target_h, ctx.numerics.n_min)
        nxt = _regrade(_state(moved, ctx), nxt.profile.values, ctx)
    return nxt


def step(c, p, n, dt, numerics=DEFAULT, target_h=None, formula="result1", endpoint_mode="double_cover"):
    """One explicit Euler step of the normal flow with the monotonicity contract.

    Raises StepRejected when sup theta rises, inf theta falls or the weighted
    volume grows by more than ``mp_tol``.
    """
    ctx = _Context.make(p, n, numerics, target_h, formula, endpoint_mode)
    return _advance(_state(c, ctx), ctx, dt).curve


def stable_dt(c, p, numerics=DEFAULT):
    """c_safety * h_min^2 * min over interior points of the conformal factor."""
    z = c.points[1:-1]
    val, d1 = p.eval_with_derivative(z)
    big_g = 1 + np.abs(d1) ** 2 / (4 * np.abs(val))
    return numerics.c_safety * c.spacing().min() ** 2 * float(big_g.min())


# ---------------------------------------------------------------------------
# surgery


def _smooth_neighbour(pts, end_index, inward):
    """Replace the node next to a snapped endpoint by a local cubic fit."""
    idx = [end_index] + [end_index + inward * k for k in range(2, 7)]
    if min(idx) < 0 or max(idx) >= pts.size:
        return pts
    nb = end_index + inward
    s = np.concatenate(([0.0], np.cumsum(np.abs(np.diff(pts)))))
    x = s[idx] - s[end_index]
    xn = s[nb] - s[end_index]
    re = np.polyval(np.polyfit(x, pts[idx].real, 3), xn)
    im = np.polyval(np.polyfit(x, pts[idx].imag, 3), xn)
    pts = pts.copy()
    pts[nb] = complex(re, im)
    return pts


def _match_grading(piece, piece_nodes, parent_values, p, n, guard=6):
    prof = phase_profile(piece, p, n)
    sel = slice(guard, -guard) if piece_nodes.size > 2 * guard + 1 else slice(None)
    diff = float(np.median(parent_values[piece_nodes][sel] - prof.values[sel]))
    sheet = 0
    # odd n: one sheet change moves the phase by an odd multiple of pi
    if n % 2 and int(np.round(diff / np.pi)) % 2:
        sheet = 1
        diff -= (n - 2) * np.pi
    shift = int(np.round(diff / (2 * np.pi)))
    return piece.with_points(piece.points, grading_offset=piece.grading_offset + shift, sheet=piece.sheet + sheet)


def detect_and_split(c, p, n, numerics=DEFAULT, target_h=None, endpoint_mode="double_cover"):
    """Split the curve at a root it is running into, or return None.

    Fires when an interior point is within ``split_radius`` of a root and moving
    towards it. That point is snapped onto the root, its neighbours are
    re-smoothed and each piece inherits the parent's phase lift on its side.
    """
    h = target_h if target_h is not None else float(np.mean(c.spacing()))
    split_radius = numerics.split_radius_factor * h
    d, r, k = _k.guarded_root_distance(
        c.points,
        p.root_array,
        -1 if c.left_root is None else c.left_root,
        -1 if c.right_root is None else c.right_root,
        numerics.end_guard_factor * h,
    )
    if k < 0 or d >= split_radius:
        return None
    dq, _ = curve_differentials(c, p, endpoint_mode)
    root = p.roots[r]
    sl = slice(k, k + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = velocity_terms(c.points[sl], dq.normal[sl], dq.curvature[sl], p, n)[0]
    if not np.isfinite(v):
        v = 0.0
    toward = np.real(v * dq.normal[k] * np.conj(root - c.points[k]))
    if toward <= 0 and d > 0:
        return None
    if k + 1 < numerics.n_min or c.points.size - k < numerics.n_min:
        raise SplitFailed(f"split at point {k} leaves a piece with fewer than {numerics.n_min} points")
    parent = phase_profile(c, p, n).values
    pts = c.points.copy()
    pts[k] = root
    a_pts = _smooth_neighbour(pts[: k + 1], k, -1)
    b_pts = _smooth_neighbour(pts[k:], 0, +1)
    a = MarkedCurve(a_pts, c.left_root, r, c.time, c.grading_offset, c.sheet)
    b = MarkedCurve(b_pts, r, c.right_root, c.time, c.grading_offset, c.sheet)
    a = _match_grading(a, np.arange(0, k + 1), parent, p, n)
    b = _match_grading(b, np.arange(k, c.points.size), parent, p, n)
    return a, b


# ---------------------------------------------------------------------------
# driver


def _record(st, ctx, dt):
    c, p, n = st.curve, ctx.p, ctx.n
    mean, var = _k.phase_statistics(c.points, st.profile.values, ctx.coeffs, float(n))
    h = ctx.target_h or float(np.mean(c.spacing()))
    pl, pr = _pins(c)
    d, _, _ = _k.guarded_root_distance(
        c.points,
        ctx.roots,
        -1 if c.left_root is None else c.left_root,
        -1 if c.right_root is None else c.right_root,
        ctx.numerics.end_guard_factor * h,
    )
    kdc = _k.double_cover_max(c.points, pl, pr, ctx.coeffs, ctx.endpoint_mode == "double_cover")
    return Record(float(c.time), st.profile.sup, st.profile.inf, st.volume, float(d), kdc, float(dt), mean, var)


def run(
    c,
    p,
    n,
    numerics=DEFAULT,
    target_h=None,
    formula="result1",
    endpoint_mode="double_cover",
    diagnostic_every=0,
    on_step=None,
    _depth=0,
):
    """Flow ``c`` until convergence, surgery, failure or ``tau_max``.

    Returns ``(report, final_curves)``. After a split both pieces are flowed
    on (recursively) and their reports become ``report.children``.
    ``on_step(previous, current)`` receives the states around every accepted
    step (attributes ``curve``, ``profile``, ``volume``).
    """
    if target_h is None:
        target_h = c.length() / max(c.n_segments, 1)
    ctx = _Context.make(p, n, numerics, target_h, formula, endpoint_mode)
    report = FlowReport()
    st = _state(c, ctx)
    dt = numerics.c_safety * c.spacing().min() ** 2 * st.min_g
    steps = 0
    every = max(1, numerics.record_every)
    while True:
        if steps % every == 0:
            report.series.append(_record(st, ctx, dt))
        if st.profile.oscillation < numerics.conv_tol:
            report.verdict = Verdict("Converged", tau=float(st.curve.time))
        elif st.curve.time >= numerics.tau_max or steps >= numerics.max_steps:
            report.verdict = Verdict("MaxTime", tau=float(st.curve.time))
        if report.verdict is not None:
            if steps % every:
                report.series.append(_record(st, ctx, dt))
            break
        pieces = None
        if _depth < numerics.max_split_depth:
            try:
                pieces = detect_and_split(st.curve, p, n, numerics, target_h, endpoint_mode)
            except SplitFailed as exc:
                report.verdict = Verdict("StepFailure", tau=float(st.curve.time), message=str(exc))
                break
        if pieces is not None:
            _, r, _ = min_root_distance(st.curve, p, numerics.end_guard_factor * target_h)
            if steps % every:
                report.series.append(_record(st, ctx, dt))
            report.verdict = Verdict("SplitAt", root=r, tau=float(st.curve.time))
            log.info("split at root %d, tau=%.6g", r, st.curve.time)
            for piece in pieces:
                piece = resample(piece, target_h, numerics.n_min)
                child, _ = run(
                    piece, p, n, numerics, target_h, formula, endpoint_mode, diagnostic_every, on_step, _depth + 1
                )
                report.children.append(child)
            break
        dt = numerics.c_safety * st.curve.spacing().min() ** 2 * st.min_g
        dt = min(dt, max(numerics.tau_max - st.curve.time, 0.0) or np.inf)
        nxt = None
        while nxt is None:
            try:
                nxt = _advance(st, ctx, dt)
            except StepRejected as exc:
                report.rejected += 1
                dt *= 0.5
                if dt < numerics.dt_min:
                    report.verdict = Verdict("StepFailure", tau=float(st.curve.time), message=str(exc))
                    break
            except NearRoot as exc:
                report.verdict = Verdict("StepFailure", tau=float(st.curve.time), message=str(exc))
                break
        if nxt is None:
            break
        if diagnostic_every and steps % diagnostic_every == 0 and nxt.curve.points.size == st.curve.points.size:
            rhs = weighted_laplacian_diagnostic(st.curve, p, n, st.profile)
            lhs = (nxt.profile.values - st.profile.values) / dt
            inner = slice(1, -1)
            rel = np.abs(lhs[inner] - rhs[inner]) / np.maximum(np.abs(rhs[inner]), 1e-300)
            report.diagnostics.append((float(st.curve.time), float(np.median(rel))))
        if on_step is not None:
            on_step(st, nxt)
        st = nxt
        steps += 1
    report.steps = steps
    report.final_curve = st.curve
    finals = [leaf.final_curve for leaf in report.leaves()] if report.children else [st.curve]
    return report, finals
