"""Phase function, |Omega| weight, weighted volume and periods of base curves.

For the O(n)-invariant sphere over a base curve gamma the holomorphic volume
form restricts to (1/2) gamma' p^(n/2 - 1) du times the round S^(n-1) volume,
so everything reduces to one-dimensional integrals along gamma. The sphere
volume factor is dropped throughout.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import DEFAULT
from .curve import MarkedCurve, differential_quantities
from .errors import BranchStep, LiftFailure, WeightUndefined
from .polynomial import continued_arg, principal_arg

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


@dataclass(frozen=True, eq=False)
class PhaseProfile:
    values: np.ndarray
    tangent_arg: np.ndarray
    p_arg: np.ndarray

    @property
    def sup(self):
        return float(np.max(self.values))

    @property
    def inf(self):
        return float(np.min(self.values))

    @property
    def oscillation(self):
        return self.sup - self.inf


@dataclass(frozen=True)
class LagClass:
    """Graded class of the sphere over a path between two roots.

    ``winding`` lists loops ``(root, +1 | -1)`` (counter-clockwise positive)
    traversed from the start root before running straight to the end root.
    """

    n: int
    root_pair: tuple
    winding: tuple = ()
    period: complex = 0j
    phi: float = 0.0
    has_slag: Optional[bool] = None
    notes: tuple = field(default=(), compare=False)

    def to_json(self):
        return {
            "n": self.n,
            "root_pair": list(self.root_pair),
            "winding": [list(w) for w in self.winding],
            "period": [self.period.real, self.period.imag],
            "phi": self.phi,
            "has_slag": self.has_slag,
        }


def _root_scale(p):
    return 1e-12 * (1.0 + max(abs(a) for a in p.coeffs))


def _is_root(p, z):
    return abs(p(z)) <= _root_scale(p)


def phase_profile(c, p, n, order=2):
    """Continuous lift of theta = arg(gamma') + (n/2 - 1) arg p(gamma) along ``c``.

    At pinned endpoints arg p is continued into the root along the curve
    direction: arg p -> arg p'(z) + arg(direction away from z).
    """
    pts = c.points
    dq = differential_quantities(pts, order)
    try:
        t_arg = continued_arg(dq.tangent, max_step=np.pi)
    except BranchStep as exc:
        raise LiftFailure(f"tangent angle: {exc}") from exc
    vals, dvals = p.eval_with_derivative(pts)
    left = _is_root(p, pts[0])
    right = _is_root(p, pts[-1])
    lo, hi = (1 if left else 0), (pts.size - 1 if right else pts.size)
    try:
        inner = continued_arg(vals[lo:hi], max_step=np.pi)
    except BranchStep as exc:
        raise LiftFailure(f"arg p: {exc}") from exc
    p_arg = np.empty(pts.size)
    p_arg[lo:hi] = inner
    if left:
        limit = principal_arg(dvals[0] * dq.tangent[0])
        p_arg[0] = _nearest_lift(limit, p_arg[1])
    if right:
        limit = principal_arg(-dvals[-1] * dq.tangent[-1])
        p_arg[-1] = _nearest_lift(limit, p_arg[-2])
    shift = c.phase_shift(n) if isinstance(c, MarkedCurve) else 0.0
    theta = t_arg + (n / 2 - 1) * p_arg + shift
    return PhaseProfile(theta, t_arg, p_arg)


def _nearest_lift(value, reference):
    return value + 2 * np.pi * np.round((reference - value) / (2 * np.pi))


def omega_weight(p, n, t):
    """|Omega / vol| on the sphere over base point t: 1 / (2 sqrt(|p| + |p'|^2 / 4)).

    The value does not depend on n; n is accepted for interface symmetry.
    """
    val, der = p.eval_with_derivative(t)
    q = np.abs(val) + np.abs(der) ** 2 / 4
    if np.any(q == 0):
        raise WeightUndefined("p and p' vanish simultaneously")
    return 0.5 / np.sqrt(q)


def conformal_factor(p, t):
    """1 + |p'|^2 / (4 |p|): metric of the double cover X^1 pulled back to C."""
    val, der = p.eval_with_derivative(t)
    return 1.0 + np.abs(der) ** 2 / (4 * np.abs(val))


def _quadrature_nodes(points, p):
    """Gauss nodes on every straight piece of the polyline.

    Pieces ending at a root use t = z + delta * v**2 so that the integrands
    |p|^((n-2)/2) and p^((n-2)/2) become smooth in v. Returns node positions,
    complex dt weights and, per node, the index of a non-root sample to
    continue the branch of p from.
    """
    z = np.asarray(points, dtype=complex)
    nseg = z.size - 1
    a, b = z[:-1], z[1:]
    delta = b - a
    t = a[:, None] + delta[:, None] * _GL_NODES[None, :]
    w = np.repeat((delta[:, None] * _GL_WEIGHTS[None, :]), 1, axis=0)
    ref = np.repeat(np.arange(nseg)[:, None], _GL_NODES.size, axis=1)
    if _is_root(p, z[0]):
        v = _GL_NODES
        t[0] = z[0] + delta[0] * v**2
        w[0] = 2 * delta[0] * v * _GL_WEIGHTS
        ref[0] = 1
    if _is_root(p, z[-1]):
        v = _GL_NODES[::-1]
        t[-1] = z[-1] - delta[-1] * v**2
        w[-1] = 2 * delta[-1] * v * _GL_WEIGHTS[::-1]
        ref[-1] = nseg - 1
    return t.ravel(), w.ravel(), ref.ravel()


def weighted_volume(c, p, n, quadrature="gauss"):
    """W(gamma) = integral of |p(gamma)|^((n-2)/2) |dgamma|.

    ``quadrature="gauss"`` integrates exactly along the polyline through the
    samples (root-adjacent pieces are desingularised); ``"trapezoid"`` is the
    plain composite rule on the samples.
    """
    pts = c.points if isinstance(c, MarkedCurve) else np.asarray(c, dtype=complex)
    alpha = (n - 2) / 2
    if quadrature == "trapezoid":
        f = np.abs(p(pts)) ** alpha
        return float(np.sum(0.5 * (f[1:] + f[:-1]) * np.abs(np.diff(pts))))
    t, w, _ = _quadrature_nodes(pts, p)
    return float(np.sum(np.abs(p(t)) ** alpha * np.abs(w)))


def weighted_measure(c, p, n):
    """Trapezoid weights of |p|^((n-2)/2) ds at the curve samples."""
    pts = c.points
    f = np.abs(p(pts)) ** ((n - 2) / 2)
    h = np.abs(np.diff(pts))
    m = np.zeros(pts.size)
    m[:-1] += 0.5 * h
    m[1:] += 0.5 * h
    return f * m


def phase_statistics(c, p, n, profile=None):
    """Weighted mean phase and weighted L2 phase variance (unnormalised)."""
    profile = profile or phase_profile(c, p, n)
    m = weighted_measure(c, p, n)
    mean = float(np.sum(profile.values * m) / np.sum(m))
    var = float(np.sum((profile.values - mean) ** 2 * m))
    return mean, var


def period(path, p, n, quadrature="gauss"):
    """Integral of p^((n-2)/2) dt along ``path`` with the branch continued from
    the principal value at the first non-root sample.

    A MarkedCurve on ``sheet`` 1 uses the other branch (sign flip for odd n).
    """
    z = np.asarray(path.points if isinstance(path, MarkedCurve) else path, dtype=complex)
    sign = (-1) ** ((n - 2) * path.sheet) if isinstance(path, MarkedCurve) else 1
    return sign * _period(z, p, n, quadrature)


def _period(z, p, n, quadrature):
    alpha = (n - 2) / 2
    if float(alpha).is_integer():
        if quadrature == "trapezoid":
            f = p(z) ** int(alpha)
            return complex(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(z)))
        t, w, _ = _quadrature_nodes(z, p)
        return complex(np.sum(p(t) ** int(alpha) * w))
    vals = p(z)
    left = _is_root(p, z[0])
    right = _is_root(p, z[-1])
    lo, hi = (1 if left else 0), (z.size - 1 if right else z.size)
    arg = np.zeros(z.size)
    arg[lo:hi] = continued_arg(vals[lo:hi])
    if quadrature == "trapezoid":
        f = np.zeros(z.size, dtype=complex)
        f[lo:hi] = np.abs(vals[lo:hi]) ** alpha * np.exp(1j * alpha * arg[lo:hi])
        return complex(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(z)))
    t, w, ref = _quadrature_nodes(z, p)
    pt = p(t)
    node_arg = arg[ref] + np.angle(pt / vals[ref])
    f = np.abs(pt) ** alpha * np.exp(1j * alpha * node_arg)
    return complex(np.sum(f * w))


def phase_reference(c, p, n):
    """Weighted mean of the curve's own phase lift; centre of the phi lift window."""
    curve = c if isinstance(c, MarkedCurve) else MarkedCurve(np.asarray(c, dtype=complex))
    return phase_statistics(curve, p, n)[0]


def lift_phase(value, reference):
    """Lift of arg ``value`` into [reference - pi, reference + pi)."""
    a = principal_arg(value)
    return float(a + 2 * np.pi * np.floor((reference - a + np.pi) / (2 * np.pi)))


def period_and_phase(path, p, n, grading=None, quadrature="gauss"):
    """Period of ``path`` and its lifted phase phi.

    ``grading`` is the reference phase fixing the lift window
    [grading - pi, grading + pi); by default the weighted mean of the path's
    own phase profile (plus its grading offset) is used.
    """
    per = period(path, p, n, quadrature)
    if grading is None:
        grading = phase_reference(path, p, n)
    return per, lift_phase(per, grading)


def match_grading(c, p, n, target):
    """Copy of ``c`` whose phase lift has weighted mean nearest ``target``.

    Shifts come in multiples of pi for odd n (a sheet change moves the lift by
    (n - 2) pi) and of 2 pi otherwise.
    """
    step = np.pi if n % 2 else 2 * np.pi
    k = int(np.round((target - phase_reference(c, p, n)) / step))
    shift = k * step
    sheet = c.sheet
    if n % 2 and k % 2:
        sheet = 1 - c.sheet
        shift -= (n - 2) * np.pi * (sheet - c.sheet)
    return c.with_points(c.points, grading_offset=c.grading_offset + int(np.round(shift / (2 * np.pi))), sheet=sheet)
