"""Complex polynomials with simple roots and branch-tracked fractional powers."""

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT
from .errors import BranchStep, ConfigError, DegenerateRoots

_EPS = np.finfo(float).eps


def principal_arg(z):
    """Argument in (-pi, pi]; a signed-zero imaginary part never yields -pi."""
    a = np.angle(z)
    return np.where(a <= -np.pi, np.pi, a) if np.ndim(a) else (np.pi if a <= -np.pi else float(a))


def _horner(coeffs, t):
    t = np.asarray(t, dtype=complex)
    p = np.zeros_like(t)
    dp = np.zeros_like(t)
    for a in coeffs[::-1]:
        dp = dp * t + p
        p = p * t + a
    return p, dp


def _polish(coeffs, z, iters=8):
    for _ in range(iters):
        p, dp = _horner(coeffs, z)
        ok = dp != 0
        step = np.where(ok, p / np.where(ok, dp, 1.0), 0.0)
        z = z - step
        if np.all(np.abs(step) <= 4 * _EPS * (1 + np.abs(z))):
            break
    return z


def find_roots(coeffs, numerics=DEFAULT):
    """All complex roots of the polynomial with ascending coefficients ``coeffs``.

    Companion-matrix eigenvalues followed by Newton polishing. Raises
    DegenerateRoots when two roots cannot be separated: either closer than
    ``sep_tol`` or inside the ~sqrt(eps) cluster radius that double-precision
    eigenvalues give a repeated root.
    """
    c = np.trim_zeros(np.asarray(coeffs, dtype=complex), "b")
    if c.size < 2:
        raise ValueError("polynomial must have degree >= 1")
    z = np.roots(c[::-1]).astype(complex)
    z = _polish(c, z)
    if z.size > 1:
        radius = 1.0 + np.max(np.abs(z))
        thresh = max(numerics.sep_tol, 16 * np.sqrt(_EPS) * radius)
        d = np.abs(z[:, None] - z[None, :])
        d[np.diag_indices_from(d)] = np.inf
        if d.min() < thresh:
            i, j = np.unravel_index(np.argmin(d), d.shape)
            raise DegenerateRoots(f"roots {z[i]:.6g} and {z[j]:.6g} are not simple (distance {d.min():.3g})")
    order = np.lexsort((z.imag, z.real))
    return [complex(v) for v in z[order]]


@dataclass(frozen=True)
class ComplexPoly:
    """p(t) = sum coeffs[k] t**k with cached simple roots."""

    coeffs: tuple
    roots: tuple = field(default=None)

    def __post_init__(self):
        c = tuple(complex(a) for a in np.trim_zeros(np.asarray(self.coeffs, dtype=complex), "b"))
        if len(c) < 2:
            raise ValueError("polynomial must have degree >= 1")
        object.__setattr__(self, "coeffs", c)
        if self.roots is None:
            object.__setattr__(self, "roots", tuple(find_roots(c)))
        else:
            object.__setattr__(self, "roots", tuple(complex(r) for r in self.roots))

    @classmethod
    def from_roots(cls, roots, leading=1.0, numerics=DEFAULT):
        c = np.poly(np.asarray(roots, dtype=complex))[::-1] * complex(leading)
        return cls(tuple(c), tuple(find_roots(c, numerics)))

    @classmethod
    def from_config(cls, doc, numerics=DEFAULT):
        """Build from ``{"coeffs": [[re, im], ...]}`` or ``{"roots": [...], "leading": [re, im]}``."""
        try:
            if "coeffs" in doc:
                c = [_pair(v) for v in doc["coeffs"]]
                return cls(tuple(c), tuple(find_roots(c, numerics)))
            if "roots" in doc:
                lead = _pair(doc.get("leading", [1.0, 0.0]))
                return cls.from_roots([_pair(v) for v in doc["roots"]], lead, numerics)
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"polynomial: {exc}") from exc
        raise ConfigError("polynomial: expected 'coeffs' or 'roots'")

    def to_config(self):
        return {"coeffs": [[a.real, a.imag] for a in self.coeffs]}

    @property
    def degree(self):
        return len(self.coeffs) - 1

    @property
    def root_array(self):
        return np.asarray(self.roots, dtype=complex)

    def separation(self):
        """Minimum pairwise root distance (inf for a single root)."""
        z = self.root_array
        if z.size < 2:
            return np.inf
        d = np.abs(z[:, None] - z[None, :])
        d[np.diag_indices_from(d)] = np.inf
        return float(d.min())

    def local_separation(self, index):
        z = self.root_array
        d = np.abs(z - z[index])
        d[index] = np.inf
        return float(d.min()) if z.size > 1 else 1.0

    def __call__(self, t):
        if isinstance(t, (complex, float, int)):
            # scalar path: the shooting loops evaluate one point at a time
            v = 0j
            for a in reversed(self.coeffs):
                v = v * t + a
            return v
        return _horner(self.coeffs, t)[0]

    def eval_with_derivative(self, t):
        """Return ``(p(t), p'(t))`` by Horner's scheme."""
        p, dp = _horner(self.coeffs, t)
        if np.ndim(p) == 0:
            return complex(p), complex(dp)
        return p, dp

    def eval_derivatives(self, t):
        """Return ``(p, p', p'')`` at ``t``."""
        t = np.asarray(t, dtype=complex)
        p = np.zeros_like(t)
        d1 = np.zeros_like(t)
        d2 = np.zeros_like(t)
        for a in self.coeffs[::-1]:
            d2 = d2 * t + 2 * d1
            d1 = d1 * t + p
            p = p * t + a
        return p, d1, d2

    def residuals(self):
        return np.abs(self(self.root_array))

    def check(self, numerics=DEFAULT):
        """Verify the simple-root and residual invariants."""
        if self.separation() <= numerics.sep_tol:
            raise DegenerateRoots("roots closer than sep_tol")
        scale = 1.0 + max(abs(a) for a in self.coeffs)
        bad = self.residuals() >= numerics.root_tol * scale * (1 + np.abs(self.root_array)) ** self.degree
        if np.any(bad):
            raise DegenerateRoots("cached roots do not satisfy |p(z)| < root_tol")


def _pair(v):
    if isinstance(v, (int, float)):
        return complex(v)
    re, im = v
    return complex(float(re), float(im))


def eval_with_derivative(p, t):
    return p.eval_with_derivative(t)


def continued_arg(values, start=None, max_step=np.pi / 2):
    """Continuous lift of arg along a sequence of nonzero complex numbers.

    Each increment is the principal arg of the ratio of consecutive samples
    (nearest branch). Raises BranchStep when an increment reaches
    ``max_step``.
    """
    v = np.asarray(values, dtype=complex)
    if v.size == 0:
        return np.zeros(0)
    inc = np.angle(v[1:] / v[:-1])
    if inc.size and np.max(np.abs(inc)) >= max_step:
        k = int(np.argmax(np.abs(inc)))
        raise BranchStep(f"arg jump {inc[k]:.3f} between samples {k} and {k + 1}")
    a0 = principal_arg(v[0]) if start is None else start
    out = np.empty(v.size)
    out[0] = a0
    np.cumsum(inc, out=out[1:])
    out[1:] += a0
    return out


def branch_power(p, path, alpha, start_arg=None):
    """p(path[k])**alpha continued continuously from the principal branch at path[0].

    ``start_arg`` overrides the arg of p at path[0] (for continuing a branch
    chosen elsewhere).
    """
    vals = p(np.asarray(path, dtype=complex))
    if np.any(vals == 0):
        raise BranchStep("path passes through a root of p")
    arg = continued_arg(vals, start_arg)
    return np.abs(vals) ** alpha * np.exp(1j * alpha * arg)
