"""Compiled per-step kernels for the flow driver.

Each kernel mirrors a numpy reference in curve/geometry/flow and is tested
against it; the driver calls these because a run takes 10^5+ steps.
"""

import numpy as np
from numba import njit

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
GL_NODES = 0.5 * (_GL_X + 1.0)
GL_WEIGHTS = 0.5 * _GL_W


@njit(cache=True)
def fd_weights(x0, xs, m):
    n = xs.size
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - x0
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


@njit(cache=True)
def horner3(coeffs, t):
    p = 0j
    d1 = 0j
    d2 = 0j
    for k in range(coeffs.size - 1, -1, -1):
        d2 = d2 * t + 2 * d1
        d1 = d1 * t + p
        p = p * t + coeffs[k]
    return p, d1, d2


@njit(cache=True)
def _stencil(z, s, k, idx):
    w = fd_weights(s[k], s[idx], 2)
    a = 0j
    b = 0j
    for j in range(idx.size):
        a += w[j, 1] * z[idx[j]]
        b += w[j, 2] * z[idx[j]]
    return a, b


@njit(cache=True)
def derivatives2(z):
    """Second-order chord-length derivatives; same stencils as curve.derivatives."""
    n = z.size
    s = np.zeros(n)
    for k in range(1, n):
        s[k] = s[k - 1] + abs(z[k] - z[k - 1])
    d1 = np.empty(n, dtype=np.complex128)
    d2 = np.empty(n, dtype=np.complex128)
    for k in range(1, n - 1):
        h1 = s[k] - s[k - 1]
        h2 = s[k + 1] - s[k]
        hs = h1 + h2
        d1[k] = -h2 / (h1 * hs) * z[k - 1] + (h2 - h1) / (h1 * h2) * z[k] + h1 / (h2 * hs) * z[k + 1]
        d2[k] = 2 * (z[k - 1] / (h1 * hs) - z[k] / (h1 * h2) + z[k + 1] / (h2 * hs))
    left = np.array([0, 1, 2, 3])
    right = np.array([n - 1, n - 2, n - 3, n - 4])
    d1[0], d2[0] = _stencil(z, s, 0, left)
    d1[n - 1], d2[n - 1] = _stencil(z, s, n - 1, right)
    return d1, d2


@njit(cache=True)
def end_chart(z):
    """Tangent and curvature at nodes 1, 2 from the chart w = sqrt(t - z[0]).

    The third value is the double cover's curvature at the branch point, in
    the w chart and unnormalised.
    """
    root = z[0]
    w = np.empty(5, dtype=np.complex128)
    for j in range(5):
        w[j] = np.sqrt(z[j] - root)
    for j in range(2, 5):
        if (w[j] * np.conj(w[j - 1])).real < 0:
            w[j] = -w[j]
    nodes = np.empty(7, dtype=np.complex128)
    nodes[0] = -w[2]
    nodes[1] = -w[1]
    for j in range(5):
        nodes[2 + j] = w[j]
    sigma = np.zeros(7)
    for j in range(1, 7):
        sigma[j] = sigma[j - 1] + abs(nodes[j] - nodes[j - 1])
    tang = np.empty(2, dtype=np.complex128)
    kap = np.empty(2)
    for q in range(2):
        centre = 3 + q
        lo = 1 + q
        cw = fd_weights(sigma[centre], sigma[lo : lo + 5], 2)
        a = 0j
        b = 0j
        for j in range(5):
            a += cw[j, 1] * nodes[lo + j]
            b += cw[j, 2] * nodes[lo + j]
        tw = a / abs(a)
        kw = (np.conj(a) * b).imag / abs(a) ** 3
        wj = w[q + 1]
        tt = wj * tw
        tang[q] = tt / abs(tt)
        kap[q] = (kw - (1j * tw / wj).real) / abs(2 * wj)
    cw = fd_weights(sigma[2], sigma[0:5], 2)
    a = 0j
    b = 0j
    for j in range(5):
        a += cw[j, 1] * nodes[j]
        b += cw[j, 2] * nodes[j]
    return tang, kap, (np.conj(a) * b).imag / abs(a) ** 3


@njit(cache=True)
def displacement(z, pin_left, pin_right, coeffs, n, chart):
    """V * unit normal at every node (result1 formula); pinned endpoints stay put."""
    d1, d2 = derivatives2(z)
    m = z.size
    tang = np.empty(m, dtype=np.complex128)
    kap = np.empty(m)
    for k in range(m):
        sp = abs(d1[k])
        tang[k] = d1[k] / sp
        kap[k] = (np.conj(d1[k]) * d2[k]).imag / sp**3
    if chart and m >= 9:
        if pin_left:
            tl, kl, _ = end_chart(z)
            tang[1] = tl[0]
            tang[2] = tl[1]
            kap[1] = kl[0]
            kap[2] = kl[1]
        if pin_right:
            tr, kr, _ = end_chart(z[::-1])
            tang[m - 2] = -tr[0]
            tang[m - 3] = -tr[1]
            kap[m - 2] = -kr[0]
            kap[m - 3] = -kr[1]
    out = np.zeros(m, dtype=np.complex128)
    lo = 1 if pin_left else 0
    hi = m - 1 if pin_right else m
    for k in range(lo, hi):
        p, q1, _ = horner3(coeffs, z[k])
        nrm = 1j * tang[k]
        dn = (q1 / p * nrm).real
        g = 1 + abs(q1) ** 2 / (4 * abs(p))
        out[k] = (kap[k] + (1 - n / 2) * dn) / g * nrm
    return out


@njit(cache=True)
def _nearest(value, ref):
    return value + 2 * np.pi * np.round((ref - value) / (2 * np.pi))


@njit(cache=True)
def phase(z, pin_left, pin_right, coeffs, n, offset):
    """theta lift, tangent-arg lift, arg-p lift, min conformal factor, error flag.

    Mirrors geometry.phase_profile (plain FD tangents). flag: 0 ok, 1 tangent
    jump, 2 arg p jump.
    """
    m = z.size
    d1, _ = derivatives2(z)
    targ = np.empty(m)
    parg = np.empty(m)
    flag = 0
    t_prev = d1[0] / abs(d1[0])
    a = np.angle(t_prev)
    if a <= -np.pi:
        a = np.pi
    targ[0] = a
    for k in range(1, m):
        t = d1[k] / abs(d1[k])
        inc = np.angle(t / t_prev)
        if abs(inc) >= np.pi:
            flag = 1
        targ[k] = targ[k - 1] + inc
        t_prev = t
    lo = 1 if pin_left else 0
    hi = m - 1 if pin_right else m
    min_g = np.inf
    p_prev = 0j
    for k in range(lo, hi):
        p, q1, _ = horner3(coeffs, z[k])
        g = 1 + abs(q1) ** 2 / (4 * abs(p))
        if 0 < k < m - 1 and g < min_g:
            min_g = g
        if k == lo:
            a = np.angle(p)
            if a <= -np.pi:
                a = np.pi
            parg[k] = a
        else:
            inc = np.angle(p / p_prev)
            if abs(inc) >= np.pi:
                flag = 2
            parg[k] = parg[k - 1] + inc
        p_prev = p
    if pin_left:
        _, q1, _ = horner3(coeffs, z[0])
        parg[0] = _nearest(np.angle(q1 * d1[0] / abs(d1[0])), parg[1])
    if pin_right:
        _, q1, _ = horner3(coeffs, z[m - 1])
        parg[m - 1] = _nearest(np.angle(-q1 * d1[m - 1] / abs(d1[m - 1])), parg[m - 2])
    theta = targ + (n / 2 - 1) * parg + 2 * np.pi * offset
    return theta, targ, parg, min_g, flag


@njit(cache=True)
def volume(z, pin_left, pin_right, coeffs, n, nodes, weights):
    """Gauss quadrature of |p|^((n-2)/2) |dt| along the polyline (see geometry)."""
    alpha = (n - 2) / 2
    m = z.size
    total = 0.0
    if alpha == 0:
        for k in range(m - 1):
            total += abs(z[k + 1] - z[k])
        return total
    for k in range(m - 1):
        a = z[k]
        b = z[k + 1]
        delta = b - a
        h = abs(delta)
        for j in range(nodes.size):
            if k == 0 and pin_left:
                v = nodes[j]
                t = a + delta * v * v
                wt = 2 * h * v * weights[j]
            elif k == m - 2 and pin_right:
                v = nodes[nodes.size - 1 - j]
                t = b - delta * v * v
                wt = 2 * h * v * weights[nodes.size - 1 - j]
            else:
                t = a + delta * nodes[j]
                wt = h * weights[j]
            p, _, _ = horner3(coeffs, t)
            total += abs(p) ** alpha * wt
    return total


@njit(cache=True)
def min_interior_root_distance(z, roots):
    best = np.inf
    for k in range(1, z.size - 1):
        for r in range(roots.size):
            d = abs(z[k] - roots[r])
            if d < best:
                best = d
    return best


@njit(cache=True)
def guarded_root_distance(z, roots, left_root, right_root, guard):
    """Same contract as curve.min_root_distance; root indices < 0 mean a free end."""
    m = z.size
    s = np.zeros(m)
    for k in range(1, m):
        s[k] = s[k - 1] + abs(z[k] - z[k - 1])
    best = np.inf
    best_r = -1
    best_k = -1
    for k in range(1, m - 1):
        for r in range(roots.size):
            if r == left_root and s[k] < guard:
                continue
            if r == right_root and s[k] > s[m - 1] - guard:
                continue
            d = abs(z[k] - roots[r])
            if d < best:
                best = d
                best_r = r
                best_k = k
    return best, best_r, best_k


@njit(cache=True)
def double_cover_max(z, pin_left, pin_right, coeffs, chart):
    """Largest |curvature| of the lifted curve; same contract as flow.double_cover_curvature."""
    d1, d2 = derivatives2(z)
    m = z.size
    tang = np.empty(m, dtype=np.complex128)
    kap = np.empty(m)
    for k in range(m):
        sp = abs(d1[k])
        tang[k] = d1[k] / sp
        kap[k] = (np.conj(d1[k]) * d2[k]).imag / sp**3
    best = 0.0
    chart = chart and m >= 9
    if chart and pin_left:
        tl, kl, kb = end_chart(z)
        tang[1] = tl[0]
        tang[2] = tl[1]
        kap[1] = kl[0]
        kap[2] = kl[1]
        best = max(best, abs(kb) / np.sqrt(abs(horner3(coeffs, z[0])[1])))
    if chart and pin_right:
        tr, kr, kb = end_chart(z[::-1])
        tang[m - 2] = -tr[0]
        tang[m - 3] = -tr[1]
        kap[m - 2] = -kr[0]
        kap[m - 3] = -kr[1]
        best = max(best, abs(kb) / np.sqrt(abs(horner3(coeffs, z[m - 1])[1])))
    lo = 1 if pin_left else 0
    hi = m - 1 if pin_right else m
    for k in range(lo, hi):
        p, q1, q2 = horner3(coeffs, z[k])
        absp = abs(p)
        q = absp + abs(q1) ** 2 / 4
        nrm = 1j * tang[k]
        dn_log_p = (q1 / p * nrm).real
        dn_log_g = (absp * dn_log_p + 0.5 * (np.conj(q1) * q2 * nrm).real) / q - dn_log_p
        best = max(best, abs(kap[k] - 0.5 * dn_log_g) / np.sqrt(q / absp))
    return best


@njit(cache=True)
def phase_statistics(z, theta, coeffs, n):
    """Weighted mean and unnormalised L2 variance; same as geometry.phase_statistics."""
    m = z.size
    w = np.zeros(m)
    for k in range(m - 1):
        h = 0.5 * abs(z[k + 1] - z[k])
        w[k] += h
        w[k + 1] += h
    total = 0.0
    acc = 0.0
    for k in range(m):
        w[k] *= abs(horner3(coeffs, z[k])[0]) ** ((n - 2) / 2)
        total += w[k]
        acc += w[k] * theta[k]
    mean = acc / total
    var = 0.0
    for k in range(m):
        var += w[k] * (theta[k] - mean) ** 2
    return mean, var
