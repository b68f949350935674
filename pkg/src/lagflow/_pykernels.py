"""Pure-Python/numpy reference implementations of the stepping kernels.

Semantics match ``lagflow._core`` exactly; only speed differs. The interior
map is vectorized with numpy, the boundary sweep is a plain Python loop
because Gauss-Seidel order matters.
"""

import math

import numpy as np

LOG, INVERSE, ARCTAN, PURE = 0, 1, 2, 3


def _profile(br, lam, a, b, amb, s):
    if br == PURE:
        return np.arctan(lam)
    if br == INVERSE:
        return -math.sqrt(2.0) / (1.0 + lam)
    if br == ARCTAN:
        return (s / b) * np.arctan((lam + a - b) / (lam + a + b))
    hi = lam + a + b
    ratio = 2.0 * b / hi
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(ratio < 0.5, np.log1p(-ratio), np.log(lam + amb) - np.log(hi))
    return (s / (2.0 * b)) * out


def _profile_d1(br, lam, a, b, amb, s):
    if br == PURE:
        return 1.0 / (1.0 + lam * lam)
    if br == INVERSE:
        return math.sqrt(2.0) / ((1.0 + lam) * (1.0 + lam))
    if br == ARCTAN:
        return s / ((lam + a) * (lam + a) + b * b)
    return s / ((lam + amb) * (lam + a + b))


def interior_rhs(u, interior, ny, inv_h2, f_int, op, udot, lam_lo, lam_hi, dmax, nthreads=1):
    """Fill ``udot = F(lambda(D^2 u)) - f`` and the Hessian spectra at interior nodes.

    ``dmax`` receives the largest eigenvalue of the coefficient matrix F^{ij}
    per node. Nodes with a non-positive eigenvalue get ``udot = nan``.
    """
    br, a, b, amb, s = op
    k = interior
    c = u[k]
    u11 = (u[k + ny] - 2.0 * c + u[k - ny]) * inv_h2
    u22 = (u[k + 1] - 2.0 * c + u[k - 1]) * inv_h2
    u12 = (u[k + ny + 1] - u[k + ny - 1] - u[k - ny + 1] + u[k - ny - 1]) * (0.25 * inv_h2)
    m = 0.5 * (u11 + u22)
    d = 0.5 * (u11 - u22)
    r = np.sqrt(d * d + u12 * u12)
    lo = m - r
    hi = m + r
    lam_lo[:] = lo
    lam_hi[:] = hi
    ok = lo > 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        val = _profile(br, lo, a, b, amb, s) + _profile(br, hi, a, b, amb, s) - f_int
        d1 = _profile_d1(br, lo, a, b, amb, s)
    udot[:] = np.where(ok, val, np.nan)
    dmax[:] = np.where(ok, d1, np.nan)


def _h(q1, q2, hc):
    k0, c1, c2, w1, w2 = hc
    d1 = q1 - c1
    d2 = q2 - c2
    return k0 * (1.0 - (w1 * d1 * d1 + w2 * d2 * d2))


def boundary_residual(u, ptr, idx, gw1, gw2, hc):
    res = 0.0
    for r in range(len(ptr) - 1):
        q1 = q2 = 0.0
        for m in range(ptr[r], ptr[r + 1]):
            q1 += gw1[m] * u[idx[m]]
            q2 += gw2[m] * u[idx[m]]
        res = max(res, abs(_h(q1, q2, hc)))
    return res


def boundary_sweep(u, ptr, idx, gw1, gw2, hc, tol, max_sweeps, newton_tol, min_deriv,
                   max_newton=50):
    """Gauss-Seidel sweeps of 1-D Newton solves for ``h(Du(p_b)) = 0``.

    Returns ``(residual, sweeps, status, row)`` with status 0 = ok,
    1 = obliqueness lost, 2 = Newton did not converge.
    """
    k0, c1, c2, w1, w2 = hc
    field = u
    u = field.tolist()
    ptr, idx, gw1, gw2 = ptr.tolist(), idx.tolist(), gw1.tolist(), gw2.tolist()
    out = _sweep(u, ptr, idx, gw1, gw2, hc, tol, max_sweeps, newton_tol, min_deriv, max_newton)
    field[:] = u
    return out


def _sweep(u, ptr, idx, gw1, gw2, hc, tol, max_sweeps, newton_tol, min_deriv, max_newton):
    k0, c1, c2, w1, w2 = hc
    res = boundary_residual(u, ptr, idx, gw1, gw2, hc)
    sweeps = 0
    while res >= tol and sweeps < max_sweeps:
        for r in range(len(ptr) - 1):
            start, stop = ptr[r], ptr[r + 1]
            node = idx[start]
            s1, s2 = gw1[start], gw2[start]
            a1 = a2 = 0.0
            for m in range(start + 1, stop):
                a1 += gw1[m] * u[idx[m]]
                a2 += gw2[m] * u[idx[m]]
            g = u[node]
            converged = False
            for _ in range(max_newton):
                d1 = a1 + g * s1 - c1
                d2 = a2 + g * s2 - c2
                val = k0 * (1.0 - (w1 * d1 * d1 + w2 * d2 * d2))
                deriv = -2.0 * k0 * (w1 * d1 * s1 + w2 * d2 * s2)
                if -deriv < min_deriv:
                    u[node] = g
                    return res, sweeps, 1, r
                if abs(val) <= newton_tol:
                    converged = True
                    break
                step = val / deriv
                g -= step
                if step == 0.0:
                    converged = True
                    break
            u[node] = g
            if not converged:
                return res, sweeps, 2, r
        sweeps += 1
        res = boundary_residual(u, ptr, idx, gw1, gw2, hc)
    return res, sweeps, 0, -1
