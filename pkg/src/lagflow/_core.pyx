# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stepping kernels; same contracts as ``lagflow._pykernels``."""

from cython.parallel cimport prange
from libc.math cimport atan, log, log1p, sqrt, fabs, NAN

cdef enum:
    LOG = 0
    INVERSE = 1
    ARCTAN = 2
    PURE = 3


cdef inline double _profile(int br, double lam, double a, double b, double amb,
                            double s) noexcept nogil:
    cdef double hi, ratio
    if br == PURE:
        return atan(lam)
    if br == INVERSE:
        return -sqrt(2.0) / (1.0 + lam)
    if br == ARCTAN:
        return (s / b) * atan((lam + a - b) / (lam + a + b))
    hi = lam + a + b
    ratio = 2.0 * b / hi
    if ratio < 0.5:
        return (s / (2.0 * b)) * log1p(-ratio)
    return (s / (2.0 * b)) * (log(lam + amb) - log(hi))


cdef inline double _profile_d1(int br, double lam, double a, double b, double amb,
                               double s) noexcept nogil:
    if br == PURE:
        return 1.0 / (1.0 + lam * lam)
    if br == INVERSE:
        return sqrt(2.0) / ((1.0 + lam) * (1.0 + lam))
    if br == ARCTAN:
        return s / ((lam + a) * (lam + a) + b * b)
    return s / ((lam + amb) * (lam + a + b))


def interior_rhs(const double[::1] u, const long long[::1] interior, Py_ssize_t ny,
                 double inv_h2, const double[::1] f_int, tuple op,
                 double[::1] udot, double[::1] lam_lo, double[::1] lam_hi,
                 double[::1] dmax, int nthreads=1):
    cdef int br = op[0]
    cdef double a = op[1], b = op[2], amb = op[3], s = op[4]
    cdef Py_ssize_t n = interior.shape[0], t
    cdef long long k
    cdef double c, u11, u22, u12, m, m2, r, lo, hi
    for t in prange(n, nogil=True, num_threads=nthreads, schedule="static"):
        k = interior[t]
        c = u[k]
        u11 = (u[k + ny] - 2.0 * c + u[k - ny]) * inv_h2
        u22 = (u[k + 1] - 2.0 * c + u[k - 1]) * inv_h2
        u12 = (u[k + ny + 1] - u[k + ny - 1] - u[k - ny + 1] + u[k - ny - 1]) * (0.25 * inv_h2)
        m = 0.5 * (u11 + u22)
        m2 = 0.5 * (u11 - u22)
        r = sqrt(m2 * m2 + u12 * u12)
        lo = m - r
        hi = m + r
        lam_lo[t] = lo
        lam_hi[t] = hi
        if lo > 0.0:
            udot[t] = _profile(br, lo, a, b, amb, s) + _profile(br, hi, a, b, amb, s) - f_int[t]
            dmax[t] = _profile_d1(br, lo, a, b, amb, s)
        else:
            udot[t] = NAN
            dmax[t] = NAN


cdef double _residual(double[::1] u, const long long[::1] ptr, const long long[::1] idx,
                      const double[::1] gw1, const double[::1] gw2, double k0, double c1,
                      double c2, double w1, double w2) noexcept nogil:
    cdef Py_ssize_t r, m, nb = ptr.shape[0] - 1
    cdef double q1, q2, d1, d2, val, res = 0.0
    for r in range(nb):
        q1 = 0.0
        q2 = 0.0
        for m in range(ptr[r], ptr[r + 1]):
            q1 = q1 + gw1[m] * u[idx[m]]
            q2 = q2 + gw2[m] * u[idx[m]]
        d1 = q1 - c1
        d2 = q2 - c2
        val = fabs(k0 * (1.0 - (w1 * d1 * d1 + w2 * d2 * d2)))
        if val > res:
            res = val
    return res


def boundary_residual(double[::1] u, const long long[::1] ptr, const long long[::1] idx,
                      const double[::1] gw1, const double[::1] gw2, tuple hc):
    return _residual(u, ptr, idx, gw1, gw2, hc[0], hc[1], hc[2], hc[3], hc[4])


def boundary_sweep(double[::1] u, const long long[::1] ptr, const long long[::1] idx,
                   const double[::1] gw1, const double[::1] gw2, tuple hc, double tol,
                   int max_sweeps, double newton_tol, double min_deriv, int max_newton=50):
    cdef double k0 = hc[0], c1 = hc[1], c2 = hc[2], w1 = hc[3], w2 = hc[4]
    cdef Py_ssize_t r, m, start, stop, nb = ptr.shape[0] - 1
    cdef long long node
    cdef int it, sweeps = 0, converged
    cdef double s1, s2, a1, a2, g, d1, d2, val, deriv, step, res
    res = _residual(u, ptr, idx, gw1, gw2, k0, c1, c2, w1, w2)
    while res >= tol and sweeps < max_sweeps:
        for r in range(nb):
            start = ptr[r]
            stop = ptr[r + 1]
            node = idx[start]
            s1 = gw1[start]
            s2 = gw2[start]
            a1 = 0.0
            a2 = 0.0
            for m in range(start + 1, stop):
                a1 = a1 + gw1[m] * u[idx[m]]
                a2 = a2 + gw2[m] * u[idx[m]]
            g = u[node]
            converged = 0
            for it in range(max_newton):
                d1 = a1 + g * s1 - c1
                d2 = a2 + g * s2 - c2
                val = k0 * (1.0 - (w1 * d1 * d1 + w2 * d2 * d2))
                deriv = -2.0 * k0 * (w1 * d1 * s1 + w2 * d2 * s2)
                if -deriv < min_deriv:
                    u[node] = g
                    return res, sweeps, 1, r
                if fabs(val) <= newton_tol:
                    converged = 1
                    break
                step = val / deriv
                g = g - step
                if step == 0.0:
                    converged = 1
                    break
            u[node] = g
            if not converged:
                return res, sweeps, 2, r
        sweeps += 1
        res = _residual(u, ptr, idx, gw1, gw2, k0, c1, c2, w1, w2)
    return res, sweeps, 0, -1
