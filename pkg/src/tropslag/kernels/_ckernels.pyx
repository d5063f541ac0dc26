# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: batched polynomial roots, distances to a polyhedral
set, and Laurent polynomial evaluation."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, exp, fabs, cos, sin, INFINITY, NAN, M_PI

cnp.import_array()

cdef extern from "complex.h" nogil:
    double cabs(double complex)


cdef inline double complex _ratio(const double complex* c, int m, double complex x) nogil:
    # p(x)/p'(x) for p = sum c[k] x^k of degree m, stable for large |x|
    cdef double complex p, dp, y
    cdef int k
    if cabs(x) <= 1.0:
        p = c[m]
        dp = 0
        for k in range(m - 1, -1, -1):
            dp = dp * x + p
            p = p * x + c[k]
        if dp == 0:
            return 0
        return p / dp
    y = 1.0 / x
    p = c[0]
    dp = 0
    for k in range(1, m + 1):
        dp = dp * y + p
        p = p * y + c[k]
    # p is q(y) = y^m p(x); dp is q'(y)
    if m * p - y * dp == 0:
        return 0
    return x * p / (m * p - y * dp)


cdef void _init_hull(const double complex* c, int m, double complex* z) nogil:
    # upper convex hull of (k, log|c_k|) gives one radius per hull segment
    cdef int hull[256]
    cdef double lg[256]
    cdef int h = 0, k, i, j, n, t
    cdef double r, ang, off = 0.7
    for k in range(m + 1):
        lg[k] = log(cabs(c[k])) if cabs(c[k]) > 0 else -INFINITY
    for k in range(m + 1):
        if lg[k] == -INFINITY:
            continue
        while h >= 2 and (lg[hull[h - 1]] - lg[hull[h - 2]]) * (k - hull[h - 2]) <= (lg[k] - lg[hull[h - 2]]) * (hull[h - 1] - hull[h - 2]):
            h -= 1
        hull[h] = k
        h += 1
    t = 0
    for i in range(h - 1):
        n = hull[i + 1] - hull[i]
        r = exp((lg[hull[i]] - lg[hull[i + 1]]) / n)
        for j in range(n):
            ang = 2.0 * M_PI * j / n + 2.0 * M_PI * i / m + off
            z[t] = r * (cos(ang) + 1j * sin(ang))
            t += 1


cdef int _aberth(const double complex* c, int m, double complex* z, int maxit) nogil:
    cdef int it, k, j
    cdef double complex N, s, w
    cdef bint done
    cdef int conv[256]
    for k in range(m):
        conv[k] = 0
    _init_hull(c, m, z)
    for it in range(maxit):
        done = True
        for k in range(m):
            if conv[k]:
                continue
            N = _ratio(c, m, z[k])
            s = 0
            for j in range(m):
                if j != k and z[k] != z[j]:
                    s = s + 1.0 / (z[k] - z[j])
            w = N / (1.0 - N * s)
            z[k] = z[k] - w
            if cabs(w) <= 4e-16 * cabs(z[k]) or cabs(z[k]) == 0:
                conv[k] = 1
            else:
                done = False
        if done:
            break
    for k in range(m):
        z[k] = z[k] - _ratio(c, m, z[k])
    return it


def batch_roots(coeffs, int maxit=500):
    """Roots of each row of ``coeffs`` (low-order coefficient first).

    Returns an (N, d) complex array. Vanishing trailing coefficients give
    roots at 0; vanishing leading coefficients give NaN slots.
    """
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] C = np.ascontiguousarray(coeffs, dtype=np.complex128)
    cdef Py_ssize_t N = C.shape[0], d = C.shape[1] - 1
    if d > 255:
        raise ValueError("degree above 255 not supported")
    out = np.full((N, max(d, 0)), complex(NAN, NAN), dtype=np.complex128)
    cdef cnp.complex128_t[:, ::1] O = out
    cdef cnp.complex128_t[:, ::1] Cv = C
    cdef double complex z[256]
    cdef Py_ssize_t i
    cdef int lo, hi, m, k
    with nogil:
        for i in range(N):
            hi = d
            while hi >= 0 and Cv[i, hi] == 0:
                hi -= 1
            if hi <= 0:
                continue
            lo = 0
            while Cv[i, lo] == 0:
                lo += 1
            for k in range(lo):
                O[i, k] = 0
            m = hi - lo
            if m == 1:
                O[i, lo] = -Cv[i, lo] / Cv[i, hi]
            elif m > 1:
                _aberth(&Cv[i, lo], m, z, maxit)
                for k in range(m):
                    O[i, lo + k] = z[k]
    return out


def segment_distances(points, a, u, tmax):
    """Distance from each point to the nearest of the segments a + t u,
    0 <= t <= tmax (``u`` unit, ``tmax`` may be inf for rays).

    Returns (dist, index of nearest segment, parameter t on it).
    """
    cdef double[:, ::1] P = np.ascontiguousarray(points, dtype=np.float64)
    cdef double[:, ::1] A = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] U = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] L = np.ascontiguousarray(tmax, dtype=np.float64)
    cdef Py_ssize_t N = P.shape[0], S = A.shape[0], n = P.shape[1]
    dist = np.full(N, np.inf)
    idx = np.full(N, -1, dtype=np.intp)
    par = np.zeros(N)
    cdef double[::1] D = dist
    cdef Py_ssize_t[::1] I = idx
    cdef double[::1] TT = par
    cdef Py_ssize_t i, s, k
    cdef double t, d2, best, diff
    with nogil:
        for i in range(N):
            best = INFINITY
            for s in range(S):
                t = 0
                for k in range(n):
                    t = t + (P[i, k] - A[s, k]) * U[s, k]
                if t < 0:
                    t = 0
                elif t > L[s]:
                    t = L[s]
                d2 = 0
                for k in range(n):
                    diff = P[i, k] - A[s, k] - t * U[s, k]
                    d2 = d2 + diff * diff
                if d2 < best:
                    best = d2
                    I[i] = s
                    TT[i] = t
            D[i] = sqrt(best)
    return dist, idx, par


cdef inline void _fill_powers(double xr, double xi, long lo, long hi, double* pr, double* pi) nogil:
    # pr/pi[j] = Re/Im x^(lo + j); real arithmetic avoids the slow C99 complex multiply
    cdef long j, n = hi - lo + 1, z = -lo
    cdef double ar, ai, d, tr
    pr[z] = 1.0
    pi[z] = 0.0
    for j in range(z + 1, n):
        tr = pr[j - 1] * xr - pi[j - 1] * xi
        pi[j] = pr[j - 1] * xi + pi[j - 1] * xr
        pr[j] = tr
    if z > 0:
        d = xr * xr + xi * xi
        ar = xr / d
        ai = -xi / d
        for j in range(z - 1, -1, -1):
            tr = pr[j + 1] * ar - pi[j + 1] * ai
            pi[j] = pr[j + 1] * ai + pi[j + 1] * ar
            pr[j] = tr


def laurent_eval(exps, coeffs, z1, z2):
    """Values of sum_k coeffs[k] z1^e1 z2^e2 and the term scale
    sum_k |coeffs[k] z1^e1 z2^e2| at each point."""
    Ea = np.ascontiguousarray(exps, dtype=np.int64).reshape(-1, 2)
    cdef long[:, ::1] E = Ea
    cdef cnp.complex128_t[::1] C = np.ascontiguousarray(coeffs, dtype=np.complex128)
    cdef cnp.complex128_t[::1] X = np.ascontiguousarray(z1, dtype=np.complex128).ravel()
    cdef cnp.complex128_t[::1] Y = np.ascontiguousarray(z2, dtype=np.complex128).ravel()
    cdef Py_ssize_t N = X.shape[0], K = E.shape[0], i, k
    val = np.zeros(N, dtype=np.complex128)
    scl = np.zeros(N)
    if K == 0:
        return val, scl
    cdef long lo1 = min(0, Ea[:, 0].min()), hi1 = max(0, Ea[:, 0].max())
    cdef long lo2 = min(0, Ea[:, 1].min()), hi2 = max(0, Ea[:, 1].max())
    P1 = np.empty((2, hi1 - lo1 + 1))
    P2 = np.empty((2, hi2 - lo2 + 1))
    cdef double[:, ::1] p1 = P1
    cdef double[:, ::1] p2 = P2
    cdef cnp.complex128_t[::1] V = val
    cdef double[::1] S = scl
    cdef double ar, ai, br, bi, cr, ci, tr, ti, accr, acci, sc
    cdef long a, b
    with nogil:
        for i in range(N):
            _fill_powers(X[i].real, X[i].imag, lo1, hi1, &p1[0, 0], &p1[1, 0])
            _fill_powers(Y[i].real, Y[i].imag, lo2, hi2, &p2[0, 0], &p2[1, 0])
            accr = 0
            acci = 0
            sc = 0
            for k in range(K):
                a = E[k, 0] - lo1
                b = E[k, 1] - lo2
                ar = p1[0, a]
                ai = p1[1, a]
                br = p2[0, b]
                bi = p2[1, b]
                cr = ar * br - ai * bi
                ci = ar * bi + ai * br
                tr = C[k].real * cr - C[k].imag * ci
                ti = C[k].real * ci + C[k].imag * cr
                accr = accr + tr
                acci = acci + ti
                sc = sc + sqrt(tr * tr + ti * ti)
            V[i].real = accr
            V[i].imag = acci
            S[i] = sc
    return val, scl
