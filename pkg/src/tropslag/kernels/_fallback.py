"""Pure numpy versions of the compiled kernels."""

from __future__ import annotations

import numpy as np


def _ratio(c, z):
    """p(z)/p'(z) row-wise, evaluated on the reversed polynomial when |z| > 1."""
    m = c.shape[1] - 1
    small = np.abs(z) <= 1.0
    x = np.where(small, z, 0)
    y = np.where(small, 0, 1.0 / np.where(small, 1, z))
    p = np.broadcast_to(c[:, m:m + 1], z.shape).astype(complex)
    dp = np.zeros_like(z)
    q = np.broadcast_to(c[:, 0:1], z.shape).astype(complex)
    dq = np.zeros_like(z)
    for k in range(m - 1, -1, -1):
        dp = dp * x + p
        p = p * x + c[:, k:k + 1]
        dq = dq * y + q
        q = q * y + c[:, m - k:m - k + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        r_small = p / dp
        r_big = z * q / (m * q - y * dq)
    r = np.where(small, r_small, r_big)
    return np.where(np.isfinite(r), r, 0)


def _hull_init(c):
    M, m1 = c.shape
    m = m1 - 1
    z = np.empty((M, m), dtype=complex)
    with np.errstate(divide="ignore"):
        lg = np.log(np.abs(c))
    for r in range(M):
        hull = []
        for k in range(m1):
            if not np.isfinite(lg[r, k]):
                continue
            while len(hull) >= 2:
                a, b = hull[-2], hull[-1]
                if (lg[r, b] - lg[r, a]) * (k - a) <= (lg[r, k] - lg[r, a]) * (b - a):
                    hull.pop()
                else:
                    break
            hull.append(k)
        t = 0
        for i in range(len(hull) - 1):
            n = hull[i + 1] - hull[i]
            rad = np.exp((lg[r, hull[i]] - lg[r, hull[i + 1]]) / n)
            ang = 2 * np.pi * np.arange(n) / n + 2 * np.pi * i / m + 0.7
            z[r, t:t + n] = rad * np.exp(1j * ang)
            t += n
    return z


def _aberth(c, maxit):
    m = c.shape[1] - 1
    z = _hull_init(c)
    active = np.ones(z.shape, dtype=bool)
    off = ~np.eye(m, dtype=bool)
    for _ in range(maxit):
        if not active.any():
            break
        N = _ratio(c, z)
        diff = z[:, :, None] - z[:, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(off & (diff != 0), 1.0 / diff, 0)
        s = inv.sum(axis=2)
        w = N / (1.0 - N * s)
        w = np.where(active & np.isfinite(w), w, 0)
        z = z - w
        active &= ~((np.abs(w) <= 4e-16 * np.abs(z)) | (z == 0))
    return z - _ratio(c, z)


def batch_roots(coeffs, maxit=500):
    C = np.ascontiguousarray(coeffs, dtype=np.complex128)
    N, d1 = C.shape
    d = d1 - 1
    out = np.full((N, max(d, 0)), np.nan + 1j * np.nan)
    nz = C != 0
    hi = np.where(nz.any(axis=1), d - np.argmax(nz[:, ::-1], axis=1), -1)
    lo = np.argmax(nz, axis=1)
    keys = hi * (d + 1) + lo
    for key in np.unique(keys):
        h, l = divmod(int(key), d + 1)
        if h <= 0:
            continue
        rows = np.nonzero(keys == key)[0]
        out[rows, :l] = 0
        m = h - l
        c = C[rows, l:h + 1]
        if m == 1:
            out[rows, l] = -c[:, 0] / c[:, 1]
            continue
        out[rows, l:h] = _aberth(c, maxit)
    return out


def segment_distances(points, a, u, tmax):
    P = np.asarray(points, dtype=float)
    A = np.asarray(a, dtype=float)
    U = np.asarray(u, dtype=float)
    L = np.asarray(tmax, dtype=float)
    if len(A) == 0:
        return np.full(len(P), np.inf), np.full(len(P), -1, dtype=np.intp), np.zeros(len(P))
    rel = P[:, None, :] - A[None, :, :]
    t = np.clip(np.einsum("nsk,sk->ns", rel, U), 0.0, L[None, :])
    d2 = np.sum((rel - t[..., None] * U[None]) ** 2, axis=2)
    idx = np.argmin(d2, axis=1)
    r = np.arange(len(P))
    return np.sqrt(d2[r, idx]), idx.astype(np.intp), t[r, idx]


def laurent_eval(exps, coeffs, z1, z2):
    E = np.asarray(exps, dtype=np.int64).reshape(-1, 2)
    C = np.asarray(coeffs, dtype=complex)
    X = np.asarray(z1, dtype=complex).ravel()[:, None]
    Y = np.asarray(z2, dtype=complex).ravel()[:, None]
    terms = C[None, :] * X ** E[None, :, 0] * Y ** E[None, :, 1]
    return terms.sum(axis=1), np.abs(terms).sum(axis=1)
