"""Hyperkaehler-rotated coordinates, cylinder models, sampling of vertex
curves, asymptotic decay along ends, and lifting to the base."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import kernels, lattice
from .errors import ComponentNotFound, EmptyWindow, SchemaError, ZeroCoordinate
from .pointcloud import PointCloud
from .vertex import Facet, LaurentPoly

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class KahlerData:
    g: tuple  # n x n rationals
    theta_hat: float

    def __post_init__(self):
        G = [[Fraction(x) for x in row] for row in self.g]
        n = len(G)
        if any(len(r) != n for r in G):
            raise SchemaError("metric must be square")
        for i in range(n):
            for j in range(n):
                if G[i][j] != G[j][i]:
                    raise SchemaError("metric must be symmetric")
        for k in range(1, n + 1):
            if lattice._det_exact([r[:k] for r in G[:k]]) <= 0:
                raise SchemaError("metric must be positive definite")
        if not (0.0 < self.theta_hat < math.pi):
            raise SchemaError("theta_hat must lie in (0, pi)")
        object.__setattr__(self, "g", tuple(tuple(r) for r in G))

    @classmethod
    def euclidean(cls, n: int, theta_hat: float = math.pi / 2) -> "KahlerData":
        return cls(tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n)), theta_hat)

    @property
    def dim(self) -> int:
        return len(self.g)

    def matrix(self) -> np.ndarray:
        return np.array([[float(x) for x in r] for r in self.g])


@dataclass(frozen=True)
class ReducedKahler:
    g2: np.ndarray
    det_root: float

    @classmethod
    def from_matrix(cls, g2) -> "ReducedKahler":
        g2 = np.asarray(g2, dtype=float)
        d = g2[0, 0] * g2[1, 1] - g2[0, 1] * g2[1, 0]
        if d <= 0:
            raise SchemaError("reduced metric is not positive definite")
        return cls(g2, math.sqrt(d))


def reduce_kahler(kahler: KahlerData, frame: lattice.UnimodularFrame) -> ReducedKahler:
    """Metric on the first two frame coordinates: top block of F^-T g F^-1."""
    Fi = frame.inverse
    n = frame.dim
    g2 = [[sum(Fi[a][i] * kahler.g[a][b] * Fi[b][j] for a in range(n) for b in range(n))
           for j in range(2)] for i in range(2)]
    return ReducedKahler.from_matrix([[float(x) for x in r] for r in g2])


def _scale(red: ReducedKahler, theta_hat: float) -> float:
    return math.sin(theta_hat) / red.det_root


def hk_forward(mu1, mu2, th1, th2, red: ReducedKahler, theta_hat: float):
    mu1, mu2, th1, th2 = (np.asarray(x, dtype=float) for x in (mu1, mu2, th1, th2))
    k = red.det_root / math.sin(theta_hat)
    ct = math.cos(theta_hat) / math.sin(theta_hat)
    g = red.g2
    z1 = np.exp(-k * mu2 + 1j * (-ct * (g[0, 0] * mu1 + g[0, 1] * mu2) + th1))
    z2 = np.exp(k * mu1 + 1j * (-ct * (g[1, 0] * mu1 + g[1, 1] * mu2) + th2))
    return z1, z2


def hk_inverse(z1, z2, red: ReducedKahler, theta_hat: float):
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    if np.any(z1 == 0) or np.any(z2 == 0):
        raise ZeroCoordinate("point not in the torus")
    s = _scale(red, theta_hat)
    ct = math.cos(theta_hat) / math.sin(theta_hat)
    g = red.g2
    mu1 = s * np.log(np.abs(z2))
    mu2 = -s * np.log(np.abs(z1))
    th1 = np.mod(np.angle(z1) + ct * (g[0, 0] * mu1 + g[0, 1] * mu2), 2 * np.pi)
    th2 = np.mod(np.angle(z2) + ct * (g[1, 0] * mu1 + g[1, 1] * mu2), 2 * np.pi)
    return mu1, mu2, th1, th2


def log_to_mu(L, red: ReducedKahler, theta_hat: float) -> np.ndarray:
    """(log|z1|, log|z2|) -> (mu1, mu2)."""
    L = np.asarray(L, dtype=float)
    s = _scale(red, theta_hat)
    return np.stack([s * L[..., 1], -s * L[..., 0]], axis=-1)


def mu_to_log(M, red: ReducedKahler, theta_hat: float) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    s = _scale(red, theta_hat)
    return np.stack([-M[..., 1] / s, M[..., 0] / s], axis=-1)


# ------------------------------------------------------------- cylinders

@dataclass(frozen=True)
class CylinderModel:
    edge: str
    vertex: str
    direction: tuple  # f_e, outward from ``vertex``
    base: tuple  # T h(vertex) in the base
    phase_const: float
    monomial: tuple  # exponent m with z^m = alpha on the cylinder (vertex frame)
    alpha: complex
    plane_normal: tuple  # line {<plane_normal, mu> = plane_offset} in frame moment coordinates
    plane_offset: float

    def line_point(self, t) -> np.ndarray:
        return np.asarray(self.base) + np.outer(np.atleast_1d(t), self.direction)


def cylinder_line(monomial, alpha, red: ReducedKahler, theta_hat: float):
    """Image of z^m = alpha in the (mu1, mu2) plane: {m2 mu1 - m1 mu2 = s log|alpha|}."""
    m1, m2 = monomial
    s = _scale(red, theta_hat)
    return (float(m2), float(-m1)), float(s * math.log(abs(alpha)))


def cylinder_from_edge(edge_id: str, model, red: ReducedKahler, theta_hat: float, T: float,
                       center) -> CylinderModel:
    """Cylinder of an edge seen from the vertex model ``model``.

    ``center`` is h(v) in the base; the cylinder line runs from T h(v)
    along the outward edge direction.
    """
    k = model.edge_ids.index(edge_id)
    facet = model.polygon.facets[model.edge_facet[edge_id]]
    # read the phase back from the facet roots of the vertex polynomial
    target = np.exp(1j * model.edge_phase[edge_id])
    roots = model.roots[facet.index].roots
    alpha = complex(min(roots, key=lambda r: abs(r - target)))
    theta = float(np.mod(np.angle(alpha), 2 * np.pi))
    normal, offset = cylinder_line(facet.direction, alpha, red, theta_hat)
    return CylinderModel(
        edge_id, model.vertex, tuple(int(x) for x in model.fan.rays[k]),
        tuple(float(T * x) for x in center), float(theta),
        facet.direction, alpha, normal, offset,
    )


# -------------------------------------------------------------- sampling

def _slice_roots(poly: LaurentPoly, fixed, var: int):
    """All roots in the other coordinate with coordinate ``var`` fixed."""
    e = poly.exponents
    c = poly.values
    other = 1 - var
    lo = e[:, other].min()
    deg = int(e[:, other].max() - lo)
    lf = np.log(fixed)  # complex log
    # normalise each row to avoid overflow for large |fixed|
    expo = np.outer(lf, e[:, var])
    shift = expo.real.max(axis=1, keepdims=True)
    terms = c[None, :] * np.exp(expo - shift)
    C = np.zeros((len(fixed), deg + 1), dtype=complex)
    for k in range(deg + 1):
        mask = e[:, other] - lo == k
        if mask.any():
            C[:, k] = terms[:, mask].sum(axis=1)
    return kernels.batch_roots(C)


def relative_residual(poly: LaurentPoly, z1, z2):
    """|f| / sum |a_m z^m| evaluated in log space."""
    L = np.stack([np.log(z1), np.log(z2)], axis=-1)
    expo = L @ poly.exponents.T.astype(float)
    shift = expo.real.max(axis=-1, keepdims=True)
    terms = poly.values * np.exp(expo - shift)
    return np.abs(terms.sum(axis=-1)) / np.abs(terms).sum(axis=-1)


def sample_curve(poly: LaurentPoly, window, grid=64, tol: float = 1e-9) -> PointCloud:
    """Points of Zero(f) in the torus with (log|z1|, log|z2|) in ``window``.

    ``window`` is (u1_min, u1_max, u2_min, u2_max); ``grid`` is the number of
    modulus and argument values per sliced coordinate. Both coordinates are
    sliced in turn.
    """
    u1a, u1b, u2a, u2b = map(float, window)
    if isinstance(grid, (tuple, list)):
        nu, nphi = map(int, grid)
    else:
        nu = nphi = int(grid)
    lims = ((u1a, u1b), (u2a, u2b))
    pts = []
    for var in (0, 1):
        a, b = lims[var]
        du = (b - a) / nu
        j = np.arange(nphi)
        stagger = np.mod(j * GOLDEN, 1.0)
        k = np.arange(nu)
        U = a + (k[None, :] + stagger[:, None]) * du
        Phi = np.broadcast_to(2 * np.pi * j[:, None] / nphi, U.shape)
        fixed = np.exp(U.ravel() + 1j * Phi.ravel())
        roots = _slice_roots(poly, fixed, var)
        F = np.broadcast_to(fixed[:, None], roots.shape)
        ok = np.isfinite(roots) & (roots != 0)
        F, R = F[ok], roots[ok]
        z1, z2 = (F, R) if var == 0 else (R, F)
        lm1, lm2 = np.log(np.abs(z1)), np.log(np.abs(z2))
        inside = (lm1 >= u1a) & (lm1 <= u1b) & (lm2 >= u2a) & (lm2 <= u2b)
        z1, z2 = z1[inside], z2[inside]
        if len(z1):
            res = relative_residual(poly, z1, z2)
            good = res <= tol
            pts.append(np.stack([z1[good], z2[good]], axis=1))
    P = np.concatenate(pts) if pts else np.zeros((0, 2), dtype=complex)
    if len(P) == 0:
        raise EmptyWindow("no curve points in the window")
    return PointCloud(P)


# -------------------------------------------------------- asymptotic decay

def end_coordinates(facet: Facet):
    """Exponent change m = p0 + a e_F - b m' putting the facet on b = 0."""
    e = facet.direction
    mp = lattice.complement_vector(e, facet.normal)
    return e, mp


def _to_end(poly: LaurentPoly, facet: Facet):
    e, mp = end_coordinates(facet)
    p0 = facet.points[0]
    # solve m - p0 = a e - b mp ; det(e, -mp) = 1
    A = np.array([[e[0], -mp[0]], [e[1], -mp[1]]], dtype=float)
    Ai = np.linalg.inv(A)
    ab = np.rint((poly.exponents - np.array(p0)) @ Ai.T).astype(np.int64)
    assert (ab[:, 1] >= 0).all()
    return ab, poly.values


def asymptotic_decay(poly: LaurentPoly, facet: Facet, alpha: complex, R_list: Sequence[float],
                     n_angles: int = 64, max_step: float = 0.1):
    """Sup of |z^{e_F} - alpha| over the end of the branch through alpha
    where <Log z, m'> > R, for each R in ``R_list``."""
    R_list = [float(r) for r in R_list]
    ab, c = _to_end(poly, facet)
    a, b = ab[:, 0], ab[:, 1]
    Rmax, Rmin = max(R_list), min(R_list)
    grid = np.arange(-(Rmax + 4.0), -Rmin, max_step)
    logr = np.unique(np.concatenate([grid, -np.array(R_list)]))
    phi = 2 * np.pi * np.arange(n_angles) / n_angles + 0.1
    w1 = np.full(n_angles, complex(alpha))
    froots = np.roots(c[b == 0][np.argsort(a[b == 0])][::-1]) if (b == 0).sum() > 2 else np.array([])
    others = [r for r in froots if abs(r - alpha) > 1e-6]
    gap = min([abs(r - alpha) for r in others], default=1.0)
    devs = np.empty(len(logr))
    for i, lr in enumerate(logr):
        w2 = np.exp(lr + 1j * phi)
        prev = w1.copy()
        for _ in range(50):
            t = c[None, :] * w1[:, None] ** a[None, :] * w2[:, None] ** b[None, :]
            g = t.sum(axis=1)
            dg = (t * a[None, :]).sum(axis=1) / w1
            step = g / dg
            w1 = w1 - step
            if np.all(np.abs(step) <= 1e-15 * np.maximum(1.0, np.abs(w1))):
                break
        t = c[None, :] * w1[:, None] ** a[None, :] * w2[:, None] ** b[None, :]
        res = np.abs(t.sum(axis=1)) / np.abs(t).sum(axis=1)
        if not np.all(np.isfinite(w1)) or res.max() > 1e-10 or np.abs(w1 - prev).max() > 0.5 * gap:
            raise ComponentNotFound(f"continuation from root {alpha:.6g} failed at log|w2| = {lr:.3f}")
        devs[i] = np.abs(w1 - alpha).max()
    out = []
    for R in R_list:
        out.append((R, float(devs[logr <= -R + 1e-12].max())))
    return out


def decay_slope(pairs) -> float:
    R = np.array([p[0] for p in pairs])
    d = np.log(np.array([p[1] for p in pairs]))
    return float(np.polyfit(R, d, 1)[0])


# ------------------------------------------------------------------ lift

def lift_to_base(cloud: PointCloud, frame: lattice.UnimodularFrame, red: ReducedKahler,
                 theta_hat: float, p_v, shift) -> PointCloud:
    """Moment-map image in the base of the rotated vertex curve.

    ``shift`` is the plane part and ``p_v`` the fibre part of T F h(v).
    """
    P = cloud.points
    mu1, mu2, _, _ = hk_inverse(P[:, 0], P[:, 1], red, theta_hat)
    n = frame.dim
    Y = np.empty((len(P), n))
    Y[:, 0] = mu1 + shift[0]
    Y[:, 1] = mu2 + shift[1]
    if n > 2:
        Y[:, 2:] = np.asarray(p_v, dtype=float)[None, :]
    Fi = np.array(frame.inverse, dtype=float)
    return PointCloud(Y @ Fi.T)
