"""Vertex models: Newton polygons, well-centred Laurent polynomials,
facet roots and smoothness certification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import mpmath
import numpy as np

from . import kernels, lattice
from .errors import (
    Inconclusive,
    PhaseInconsistent,
    RootCollision,
    SingularCurve,
    Unbalanced,
    VertexModelError,
)
from .tropical import LocalFan, TropicalCurve, localize

TOL_ROOTS = 1e-8
TOL_PHASE = 1e-9


@dataclass(frozen=True)
class Facet:
    index: int
    normal: tuple[int, int]
    length: int
    points: tuple[tuple[int, int], ...]  # counterclockwise, length + 1 points

    @property
    def direction(self) -> tuple[int, int]:
        # primitive edge vector, counterclockwise
        return (-self.normal[1], self.normal[0])


@dataclass(frozen=True)
class NewtonPolygon:
    vertices: tuple[tuple[int, int], ...]
    facets: tuple[Facet, ...]

    def facet_for_normal(self, n) -> Facet:
        n = tuple(n)
        for f in self.facets:
            if f.normal == n:
                return f
        raise KeyError(n)

    def support_values(self):
        # h_i = max over polygon of <n_i, p>
        return [
            f.normal[0] * f.points[0][0] + f.normal[1] * f.points[0][1] for f in self.facets
        ]

    def lattice_points(self):
        xs = [p[0] for p in self.vertices]
        ys = [p[1] for p in self.vertices]
        h = self.support_values()
        pts = []
        for x in range(min(xs), max(xs) + 1):
            for y in range(min(ys), max(ys) + 1):
                vals = [f.normal[0] * x + f.normal[1] * y - hi for f, hi in zip(self.facets, h)]
                if all(v <= 0 for v in vals):
                    pts.append(((x, y), all(v < 0 for v in vals)))
        return pts

    def interior_points(self):
        return [p for p, inner in self.lattice_points() if inner]

    def boundary_points(self):
        return [p for p, inner in self.lattice_points() if not inner]


def polygon_from_fan(fan: LocalFan) -> NewtonPolygon:
    """Lattice polygon whose outward facet normals are the fan rays.

    Repeated rays add up to a longer facet. The lexicographically least
    vertex sits at the origin and facets run counterclockwise from it.
    """
    mult = {}
    for r in fan.rays:
        r = tuple(int(x) for x in r)
        if len(r) != 2:
            raise VertexModelError("polygon_from_fan needs rays in Z^2")
        mult[r] = mult.get(r, 0) + 1
    sx = sum(n[0] * k for n, k in mult.items())
    sy = sum(n[1] * k for n, k in mult.items())
    if sx or sy:
        raise Unbalanced(f"normals do not close up: sum {(sx, sy)}")
    if lattice.rank(list(mult)) != 2:
        raise Unbalanced("normals span a rank-1 lattice; polygon is degenerate")
    normals = sorted(mult, key=lambda n: math.atan2(n[1], n[0]))
    p = (0, 0)
    walk = []
    for n in normals:
        l = mult[n]
        e = (-n[1] * l, n[0] * l)
        walk.append((p, n, l))
        p = (p[0] + e[0], p[1] + e[1])
    start = min(range(len(walk)), key=lambda i: walk[i][0])
    walk = walk[start:] + walk[:start]
    ox, oy = walk[0][0]
    facets = []
    verts = []
    for i, (q, n, l) in enumerate(walk):
        q = (q[0] - ox, q[1] - oy)
        verts.append(q)
        d = (-n[1], n[0])
        facets.append(Facet(i, n, l, tuple((q[0] + k * d[0], q[1] + k * d[1]) for k in range(l + 1))))
    return NewtonPolygon(tuple(verts), tuple(facets))


@dataclass
class LaurentPoly:
    coeffs: dict  # (m1, m2) -> complex

    def __post_init__(self):
        self.coeffs = {tuple(map(int, m)): complex(c) for m, c in self.coeffs.items()}
        keys = sorted(self.coeffs)
        self._exps = np.array(keys, dtype=np.int64).reshape(-1, 2)
        self._vals = np.array([self.coeffs[k] for k in keys], dtype=complex)

    @property
    def exponents(self):
        return self._exps

    @property
    def values(self):
        return self._vals

    def __call__(self, z1, z2):
        return self.evaluate(z1, z2)[0]

    def evaluate(self, z1, z2):
        """(f, term scale) at arrays of points."""
        z1 = np.asarray(z1, dtype=complex)
        shape = z1.shape
        v, s = kernels.laurent_eval(self._exps, self._vals, z1.ravel(), np.asarray(z2, dtype=complex).ravel())
        return v.reshape(shape), s.reshape(shape)

    def partial(self, i: int) -> "LaurentPoly":
        """z_i times the i-th partial derivative (i = 0 or 1)."""
        return LaurentPoly({m: c * m[i] for m, c in self.coeffs.items() if m[i] != 0})

    def degrees(self):
        e = self._exps
        return int(e[:, 0].max() - e[:, 0].min()), int(e[:, 1].max() - e[:, 1].min())

    def to_records(self):
        return [
            {"m": [int(m[0]), int(m[1])], "re": c.real, "im": c.imag}
            for m, c in sorted(self.coeffs.items())
        ]

    @classmethod
    def from_records(cls, recs) -> "LaurentPoly":
        return cls({tuple(r["m"]): complex(r["re"], r["im"]) for r in recs})


def facet_polynomial(poly: LaurentPoly, facet: Facet) -> np.ndarray:
    """Coefficients along the facet, lowest degree first."""
    return np.array([poly.coeffs.get(p, 0j) for p in facet.points], dtype=complex)


@dataclass(frozen=True)
class FacetRoots:
    facet: Facet
    roots: tuple
    vieta_product: complex
    vieta_expected: complex

    @property
    def vieta_residual(self) -> float:
        return abs(self.vieta_product - self.vieta_expected)


def _check_distinct(roots, tol):
    r = list(roots)
    for i in range(len(r)):
        for j in range(i + 1, len(r)):
            if abs(r[i] - r[j]) < tol * max(1.0, abs(r[i]), abs(r[j])):
                raise RootCollision(f"roots {r[i]:.6g} and {r[j]:.6g} collide")


def facet_roots(poly: LaurentPoly, facet: Facet, tol: float = TOL_ROOTS) -> FacetRoots:
    c = facet_polynomial(poly, facet)
    if c[0] == 0 or c[-1] == 0:
        raise VertexModelError("facet polynomial has a vanishing end coefficient")
    roots = kernels.batch_roots(c[None, :])[0]
    _check_distinct(roots, tol)
    # clustered roots only separate like eps^(1/k); a vanishing relative
    # derivative flags them where the distance test cannot
    k = np.arange(len(c))
    for r in roots:
        pw = r ** k
        scale = np.sum(np.abs(c * pw))
        dp = np.sum(k[1:] * c[1:] * pw[1:])
        if abs(dp) < tol * scale:
            raise RootCollision(f"root {r:.6g} is numerically multiple")
    l = len(c) - 1
    order = np.lexsort((roots.imag, np.round(np.angle(roots), 12)))
    roots = roots[order]
    # product of roots against the end coefficients; labelled from the far end
    # of the facet this reads (-1)^l a_{m_l} / a_{m_0}
    expected = (-1) ** l * c[0] / c[-1]
    return FacetRoots(facet, tuple(complex(x) for x in roots), complex(np.prod(roots)), complex(expected))


def wrap_angle(x):
    """Reduce to (-pi, pi]."""
    y = np.mod(np.asarray(x, dtype=float) + np.pi, 2 * np.pi) - np.pi
    y = np.where(y == -np.pi, np.pi, y)
    return float(y) if np.ndim(y) == 0 else y


def phase_sum_check(facet_phases) -> float:
    """(sum of all phases - N pi) reduced to (-pi, pi]."""
    if isinstance(facet_phases, dict):
        angles = [a for v in facet_phases.values() for a in v]
    else:
        angles = list(facet_phases)
    # sum the reduced terms to keep the rounding error independent of N
    s = math.fsum(float(wrap_angle(a - math.pi)) for a in angles)
    return float(wrap_angle(s))


def well_centred_poly(
    polygon: NewtonPolygon,
    facet_phases: dict,
    interior_seed: Optional[int] = None,
    interior_scale: float = 0.1,
    tol: float = TOL_ROOTS,
) -> LaurentPoly:
    """Laurent polynomial whose facet roots are exp(i * phase), unit modulus
    coefficients at the polygon vertices and a = 1 at the first vertex."""
    coeffs = {}
    for f in polygon.facets:
        ang = list(facet_phases.get(f.index, ()))
        if len(ang) != f.length:
            raise VertexModelError(f"facet {f.index}: {len(ang)} phases for lattice length {f.length}")
    res = phase_sum_check(facet_phases)
    a0 = 1.0 + 0j
    coeffs[polygon.facets[0].points[0]] = a0
    for f in polygon.facets:
        alphas = np.exp(1j * np.asarray(facet_phases[f.index], dtype=float))
        _check_distinct(alphas, tol)
        c0 = coeffs[f.points[0]]
        l = f.length
        cl = c0 * (-1) ** l / np.prod(alphas)
        mon = np.poly(alphas)[::-1]  # monic, low-first
        for k in range(1, l + 1):
            p = f.points[k]
            val = cl * mon[k]
            if p in coeffs:
                # closing the boundary cycle
                if abs(coeffs[p] - val) > TOL_PHASE * max(1.0, abs(val)) or abs(res) > TOL_PHASE:
                    raise PhaseInconsistent(
                        f"boundary cycle does not close: phase residual {res:.3e}"
                    )
            else:
                coeffs[p] = complex(val)
    inner = polygon.interior_points()
    if interior_seed is not None and inner:
        rng = np.random.default_rng(interior_seed)
        for p in inner:
            r = interior_scale * rng.uniform(0, 1)
            coeffs[p] = complex(r * np.exp(2j * np.pi * rng.uniform(0, 1)))
    return LaurentPoly(coeffs)


# ------------------------------------------------------------ smoothness

@dataclass(frozen=True)
class SmoothnessResult:
    smooth: bool
    witness: Optional[tuple] = None
    method: str = "resultant"
    certified: bool = True

    def __bool__(self):
        return self.smooth


_DPS = 50


def _shifted(poly: LaurentPoly):
    e = poly.exponents
    lo = e.min(axis=0)
    return {(int(m[0] - lo[0]), int(m[1] - lo[1])): c for m, c in zip(e, poly.values)}


def _mp_eval(coeffs, z1, z2):
    f = d1 = d2 = mpmath.mpc(0)
    for (i, j), c in coeffs.items():
        t = mpmath.mpc(c) * z1 ** i * z2 ** j
        f += t
        d1 += i * t
        d2 += j * t
    scale = sum(abs(mpmath.mpc(c) * z1 ** i * z2 ** j) for (i, j), c in coeffs.items())
    return f, d1, d2, scale


def _classify(coeffs, z1, z2):
    if z1 == 0 or z2 == 0:
        return None
    f, d1, d2, scale = _mp_eval(coeffs, z1, z2)
    return float(max(abs(f), abs(d1), abs(d2)) / scale)


def _univariate(coeffs, var):
    # f depends on one variable only
    deg = max(m[var] for m in coeffs)
    p = [mpmath.mpc(0)] * (deg + 1)
    for m, c in coeffs.items():
        p[m[var]] += mpmath.mpc(c)
    lo = next(k for k, x in enumerate(p) if x != 0)
    p = p[lo:]
    if len(p) <= 2:
        return SmoothnessResult(True, method="univariate")
    roots = mpmath.polyroots(p[::-1], maxsteps=800, extraprec=400)
    for r in roots:
        z = (r, mpmath.mpc(1)) if var == 0 else (mpmath.mpc(1), r)
        res = _classify(coeffs, *z)
        if res is not None and res < 1e-15:
            return SmoothnessResult(False, (complex(z[0]), complex(z[1])), "univariate")
    return SmoothnessResult(True, method="univariate")


def _resultant_values(coeffs, D1, D2, K):
    # Res_{z2}(f, d f / d z2) sampled at the K-th roots of unity in z1
    vals = []
    for j in range(K):
        z1 = mpmath.expjpi(mpmath.mpf(2 * j) / K)
        F = [mpmath.mpc(0)] * (D2 + 1)
        for (i, k), c in coeffs.items():
            F[k] += mpmath.mpc(c) * z1 ** i
        G = [(k + 1) * F[k + 1] for k in range(D2)]
        n = 2 * D2 - 1
        S = mpmath.zeros(n, n)
        for r in range(D2 - 1):
            for k in range(D2 + 1):
                S[r, r + k] = F[D2 - k]
        for r in range(D2):
            for k in range(D2):
                S[D2 - 1 + r, r + k] = G[D2 - 1 - k]
        vals.append(mpmath.det(S))
    return vals


def _newton_witness(poly: LaurentPoly, seed: int, starts: int, window: float = 3.0):
    """Multi-start Gauss-Newton on (f, z1 f_1, z2 f_2) in log coordinates."""
    rng = np.random.default_rng(seed)
    d1, d2 = poly.partial(0), poly.partial(1)
    d11, d12, d22 = d1.partial(0), d1.partial(1), d2.partial(1)
    w = rng.uniform(-window, window, size=(starts, 2)) + 1j * rng.uniform(-np.pi, np.pi, size=(starts, 2))
    for _ in range(60):
        z1, z2 = np.exp(w[:, 0]), np.exp(w[:, 1])
        F = np.stack([poly(z1, z2), d1(z1, z2), d2(z1, z2)], axis=1)
        # derivatives with respect to log z
        J = np.stack(
            [
                np.stack([d1(z1, z2), d2(z1, z2)], axis=1),
                np.stack([d11(z1, z2), d12(z1, z2)], axis=1),
                np.stack([d12(z1, z2), d22(z1, z2)], axis=1),
            ],
            axis=1,
        )
        JH = np.conj(np.swapaxes(J, 1, 2))
        A = JH @ J + 1e-14 * np.eye(2)
        step = np.linalg.solve(A, (JH @ F[..., None]))[..., 0]
        step = np.where(np.isfinite(step), step, 0)
        w = w - np.clip(step.real, -1, 1) - 1j * step.imag
        w = np.where(np.abs(w.real) > 50, np.nan, w)
    z1, z2 = np.exp(w[:, 0]), np.exp(w[:, 1])
    ok = np.isfinite(z1) & np.isfinite(z2)
    if not ok.any():
        return None
    z1, z2 = z1[ok], z2[ok]
    _, s = poly.evaluate(z1, z2)
    F = np.stack([poly(z1, z2), d1(z1, z2), d2(z1, z2)], axis=1)
    r = np.abs(F).max(axis=1) / s
    k = int(np.argmin(r))
    if r[k] < 1e-12:
        return complex(z1[k]), complex(z2[k])
    return None


def check_smooth(poly: LaurentPoly, max_exact_degree: int = 8, seed: int = 0, starts: int = 1000) -> SmoothnessResult:
    """Decide whether Zero(f) is smooth in the torus.

    Up to total degree ``max_exact_degree`` the resultant of f and its z2
    derivative is formed at 50 digits and every candidate is checked;
    above that a multi-start Newton search is run and its verdict is
    reported as uncertified.
    """
    coeffs = _shifted(poly)
    D1 = max(m[0] for m in coeffs)
    D2 = max(m[1] for m in coeffs)
    if D1 + D2 > max_exact_degree:
        wit = _newton_witness(poly, seed, starts)
        if wit is not None:
            return SmoothnessResult(False, wit, "newton", False)
        return SmoothnessResult(True, None, "newton", False)
    with mpmath.workdps(_DPS):
        if D2 == 0:
            return _univariate(coeffs, 0)
        if D1 == 0:
            return _univariate(coeffs, 1)
        bound = D1 * (2 * D2 - 1)
        K = bound + 1
        vals = _resultant_values(coeffs, D1, D2, K)
        rc = []
        for k in range(K):
            rc.append(sum(vals[j] * mpmath.expjpi(-mpmath.mpf(2 * j * k) / K) for j in range(K)) / K)
        big = max(abs(x) for x in rc)
        if big == 0 or all(abs(x) < mpmath.mpf(10) ** (-35) * max(1, big) for x in rc) or big < mpmath.mpf(10) ** -35:
            wit = _newton_witness(poly, seed, starts)
            if wit is not None:
                return SmoothnessResult(False, wit, "newton", False)
            raise Inconclusive("resultant vanishes identically")
        rc = [x if abs(x) > mpmath.mpf(10) ** (-40) * big else mpmath.mpc(0) for x in rc]
        while rc and rc[-1] == 0:
            rc.pop()
        lo = 0
        while lo < len(rc) and rc[lo] == 0:
            lo += 1
        rc = rc[lo:]
        if len(rc) <= 1:
            return SmoothnessResult(True, None, "resultant", True)
        try:
            cand = mpmath.polyroots(rc[::-1], maxsteps=800, extraprec=400)
        except mpmath.libmp.NoConvergence:
            raise Inconclusive("resultant roots did not converge") from None
        worst = math.inf
        for r in cand:
            if abs(r) < mpmath.mpf(10) ** -30:
                continue
            p = [mpmath.mpc(0)] * (D2 + 1)
            for (i, k), c in coeffs.items():
                p[k] += mpmath.mpc(c) * r ** i
            pscale = sum(abs(mpmath.mpc(c) * r ** i) for (i, k), c in coeffs.items())
            if all(abs(x) < mpmath.mpf(10) ** -30 * pscale for x in p):
                # the whole fibre z1 = r lies on the curve; look for zeros of d f / d z1 on it
                p = [mpmath.mpc(0)] * (D2 + 1)
                for (i, k), c in coeffs.items():
                    p[k] += i * mpmath.mpc(c) * r ** i
                if all(abs(x) < mpmath.mpf(10) ** -30 * pscale for x in p):
                    return SmoothnessResult(False, (complex(r), 1 + 0j), "resultant", True)
            while len(p) > 1 and abs(p[-1]) < mpmath.mpf(10) ** -40 * pscale:
                p.pop()
            lo2 = 0
            while lo2 < len(p) - 1 and abs(p[lo2]) < mpmath.mpf(10) ** -40 * pscale:
                lo2 += 1
            p = p[lo2:]
            if len(p) < 2:
                continue
            try:
                zs = mpmath.polyroots(p[::-1], maxsteps=800, extraprec=400)
            except mpmath.libmp.NoConvergence:
                raise Inconclusive("fibre roots did not converge") from None
            for z2 in zs:
                res = _classify(coeffs, r, z2)
                if res is None:
                    continue
                if res < 1e-15:
                    return SmoothnessResult(False, (complex(r), complex(z2)), "resultant", True)
                worst = min(worst, res)
        if worst < 1e-8:
            raise Inconclusive(f"near-singular point with residual {worst:.2e}")
        return SmoothnessResult(True, None, "resultant", True)


# ---------------------------------------------------------- vertex model

@dataclass
class VertexModel:
    vertex: str
    fan: LocalFan
    basis: tuple
    frame: lattice.UnimodularFrame
    edge_ids: tuple
    plane_dirs: tuple  # frame directions of the adjacent edges
    normals: tuple  # outward Newton-polygon normals, one per adjacent edge
    polygon: NewtonPolygon
    edge_facet: dict  # edge id -> facet index
    edge_phase: dict  # edge id -> angle
    poly: LaurentPoly
    roots: dict = field(default_factory=dict)  # facet index -> FacetRoots
    smooth: Optional[SmoothnessResult] = None
    perturbed: bool = False

    def facet_phases(self) -> dict:
        out = {f.index: [] for f in self.polygon.facets}
        for eid in self.edge_ids:
            out[self.edge_facet[eid]].append(self.edge_phase[eid])
        return out


def vertex_frame(fan: LocalFan):
    basis = lattice.saturated_rank2_basis(fan.rays)
    frame = lattice.complete_to_unimodular(basis)
    dirs = []
    for r in fan.rays:
        y = frame.apply(r)
        if any(y[2:]):
            raise VertexModelError(f"ray {r} leaves the vertex plane")
        dirs.append((y[0], y[1]))
    return basis, frame, tuple(dirs)


def direction_to_normal(d):
    # Log-direction (a, b) corresponds to moment direction (b, -a)
    return (-d[1], d[0])


def build_vertex_model(curve: TropicalCurve, v: str, theta: dict, seed: int = 0, smooth_check: bool = True) -> VertexModel:
    fan = localize(curve, v)
    basis, frame, dirs = vertex_frame(fan)
    normals = tuple(direction_to_normal(d) for d in dirs)
    polygon = polygon_from_fan(LocalFan(fan.center, normals, fan.vertex, fan.edge_ids))
    edge_facet = {eid: polygon.facet_for_normal(n).index for eid, n in zip(fan.edge_ids, normals)}
    edge_phase = {eid: float(theta[eid]) for eid in fan.edge_ids}
    phases = {f.index: [] for f in polygon.facets}
    for eid in fan.edge_ids:
        phases[edge_facet[eid]].append(edge_phase[eid])
    poly = well_centred_poly(polygon, phases)
    perturbed = False
    sm = None
    if smooth_check:
        try:
            sm = check_smooth(poly, seed=seed)
        except Inconclusive:
            sm = None
        if (sm is None or not sm.smooth) and polygon.interior_points():
            poly = well_centred_poly(polygon, phases, interior_seed=seed)
            perturbed = True
            sm = check_smooth(poly, seed=seed)
        if sm is None or not sm.smooth:
            raise SingularCurve(f"vertex {v}: curve is singular at {sm.witness if sm else '?'}")
    roots = {f.index: facet_roots(poly, f) for f in polygon.facets}
    return VertexModel(v, fan, basis, frame, fan.edge_ids, dirs, normals, polygon,
                       edge_facet, edge_phase, poly, roots, sm, perturbed)
