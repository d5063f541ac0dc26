"""Matching data assembly, matching checks, cutoff pregluing, the gluing
error surrogate and the Hausdorff convergence test."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import _cutoff, kernels
from .errors import DimensionMismatch, MatchFailure, OverlapTooShort, ValidationFailed
from .hk import (
    CylinderModel,
    KahlerData,
    ReducedKahler,
    asymptotic_decay,
    cylinder_from_edge,
    lift_to_base,
    mu_to_log,
    reduce_kahler,
    sample_curve,
)
from .phases import PhaseAssignment, genericity_sample, natural_key, solve_phases
from .pointcloud import PointCloud
from .tropical import TropicalCurve, edge_lengths, position, validate
from .vertex import VertexModel, build_vertex_model, wrap_angle

L_THRESHOLD = 8.0
TOL_MATCH = 1e-9


@dataclass
class MatchingDatum:
    curve: TropicalCurve
    kahler: KahlerData
    T: float
    assignment: PhaseAssignment
    models: dict  # vertex -> VertexModel
    reduced: dict  # vertex -> ReducedKahler
    moment: dict  # vertex -> T F h(v) (frame coordinates)
    cylinders: dict  # edge -> list of CylinderModel, one per finite endpoint
    lengths: dict  # internal edge -> l_e

    def shift(self, v):
        return self.moment[v][:2]

    def p_v(self, v):
        return self.moment[v][2:]

    def to_dict(self) -> dict:
        verts = {}
        for v in sorted(self.models, key=natural_key):
            m = self.models[v]
            verts[v] = {
                "frame": [list(r) for r in m.frame.matrix],
                "moment": [float(x) for x in self.moment[v]],
                "polygon": [list(p) for p in m.polygon.vertices],
                "poly": m.poly.to_records(),
                "perturbed": m.perturbed,
                "smooth_certified": bool(m.smooth.certified) if m.smooth else False,
            }
        edges = {}
        for e in sorted(self.cylinders, key=natural_key):
            edges[e] = {
                "length": self.lengths.get(e, "inf"),
                "cylinders": [
                    {
                        "vertex": c.vertex,
                        "direction": list(c.direction),
                        "base": list(c.base),
                        "phase_const": c.phase_const,
                        "monomial": list(c.monomial),
                        "alpha": [c.alpha.real, c.alpha.imag],
                    }
                    for c in self.cylinders[e]
                ],
            }
        return {
            "T": self.T,
            "theta_hat": self.kahler.theta_hat,
            "phases": self.assignment.to_dict(),
            "vertices": verts,
            "edges": edges,
        }


def build_matching(curve: TropicalCurve, kahler: KahlerData, T: float, free_phases: Sequence[float],
                   seed: int = 0, l_threshold: float = L_THRESHOLD) -> MatchingDatum:
    rep = validate(curve)
    if not rep.ok:
        raise ValidationFailed("; ".join(rep.messages))
    if kahler.dim != curve.dimension:
        raise DimensionMismatch(f"metric is {kahler.dim}-dimensional, curve lives in R^{curve.dimension}")
    if T <= 0:
        raise ValueError("T must be positive")
    assignment = genericity_sample(curve, solve_phases(curve, free_phases), seed=seed)
    models, reduced, moment = {}, {}, {}
    for v in curve.vertex_ids():
        m = build_vertex_model(curve, v, assignment.theta, seed=seed)
        models[v] = m
        reduced[v] = reduce_kahler(kahler, m.frame)
        h = curve.vertices[v]
        moment[v] = np.array([float(T * sum(a * x for a, x in zip(row, h))) for row in m.frame.matrix])
    cyl = {}
    for e in curve.edges:
        ends = [e.start] if e.external else [e.start, e.end]
        cyl[e.id] = [
            cylinder_from_edge(e.id, models[v], reduced[v], kahler.theta_hat, T, position(curve, v))
            for v in ends
        ]
    g = kahler.matrix()
    lengths = {k: T * l for k, l in edge_lengths(curve, g).items() if math.isfinite(l)}
    short = {k: l for k, l in lengths.items() if l < l_threshold}
    if short:
        k = min(short, key=short.get)
        raise OverlapTooShort(f"edge {k} has overlap length {short[k]:.3f} < {l_threshold}")
    datum = MatchingDatum(curve, kahler, float(T), assignment, models, reduced, moment, cyl, lengths)
    report = check_matching(datum)
    if not report.ok:
        raise MatchFailure("; ".join(f"{e}: {kind} {r:.3e}" for e, kind, r in report.failures))
    return datum


@dataclass
class MatchReport:
    failures: list
    l_min: float
    l_max: float

    @property
    def ok(self) -> bool:
        return not self.failures

    @property
    def ratio(self) -> float:
        if not math.isfinite(self.l_min):
            return 1.0
        return self.l_max / self.l_min


def check_matching(datum: MatchingDatum) -> MatchReport:
    fails = []
    for e in datum.curve.internal_edges:
        a, b = datum.cylinders[e.id]
        fa = np.array(a.direction, dtype=float)
        fb = np.array(b.direction, dtype=float)
        if np.linalg.norm(fa + fb) > TOL_MATCH:
            fails.append((e.id, "direction", float(np.linalg.norm(fa + fb))))
        # the far base point must lie on the line through the near one
        d = np.array(b.base) - np.array(a.base)
        u = fa / np.linalg.norm(fa)
        off = float(np.linalg.norm(d - (d @ u) * u)) / max(1.0, float(np.linalg.norm(d)))
        if off > TOL_MATCH or d @ u <= 0:
            fails.append((e.id, "line", off))
        r = abs(wrap_angle(a.phase_const - b.phase_const))
        if r > TOL_MATCH:
            fails.append((e.id, "phase", r))
        l = datum.lengths.get(e.id, 0.0)
        if l < L_THRESHOLD:
            fails.append((e.id, "overlap", l))
    ls = list(datum.lengths.values())
    return MatchReport(fails, min(ls) if ls else math.inf, max(ls) if ls else math.inf)


# ------------------------------------------------------------ pregluing

@dataclass
class GluedProfile:
    s: np.ndarray
    c_left: np.ndarray
    c_right: np.ndarray
    chi_left: np.ndarray
    chi_right: np.ndarray
    glued: np.ndarray


def _as_profile(c, s):
    if callable(c):
        return np.asarray(c(s), dtype=float) * np.ones_like(s)
    if np.isscalar(c):
        return np.full_like(s, float(c))
    return np.asarray(c, dtype=float)


def preglue_profile(c_left, c_right, l_e: float, s_grid=None, n: int = 4001) -> GluedProfile:
    """Cut both end profiles off across the middle of an edge of length l_e.

    The left profile is kept where s <= -2 and switched off by s = -1; the
    right one mirrors this.
    """
    if l_e < L_THRESHOLD:
        raise OverlapTooShort(f"overlap length {l_e} < {L_THRESHOLD}")
    s = np.linspace(-l_e / 2, l_e / 2, n) if s_grid is None else np.asarray(s_grid, dtype=float)
    cl, cr = _as_profile(c_left, s), _as_profile(c_right, s)
    xl, xr = _cutoff.chi(s), _cutoff.chi(-s)
    return GluedProfile(s, cl, cr, xl, xr, cl * xl + cr * xr)


@dataclass
class ErrEstimate:
    support: tuple
    sup_error: float
    rate: float  # predicted exponential rate in l_e / 2
    bands: tuple = ((-2.0, -1.0), (1.0, 2.0))


def _decay_fit(model: VertexModel, edge_id: str, R_list=(2, 3, 4, 5, 6, 7, 8)):
    facet = model.polygon.facets[model.edge_facet[edge_id]]
    target = np.exp(1j * model.edge_phase[edge_id])
    alpha = min(model.roots[facet.index].roots, key=lambda r: abs(r - target))
    pairs = asymptotic_decay(model.poly, facet, alpha, R_list)
    R = np.array([p[0] for p in pairs])
    d = np.log([p[1] for p in pairs])
    slope, icpt = np.polyfit(R, d, 1)
    return math.exp(icpt), -slope


def err_profile(datum: MatchingDatum, edge_id: str, n: int = 4001):
    """(s, surrogate error) on an internal edge: |c chi'' + 2 c' chi'| summed
    over both ends, with c the fitted end decay of each vertex curve."""
    e = datum.curve.edge(edge_id)
    l = datum.lengths[edge_id]
    s = np.linspace(-l / 2, l / 2, n)
    s = np.union1d(s, [-2.0, -1.0, 1.0, 2.0])
    g = datum.kahler.matrix()
    f = np.array(e.direction, dtype=float)
    fnorm = math.sqrt(f @ g @ f)
    err = np.zeros_like(s)
    for v, sign in ((e.start, 1.0), (e.end, -1.0)):
        m = datum.models[v]
        red = datum.reduced[v]
        A, kR = _decay_fit(m, edge_id)
        kt = kR * red.det_root / (math.sin(datum.kahler.theta_hat) * fnorm)
        x = sign * s  # x runs from -l/2 at v towards the middle
        t = x + l / 2
        c = A * np.exp(-kt * t)
        dc = -kt * c
        err += np.abs(c * _cutoff.chi_d2(x) + 2 * dc * _cutoff.chi_d1(x))
    return s, err


def err_estimate(datum: MatchingDatum) -> dict:
    out = {}
    for e in datum.curve.internal_edges:
        s, err = err_profile(datum, e.id)
        nz = s[err > 0]
        support = (float(nz.min()), float(nz.max())) if len(nz) else (0.0, 0.0)
        assert support[0] >= -2.0 and support[1] <= 2.0
        rates = []
        for v in (e.start, e.end):
            red = datum.reduced[v]
            _, kR = _decay_fit(datum.models[v], e.id)
            f = np.array(e.direction, dtype=float)
            rates.append(kR * red.det_root / (math.sin(datum.kahler.theta_hat) * math.sqrt(f @ datum.kahler.matrix() @ f)))
        out[e.id] = ErrEstimate(support, float(err.max()), float(min(rates)))
    return out


# ----------------------------------------------------------- Hausdorff

def _points(c):
    return np.asarray(c.points if isinstance(c, PointCloud) else c, dtype=float)


def hausdorff(a, b) -> float:
    A, B = _points(a), _points(b)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise DimensionMismatch(f"clouds of shape {A.shape} and {B.shape}")
    if len(A) == 0 or len(B) == 0:
        raise ValueError("empty cloud")
    dab = cKDTree(B).query(A)[0].max()
    dba = cKDTree(A).query(B)[0].max()
    return float(max(dab, dba))


@dataclass(frozen=True)
class Gamma:
    """Union of segments a + t u, 0 <= t <= tmax (u unit)."""
    a: np.ndarray
    u: np.ndarray
    tmax: np.ndarray
    edges: tuple

    def distances(self, P):
        return kernels.segment_distances(np.asarray(P, dtype=float), self.a, self.u, self.tmax)

    def clip(self, half_width: float) -> "Gamma":
        """Clip to the box |x|_inf <= half_width (Liang-Barsky)."""
        A, U, L, E = [], [], [], []
        for a, u, tm, e in zip(self.a, self.u, self.tmax, self.edges):
            t0, t1 = 0.0, tm
            for ai, ui in zip(a, u):
                if ui == 0:
                    if abs(ai) > half_width:
                        t0, t1 = 1.0, 0.0
                    continue
                lo = (-half_width - ai) / ui
                hi = (half_width - ai) / ui
                if lo > hi:
                    lo, hi = hi, lo
                t0, t1 = max(t0, lo), min(t1, hi)
            if t1 >= t0:
                A.append(a + t0 * u)
                U.append(u)
                L.append(t1 - t0)
                E.append(e)
        n = self.a.shape[1]
        return Gamma(np.array(A).reshape(-1, n), np.array(U).reshape(-1, n), np.array(L, dtype=float), tuple(E))

    def sample(self, spacing: float) -> np.ndarray:
        pts = []
        for a, u, tm in zip(self.a, self.u, self.tmax):
            k = max(2, int(math.ceil(tm / spacing)) + 1)
            pts.append(a[None, :] + np.linspace(0.0, tm, k)[:, None] * u[None, :])
        return np.concatenate(pts)


def gamma_of(curve: TropicalCurve) -> Gamma:
    A, U, L, E = [], [], [], []
    for e in curve.edges:
        a = position(curve, e.start)
        if e.external:
            d = np.array(e.direction, dtype=float)
            U.append(d / np.linalg.norm(d))
            L.append(math.inf)
        else:
            d = position(curve, e.end) - a
            U.append(d / np.linalg.norm(d))
            L.append(float(np.linalg.norm(d)))
        A.append(a)
        E.append(e.id)
    return Gamma(np.array(A), np.array(U), np.array(L), tuple(E))


def default_box(curve: TropicalCurve) -> float:
    m = max((abs(float(x)) for p in curve.vertices.values() for x in p), default=0.0)
    return 1.5 * m + 2.0


def vertex_log_window(datum: MatchingDatum, v: str, half_width: float, margin: float = 1.0):
    """Log-modulus window of vertex v covering the rescaled box."""
    m = datum.models[v]
    n = datum.curve.dimension
    F = np.array(m.frame.matrix, dtype=float)
    corners = np.array(list(itertools.product((-half_width, half_width), repeat=n))) * datum.T
    mu = (corners @ F.T - datum.moment[v][None, :])[:, :2]
    L = mu_to_log(mu, datum.reduced[v], datum.kahler.theta_hat)
    lo, hi = L.min(axis=0) - margin, L.max(axis=0) + margin
    return (lo[0], hi[0], lo[1], hi[1])


def vertex_cloud(datum: MatchingDatum, v: str, half_width: float, grid=128) -> np.ndarray:
    """Rescaled base projection of the vertex piece, truncated at the middle
    of internal edges and clipped to the box."""
    m = datum.models[v]
    win = vertex_log_window(datum, v, half_width)
    cloud = sample_curve(m.poly, win, grid)
    lifted = lift_to_base(cloud, m.frame, datum.reduced[v], datum.kahler.theta_hat,
                          datum.p_v(v), datum.shift(v))
    P = lifted.points / datum.T
    P = P[np.all(np.abs(P) <= half_width, axis=1)]
    curve = datum.curve
    h = position(curve, v)
    star = curve.star(v)
    U = np.array([np.array(d, dtype=float) / np.linalg.norm(d) for _, d in star])
    A = np.repeat(h[None, :], len(star), axis=0)
    _, idx, t = kernels.segment_distances(P, A, U, np.full(len(star), np.inf))
    keep = np.ones(len(P), dtype=bool)
    for k, (e, _) in enumerate(star):
        if not e.external:
            half = 0.5 * float(np.linalg.norm(position(curve, e.end) - position(curve, e.start)))
            keep &= ~((idx == k) & (t > half))
    return P[keep]


@dataclass
class ConvergenceTable:
    rows: list  # (T, d_H)
    details: list = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["T,d_hausdorff"]
        lines += [f"{format(T, '.17g')},{format(d, '.17g')}" for T, d in self.rows]
        return "\n".join(lines) + "\n"

    def fitted_rate(self) -> float:
        T = np.log([r[0] for r in self.rows])
        d = np.log([r[1] for r in self.rows])
        return float(np.polyfit(T, d, 1)[0])


def convergence_test(curve: TropicalCurve, kahler: KahlerData, free_phases, T_list,
                     window: Optional[float] = None, grid=128, seed: int = 0) -> ConvergenceTable:
    T_list = [float(t) for t in T_list]
    if len(T_list) < 3 or any(b <= a for a, b in zip(T_list, T_list[1:])):
        raise ValueError("T_list must hold at least three increasing values")
    hw = default_box(curve) if window is None else float(window)
    G = gamma_of(curve).clip(hw)
    rows, details = [], []
    for T in T_list:
        datum = build_matching(curve, kahler, T, free_phases, seed)
        clouds = [vertex_cloud(datum, v, hw, grid) for v in curve.vertex_ids()]
        P = np.concatenate(clouds)
        d_cg = float(G.distances(P)[0].max())
        S = G.sample(spacing=min(0.01, 0.1 / T))
        d_gc = float(cKDTree(P).query(S)[0].max())
        rows.append((T, max(d_cg, d_gc)))
        details.append({"T": T, "points": int(len(P)), "cloud_to_gamma": d_cg, "gamma_to_cloud": d_gc})
    return ConvergenceTable(rows, details)
