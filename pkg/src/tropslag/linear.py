"""One-dimensional metric-graph model of the linear gluing analysis.

Functions live on the nodes of a uniform grid laid along every edge, with
the graph vertices as shared nodes. One-forms live on the grid segments.
With lumped trapezoid weights ``w`` and stiffness ``L``:

    d u     = (u_j - u_i) / h                 on each segment
    d* b    = W^-1 D^T H b                    so that d* d = W^-1 L = -Delta

Besides the constant (zero) Fourier mode along the collapsed fibres the
model carries one transverse mode with indicial rate ``kappa``: on it the
operator is -u'' + kappa^2 u, with u = 0 at vertex nodes, and its one-forms
have a segment part and a node part kappa * u.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _cutoff
from .errors import Divergence, EdgeTooShort, NoConvergence, NonZeroMean, NotInRange

H_GRID = 0.05
L_MIN_EDGE = 8.0
DEFAULT_L_EXT = 30.0


@dataclass(frozen=True)
class GEdge:
    id: str
    a: str
    b: Optional[str]  # None: external, truncated at its length
    length: float

    @property
    def external(self):
        return self.b is None


class MetricGraph:
    def __init__(self, vertices: Sequence[str], edges: Sequence[GEdge], h: float = H_GRID):
        self.vertices = tuple(vertices)
        self.edges = tuple(edges)
        self.h_grid = float(h)
        vidx = {v: i for i, v in enumerate(self.vertices)}
        for e in self.edges:
            if e.length <= 0:
                raise ValueError(f"edge {e.id}: length must be positive")
            if e.a not in vidx or (e.b is not None and e.b not in vidx):
                raise KeyError(f"edge {e.id}: unknown endpoint")
            if e.a == e.b:
                raise ValueError(f"edge {e.id}: loops are not supported")
        self._check_connected()
        N = len(self.vertices)
        self.vertex_node = dict(vidx)
        self.edge_nodes = {}
        self.edge_t = {}
        self.edge_segs = {}
        si, sj, sh, seg_edge = [], [], [], []
        for e in self.edges:
            n = max(1, int(round(e.length / self.h_grid)))
            inner = list(range(N, N + n - 1))
            N += n - 1
            if e.external:
                far = N
                N += 1
            else:
                far = vidx[e.b]
            nodes = [vidx[e.a]] + inner + [far]
            self.edge_nodes[e.id] = np.array(nodes)
            self.edge_t[e.id] = np.linspace(0.0, e.length, n + 1)
            first = len(si)
            hh = e.length / n
            for k in range(n):
                si.append(nodes[k])
                sj.append(nodes[k + 1])
                sh.append(hh)
                seg_edge.append(e.id)
            self.edge_segs[e.id] = np.arange(first, first + n)
        self.n_nodes = N
        self.seg_i = np.array(si)
        self.seg_j = np.array(sj)
        self.seg_h = np.array(sh)
        self.seg_edge = tuple(seg_edge)
        S = len(si)
        r = np.arange(S)
        self.D = sp.csr_matrix(
            (np.concatenate([-1.0 / self.seg_h, 1.0 / self.seg_h]), (np.concatenate([r, r]), np.concatenate([self.seg_i, self.seg_j]))),
            shape=(S, N),
        )
        self.L = (self.D.T @ sp.diags(self.seg_h) @ self.D).tocsr()
        w = np.zeros(N)
        np.add.at(w, self.seg_i, self.seg_h / 2)
        np.add.at(w, self.seg_j, self.seg_h / 2)
        self.w = w
        self.is_vertex = np.zeros(N, dtype=bool)
        self.is_vertex[list(vidx.values())] = True
        # distance of each node from the nearest graph vertex along its edge
        self.node_t = np.zeros(N)
        for e in self.edges:
            t = self.edge_t[e.id]
            nodes = self.edge_nodes[e.id]
            self.node_t[nodes[1:-1]] = np.minimum(t[1:-1], e.length - t[1:-1]) if not e.external else t[1:-1]
            if e.external:
                self.node_t[nodes[-1]] = t[-1]

    def _check_connected(self):
        adj = {v: set() for v in self.vertices}
        for e in self.edges:
            if e.b is not None:
                adj[e.a].add(e.b)
                adj[e.b].add(e.a)
        seen = {self.vertices[0]}
        stack = [self.vertices[0]]
        while stack:
            for u in adj[stack.pop()]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        if len(seen) != len(self.vertices):
            raise ValueError("metric graph is disconnected")

    @classmethod
    def from_lengths(cls, vertices, internal, external, l_ext=None, h=H_GRID):
        """``internal``: (id, a, b, length); ``external``: (id, a)."""
        lens = [float(x[3]) for x in internal]
        if l_ext is None:
            l_ext = 3.0 * max(lens) if lens else DEFAULT_L_EXT
        edges = [GEdge(str(i), a, b, float(l)) for i, a, b, l in internal]
        edges += [GEdge(str(i), a, None, float(l_ext)) for i, a in external]
        return cls(vertices, edges, h)

    @classmethod
    def from_curve(cls, curve, T: float, g=None, h=H_GRID, l_ext=None):
        from .tropical import edge_lengths

        lens = edge_lengths(curve, g)
        internal = [(e.id, e.start, e.end, T * lens[e.id]) for e in curve.internal_edges]
        external = [(e.id, e.start) for e in curve.external_edges]
        return cls.from_lengths(curve.vertex_ids(), internal, external, l_ext, h)

    @property
    def internal_lengths(self):
        return [e.length for e in self.edges if not e.external]

    @property
    def l_min(self):
        ls = self.internal_lengths
        return min(ls) if ls else math.inf

    @property
    def l_max(self):
        ls = self.internal_lengths
        return max(ls) if ls else math.inf

    def integrate(self, f) -> float:
        return float(self.w @ f)

    def d(self, u):
        return self.D @ u

    def dstar(self, beta):
        return (self.D.T @ (self.seg_h * beta)) / self.w

    def laplacian(self, u):
        return -(self.L @ u) / self.w

    def node_function(self, fn):
        """Sample ``fn(edge, t)`` on every node (vertex nodes take the value from the last
        edge that reaches them)."""
        out = np.zeros(self.n_nodes)
        for e in self.edges:
            out[self.edge_nodes[e.id]] = fn(e, self.edge_t[e.id])
        return out

    def weighted_norm(self, u, delta=-0.1):
        """sup |u| e^{delta t}, t the distance to the nearest vertex."""
        return float(np.max(np.abs(u) * np.exp(delta * self.node_t))) if len(u) else 0.0


# --------------------------------------------------------------- partition

@dataclass
class Partition:
    graph: MetricGraph
    chi: dict  # vertex -> node values

    def matrix(self) -> np.ndarray:
        return np.stack([self.chi[v] for v in self.graph.vertices], axis=1)


def build_partition(graph: MetricGraph, profile: str = "quintic") -> Partition:
    """Partition of unity switching across [l/2 - 1, l/2 + 1] on internal edges."""
    if profile != "quintic":
        raise ValueError("only the C^2 quintic smoothstep is available")
    for e in graph.edges:
        if not e.external and e.length < L_MIN_EDGE:
            raise EdgeTooShort(f"edge {e.id} has length {e.length} < {L_MIN_EDGE}")
    chi = {v: np.zeros(graph.n_nodes) for v in graph.vertices}
    for v in graph.vertices:
        chi[v][graph.vertex_node[v]] = 1.0
    for e in graph.edges:
        nodes = graph.edge_nodes[e.id]
        t = graph.edge_t[e.id]
        if e.external:
            chi[e.a][nodes] = 1.0
        else:
            s = _cutoff.smoothstep((t - (e.length / 2 - 1.0)) / 2.0)
            chi[e.a][nodes[:-1]] = (1.0 - s)[:-1]
            chi[e.b][nodes[1:]] = s[1:]
    return Partition(graph, chi)


@dataclass
class StiffnessMatrix:
    A: np.ndarray

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.A)


def stiffness(partition: Partition) -> StiffnessMatrix:
    X = partition.matrix()
    A = X.T @ (partition.graph.L @ X)
    A = 0.5 * (A + A.T)
    return StiffnessMatrix(A)


def _as_matrix(A):
    return np.asarray(A.A if isinstance(A, StiffnessMatrix) else A, dtype=float)


def remove_obstructions(A, b) -> np.ndarray:
    """Minimum-norm solution of A x = b for zero-sum b (so sum x = 0)."""
    A = _as_matrix(A)
    b = np.asarray(b, dtype=float)
    if abs(b.sum()) > 1e-10 * max(1.0, np.abs(b).sum()):
        raise NotInRange(f"sum of b is {b.sum():.3e}, not zero")
    n = len(b)
    return np.linalg.solve(A + np.ones((n, n)) / n, b)


def obstruction_constant(A) -> float:
    """max |A^+_ij|, so that |x|_inf <= C |b|_1."""
    A = _as_matrix(A)
    n = len(A)
    J = np.ones((n, n)) / n
    return float(np.abs(np.linalg.inv(A + J) - J).max())


# ----------------------------------------------------------- direct solves

def _bordered(Lm, w):
    n = Lm.shape[0]
    M = sp.bmat([[Lm, sp.csr_matrix(w.reshape(-1, 1))], [sp.csr_matrix(w.reshape(1, -1)), None]], format="csc")
    return spla.splu(M)


def _zero_mean_check(graph_w, f):
    m = float(graph_w @ f)
    if abs(m) > 1e-10 * max(1.0, float(graph_w @ np.abs(f))):
        raise NonZeroMean(f"integral of f is {m:.3e}")


def graph_poisson(graph: MetricGraph, f):
    """Solve d* d u = f with Kirchhoff vertices and zero-flux far ends.

    Returns (u, beta = d u) with u normalised to zero mean.
    """
    f = np.asarray(f, dtype=float)
    _zero_mean_check(graph.w, f)
    lu = _bordered(graph.L, graph.w)
    sol = lu.solve(np.concatenate([graph.w * f, [0.0]]))
    u = sol[:-1]
    return u, graph.d(u)


def transverse_poisson(graph: MetricGraph, f, kappa: float = 1.0):
    """Solve -u'' + kappa^2 u = f off the vertex nodes, u = 0 at vertices.

    Returns (u, (beta_t, beta_phi))."""
    f = np.asarray(f, dtype=float)
    free = ~graph.is_vertex
    M = (graph.L + kappa ** 2 * sp.diags(graph.w)).tocsc()[free][:, free]
    u = np.zeros(graph.n_nodes)
    u[free] = spla.spsolve(M.tocsc(), graph.w[free] * f[free])
    return u, (graph.d(u), kappa * u)


# --------------------------------------------------------------- parametrix

@dataclass
class Beta:
    """One-form of the surrogate: zero mode on segments, transverse mode as
    (segment part, node part)."""
    zero: np.ndarray
    trans_t: np.ndarray
    trans_phi: np.ndarray

    @classmethod
    def zeros(cls, g: MetricGraph):
        S = len(g.seg_h)
        return cls(np.zeros(S), np.zeros(S), np.zeros(g.n_nodes))

    def __add__(self, o):
        return Beta(self.zero + o.zero, self.trans_t + o.trans_t, self.trans_phi + o.trans_phi)


class _Star:
    """Star neighbourhood of a vertex: its edges in full, with every
    internal edge ending at a private far node."""

    def __init__(self, graph: MetricGraph, v: str, kappa: float):
        self.v = v
        loc = {graph.vertex_node[v]: 0}
        segs, li, lj = [], [], []
        cut = []  # (local node, distance t from v, edge length) on internal edges
        nxt = 1
        self.far_nodes = []
        for e in graph.edges:
            if v not in (e.a, e.b):
                continue
            nodes = graph.edge_nodes[e.id]
            t = graph.edge_t[e.id]
            if e.b == v:
                nodes, t = nodes[::-1], e.length - t[::-1]
                sidx = graph.edge_segs[e.id][::-1]
            else:
                sidx = graph.edge_segs[e.id]
            local = [0]
            for k, gnode in enumerate(nodes[1:], start=1):
                last = k == len(nodes) - 1
                if last and not e.external:
                    local.append(nxt)
                    self.far_nodes.append((nxt, gnode))
                    nxt += 1
                else:
                    if gnode not in loc:
                        loc[gnode] = nxt
                        nxt += 1
                    local.append(loc[gnode])
                if not e.external:
                    cut.append((local[-1], t[k], e.length, e.id))
            rev = e.b == v
            for k, s in enumerate(sidx):
                segs.append(s)
                # keep the global segment orientation
                li.append(local[k + 1] if rev else local[k])
                lj.append(local[k] if rev else local[k + 1])
        self.n = nxt
        self.global_of = np.zeros(nxt, dtype=int)
        for gnode, l in loc.items():
            self.global_of[l] = gnode
        for l, gnode in self.far_nodes:
            self.global_of[l] = gnode
        self.segs = np.array(segs)
        h = graph.seg_h[self.segs]
        S = len(segs)
        r = np.arange(S)
        self.D = sp.csr_matrix(
            (np.concatenate([-1.0 / h, 1.0 / h]), (np.concatenate([r, r]), np.concatenate([li, lj]))),
            shape=(S, nxt),
        )
        self.L = (self.D.T @ sp.diags(h) @ self.D).tocsc()
        w = np.zeros(nxt)
        np.add.at(w, np.array(li), h / 2)
        np.add.at(w, np.array(lj), h / 2)
        self.w = w
        # transfer cutoff: 0 up to 2l/3, 1 beyond 2l/3 + 1
        self.cut = np.zeros(nxt)
        for l, t, length, _ in cut:
            self.cut[l] = _cutoff.smoothstep(t - 2.0 * length / 3.0)
        self.is_far = np.zeros(nxt, dtype=bool)
        for l, _ in self.far_nodes:
            self.is_far[l] = True
        self.far_edge = {}
        for l, t, length, eid in cut:
            if self.is_far[l]:
                self.far_edge[eid] = l
        self._edge_of_node = np.full(nxt, -1)
        for l, t, length, eid in cut:
            self._edge_of_node[l] = self.far_nodes.index(next(fn for fn in self.far_nodes if fn[0] == self.far_edge[eid]))
        self.lu0 = _bordered(self.L, self.w)
        M = (self.L + kappa ** 2 * sp.diags(self.w)).tocsc()[1:, 1:]
        self.lu1 = spla.splu(M.tocsc())
        self.kappa = kappa

    def restrict(self, g_nodes_values):
        vals = g_nodes_values[self.global_of].copy()
        vals[self.is_far] = 0.0
        return vals

    def solve_zero(self, src):
        u = self.lu0.solve(np.concatenate([self.w * src, [0.0]]))[:-1]
        # far value per internal edge, blended in beyond the cutoff
        c = np.zeros(self.n)
        far_vals = np.array([u[l] for l, _ in self.far_nodes])
        on_edge = self._edge_of_node >= 0
        c[on_edge] = far_vals[self._edge_of_node[on_edge]]
        ut = (1.0 - self.cut) * u + self.cut * c
        return self.D @ ut

    def solve_trans(self, src):
        u = np.zeros(self.n)
        u[1:] = self.lu1.solve(self.w[1:] * src[1:])
        ut = (1.0 - self.cut) * u
        return self.D @ ut, self.kappa * ut


class Parametrix:
    def __init__(self, graph: MetricGraph, partition: Partition, kappa: float = 1.0):
        self.graph = graph
        self.partition = partition
        self.kappa = float(kappa)
        self.A = stiffness(partition)
        self.X = partition.matrix()
        self.stars = {v: _Star(graph, v, self.kappa) for v in graph.vertices}
        # Delta chi_v and d chi_v
        self.lap_chi = np.stack([graph.laplacian(self.X[:, k]) for k in range(self.X.shape[1])], axis=1)
        self.dchi = np.stack([graph.d(self.X[:, k]) for k in range(self.X.shape[1])], axis=1)

    def apply(self, f0, f1):
        """(P f, obstruction coefficients x)."""
        g = self.graph
        b = self.X.T @ (g.w * f0)
        b = b - b.mean()  # remove rounding drift; exact zero-sum in theory
        x = remove_obstructions(self.A, b)
        f2 = f0 + self.lap_chi @ x
        beta = Beta.zeros(g)
        beta.zero += self.dchi @ x
        for k, v in enumerate(g.vertices):
            st = self.stars[v]
            chi = self.X[:, k]
            bz = st.solve_zero(st.restrict(chi * f2))
            beta.zero[st.segs] += bz
            bt, bp = st.solve_trans(st.restrict(chi * f1))
            beta.trans_t[st.segs] += bt
            np.add.at(beta.trans_phi, st.global_of[1:], bp[1:])
        return beta, x

    def dstar(self, beta: Beta):
        g = self.graph
        r0 = g.dstar(beta.zero)
        r1 = g.dstar(beta.trans_t) + self.kappa * beta.trans_phi
        r1[g.is_vertex] = 0.0
        return r0, r1


def _split(f, graph):
    if isinstance(f, tuple):
        f0, f1 = (np.asarray(x, dtype=float) for x in f)
    else:
        f0, f1 = np.asarray(f, dtype=float), np.zeros(graph.n_nodes)
    f1 = f1.copy()
    f1[graph.is_vertex] = 0.0
    return f0, f1


def parametrix_solve(graph: MetricGraph, partition: Partition, f, kappa: float = 1.0,
                     tol: float = 1e-8, max_iter: int = 200, max_ratio: float = 0.9):
    """Neumann series around the partition-of-unity parametrix.

    ``f`` is a node array (zero mode) or a pair (zero mode, transverse
    mode). Returns (beta, diagnostics).
    """
    f0, f1 = _split(f, graph)
    _zero_mean_check(graph.w, f0)
    P = Parametrix(graph, partition, kappa)
    beta = Beta.zeros(graph)
    c = np.zeros(len(graph.vertices))
    r0, r1 = f0.copy(), f1.copy()
    norms = [max(np.abs(r0).max(initial=0.0), np.abs(r1).max(initial=0.0))]
    k = 0
    while norms[-1] >= tol and k < max_iter:
        step, x = P.apply(r0, r1)
        beta = beta + step
        c += x
        d0, d1 = P.dstar(beta)
        r0, r1 = f0 - d0, f1 - d1
        norms.append(max(np.abs(r0).max(), np.abs(r1).max()))
        k += 1
    ratio = (norms[-1] / norms[0]) ** (1.0 / k) if k and norms[0] > 0 else 0.0
    beta1 = beta.zero - P.dchi @ c
    diag = {
        "l_min": graph.l_min,
        "l_max": graph.l_max,
        "contraction_ratio": float(ratio),
        "iterations": int(k),
        "residual": float(norms[-1]),
        "residual_history": [float(x) for x in norms],
        "beta1_norm": float(max(np.abs(beta1).max(initial=0.0), np.abs(beta.trans_t).max(initial=0.0))),
        "c_v_values": {v: float(cv) for v, cv in zip(graph.vertices, c)},
    }
    if norms[-1] >= tol:
        raise NoConvergence(f"residual {norms[-1]:.3e} after {k} iterations (ratio {ratio:.3f})")
    if ratio >= max_ratio:
        raise NoConvergence(f"contraction ratio {ratio:.3f} >= {max_ratio}")
    return beta, diag


# -------------------------------------------------------- model iteration

@dataclass
class IterationResult:
    history: list
    fixed_point: float
    closed_form: float
    ratio: float


def majorant_fixed_point(e0: float, q: float, C: float, eps: float) -> float:
    """Smaller root of q C^2 m^2 + (q C eps - 1) m + e0 = 0."""
    a, b = q * C * C, q * C * eps - 1.0
    if a == 0:
        return e0 / -b if b < 0 else math.inf
    disc = b * b - 4 * a * e0
    if disc < 0 or b >= 0:
        return math.inf
    return 2 * e0 / (-b + math.sqrt(disc))


def model_iteration(graph: MetricGraph, partition: Partition, err0, q: float, c: float = 1.0,
                    C: float = 1.0, tol: float = 1e-14, max_iter: int = 500) -> IterationResult:
    """Scalar majorant of the nonlinear fixed-point iteration

        m_{k+1} = |err0| + q C m_k (e^{-c l_min / 2} + C m_k).

    Raises Divergence when the increments grow three times in a row.
    """
    e0 = float(np.max(np.abs(err0))) if np.ndim(err0) else abs(float(err0))
    eps = math.exp(-c * graph.l_min / 2) if math.isfinite(graph.l_min) else 0.0
    m = [0.0]
    grow = 0
    for _ in range(max_iter):
        cur = m[-1]
        nxt = e0 + q * C * cur * (eps + C * cur)
        m.append(nxt)
        if not math.isfinite(nxt):
            raise Divergence("majorant overflowed")
        if len(m) >= 3:
            if abs(m[-1] - m[-2]) > abs(m[-2] - m[-3]):
                grow += 1
                if grow >= 3:
                    raise Divergence(f"increments grew three times in a row (m = {nxt:.3e})")
            else:
                grow = 0
        if abs(nxt - cur) <= tol * max(1.0, abs(nxt)):
            break
    incs = np.abs(np.diff(m))
    nz = incs[incs > 0]
    ratio = float(np.exp(np.mean(np.log(nz[1:] / nz[:-1])))) if len(nz) > 2 else 0.0
    return IterationResult(m, m[-1], majorant_fixed_point(e0, q, C, eps), ratio)


def standard_source(graph: MetricGraph, vertex: Optional[str] = None):
    """Deterministic test source near one vertex: a zero-sum bump pair on
    two of its edges (zero mode) and a bump on every edge at it
    (transverse mode)."""
    v = graph.vertices[0] if vertex is None else vertex
    at = [e for e in graph.edges if v in (e.a, e.b)]

    def from_v(e, t):
        return t if e.a == v else e.length - t

    def bump(x):
        return x * np.exp(-((x - 2.0) ** 2))

    f0 = np.zeros(graph.n_nodes)
    f1 = np.zeros(graph.n_nodes)
    for k, e in enumerate(at[:2]):
        nodes = graph.edge_nodes[e.id][1:-1]
        f0[nodes] = (1.0 if k == 0 else -1.0) * bump(from_v(e, graph.edge_t[e.id][1:-1]))
    neg = f0 < 0
    if neg.any():
        # exact zero mean on the actual grids
        f0[neg] *= graph.w[~neg] @ f0[~neg] / -(graph.w[neg] @ f0[neg])
    for e in at:
        nodes = graph.edge_nodes[e.id][1:-1]
        f1[nodes] = bump(from_v(e, graph.edge_t[e.id][1:-1]))
    return f0, f1


def diagnostics_json(diag: dict) -> str:
    import json

    keys = ("l_min", "l_max", "contraction_ratio", "iterations", "residual", "beta1_norm", "c_v_values")
    doc = {k: diag[k] for k in keys}
    for k in ("l_min", "l_max"):
        if not math.isfinite(doc[k]):
            doc[k] = None
    return json.dumps(doc, sort_keys=True, indent=2)
