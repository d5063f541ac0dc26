"""Global phase constants: per-vertex balancing solved by peeling vertices."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import GenericityExhausted, Inconclusive, OverConstrained, RootCollision, SingularCurve
from .tropical import TropicalCurve
from .vertex import build_vertex_model, wrap_angle

TWO_PI = 2.0 * math.pi


def natural_key(s: str):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", s)]


@dataclass
class PhaseAssignment:
    theta: dict  # edge id -> angle in [0, 2 pi)
    free_params: tuple  # ((edge id, angle), ...)
    pivots: dict = field(default_factory=dict)  # vertex -> solved edge
    order: tuple = ()  # peel order
    attempts: int = 0
    last_vertex: Optional[str] = None

    def free_values(self):
        return [a for _, a in self.free_params]

    def to_dict(self):
        return {
            "theta": {k: self.theta[k] for k in sorted(self.theta, key=natural_key)},
            "free_params": [[e, a] for e, a in self.free_params],
            "attempts": self.attempts,
        }


def moduli_dimension(curve: TropicalCurve) -> int:
    return len(curve.edges) - len(curve.vertices)


def elimination_order(curve: TropicalCurve, last_vertex: Optional[str] = None):
    """Peel order and the pivot edge solved at each vertex."""
    remaining = set(curve.vertices)
    removed = []
    pivots = {}
    used = set()
    while remaining:
        best = None
        for v in sorted(remaining, key=natural_key):
            if v == last_vertex and len(remaining) > 1:
                continue
            ext, free_int = [], []
            for e, _ in curve.star(v):
                if e.id in used:
                    continue
                if e.external:
                    ext.append(e.id)
                else:
                    other = e.end if e.start == v else e.start
                    if other not in remaining:
                        free_int.append(e.id)
            if not ext and not free_int:
                continue
            cand = (0 if ext else 1, natural_key(v))
            if best is None or cand < best[0]:
                pick = sorted(ext or free_int, key=natural_key)[-1]
                best = (cand, v, pick)
        if best is None:
            raise OverConstrained(
                f"no vertex among {sorted(remaining, key=natural_key)} has an unsolved outgoing edge"
            )
        _, v, e = best
        pivots[v] = e
        used.add(e)
        removed.append(v)
        remaining.discard(v)
    return removed, pivots


def free_edges(curve: TropicalCurve, last_vertex: Optional[str] = None) -> list[str]:
    _, pivots = elimination_order(curve, last_vertex)
    piv = set(pivots.values())
    return sorted((e.id for e in curve.edges if e.id not in piv), key=natural_key)


def solve_phases(curve: TropicalCurve, free_values: Sequence[float], seed=None,
                 last_vertex: Optional[str] = None) -> PhaseAssignment:
    """Phase constants satisfying every vertex constraint.

    ``free_values`` are assigned to the non-pivot edges in id order;
    ``seed`` is accepted for interface symmetry and unused (the solve is
    deterministic).
    """
    order, pivots = elimination_order(curve, last_vertex)
    piv = set(pivots.values())
    free = sorted((e.id for e in curve.edges if e.id not in piv), key=natural_key)
    free_values = [float(x) for x in free_values]
    if len(free_values) != len(free):
        raise OverConstrained(f"expected {len(free)} free values, got {len(free_values)}")
    theta = {e: float(np.mod(a, TWO_PI)) for e, a in zip(free, free_values)}
    for v in reversed(order):
        star = curve.star(v)
        others = [theta[e.id] for e, _ in star if e.id != pivots[v]]
        val = float(np.mod(len(star) * math.pi - math.fsum(others), TWO_PI))
        theta[pivots[v]] = 0.0 if val == TWO_PI else val
    return PhaseAssignment(theta, tuple(zip(free, free_values)), pivots, tuple(order), 0, last_vertex)


def vertex_residuals(curve: TropicalCurve, theta: dict) -> dict:
    out = {}
    for v in curve.vertex_ids():
        star = curve.star(v)
        out[v] = wrap_angle(math.fsum(theta[e.id] for e, _ in star) - len(star) * math.pi)
    return out


def genericity_sample(curve: TropicalCurve, assignment: PhaseAssignment, seed: int = 0,
                      attempts: int = 50, step: float = 1e-2) -> PhaseAssignment:
    """Perturb the free phases until every vertex model is smooth with
    distinct facet roots."""

    def ok(theta):
        try:
            for v in curve.vertex_ids():
                build_vertex_model(curve, v, theta, seed=seed)
        except (RootCollision, SingularCurve, Inconclusive):
            return False
        return True

    if ok(assignment.theta):
        return assignment
    rng = np.random.default_rng(seed)
    base = np.array(assignment.free_values())
    for k in range(1, attempts + 1):
        trial = base + rng.uniform(-step, step, size=base.shape)
        a = solve_phases(curve, trial, last_vertex=assignment.last_vertex)
        if ok(a.theta):
            a.attempts = k
            return a
    raise GenericityExhausted(f"no generic phases after {attempts} perturbations")
