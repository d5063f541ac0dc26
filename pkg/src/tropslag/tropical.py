"""Tropical curves: data model, JSON document format, validators."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import lattice
from .errors import (
    CurveSyntaxError,
    GeometryError,
    LatticeError,
    SchemaError,
    UnknownVertex,
)

INF = "INF"


@dataclass(frozen=True)
class Edge:
    id: str
    start: str
    end: Optional[str]  # None for an external edge
    direction: tuple[int, ...]

    @property
    def external(self) -> bool:
        return self.end is None


@dataclass(frozen=True)
class TropicalCurve:
    dimension: int
    vertices: dict  # id -> tuple[Fraction, ...]
    edges: tuple[Edge, ...]

    def vertex_ids(self) -> list[str]:
        return sorted(self.vertices)

    def edge(self, eid: str) -> Edge:
        for e in self.edges:
            if e.id == eid:
                return e
        raise KeyError(eid)

    def star(self, v: str) -> list[tuple[Edge, tuple[int, ...]]]:
        """Edges at ``v`` with their outward directions, in edge order."""
        if v not in self.vertices:
            raise UnknownVertex(v)
        out = []
        for e in self.edges:
            if e.start == v:
                out.append((e, e.direction))
            if e.end == v:
                out.append((e, tuple(-x for x in e.direction)))
        return out

    @property
    def internal_edges(self) -> list[Edge]:
        return [e for e in self.edges if not e.external]

    @property
    def external_edges(self) -> list[Edge]:
        return [e for e in self.edges if e.external]


@dataclass(frozen=True)
class LocalFan:
    center: tuple
    rays: tuple[tuple[int, ...], ...]
    vertex: str = "fan"
    edge_ids: tuple[str, ...] = ()


@dataclass
class ValidationReport:
    balanced: dict = field(default_factory=dict)
    locally_planar: dict = field(default_factory=dict)
    deficits: dict = field(default_factory=dict)
    messages: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(self.balanced.values()) and all(self.locally_planar.values())

    def merge(self, other: "ValidationReport") -> "ValidationReport":
        return ValidationReport(
            {**self.balanced, **other.balanced},
            {**self.locally_planar, **other.locally_planar},
            {**self.deficits, **other.deficits},
            self.messages + other.messages,
        )

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "balanced": dict(sorted(self.balanced.items())),
            "locally_planar": dict(sorted(self.locally_planar.items())),
            "deficits": {k: list(v) for k, v in sorted(self.deficits.items())},
            "messages": list(self.messages),
        }


# ---------------------------------------------------------------- parsing

def _rational(x, where) -> Fraction:
    if isinstance(x, bool):
        raise SchemaError(f"{where}: expected a rational, got {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError):
            raise SchemaError(f"{where}: bad rational {x!r}") from None
    raise SchemaError(f"{where}: expected a 'p/q' string, got {x!r}")


def _int(x, where) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise SchemaError(f"{where}: expected an integer, got {x!r}")
    return x


def curve_from_dict(doc) -> TropicalCurve:
    if not isinstance(doc, dict):
        raise SchemaError("top level must be an object")
    for key in ("dimension", "vertices", "edges"):
        if key not in doc:
            raise SchemaError(f"missing field '{key}'")
    n = _int(doc["dimension"], "dimension")
    if n < 2:
        raise SchemaError("dimension must be at least 2")
    if not isinstance(doc["vertices"], dict) or not doc["vertices"]:
        raise SchemaError("'vertices' must be a non-empty object")
    verts = {}
    for vid, pos in doc["vertices"].items():
        if not isinstance(pos, list) or len(pos) != n:
            raise SchemaError(f"vertex {vid}: expected {n} coordinates")
        verts[str(vid)] = tuple(_rational(x, f"vertex {vid}") for x in pos)
    if not isinstance(doc["edges"], list) or not doc["edges"]:
        raise SchemaError("'edges' must be a non-empty list")
    edges = []
    seen = set()
    for k, ed in enumerate(doc["edges"]):
        if not isinstance(ed, dict):
            raise SchemaError(f"edge #{k} must be an object")
        for key in ("id", "from", "to", "direction"):
            if key not in ed:
                raise SchemaError(f"edge #{k}: missing field '{key}'")
        eid = str(ed["id"])
        if eid in seen:
            raise SchemaError(f"duplicate edge id {eid}")
        seen.add(eid)
        a, b = str(ed["from"]), str(ed["to"])
        if a not in verts:
            raise UnknownVertex(f"edge {eid}: unknown vertex {a}")
        if b != INF and b not in verts:
            raise UnknownVertex(f"edge {eid}: unknown vertex {b}")
        d = ed["direction"]
        if not isinstance(d, list) or len(d) != n:
            raise SchemaError(f"edge {eid}: direction needs {n} integers")
        try:
            d = lattice.primitive([_int(x, f"edge {eid}") for x in d])
        except LatticeError:
            raise GeometryError(f"edge {eid}: zero direction") from None
        end = None if b == INF else b
        if end is not None:
            _check_parallel(eid, verts[a], verts[end], d)
        edges.append(Edge(eid, a, end, d))
    curve = TropicalCurve(n, verts, tuple(edges))
    _check_connected(curve)
    return curve


def _check_parallel(eid, p, q, d):
    delta = [y - x for x, y in zip(p, q)]
    lam = None
    for di, xi in zip(d, delta):
        if di == 0:
            if xi != 0:
                lam = Fraction(-1)
                break
            continue
        r = xi / di
        if lam is None:
            lam = r
        elif r != lam:
            lam = Fraction(-1)
            break
    if lam is None or lam <= 0:
        raise GeometryError(
            f"edge {eid}: displacement {[str(x) for x in delta]} is not a positive multiple of {list(d)}"
        )


def _check_connected(curve: TropicalCurve):
    ids = curve.vertex_ids()
    adj = {v: set() for v in ids}
    for e in curve.internal_edges:
        adj[e.start].add(e.end)
        adj[e.end].add(e.start)
    seen = {ids[0]}
    stack = [ids[0]]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    if len(seen) != len(ids):
        raise GeometryError(f"graph is disconnected: {sorted(set(ids) - seen)} unreachable")


def parse_curve(text: str) -> TropicalCurve:
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, TypeError) as exc:
        raise CurveSyntaxError(f"malformed curve document: {exc}") from None
    return curve_from_dict(doc)


def load_curve(path) -> TropicalCurve:
    with open(path, encoding="utf-8") as fh:
        return parse_curve(fh.read())


def _fmt(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def curve_to_dict(curve: TropicalCurve) -> dict:
    return {
        "dimension": curve.dimension,
        "vertices": {v: [_fmt(x) for x in curve.vertices[v]] for v in curve.vertex_ids()},
        "edges": [
            {"id": e.id, "from": e.start, "to": INF if e.end is None else e.end,
             "direction": list(e.direction)}
            for e in curve.edges
        ],
    }


def serialize_curve(curve: TropicalCurve) -> str:
    return json.dumps(curve_to_dict(curve), sort_keys=True, indent=2) + "\n"


# ------------------------------------------------------------- validators

def localize(curve: TropicalCurve, v: str) -> LocalFan:
    star = curve.star(v)
    return LocalFan(curve.vertices[v], tuple(d for _, d in star), v, tuple(e.id for e, _ in star))


def _fans(obj) -> list[LocalFan]:
    if isinstance(obj, LocalFan):
        return [obj]
    return [localize(obj, v) for v in obj.vertex_ids()]


def validate_balancing(obj) -> ValidationReport:
    """Per-vertex check that the outward primitive directions sum to zero."""
    rep = ValidationReport()
    for fan in _fans(obj):
        n = len(fan.rays[0]) if fan.rays else 0
        s = tuple(sum(r[i] for r in fan.rays) for i in range(n))
        ok = all(x == 0 for x in s)
        rep.balanced[fan.vertex] = ok
        if not ok:
            rep.deficits[fan.vertex] = s
            rep.messages.append(f"vertex {fan.vertex}: unbalanced, deficit {list(s)}")
    return rep


def validate_locally_planar(obj) -> ValidationReport:
    """Valency at least 3 and adjacent directions spanning a rank-2 lattice."""
    rep = ValidationReport()
    for fan in _fans(obj):
        val = len(fan.rays)
        r = lattice.rank(fan.rays)
        ok = val >= 3 and r == 2
        rep.locally_planar[fan.vertex] = ok
        if val < 3:
            rep.messages.append(f"vertex {fan.vertex}: valency {val} < 3")
        if r != 2:
            rep.messages.append(f"vertex {fan.vertex}: directions span rank {r}, expected 2")
    return rep


def validate(curve: TropicalCurve) -> ValidationReport:
    return validate_balancing(curve).merge(validate_locally_planar(curve))


def edge_lengths(curve: TropicalCurve, g=None) -> dict:
    """Length of each internal edge under the metric ``g``; inf for rays."""
    n = curve.dimension
    G = np.eye(n) if g is None else np.asarray(g, dtype=float)
    out = {}
    for e in curve.edges:
        if e.external:
            out[e.id] = math.inf
            continue
        d = np.array([float(y - x) for x, y in zip(curve.vertices[e.start], curve.vertices[e.end])])
        out[e.id] = float(np.sqrt(d @ G @ d))
    return out


def position(curve: TropicalCurve, v: str) -> np.ndarray:
    return np.array([float(x) for x in curve.vertices[v]])


def displacement(curve: TropicalCurve, e: Edge) -> Sequence[Fraction]:
    return [y - x for x, y in zip(curve.vertices[e.start], curve.vertices[e.end])]
