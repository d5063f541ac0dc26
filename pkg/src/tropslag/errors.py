"""Exception hierarchy.

Every error carries a stable ``code`` string; the command-line front end
emits it in its one-line JSON error record.
"""

from __future__ import annotations


class TropslagError(Exception):
    code = "error"


# lattice
class LatticeError(TropslagError, ValueError):
    code = "lattice"


class ZeroVector(LatticeError):
    code = "zero_vector"


class RankMismatch(LatticeError):
    code = "rank_mismatch"


class NotSaturated(LatticeError):
    code = "not_saturated"


# curve documents
class CurveError(TropslagError, ValueError):
    code = "curve"


class CurveSyntaxError(CurveError):
    code = "syntax"


class SchemaError(CurveError):
    code = "schema"


class GeometryError(CurveError):
    code = "geometry"


class UnknownVertex(CurveError, KeyError):
    code = "unknown_vertex"


class ValidationFailed(CurveError):
    code = "validation_failed"


# vertex models
class VertexModelError(TropslagError):
    code = "vertex_model"


class Unbalanced(VertexModelError):
    code = "unbalanced"


class RootCollision(VertexModelError):
    code = "root_collision"


class PhaseInconsistent(VertexModelError):
    code = "phase_inconsistent"


class SingularCurve(VertexModelError):
    code = "singular_curve"


class Inconclusive(VertexModelError):
    code = "inconclusive"


# phases
class OverConstrained(TropslagError):
    code = "over_constrained"


class GenericityExhausted(TropslagError):
    code = "genericity_exhausted"


# geometry / sampling
class ZeroCoordinate(TropslagError, ValueError):
    code = "zero_coordinate"


class EmptyWindow(TropslagError):
    code = "empty_window"


class ComponentNotFound(TropslagError):
    code = "component_not_found"


class DimensionMismatch(TropslagError, ValueError):
    code = "dimension_mismatch"


# gluing
class MatchFailure(TropslagError):
    code = "match_failure"


class OverlapTooShort(TropslagError):
    code = "overlap_too_short"


# linear surrogate
class EdgeTooShort(TropslagError):
    code = "edge_too_short"


class NotInRange(TropslagError, ValueError):
    code = "not_in_range"


class NonZeroMean(TropslagError, ValueError):
    code = "nonzero_mean"


class NoConvergence(TropslagError):
    code = "no_convergence"


class Divergence(TropslagError):
    code = "divergence"


# configuration
class ConfigError(TropslagError, ValueError):
    code = "config"
