"""Tropical curves in R^n, their local holomorphic models under a
hyperkaehler rotation, cutoff pregluing, and a metric-graph surrogate of
the linear gluing analysis."""

from .errors import TropslagError
from .glue import build_matching, check_matching, convergence_test, err_estimate, hausdorff
from .hk import KahlerData, asymptotic_decay, hk_forward, hk_inverse, sample_curve
from .kernels import BACKEND
from .lattice import complete_to_unimodular, primitive, saturated_rank2_basis
from .linear import (
    MetricGraph,
    build_partition,
    graph_poisson,
    model_iteration,
    parametrix_solve,
    remove_obstructions,
    stiffness,
)
from .phases import genericity_sample, moduli_dimension, solve_phases
from .tropical import TropicalCurve, load_curve, parse_curve, validate
from .vertex import build_vertex_model, check_smooth, facet_roots, phase_sum_check, polygon_from_fan, well_centred_poly

__version__ = "0.1.0"
