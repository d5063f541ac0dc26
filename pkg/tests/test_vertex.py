import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st
from scipy.spatial import ConvexHull

from conftest import fixture_curve, valid_fixture_names
from tropslag.errors import PhaseInconsistent, RootCollision, Unbalanced
from tropslag.lattice import primitive
from tropslag.phases import solve_phases, moduli_dimension
from tropslag.tropical import LocalFan
from tropslag.vertex import (
    LaurentPoly,
    build_vertex_model,
    check_smooth,
    facet_polynomial,
    facet_roots,
    phase_sum_check,
    polygon_from_fan,
    well_centred_poly,
)


def fan(*rays):
    return LocalFan((0, 0), tuple(rays))


# ------------------------------------------------------------- polygons

def _normal_fan(points):
    """Outward primitive normals with lattice lengths of a lattice polygon."""
    P = np.array(points)
    hull = ConvexHull(P)
    V = [tuple(P[i]) for i in hull.vertices]  # ccw
    out = {}
    for a, b in zip(V, V[1:] + V[:1]):
        d = (int(b[0] - a[0]), int(b[1] - a[1]))
        g = math.gcd(*d)
        n = primitive((d[1], -d[0]))
        out[n] = out.get(n, 0) + g
    return out, V


def _enumerated(target, size=3):
    """All lattice polygons in [0, size]^2 (up to translation) whose normal
    fan with lattice lengths equals ``target``."""
    grid = list(itertools.product(range(size + 1), repeat=2))
    found = set()
    for k in range(3, 5):
        for pts in itertools.combinations(grid, k):
            try:
                nf, V = _normal_fan(pts)
            except Exception:
                continue
            if len(V) != k or nf != target:
                continue
            lo = min(V)
            found.add(tuple(sorted((x - lo[0], y - lo[1]) for x, y in V)))
    return found


@pytest.mark.parametrize("rays", [
    ((-1, 0), (0, 1), (1, -1)),
    ((1, 0), (-1, 0), (0, 1), (0, -1)),
    ((0, -1), (-1, 0), (1, 1)),
    ((-1, 0), (-1, 0), (0, 1), (0, 1), (1, -1), (1, -1)),
])
def test_polygon_against_enumeration(rays):
    P = polygon_from_fan(fan(*rays))
    target = {}
    for r in rays:
        target[r] = target.get(r, 0) + 1
    found = _enumerated(target)
    assert found == {tuple(sorted(P.vertices))}


def test_polygon_examples():
    P = polygon_from_fan(fan((-1, 0), (0, 1), (1, -1)))
    assert sorted(P.vertices) == [(0, 0), (0, 1), (1, 1)]
    Q = polygon_from_fan(fan((1, 0), (-1, 0), (0, 1), (0, -1)))
    assert sorted(Q.vertices) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    D = polygon_from_fan(fan(*[(-1, 0), (0, 1), (1, -1)] * 2))
    assert sorted(D.vertices) == [(0, 0), (0, 2), (2, 2)]
    assert all(f.length == 2 for f in D.facets)
    with pytest.raises(Unbalanced):
        polygon_from_fan(fan((1, 0), (0, 1)))


@st.composite
def balanced_fans(draw):
    k = draw(st.integers(2, 5))
    rays = [primitive(draw(st.tuples(st.integers(-3, 3), st.integers(-3, 3)).filter(any))) for _ in range(k)]
    s = (-sum(r[0] for r in rays), -sum(r[1] for r in rays))
    if any(s):
        p = primitive(s)
        m = next(x // y for x, y in zip(s, p) if y)
        rays += [p] * m
    from tropslag.lattice import rank
    from hypothesis import assume
    assume(rank(rays) == 2)
    return rays


@settings(max_examples=80, deadline=None)
@given(balanced_fans())
def test_polygon_invariants(rays):
    P = polygon_from_fan(fan(*rays))
    assert sum(f.length * f.normal[0] for f in P.facets) == 0
    assert sum(f.length * f.normal[1] for f in P.facets) == 0
    mult = {}
    for r in rays:
        mult[r] = mult.get(r, 0) + 1
    assert {f.normal: f.length for f in P.facets} == mult
    assert min(P.vertices) == (0, 0)
    for f in P.facets:
        assert len(f.points) == f.length + 1
        # support function: facet points maximise <n, .>
        h = max(f.normal[0] * x + f.normal[1] * y for (x, y), _ in P.lattice_points())
        assert all(f.normal[0] * x + f.normal[1] * y == h for x, y in f.points)


# ------------------------------------------------------- facet polynomials

def test_facet_polynomial_pants():
    a, b = 0.7 + 0.2j, -0.3 + 1j
    P = polygon_from_fan(fan((0, -1), (-1, 0), (1, 1)))  # conv{(0,0),(1,0),(0,1)}
    poly = LaurentPoly({(1, 0): a, (0, 1): b, (0, 0): -1})
    f = P.facet_for_normal((0, -1))
    c = facet_polynomial(poly, f)
    assert sorted(f.points) == [(0, 0), (1, 0)]
    # -1 + a z, low degree first
    assert np.allclose(sorted(c, key=abs), sorted([-1, a], key=abs))


def test_facet_roots_examples():
    P = polygon_from_fan(fan((0, -1), (-1, 0), (1, 1)))
    f = P.facet_for_normal((0, -1))
    poly = LaurentPoly({f.points[0]: -1, f.points[1]: 1, (0, 1): 1})
    assert np.allclose(facet_roots(poly, f).roots, [1])
    D = polygon_from_fan(fan(*[(0, -1), (-1, 0), (1, 1)] * 2))
    g = D.facet_for_normal((0, -1))
    poly = LaurentPoly({g.points[0]: -1, g.points[1]: 0, g.points[2]: 1, (0, 2): 1})
    fr = facet_roots(poly, g)
    assert sorted(np.round(np.real(fr.roots), 12)) == [-1, 1]
    # factorisation oracle: (z - 1)(z + 1) = z^2 - 1, product -1
    assert fr.vieta_product == pytest.approx(-1)
    assert fr.vieta_residual < 1e-12
    # (z + 1)^2: exact double root
    poly = LaurentPoly({g.points[0]: 1, g.points[1]: 2, g.points[2]: 1, (0, 2): 1})
    with pytest.raises(RootCollision):
        facet_roots(poly, g)
    # roots 1e-12 apart collide, 1e-6 apart do not
    for gap, bad in ((1e-12, True), (1e-6, False)):
        r1, r2 = -1.0, -1.0 - gap
        poly = LaurentPoly({g.points[0]: r1 * r2, g.points[1]: -(r1 + r2), g.points[2]: 1, (0, 2): 1})
        if bad:
            with pytest.raises(RootCollision):
                facet_roots(poly, g)
        else:
            facet_roots(poly, g)


def test_triple_root_collision():
    T3 = polygon_from_fan(fan(*[(0, -1), (-1, 0), (1, 1)] * 3))
    g = T3.facet_for_normal((0, -1))
    c = [-1, 3, -3, 1]  # (z - 1)^3
    poly = LaurentPoly({**{p: x for p, x in zip(g.points, c)}, (0, 3): 1})
    with pytest.raises(RootCollision):
        facet_roots(poly, g)


def test_phase_sum_examples():
    assert abs(phase_sum_check([0, 0, math.pi])) < 1e-12
    assert abs(abs(phase_sum_check([0, 0, 0])) - math.pi) < 1e-12
    assert abs(phase_sum_check([math.pi / 2] * 4)) < 1e-12


def test_well_centred_pants():
    P = polygon_from_fan(fan((0, -1), (-1, 0), (1, 1)))
    phases = {f.index: [0.0] for f in P.facets}
    phases[P.facets[-1].index] = [math.pi]
    # make the cycle close: pick the remaining phase from the constraint
    phases[P.facets[-1].index] = [(3 * math.pi - 0.0 - 0.0) % (2 * math.pi)]
    poly = well_centred_poly(P, phases)
    for m in P.vertices:
        assert abs(abs(poly.coeffs[m]) - 1) < 1e-12


def test_well_centred_square():
    Q = polygon_from_fan(fan((1, 0), (-1, 0), (0, 1), (0, -1)))
    ph = {0: [0.3], 1: [1.1], 2: [-0.4]}
    ph[3] = [4 * math.pi - sum(v[0] for v in ph.values())]
    poly = well_centred_poly(Q, ph)
    assert all(abs(abs(c) - 1) < 1e-12 for c in poly.coeffs.values())
    # boundary closure computed directly: walk the cycle with c_l = c_0 (-1)^l / prod(alpha)
    c = 1 + 0j
    for f in Q.facets:
        c = c * -1 / np.exp(1j * ph[f.index][0])
    assert abs(c - 1) < 1e-12


def test_well_centred_inconsistent():
    Q = polygon_from_fan(fan((1, 0), (-1, 0), (0, 1), (0, -1)))
    with pytest.raises(PhaseInconsistent):
        well_centred_poly(Q, {0: [0.0], 1: [0.0], 2: [0.0], 3: [0.5]})


@settings(max_examples=60, deadline=None)
@given(balanced_fans(), st.integers(0, 10**6))
def test_well_centred_invariants(rays, seed):
    P = polygon_from_fan(fan(*rays))
    rng = np.random.default_rng(seed)
    ph = {}
    for f in P.facets:
        ph[f.index] = list(rng.uniform(0, 2 * math.pi, f.length))
    N = sum(f.length for f in P.facets)
    last = P.facets[-1].index
    ph[last][-1] = (N * math.pi - (sum(sum(v) for v in ph.values()) - ph[last][-1])) % (2 * math.pi)
    try:
        poly = well_centred_poly(P, ph)
    except RootCollision:
        return
    assert abs(phase_sum_check(ph)) < 1e-9
    for f in P.facets:
        fr = facet_roots(poly, f)
        assert all(abs(abs(a) - 1) < 1e-9 for a in fr.roots)
        assert fr.vieta_residual < 1e-9
        got = sorted(np.mod(np.angle(fr.roots), 2 * math.pi))
        want = sorted(np.mod(ph[f.index], 2 * math.pi))
        d = np.abs(np.array(got) - np.array(want))
        assert np.all(np.minimum(d, 2 * math.pi - d) < 1e-9)


# ------------------------------------------------------------ smoothness

def _groebner_smooth(poly):
    """Exact oracle on a rationalised copy: f, z1 f_1, z2 f_2 have no common
    zero in the torus iff the ideal with 1 - t z1 z2 is the unit ideal."""
    z1, z2, t = sympy.symbols("z1 z2 t")
    q = lambda x: sympy.Rational(round(x * 10**6), 10**6)
    f = sum((q(c.real) + sympy.I * q(c.imag)) * z1 ** m[0] * z2 ** m[1] for m, c in poly.coeffs.items())
    G = sympy.groebner([f, z1 * f.diff(z1), z2 * f.diff(z2), 1 - t * z1 * z2], t, z1, z2,
                       order="lex", domain="QQ_I")
    return list(G.exprs) == [1]


def test_check_smooth_examples():
    assert check_smooth(LaurentPoly({(1, 0): 2, (0, 1): 1j, (0, 0): -1})).smooth
    sq = check_smooth(LaurentPoly({(0, 0): 1, (1, 0): -2, (2, 0): 1}))
    assert not sq.smooth and abs(sq.witness[0] - 1) < 1e-8
    r = check_smooth(LaurentPoly({(1, 1): 1, (1, 0): -1, (0, 1): -1, (0, 0): 1}))
    assert not r.smooth and r.certified
    assert abs(r.witness[0] - 1) < 1e-8 and abs(r.witness[1] - 1) < 1e-8


def test_check_smooth_against_groebner():
    Q = polygon_from_fan(fan(*[(1, 0), (-1, 0), (0, 1), (0, -1)] * 2))  # 2x2 square
    ph = {0: [0.3, 2.0], 1: [1.1, 2.9], 2: [-0.4, 0.8]}
    ph[3] = [0.1, 0.0]
    ph[3][1] = (8 * math.pi - sum(sum(v) for v in ph.values())) % (2 * math.pi)
    for seed in range(3):
        poly = well_centred_poly(Q, ph, interior_seed=seed)
        assert check_smooth(poly).smooth == _groebner_smooth(poly)
    P = polygon_from_fan(fan((0, -1), (-1, 0), (1, 1)))
    rng = np.random.default_rng(5)
    for _ in range(3):
        a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
        poly = LaurentPoly({(1, 0): a, (0, 1): b, (0, 0): -1})
        assert check_smooth(poly).smooth and _groebner_smooth(poly)


def test_check_smooth_newton_path():
    # above the exact degree bound the search is uncertified
    poly = LaurentPoly({(1, 0): 1, (0, 1): 1, (0, 0): -1})
    r = check_smooth(poly, max_exact_degree=0, starts=50)
    assert r.smooth and not r.certified and r.method == "newton"
    r = check_smooth(LaurentPoly({(1, 1): 1, (1, 0): -1, (0, 1): -1, (0, 0): 1}), max_exact_degree=0, starts=200)
    assert not r.smooth


# -------------------------------------------------------- fixture models

@pytest.mark.parametrize("name", valid_fixture_names())
def test_fixture_vertex_models(name):
    c = fixture_curve(name)
    a = solve_phases(c, [0.3 + 0.1 * k for k in range(moduli_dimension(c))])
    for v in c.vertex_ids():
        m = build_vertex_model(c, v, a.theta)
        assert m.smooth.smooth
        for f in m.polygon.facets:
            fr = m.roots[f.index]
            assert all(abs(abs(x) - 1) < 1e-9 for x in fr.roots)
            assert fr.vieta_residual < 1e-9
        assert abs(phase_sum_check(m.facet_phases())) < 1e-9
