import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import fixture_curve
from tropslag import _cutoff
from tropslag.errors import DimensionMismatch, OverlapTooShort, ValidationFailed
from tropslag.glue import (
    check_matching,
    build_matching,
    convergence_test,
    default_box,
    err_estimate,
    err_profile,
    gamma_of,
    hausdorff,
    preglue_profile,
    vertex_cloud,
)
from tropslag.hk import KahlerData

E2 = KahlerData.euclidean(2)
PH3 = [0.3, 0.5, 0.7]


def test_cutoff_profile():
    s = np.linspace(-5, 5, 2001)
    x = _cutoff.chi(s)
    assert np.all(x[s <= -2] == 1) and np.all(x[s >= -1] == 0)
    assert np.all(np.diff(x) <= 1e-15)
    # derivatives agree with finite differences
    h = 1e-5
    for t in (-1.8, -1.5, -1.2):
        fd1 = (_cutoff.chi(t + h) - _cutoff.chi(t - h)) / (2 * h)
        fd2 = (_cutoff.chi(t + h) - 2 * _cutoff.chi(t) + _cutoff.chi(t - h)) / h ** 2
        assert _cutoff.chi_d1(t) == pytest.approx(fd1, rel=1e-6)
        assert _cutoff.chi_d2(t) == pytest.approx(fd2, rel=1e-4, abs=1e-4)


def test_build_matching_two_vertex():
    c = fixture_curve("two_vertex")
    d = build_matching(c, E2, 10.0, PH3)
    assert d.lengths == {"e3": pytest.approx(20 * math.sqrt(2))}
    a, b = d.cylinders["e3"]
    assert a.direction == (1, 1) and b.direction == (-1, -1)
    assert b.base == (20.0, 20.0)
    assert abs(a.phase_const - b.phase_const) < 1e-9
    assert np.allclose(d.moment["v1"][:2] - d.moment["v0"][:2], np.array(d.models["v1"].frame.matrix) @ [20, 20])
    # frames and vertex polynomials do not depend on T
    d2 = build_matching(c, E2, 40.0, PH3)
    for v in d.models:
        assert d.models[v].frame.matrix == d2.models[v].frame.matrix
        assert d.models[v].poly.to_records() == d2.models[v].poly.to_records()
    r1, r2 = check_matching(d), check_matching(d2)
    assert r1.ok and r2.ok and r1.ratio == r2.ratio == 1.0


def test_build_matching_errors():
    c = fixture_curve("two_vertex")
    with pytest.raises(OverlapTooShort):
        build_matching(c, E2, 2.0, PH3)
    with pytest.raises(DimensionMismatch):
        build_matching(c, KahlerData.euclidean(3), 10.0, PH3)
    with pytest.raises(ValidationFailed):
        build_matching(fixture_curve("unbalanced"), E2, 10.0, [])


def test_check_matching_detects_corruption():
    d = build_matching(fixture_curve("two_vertex"), E2, 10.0, PH3)
    a, b = d.cylinders["e3"]
    d.cylinders["e3"] = [a, dataclasses.replace(b, phase_const=b.phase_const + 1e-6)]
    rep = check_matching(d)
    assert [f[1] for f in rep.failures] == ["phase"]
    d.cylinders["e3"] = [a, dataclasses.replace(b, direction=(-1, -2))]
    kinds = {f[1] for f in check_matching(d).failures}
    assert "direction" in kinds


def test_r3_matching():
    c = fixture_curve("r3_two_vertex")
    from tropslag.phases import moduli_dimension
    d = build_matching(c, KahlerData.euclidean(3), 10.0, [0.3 + 0.2 * k for k in range(moduli_dimension(c))])
    assert check_matching(d).ok


def test_preglue_profile():
    p = preglue_profile(1.0, 2.0, 10.0)
    assert np.all(p.glued[p.s <= -2] == 1.0)
    assert np.all(p.glued[p.s >= 2] == 2.0)
    assert np.all(p.glued[np.abs(p.s) < 1] == 0.0)
    assert np.all(p.chi_left * p.chi_right == 0)
    with pytest.raises(OverlapTooShort):
        preglue_profile(1.0, 1.0, 7.9)


def test_err_estimate_pants_empty():
    d = build_matching(fixture_curve("pants"), E2, 10.0, [0.3, 0.5])
    assert err_estimate(d) == {}


def test_err_estimate_two_vertex():
    c = fixture_curve("two_vertex")
    prev = math.inf
    for T in (5.0, 10.0, 20.0):
        d = build_matching(c, E2, T, PH3)
        est = err_estimate(d)["e3"]
        assert -2 <= est.support[0] and est.support[1] <= 2
        assert est.sup_error < prev
        assert est.rate > 0
        prev = est.sup_error
        s, err = err_profile(d, "e3")
        assert np.all(err[np.abs(s) < 1] == 0)


def test_hausdorff_examples():
    assert hausdorff([[0.0, 0.0]], [[3.0, 4.0]]) == 5.0
    assert hausdorff([[0, 0], [1, 0]], [[0, 0]]) == 1.0
    with pytest.raises(DimensionMismatch):
        hausdorff([[0, 0]], [[0, 0, 0]])


pts = st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=1, max_size=15)


@settings(max_examples=100)
@given(pts, pts, pts)
def test_hausdorff_pseudometric(a, b, c):
    assert hausdorff(a, a) == 0
    assert hausdorff(a, b) == pytest.approx(hausdorff(b, a))
    assert hausdorff(a, c) <= hausdorff(a, b) + hausdorff(b, c) + 1e-9


def test_gamma_clip():
    G = gamma_of(fixture_curve("pants")).clip(3.0)
    assert np.allclose(sorted(G.tmax), [3.0, 3.0, 3 * math.sqrt(2)])
    D, _, _ = G.distances(np.array([[0.0, 0.0], [-2.0, 1.0]]))
    assert D.tolist() == pytest.approx([0.0, 1.0])


def test_pants_amoeba_depth():
    """The amoeba of z1 + z2 = 1 reaches log 2 away from its spine, at
    |z1| = |z2| = 1/2; the grid undersamples that tip slightly."""
    c = fixture_curve("pants")
    d = build_matching(c, E2, 1.0, [0.0, 0.0], l_threshold=0.0)
    P = vertex_cloud(d, "v0", default_box(c), grid=256)
    G = gamma_of(c).clip(default_box(c))
    dist = G.distances(P)[0]
    assert math.log(2) - 0.01 < dist.max() <= math.log(2) + 1e-9


def test_convergence_decreasing():
    tab = convergence_test(fixture_curve("pants"), E2, [0.3, 0.5], [5, 10, 20, 40], grid=96)
    d = [r[1] for r in tab.rows]
    assert all(b < a for a, b in zip(d, d[1:]))
    assert tab.fitted_rate() == pytest.approx(-1.0, abs=0.15)
    assert tab.to_csv().startswith("T,d_hausdorff\n5,")
    with pytest.raises(ValueError):
        convergence_test(fixture_curve("pants"), E2, [0.3, 0.5], [5, 10])
