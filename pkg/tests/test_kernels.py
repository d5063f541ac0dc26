import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linear_sum_assignment

from tropslag.kernels import _fallback

try:
    from tropslag.kernels import _ckernels
except ImportError:  # pragma: no cover
    _ckernels = None

BACKENDS = [_fallback] + ([_ckernels] if _ckernels else [])
IDS = ["python"] + (["cython"] if _ckernels else [])


def _match(a, b):
    D = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(D)
    return D[r, c].max()


@pytest.mark.skipif(os.environ.get("TROPSLAG_PURE_PYTHON") == "1", reason="fallback forced")
def test_compiled_backend_present():
    import tropslag.kernels as k
    assert _ckernels is not None and k.BACKEND == "cython"


def test_env_forces_fallback():
    env = dict(os.environ, TROPSLAG_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import tropslag.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("mod", BACKENDS, ids=IDS)
def test_roots_vs_numpy(mod):
    rng = np.random.default_rng(3)
    for d in (2, 3, 5, 8):
        C = rng.normal(size=(50, d + 1)) + 1j * rng.normal(size=(50, d + 1))
        R = mod.batch_roots(C)
        for c, r in zip(C, R):
            assert _match(r, np.roots(c[::-1])) < 1e-9


@pytest.mark.parametrize("mod", BACKENDS, ids=IDS)
def test_roots_special_shapes(mod):
    C = np.array([[0, 0, 1, 0], [2, -1, 0, 0], [0, -4, 0, 1], [3, 0, 0, 0]], dtype=complex)
    R = mod.batch_roots(C)
    assert np.all(R[0, :2] == 0) and np.isnan(R[0, 2])
    assert R[1, 0] == 2 and np.all(np.isnan(R[1, 1:]))
    assert _match(R[2, :3], np.array([0, 2, -2])) < 1e-12
    assert np.all(np.isnan(R[3]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 6))
def test_backends_agree_roots(seed, d):
    if _ckernels is None:
        pytest.skip("no compiled backend")
    rng = np.random.default_rng(seed)
    C = rng.normal(size=(8, d + 1)) + 1j * rng.normal(size=(8, d + 1))
    a, b = _fallback.batch_roots(C), _ckernels.batch_roots(C)
    for x, y in zip(a, b):
        assert _match(x, y) < 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_backends_agree_segments(seed):
    if _ckernels is None:
        pytest.skip("no compiled backend")
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(30, 3))
    A = rng.normal(size=(4, 3))
    U = rng.normal(size=(4, 3))
    U /= np.linalg.norm(U, axis=1)[:, None]
    L = np.array([1.0, 2.0, np.inf, 0.5])
    a, b = _fallback.segment_distances(P, A, U, L), _ckernels.segment_distances(P, A, U, L)
    assert np.allclose(a[0], b[0], atol=1e-12)
    assert np.allclose(a[2], b[2], atol=1e-12)


def test_segment_distance_examples():
    for mod in BACKENDS:
        d, i, t = mod.segment_distances(np.array([[3.0, 4.0], [-1.0, 1.0]]), np.zeros((1, 2)),
                                        np.array([[1.0, 0.0]]), np.array([2.0]))
        assert d == pytest.approx([np.hypot(1, 4), np.sqrt(2)])
        assert t == pytest.approx([2.0, 0.0])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_laurent_eval(seed):
    rng = np.random.default_rng(seed)
    E = rng.integers(-3, 4, size=(5, 2))
    C = rng.normal(size=5) + 1j * rng.normal(size=5)
    z1 = np.exp(rng.normal(size=7) + 1j * rng.normal(size=7))
    z2 = np.exp(rng.normal(size=7) + 1j * rng.normal(size=7))
    want = sum(c * z1 ** int(e[0]) * z2 ** int(e[1]) for e, c in zip(E, C))
    for mod in BACKENDS:
        f, s = mod.laurent_eval(E, C, z1, z2)
        assert np.allclose(f, want, rtol=1e-12, atol=1e-12 * s.max())
        assert np.all(s >= np.abs(f) - 1e-12)
