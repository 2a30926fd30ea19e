import os
import subprocess
import sys

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from kahlervar import _kernels_py, kernels


def _spd(rng, d, shape):
    a = rng.standard_normal((d, d) + shape) * 0.2
    return np.eye(d).reshape((d, d) + (1,) * len(shape)) + 0.5 * (a + a.swapaxes(0, 1))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([2, 4]))
def test_backends_agree(seed, d):
    rng = np.random.default_rng(seed)
    shape = (4,) * d
    g = _spd(rng, d, shape)
    inv_p, det_p = _kernels_py.sym_inverse(g)
    inv_k, det_k = kernels.sym_inverse(g)
    assert np.allclose(inv_p, inv_k, atol=1e-12) and np.allclose(det_p, det_k, rtol=1e-12)
    dg = rng.standard_normal((d, d, d) + shape)
    dg = 0.5 * (dg + dg.swapaxes(1, 2))
    G = kernels.christoffel(inv_k, dg)
    assert np.allclose(G, _kernels_py.christoffel(inv_p, dg), atol=1e-12)
    T = rng.standard_normal((d, d) + shape)
    for kinds in ((0, 0), (0, 1), (1, 1)):
        assert np.allclose(kernels.connection_terms(T, G, kinds), _kernels_py.connection_terms(T, G, kinds),
                           atol=1e-11)


def test_inverse_is_inverse(rng):
    g = _spd(rng, 4, (3, 3, 3, 3))
    inv, det = kernels.sym_inverse(g)
    eye = np.einsum("ab...,bc...->ac...", g, inv)
    assert np.allclose(eye, np.eye(4).reshape(4, 4, 1, 1, 1, 1), atol=1e-12)
    assert np.allclose(det, np.moveaxis(np.linalg.det(np.moveaxis(g, (0, 1), (-2, -1))), [], []))


def test_fallback_selected_by_environment():
    code = "from kahlervar import kernels; print(kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env={**os.environ, "KAHLERVAR_PURE_PYTHON": "1"},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
