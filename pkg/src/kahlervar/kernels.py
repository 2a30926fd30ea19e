"""Kernel dispatch: compiled extension when importable, numpy fallback otherwise.

Set ``KAHLERVAR_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_ext = None
if os.environ.get("KAHLERVAR_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _ext
        BACKEND = "compiled"
    except ImportError:  # extension not built
        _ext = None


def christoffel(ginv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    if _ext is None:
        return _kernels_py.christoffel(ginv, dg)
    d = ginv.shape[0]
    grid_shape = ginv.shape[2:]
    out = _ext.christoffel(np.ascontiguousarray(ginv.reshape(d, d, -1)),
                           np.ascontiguousarray(dg.reshape(d, d, d, -1)))
    return out.reshape((d, d, d) + grid_shape)


def connection_terms(T: np.ndarray, gamma: np.ndarray, kinds: tuple) -> np.ndarray:
    if _ext is None or not kinds:
        return _kernels_py.connection_terms(T, gamma, kinds)
    d = gamma.shape[0]
    r = len(kinds)
    grid_shape = T.shape[r:]
    flat = _ext.connection_terms_flat(
        np.ascontiguousarray(T.reshape(d ** r, -1)),
        np.ascontiguousarray(gamma.reshape(d, d, d, -1)),
        np.asarray(kinds, dtype=np.uint8), d)
    return flat.reshape((d,) + T.shape[:r] + grid_shape)


def sym_inverse(g: np.ndarray):
    if _ext is None:
        return _kernels_py.sym_inverse(g)
    d = g.shape[0]
    inv, det = _ext.sym_inverse_flat(np.ascontiguousarray(g.reshape(d, d, -1)))
    return inv.reshape(g.shape), det.reshape(g.shape[2:])
