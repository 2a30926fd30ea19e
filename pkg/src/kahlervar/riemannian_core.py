"""Levi-Civita calculus on sampled metrics: connection, curvature, divergences.

Conventions
-----------
* ``covariant_derivative`` puts the new slot first: ``(nabla T)[e, ...] = (nabla_e T)[...]``.
* Riemann is stored as ``R[a, b, c, d]`` with ``R(e_a, e_b) e_c = R[a, b, c, d] e_d`` and
  ``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X, Y]``; ``Ric[b, c] = R[a, b, c, a]``.
* The rough Laplacian is ``-tr nabla^2`` (non-negative spectrum).
* Divergence contracts the derivative slot with the FIRST slot of the field.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from . import kernels
from .spectral_fields import (CO, CONTRA, ContractViolation, TensorField, TorusGrid,
                              compose_arrays, spectral_gradient, spectral_partial)


class MetricField:
    """A pointwise SPD metric with cached inverse, volume factor and Christoffel symbols."""

    def __init__(self, g: TensorField, check: bool = True):
        if g.slots != (CO, CO):
            raise ContractViolation(f"metric must be a covariant 2-tensor, got {g.slots}")
        self.grid: TorusGrid = g.grid
        sym = 0.5 * (g.data + np.swapaxes(g.data, 0, 1))
        if check and np.max(np.abs(sym - g.data)) > 1e-12 * max(1.0, g.linf()):
            raise ContractViolation("metric is not symmetric")
        self.g = g.like(sym)
        try:
            ginv, det = kernels.sym_inverse(sym)
        except np.linalg.LinAlgError as exc:
            raise ContractViolation("metric is not positive definite") from exc
        if check and (not np.all(np.isfinite(det)) or np.min(det) <= 0.0):
            raise ContractViolation("metric is not positive definite")
        self.ginv = TensorField(self.grid, (CONTRA, CONTRA), ginv)
        self.det = det

    @cached_property
    def min_eigenvalue(self) -> float:
        d = self.grid.dim
        mats = np.moveaxis(self.g.data.reshape(d, d, -1), -1, 0)
        return float(np.linalg.eigvalsh(mats)[:, 0].min())

    @cached_property
    def christoffel(self) -> np.ndarray:
        dg = spectral_gradient(self.g.data, self.grid)
        return kernels.christoffel(self.ginv.data, dg)

    @cached_property
    def log_volume(self) -> np.ndarray:
        """log of dV_g against the flat Lebesgue measure."""
        return 0.5 * np.log(self.det)


class VolumeDensityField:
    """Omega = exp(log_rho) dV_flat."""

    def __init__(self, grid: TorusGrid, log_rho: np.ndarray):
        log_rho = np.asarray(log_rho, dtype=float)
        if log_rho.shape != grid.shape or not np.all(np.isfinite(log_rho)):
            raise ContractViolation("density must be a finite scalar on the grid")
        self.grid = grid
        self.log_rho = log_rho

    @property
    def rho(self) -> np.ndarray:
        return np.exp(self.log_rho)

    @classmethod
    def from_potential(cls, grid, h: np.ndarray) -> "VolumeDensityField":
        """Omega = exp(-h) dV_flat."""
        return cls(grid, -np.asarray(h, dtype=float))


# -- derivatives ---------------------------------------------------------------

def nabla_array(data: np.ndarray, slots: tuple, m: MetricField) -> np.ndarray:
    out = spectral_gradient(data, m.grid)
    if slots:
        out += kernels.connection_terms(data, m.christoffel, tuple(s == CO for s in slots))
    return out


def covariant_derivative(T: TensorField, m: MetricField) -> TensorField:
    if T.grid != m.grid:
        raise ContractViolation("field and metric live on different grids")
    return TensorField(T.grid, (CO,) + T.slots, nabla_array(T.data, T.slots, m))


def riemann(m: MetricField) -> TensorField:
    G = m.christoffel
    dG = spectral_gradient(G, m.grid)          # dG[e, a, b, c] = d_e Gamma^c_ab
    R = dG - np.swapaxes(dG, 0, 1)             # d_a G^d_bc - d_b G^d_ac
    R = R + np.einsum("bce...,aed...->abcd...", G, G) - np.einsum("ace...,bed...->abcd...", G, G)
    return TensorField(m.grid, (CO, CO, CO, CONTRA), R)


def ricci(m: MetricField) -> TensorField:
    """Ric_bc = d_a G^a_bc - d_b d_c L + G^e_bc d_e L - G^e_ac G^a_be with L = log sqrt det g.

    Same contraction as ``riemann`` (Ric[b, c] = R[a, b, c, a]) without forming R.
    """
    G = m.christoffel
    d = m.grid.dim
    div = sum(spectral_partial(G[:, :, a], m.grid, a) for a in range(d))
    dL = spectral_gradient(m.log_volume, m.grid)
    ddL = spectral_gradient(dL, m.grid)
    out = div - ddL + np.einsum("bce...,e...->bc...", G, dL) - np.einsum("ace...,bea...->bc...", G, G)
    return TensorField(m.grid, (CO, CO), 0.5 * (out + np.swapaxes(out, 0, 1)))


def scalar_curvature(m: MetricField, ric: TensorField | None = None) -> TensorField:
    ric = ricci(m) if ric is None else ric
    return TensorField(m.grid, (), np.einsum("ab...,ab...->...", m.ginv.data, ric.data))


def gradient(f: TensorField, m: MetricField) -> TensorField:
    df = spectral_gradient(f.data, m.grid)
    return TensorField(m.grid, (CONTRA,), np.einsum("ab...,a...->b...", m.ginv.data, df))


def hessian(f: TensorField, m: MetricField) -> TensorField:
    df = TensorField(m.grid, (CO,), spectral_gradient(f.data, m.grid))
    return covariant_derivative(df, m)


def metric_trace(data: np.ndarray, m: MetricField) -> np.ndarray:
    """g^{ab} T[a, b, ...]."""
    return np.einsum("ab...,ab...->...", m.ginv.data, data)


def rough_laplacian(T: TensorField, m: MetricField) -> TensorField:
    nT = nabla_array(T.data, T.slots, m)
    nnT = nabla_array(nT, (CO,) + T.slots, m)
    return T.like(-metric_trace(nnT, m))


def omega_laplacian(T: TensorField, m: MetricField, f: np.ndarray) -> TensorField:
    """Delta^Omega T = Delta T + nabla f -| nabla T."""
    nT = nabla_array(T.data, T.slots, m)
    nnT = nabla_array(nT, (CO,) + T.slots, m)
    df = spectral_gradient(f, m.grid)
    grad = np.einsum("ab...,a...->b...", m.ginv.data, df)
    drift = np.einsum("e...,e...->...", grad, nT)
    return T.like(-metric_trace(nnT, m) + drift)


def divergence(T: TensorField, m: MetricField) -> TensorField:
    if not T.slots or T.slots[0] != CO:
        raise ContractViolation("divergence needs a leading covariant slot")
    return TensorField(T.grid, T.slots[1:], metric_trace(nabla_array(T.data, T.slots, m), m))


def contract_vector_first(xi: np.ndarray, data: np.ndarray) -> np.ndarray:
    """xi -| T: insert a vector into the first slot."""
    return np.einsum("a...,a...->...", xi, data)


def omega_divergence(T: TensorField, m: MetricField, f: np.ndarray) -> TensorField:
    """div^Omega T = div T - nabla f -| T."""
    div = divergence(T, m)
    grad = gradient(TensorField(m.grid, (), f), m).data
    return div.like(div.data - contract_vector_first(grad, T.data))


def symmetrized_nabla(T: TensorField, m: MetricField) -> TensorField:
    """sum_j nabla T(x_j, x_0, .., x_j^, .., x_p)."""
    n = covariant_derivative(T, m)
    p = T.rank
    out = np.zeros_like(n.data)
    for j in range(p + 1):
        out += np.moveaxis(n.data, 0, j)
    return n.like(out)


def d_operator(u: TensorField, m: MetricField) -> TensorField:
    """D_g u = symmetrized nabla u - 2 nabla u."""
    n = covariant_derivative(u, m)
    out = -2.0 * n.data
    for j in range(u.rank + 1):
        out += np.moveaxis(n.data, 0, j)
    return n.like(out)


# -- musical maps --------------------------------------------------------------

def sharp(v: TensorField, m: MetricField) -> TensorField:
    """v* = g^{-1} v as an endomorphism: v*[a, c] = v[a, b] g^{bc}."""
    if v.slots != (CO, CO):
        raise ContractViolation("sharp expects a covariant 2-tensor")
    return TensorField(v.grid, (CO, CONTRA), np.einsum("ab...,bc...->ac...", v.data, m.ginv.data))


def flat(E: TensorField, m: MetricField) -> TensorField:
    """(g E)(x, y) = g(E x, y)."""
    if E.slots != (CO, CONTRA):
        raise ContractViolation("flat expects an endomorphism")
    return TensorField(E.grid, (CO, CO), np.einsum("am...,mb...->ab...", E.data, m.g.data))


def transpose_g_array(E: np.ndarray, m: MetricField) -> np.ndarray:
    low = np.einsum("am...,mb...->ab...", E, m.g.data)
    return np.einsum("ba...,bc...->ac...", low, m.ginv.data)


def transpose_g(E: TensorField, m: MetricField) -> TensorField:
    """A^T with g(A^T x, y) = g(x, A y)."""
    if E.slots != (CO, CONTRA):
        raise ContractViolation("transpose_g expects an endomorphism")
    return E.like(transpose_g_array(E.data, m))


def compose(A: TensorField, B: TensorField) -> TensorField:
    return A.like(compose_arrays(A.data, B.data))
