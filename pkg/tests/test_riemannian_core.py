import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kahlervar import riemannian_core as rc
from kahlervar.spectral_fields import CO, CONTRA, ContractViolation, TensorField, TorusGrid

from kahlervar.spectral_fields import spectral_gradient
from kahlervar.variation_engine import random_tensor

from conftest import spec

FOUR_PI2 = 4 * math.pi ** 2


def conformal(grid, a=0.05):
    """g = exp(2u) I with u = a cos(2 pi x); Ric = -Lap(u) I in two real dimensions."""
    u = spec(((1, 0), a, "cos")).synthesize(grid)
    g = np.exp(2 * u) * np.eye(2).reshape(2, 2, 1, 1)
    return rc.MetricField(TensorField(grid, (CO, CO), g)), u


def random_metric(seed, n=1, res=8, amp=0.05):
    rng = np.random.default_rng(seed)
    grid = TorusGrid(n, res)
    d = grid.dim
    v = random_tensor(grid, (CO, CO), rng, 2, amp, symmetric=True)
    g = np.eye(d).reshape((d, d) + (1,) * d) + v.data
    return rc.MetricField(TensorField(grid, (CO, CO), g))


def test_flat_metric_is_flat():
    grid = TorusGrid(2, 8)
    m = rc.MetricField(TensorField(grid, (CO, CO), np.broadcast_to(np.eye(4).reshape(4, 4, 1, 1, 1, 1),
                                                                   (4, 4) + grid.shape).copy()))
    assert np.max(np.abs(m.christoffel)) == 0.0
    assert rc.ricci(m).linf() < 1e-14


def test_conformal_ricci_frozen():
    grid = TorusGrid(1, 32)
    m, u = conformal(grid)
    ric = rc.ricci(m).data
    # Ric_00 at the origin: a (2 pi)^2 cos(0) = 0.05 * 4 pi^2
    assert ric[0, 0, 0, 0] == pytest.approx(1.9739208802178716, rel=1e-10)
    assert ric[1, 1, 0, 0] == pytest.approx(1.9739208802178716, rel=1e-10)
    assert np.max(np.abs(ric[0, 1])) < 1e-10
    expected = FOUR_PI2 * u
    assert np.max(np.abs(ric[0, 0] - expected)) < 1e-9
    R = rc.scalar_curvature(m).data
    # R = 2 exp(-2u) Lap-term; at the origin 2 exp(-0.1) * 0.05 * 4 pi^2
    assert R[0, 0] == pytest.approx(3.5721549453272154, rel=1e-10)


def test_conformal_christoffel_frozen():
    grid = TorusGrid(1, 32)
    m, u = conformal(grid)
    du = -0.05 * 2 * math.pi * np.sin(2 * math.pi * grid.coords()[0])
    G = m.christoffel  # G[a, b, c] = Gamma^c_{ab}
    assert np.max(np.abs(G[0, 0, 0] - du)) < 1e-11
    assert np.max(np.abs(G[1, 1, 0] + du)) < 1e-11
    assert np.max(np.abs(G[0, 1, 1] - du)) < 1e-11
    # quarter period, where |du| is largest
    assert G[0, 0, 0][8, 0] == pytest.approx(-0.3141592653589793, rel=1e-10)


def test_metric_must_be_positive_definite():
    grid = TorusGrid(1, 8)
    g = np.zeros((2, 2) + grid.shape)
    g[0, 0] = 1.0
    g[1, 1] = -1.0
    with pytest.raises(ContractViolation):
        rc.MetricField(TensorField(grid, (CO, CO), g))


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_metric_compatibility_and_torsion(seed):
    m = random_metric(seed)
    Dg = rc.covariant_derivative(m.g, m)
    assert Dg.linf() < 1e-10
    G = m.christoffel
    assert np.max(np.abs(G - G.swapaxes(0, 1))) < 1e-14


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_contracted_bianchi(seed):
    # div Ric = dR / 2; the amplitude keeps products resolved at this grid
    m = random_metric(seed, res=32, amp=0.01)
    ric = rc.ricci(m)
    R = rc.scalar_curvature(m, ric)
    lhs = rc.divergence(ric, m).data
    rhs = 0.5 * spectral_gradient(R.data, m.grid)
    assert np.max(np.abs(lhs - rhs)) < 1e-8 * max(1.0, np.max(np.abs(rhs)))


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_sharp_flat_round_trip(seed):
    m = random_metric(seed)
    rng = np.random.default_rng(seed)
    v = random_tensor(m.grid, (CO, CO), rng, 2, 0.3)
    back = rc.flat(rc.sharp(v, m), m)
    assert np.max(np.abs(back.data - v.data)) < 1e-12


def test_omega_laplacian_weights(state_n1):
    st = state_n1
    f = st.f
    u = TensorField(st.grid, (), np.cos(2 * np.pi * st.grid.coords()[1]))
    plain = rc.rough_laplacian(u, st.m).data
    twisted = rc.omega_laplacian(u, st.m, f).data
    # Lap^Omega u = Lap u + grad f . grad u
    gu = rc.gradient(u, st.m).data
    drift = np.einsum("a...,a...->...", st.df, gu)
    assert np.max(np.abs(twisted - plain - drift)) < 1e-9 * max(1.0, np.max(np.abs(plain)))
