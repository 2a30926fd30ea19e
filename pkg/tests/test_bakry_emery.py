import math

import numpy as np
import pytest

from kahlervar.bakry_emery import KahlerState, decomposition_residuals, potential_metric
from kahlervar.spectral_fields import TorusGrid

from conftest import curved_state, spec

FOUR_PI2 = 4 * math.pi ** 2


def test_potential_metric_n1_frozen():
    grid = TorusGrid(1, 16)
    m = potential_metric(grid, spec(((1, 0), 0.05, "cos")).synthesize(grid))
    # (1 + Lap(phi) / 4) I at the origin
    assert m.g.data[0, 0, 0, 0] == pytest.approx(1 - 0.05 * math.pi ** 2, rel=1e-12)
    assert m.g.data[0, 0, 0, 0] == pytest.approx(0.5065197799455319, rel=1e-12)
    assert np.max(np.abs(m.g.data[0, 1])) < 1e-14


def test_flat_bakry_emery_is_hessian_of_h():
    grid = TorusGrid(1, 32)
    h = spec(((1, 0), 0.1, "cos")).synthesize(grid)
    st = KahlerState.from_potential(grid, None, h)
    np.testing.assert_allclose(st.f, h, atol=1e-15)
    be = st.bakry_emery.data
    assert be[0, 0, 0, 0] == pytest.approx(-0.39478417604357436 * 10, rel=1e-12)
    assert np.max(np.abs(be[1])) < 1e-12
    # dbar grad f of a function of x alone: half the trace-free Hessian
    A = st.anti_hessian.data
    assert A[0, 0, 0, 0] == pytest.approx(-0.5 * 0.1 * FOUR_PI2, rel=1e-12)


def test_decompositions_on_curved_state(state_n1):
    res = decomposition_residuals(state_n1)
    assert len(res) >= 3 and max(res.values()) <= 1e-7, res


def test_ricci_form_oracles(state_n1):
    from kahlervar.bakry_emery import density_ricci_form
    diff = state_n1.ricci_form_omega.data - density_ricci_form(state_n1).data
    assert np.max(np.abs(diff)) <= 1e-7 * max(1.0, state_n1.ricci_form_omega.linf())


def test_components_reassemble(state_n1):
    B, A = state_n1.complex_components
    assert np.allclose(B.data + A.data, state_n1.bakry_emery_endo.data, atol=1e-12)


def test_state_rejects_mismatched_grids():
    from kahlervar.riemannian_core import VolumeDensityField
    from kahlervar.spectral_fields import ContractViolation, standard_j
    g8, g16 = TorusGrid(1, 8), TorusGrid(1, 16)
    with pytest.raises(ContractViolation):
        KahlerState(potential_metric(g8, np.zeros(g8.shape)), standard_j(g8),
                    VolumeDensityField(g16, np.zeros(g16.shape)))


def test_kahler_residuals_small_n2(state_n2_small):
    assert max(state_n2_small.kahler_residuals().values()) < 1e-9
    assert curved_state(2, 8).grid.dim == 4
