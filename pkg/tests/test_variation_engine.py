import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kahlervar.spectral_fields import CO, ContractViolation, TensorField, TorusGrid
from kahlervar.variation_engine import (FORMULAS, PathIntegrator, PreconditionError, VariationDatum,
                                        check_formula, datum_from_potentials, fd_derivative,
                                        kahler_defect_exponent, membership_D, membership_F, random_scalar,
                                        random_tensor, require, sample_D, sample_F_flat, variation_rhs)

from conftest import curved_state, spec


@pytest.fixture(scope="module")
def closed_datum():
    grid = TorusGrid(1, 32)
    u = spec(((1, 1), 0.02, "cos"), ((2, 0), 0.01, "sin")).synthesize(grid)
    h = spec(((1, 0), 0.1, "cos")).synthesize(grid)
    return sample_F_flat(grid, u, h, 0.1)


def test_registry_has_twelve_formulas():
    assert len(FORMULAS) == 12
    assert {F.requires for F in FORMULAS.values()} <= {"none", "D", "F"}


def test_fd_of_linear_path_is_exact(closed_datum):
    path = PathIntegrator(closed_datum)
    fd = fd_derivative(lambda s: s.m.g, path)
    assert np.max(np.abs(fd.value.data - closed_datum.v.data)) < 1e-12
    assert fd.order == math.inf


def test_fd_of_inverse_metric_is_second_order(closed_datum):
    # d/dt (g + t v)^{-1} = -g^{-1} v g^{-1}; the ladder sees the t^2 term
    path = PathIntegrator(closed_datum)
    fd = fd_derivative(lambda s: s.m.ginv, path)
    ginv = closed_datum.base.m.ginv.data
    exact = -np.einsum("ab...,bc...,cd...->ad...", ginv, closed_datum.v.data, ginv)
    assert np.max(np.abs(fd.value.data - exact)) < 1e-7
    assert 1.9 <= fd.order <= 2.1


@pytest.mark.parametrize("fid", sorted(FORMULAS))
def test_formula_on_closed_datum(fid, closed_datum):
    xi = random_tensor(closed_datum.base.grid, ("contra",), np.random.default_rng(0), 2, 0.3) \
        if FORMULAS[fid].needs_vector else None
    chk = check_formula(fid, closed_datum, xi=xi)
    assert chk.residual <= 1e-4
    assert chk.order >= 1.9


def test_flat_hessian_is_closed(closed_datum):
    assert max(membership_F(closed_datum)[:2]) < 1e-9
    require(closed_datum, "F")


def test_random_velocity_is_rejected_where_constraints_exist():
    grid = TorusGrid(2, 8)
    base = curved_state(2, 8)
    v = random_tensor(grid, (CO, CO), np.random.default_rng(3), 2, 0.1, symmetric=True)
    d = VariationDatum(base, v)
    with pytest.raises(PreconditionError):
        require(d, "D")
    with pytest.raises(PreconditionError):
        require(d, "F")
    with pytest.raises(PreconditionError):
        variation_rhs("THM_A", d)


@pytest.fixture(scope="module")
def base_n2():
    return curved_state(2, 16)


def test_potential_data_lie_in_D(base_n2):
    rng = np.random.default_rng(7)
    d = datum_from_potentials(base_n2, random_scalar(base_n2.grid, rng, 1, 0.004),
                              random_scalar(base_n2.grid, rng, 1, 0.004), 0.1)
    assert max(membership_D(d)) < 1e-9


def test_sample_D_projects_into_D(base_n2):
    raw = random_tensor(base_n2.grid, (CO, CO), np.random.default_rng(11), 1, 0.02, symmetric=True)
    datum, info = sample_D(base_n2, raw)
    assert info.residual <= 1e-8 and max(membership_D(datum)) <= 1e-8


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_datum_requires_symmetric_velocity(seed):
    grid = TorusGrid(1, 8)
    base = curved_state(1, 8, amp=0.01)
    a = np.random.default_rng(seed).standard_normal((2, 2) + grid.shape)
    a[0, 1] += 1.0
    with pytest.raises(ContractViolation):
        VariationDatum(base, TensorField(grid, (CO, CO), a))


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_path_keeps_j_almost_complex(seed):
    base = curved_state(1, 16, amp=0.02)
    rng = np.random.default_rng(seed)
    v = random_tensor(base.grid, (CO, CO), rng, 2, 0.2, symmetric=True)
    path = PathIntegrator(VariationDatum(base, v))
    inv = path.invariants(0.01)
    assert inv["j_square"] < 1e-10 and inv["j_skew"] < 1e-10


def test_kahler_defect_exponent(base_n2):
    rng = np.random.default_rng(2)
    d = datum_from_potentials(base_n2, random_scalar(base_n2.grid, rng, 1, 0.004),
                              random_scalar(base_n2.grid, rng, 1, 0.004), 0.1)
    p, defects = kahler_defect_exponent(d)
    assert p >= 1.9 and defects[0] > defects[1]


def test_exactly_kahler_path_reports_infinite_exponent(closed_datum):
    p, defects = kahler_defect_exponent(closed_datum)
    assert p == math.inf and max(defects) <= 1e-12


def test_unknown_formula():
    with pytest.raises(ContractViolation):
        check_formula("NOPE", None)
