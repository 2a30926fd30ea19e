import re

import numpy as np
import pytest

from kahlervar.identity_suite import (ANCHORS, anchor_for, cancellation, closed_class_residuals,
                                      codazzi_datum, gap, split_residuals, static_identity_suite)
from kahlervar.spectral_fields import CO, CONTRA, TorusGrid, compose_arrays
from kahlervar.variation_engine import (VariationDatum, datum_from_potentials, membership_F, random_scalar,
                                        random_tensor)

from conftest import curved_state

FORBIDDEN = re.compile(r"paper|spec\b|specification|arxiv|lemma|theorem|section|eq\.|—", re.I)


@pytest.fixture(scope="module")
def report_n1(state_n1):
    return static_identity_suite(state_n1, np.random.default_rng(0))


def test_suite_n1_passes(report_n1):
    assert len(report_n1) >= 20
    assert report_n1.passed, [(r.check_id, r.residual) for r in report_n1.failures()]


def test_anchors_are_neutral(report_n1):
    for rec in report_n1.records:
        assert rec.anchor and not FORBIDDEN.search(rec.anchor), rec.anchor
        assert not FORBIDDEN.search(rec.check_id), rec.check_id
    assert anchor_for("curved_dadd") == ANCHORS["dadd"]


def test_helpers():
    assert gap(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0
    assert gap(np.array([0.0]), np.array([1e-3])) == pytest.approx(1e-3)
    assert gap(np.array([11.0]), np.array([10.0])) == pytest.approx(0.1)
    assert cancellation(np.array([5.0]), np.array([-5.0])) == 0.0
    assert cancellation(np.array([10.0]), np.array([-9.0])) == pytest.approx(0.1)


def test_codazzi_datum_is_closed_on_curved_base():
    d = codazzi_datum(TorusGrid(1, 32), None, np.random.default_rng(4), 0.01)
    assert d.base.ricci.linf() > 1e-2
    assert max(membership_F(d)[:2]) < 1e-9
    assert max(closed_class_residuals(d).values()) < 1e-7


def test_dadd_needs_closed_velocity():
    base = curved_state(2, 8)
    v = random_tensor(base.grid, (CO, CO), np.random.default_rng(3), 2, 0.1, symmetric=True)
    res = closed_class_residuals(VariationDatum(base, v))
    assert res["dadd"] > 1e-3 and res["bar_adbar"] > 1e-3


def test_split_holds_for_symmetric_jdot(state_n1):
    rng = np.random.default_rng(1)
    g = state_n1.grid
    d = datum_from_potentials(state_n1, random_scalar(g, rng, 2, 0.02), random_scalar(g, rng, 2, 0.02), 0.1)
    assert max(split_residuals(d).values()) < 1e-7


def test_split_needs_symmetric_jdot():
    # for n = 1 every J-anti-linear endomorphism is g-symmetric, so the control needs n = 2
    st = curved_state(2, 8)
    rng = np.random.default_rng(1)
    g = st.grid
    d = datum_from_potentials(st, random_scalar(g, rng, 1, 0.004), random_scalar(g, rng, 1, 0.004), 0.1)
    J = st.J.data
    K = random_tensor(g, (CO, CONTRA), rng, 1, 0.05).data
    K = 0.5 * (K + compose_arrays(J, compose_arrays(K, J)))
    bad = VariationDatum(st, d.v, jdot=d.jdot.like(d.jdot.data + K))
    assert bad.invariants()["jdot_symmetry"] > 1e-3
    assert min(split_residuals(bad).values()) > 1e-3
