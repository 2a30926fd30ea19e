import json
import math

import numpy as np
import pytest

from kahlervar.soliton_flow import (STABILITY_C, FlowAbort, FlowState, config_hash, evolution_residuals,
                                    export_trajectory, homothety_error, run_flow, stability_limit)
from kahlervar.spectral_fields import TorusGrid, load_snapshot

from conftest import curved_state


@pytest.fixture(scope="module")
def flat_traj():
    return run_flow(curved_state(1, 16, amp=0.0, h_amp=0.0), 1e-3, 10)


def test_stability_constant_frozen():
    assert STABILITY_C == pytest.approx(1.2675280073656456, rel=1e-14)
    assert stability_limit(TorusGrid(1, 64)) == pytest.approx(STABILITY_C / 4096, rel=1e-14)
    assert stability_limit(TorusGrid(1, 64)) > 1e-4


def test_homothety_exact_solution(flat_traj):
    assert len(flat_traj) == 11
    assert flat_traj[-1].t == pytest.approx(1e-2)
    g = flat_traj[-1].state.m.g.data
    assert g[0, 0, 3, 5] == pytest.approx(math.exp(-0.01), abs=1e-12)
    assert g[0, 0, 3, 5] == pytest.approx(0.9900498337491681, abs=1e-12)
    assert homothety_error(flat_traj) <= 1e-10


def test_flat_start_invariants(flat_traj):
    for fs in flat_traj:
        d = fs.diagnostics
        assert d["j_square"] < 1e-12 and d["j_compat"] < 1e-12 and d["kahler"] < 1e-12


def test_velocity_splits_into_B_minus_A():
    fs = FlowState(0.0, curved_state(1, 32, amp=0.0, h_amp=0.1))
    structure = fs.structure()
    assert max(structure.values()) < 1e-10
    assert fs.kahler_form_rate() < 1e-12


def test_verbatim_constraint_holds_with_opposite_sign():
    # at a flat metric with Omega = exp(-h) dV, dbar B = -del A for the verbatim system
    c = FlowState(0.0, curved_state(1, 32, amp=0.0, h_amp=0.1)).constraint()
    assert c["constraint_alt_rel"] < 1e-12
    assert c["constraint_rel"] == pytest.approx(2.0, rel=1e-6)


def test_alternative_sign_constraint_holds():
    c = FlowState(0.0, curved_state(1, 32, amp=0.0, h_amp=0.1), sign=-1).constraint()
    assert c["constraint_rel"] < 1e-12


def test_stability_violation_aborts():
    with pytest.raises(FlowAbort) as info:
        run_flow(curved_state(1, 32, amp=0.0, h_amp=0.1), 0.05, 3)
    assert len(info.value.trajectory) == 1


def test_oversized_step_blows_up_with_partial_trajectory():
    with pytest.raises(FlowAbort) as info:
        run_flow(curved_state(1, 32, amp=0.0, h_amp=0.1), 0.05, 50, check_stability=False)
    assert 1 <= len(info.value.trajectory) < 51


def test_evolution_residuals_keys(flat_traj):
    res = evolution_residuals(flat_traj, 0)
    assert set(res) == {"B", "A"}
    # on the homothety both sides vanish up to the exp(-t) rescaling of B = -I
    assert max(res.values()) < 1e-2


def test_export_and_manifest(tmp_path, flat_traj):
    cfg = {"n": 1, "resolution": 16}
    out = export_trajectory(flat_traj, tmp_path / "traj", cfg, every=5)
    manifest = json.loads((tmp_path / "traj" / "manifest.json").read_text())
    assert manifest["config_hash"] == config_hash(cfg) == config_hash({"resolution": 16, "n": 1})
    assert manifest["snapshots"] == [f"step{k:05d}_{x}.kvs" for k in (0, 5, 10) for x in "gJ"]
    g10 = load_snapshot(tmp_path / "traj" / "step00010_g.kvs")
    assert np.array_equal(g10.data, flat_traj[10].state.m.g.data)
    assert len(manifest["times"]) == 11 and out.exists()
