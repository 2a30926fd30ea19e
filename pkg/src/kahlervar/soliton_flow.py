"""Soliton-Kahler-Ricci flow on the torus: stepping, diagnostics and evolution checks.

The system is integrated as written: B = Ric*_J(Omega) - I, A = dbar grad f,
g-velocity g(B - A) and 2 J' = J g'* - g'* J.  ``sign=-1`` selects the
alternative A = -dbar grad f, for which g' = Ric_g(Omega) - g; both are kept so
the two candidate readings can be compared on the same data.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from functools import cached_property
from pathlib import Path

import numpy as np

from . import riemannian_core as rc
from .bakry_emery import KahlerState
from .kahler_ops import del_dbar_TX, hodge_laplacians
from .report import Record, ResidualReport
from .riemannian_core import MetricField, VolumeDensityField, nabla_array
from .spectral_fields import (CO, CONTRA, ContractViolation, TensorField, TorusGrid, compose_arrays,
                              dealias, save_snapshot, tail_energy)
from .variation_engine import VariationDatum, membership_F

# RK4 is stable on the negative real axis up to about 2.78; the principal part of
# the system acts on the 2/3 band with symbol at most (2 pi k)^2 / 2.
RK4_REAL_AXIS = 2.78
STABILITY_C = 2.0 * RK4_REAL_AXIS / (2.0 * np.pi / 3.0) ** 2
BLOWUP_FACTOR = 1e3


class FlowAbort(RuntimeError):
    """Raised on SPD loss, non-finite data, blow-up or a stability violation."""

    def __init__(self, msg: str, trajectory: list):
        super().__init__(msg)
        self.trajectory = trajectory


def stability_limit(grid: TorusGrid, c: float = STABILITY_C) -> float:
    """Largest admissible step, c * spacing^2."""
    return c * grid.spacing ** 2


def _endo(state: KahlerState, data: np.ndarray) -> TensorField:
    return TensorField(state.grid, (CO, CONTRA), data)


class FlowState:
    """A snapshot of the flow with lazily computed B, A and diagnostics."""

    def __init__(self, t: float, state: KahlerState, sign: int = 1):
        self.t = float(t)
        self.state = state
        self.sign = sign

    @cached_property
    def B(self) -> TensorField:
        st = self.state
        eye = np.broadcast_to(np.eye(st.grid.dim).reshape((st.grid.dim,) * 2 + (1,) * st.grid.dim),
                              st.J.data.shape)
        return _endo(st, st.ricci_endo_j.data - eye)

    @cached_property
    def A(self) -> TensorField:
        return _endo(self.state, self.sign * self.state.anti_hessian.data)

    @cached_property
    def velocity(self) -> tuple:
        """(g-velocity, J-velocity)."""
        st = self.state
        S = self.B.data - self.A.data
        gdot = np.einsum("am...,mb...->ab...", S, st.m.g.data)
        gdot = 0.5 * (gdot + np.swapaxes(gdot, 0, 1))
        J = st.J.data
        jdot = 0.5 * (compose_arrays(J, S) - compose_arrays(S, J))
        return TensorField(st.grid, (CO, CO), gdot), _endo(st, jdot)

    def constraint(self) -> dict:
        """sup norms of dbar B - del A and of the opposite-sign combination dbar B + del A."""
        m, J = self.state.m, self.state.J
        dbB = del_dbar_TX(self.B, m, J)[1].data
        dA = del_dbar_TX(self.A, m, J)[0].data
        scale = max(1.0, float(np.max(np.abs(dbB))), float(np.max(np.abs(dA))))
        minus = float(np.max(np.abs(dbB - dA)))
        plus = float(np.max(np.abs(dbB + dA)))
        return {"constraint": minus, "constraint_rel": minus / scale,
                "constraint_alt": plus, "constraint_alt_rel": plus / scale}

    def kahler_form_rate(self) -> float:
        """omega'* = B, with omega'* = omega' omega^{-1} built from the velocity."""
        st = self.state
        gdot, jdot = self.velocity
        g, J = st.m.g.data, st.J.data
        om = np.einsum("am...,mb...->ab...", J, g)
        om_dot = np.einsum("am...,mb...->ab...", jdot.data, g) + np.einsum("am...,mb...->ab...", J, gdot.data)
        rate = np.einsum("ab...,bc...->ac...", om_dot, _pointwise_inverse(om))
        B = self.B.data
        return float(np.max(np.abs(rate - B))) / max(1.0, float(np.max(np.abs(B))))

    def structure(self) -> dict:
        st = self.state
        B, A, J = self.B.data, self.A.data, st.J.data
        m = st.m

        def rel(x, ref):
            return float(np.max(np.abs(x))) / max(1.0, float(np.max(np.abs(ref))))

        return {
            "b_linear": rel(compose_arrays(B, J) - compose_arrays(J, B), B),
            "b_symmetric": rel(B - rc.transpose_g_array(B, m), B),
            "a_antilinear": rel(compose_arrays(A, J) + compose_arrays(J, A), A),
            "a_symmetric": rel(A - rc.transpose_g_array(A, m), A),
        }

    @cached_property
    def diagnostics(self) -> dict:
        st = self.state
        gdot = self.velocity[0]
        return {
            "t": self.t,
            **self.constraint(),
            "f_membership": max(membership_F(VariationDatum(st, gdot))[:2]),
            "kahler": st.cs.kahler_residual(st.m),
            "j_square": st.cs.square_residual(),
            "j_compat": st.cs.compatibility_residual(st.m),
            "tail_energy": tail_energy(st.m.g.data, st.grid),
            "min_eig": st.m.min_eigenvalue,
        }


def _pointwise_inverse(W: np.ndarray) -> np.ndarray:
    d = W.shape[0]
    Wm = np.moveaxis(W.reshape(d, d, -1), -1, 0)
    return np.moveaxis(np.linalg.inv(Wm), 0, -1).reshape(W.shape)


def make_state(g: np.ndarray, J: np.ndarray, omega: VolumeDensityField) -> KahlerState:
    grid = omega.grid
    return KahlerState(MetricField(TensorField(grid, (CO, CO), g)), TensorField(grid, (CO, CONTRA), J), omega)


def skrf_velocity(state: KahlerState, sign: int = 1) -> tuple:
    """(g-velocity, J-velocity) of the flow at ``state``."""
    return FlowState(0.0, state, sign).velocity


def _rates(g, J, omega, sign):
    gd, jd = skrf_velocity(make_state(g, J, omega), sign)
    return gd.data, jd.data


def flow_step(fs: FlowState, dt: float, dealiased: bool = True) -> FlowState:
    """One classical RK4 step on (g, J), dealiasing after every stage."""
    st = fs.state
    grid, omega = st.grid, st.omega
    clean = (lambda a: dealias(a, grid)) if dealiased else (lambda a: a)
    g0, J0 = st.m.g.data, st.J.data
    k1 = fs.velocity[0].data, fs.velocity[1].data
    stages = [k1]
    for w in (0.5, 0.5, 1.0):
        kg, kj = stages[-1]
        stages.append(_rates(clean(g0 + w * dt * kg), clean(J0 + w * dt * kj), omega, fs.sign))
    wts = (1.0, 2.0, 2.0, 1.0)
    g1 = clean(g0 + dt / 6.0 * sum(c * k[0] for c, k in zip(wts, stages)))
    J1 = clean(J0 + dt / 6.0 * sum(c * k[1] for c, k in zip(wts, stages)))
    return FlowState(fs.t + dt, make_state(0.5 * (g1 + np.swapaxes(g1, 0, 1)), J1, omega), fs.sign)


def run_flow(initial: KahlerState, dt: float, steps: int, sign: int = 1, check_stability: bool = True,
             stability_c: float = STABILITY_C, dealiased: bool = True) -> list:
    """Integrate ``steps`` RK4 steps; returns the list of FlowStates including t = 0.

    Raises FlowAbort (carrying the trajectory so far) on a step above the
    stability limit, SPD loss, non-finite data, or constraint blow-up.
    """
    traj = [FlowState(0.0, initial, sign)]
    if check_stability and dt > stability_limit(initial.grid, stability_c):
        raise FlowAbort(f"dt={dt:g} exceeds the stability limit {stability_limit(initial.grid, stability_c):.3e}",
                        traj)
    c0 = traj[0].diagnostics["constraint"]
    for _ in range(steps):
        try:
            nxt = flow_step(traj[-1], dt, dealiased)
            diag = nxt.diagnostics
        except (ContractViolation, np.linalg.LinAlgError, FloatingPointError) as exc:
            raise FlowAbort(f"step at t={traj[-1].t + dt:g} failed: {exc}", traj) from exc
        if not all(math.isfinite(v) for v in diag.values()):
            raise FlowAbort(f"non-finite diagnostics at t={nxt.t:g}", traj)
        if diag["constraint"] > max(BLOWUP_FACTOR * c0, 1e-6):
            raise FlowAbort(f"constraint blow-up at t={nxt.t:g}", traj)
        traj.append(nxt)
    return traj


def homothety_error(traj: list) -> float:
    """max_k |g_k - exp(-t_k) g_0| / |g_0| for a flat start with Omega = dV_{g_0}."""
    g0 = traj[0].state.m.g.data
    return max(float(np.max(np.abs(fs.state.m.g.data - math.exp(-fs.t) * g0))) for fs in traj) / float(np.max(np.abs(g0)))


# -- evolution equations -----------------------------------------------------------

def _drift(state: KahlerState, E: TensorField) -> np.ndarray:
    N = nabla_array(E.data, E.slots, state.m)
    return np.einsum("e...,e...->...", state.grad_f.data, N)


def evolution_rhs(fs: FlowState, form: str = "stated") -> tuple:
    """Right-hand sides of 2B' and 2A' at a snapshot.

    ``stated`` is the published pair.  ``consistent`` flips the terms that are odd
    in A (2A^2, [B, A] and the A del grad f products); it is what the variation
    formulas give once A = -g'^{0,1} and A = dbar grad f are both taken literally
    with opposite signs, i.e. along g' = Ric_g(Omega) - g.
    """
    if form not in ("stated", "consistent"):
        raise ValueError(f"unknown evolution form {form!r}")
    s = 1.0 if form == "stated" else -1.0
    st = fs.state
    m, J = st.m, st.J
    B, A = fs.B, fs.A
    Bd, Ad = B.data, A.data
    dlap_B = hodge_laplacians(B, m, J)[0].data
    dbar_lap_A = hodge_laplacians(A, m, J)[1].data
    ric = st.ricci_endo.data
    hol = st.hol_hessian.data

    def br(x, y):
        return compose_arrays(x, y) - compose_arrays(y, x)

    rhs_b = (-2.0 * dlap_B - _drift(st, B) - 2.0 * compose_arrays(Bd, Bd) + s * 2.0 * compose_arrays(Ad, Ad)
             + s * br(Bd, Ad) - br(ric, Bd) - 2.0 * Bd)
    rhs_a = (-2.0 * dbar_lap_A - _drift(st, A) + s * (compose_arrays(Ad, hol) + compose_arrays(hol, Ad))
             - 2.0 * compose_arrays(Bd, Ad))
    return rhs_b, rhs_a


def _time_derivative(traj: list, k: int, name: str) -> np.ndarray:
    """Forward difference at the ends, central in the interior."""
    get = lambda i: getattr(traj[i], name).data  # noqa: E731
    if 0 < k < len(traj) - 1:
        return (get(k + 1) - get(k - 1)) / (traj[k + 1].t - traj[k - 1].t)
    if k == 0:
        return (get(1) - get(0)) / (traj[1].t - traj[0].t)
    return (get(k) - get(k - 1)) / (traj[k].t - traj[k - 1].t)


def evolution_residuals(traj: list, k: int, form: str = "stated") -> dict:
    """Relative residuals of 2B' and 2A' against their evolution formulas at snapshot k."""
    rhs_b, rhs_a = evolution_rhs(traj[k], form)
    out = {}
    for name, rhs in (("B", rhs_b), ("A", rhs_a)):
        lhs = 2.0 * _time_derivative(traj, k, name)
        out[name] = float(np.max(np.abs(lhs - rhs))) / max(1.0, float(np.max(np.abs(rhs))))
    return out


def kahler_form_rate_fd(traj: list, k: int) -> float:
    """omega'* = B with omega' taken by finite differences along the trajectory."""
    def omega(i):
        st = traj[i].state
        return np.einsum("am...,mb...->ab...", st.J.data, st.m.g.data)
    if 0 < k < len(traj) - 1:
        rate = (omega(k + 1) - omega(k - 1)) / (traj[k + 1].t - traj[k - 1].t)
    else:
        rate = (omega(1) - omega(0)) / (traj[1].t - traj[0].t)
    sharp = np.einsum("ab...,bc...->ac...", rate, _pointwise_inverse(omega(k)))
    B = traj[k].B.data
    return float(np.max(np.abs(sharp - B))) / max(1.0, float(np.max(np.abs(B))))


def check_evolution(traj: list, indices=None, tol_start: float = 1e-3, tol_mid: float = 1e-2,
                    label: str = "") -> ResidualReport:
    """Evolution-equation residuals at the chosen snapshot indices.

    The start uses a forward difference (first order in dt) and is a hard check;
    later snapshots are soft since the hypotheses behind the formulas drift.  The
    sign-consistent candidate pair is always reported as soft.
    """
    indices = indices if indices is not None else sorted({0, len(traj) // 2})
    report = ResidualReport()
    prefix = f"{label}:" if label else ""
    for k in indices:
        t0 = time.perf_counter()
        res = evolution_residuals(traj, k)
        alt = evolution_residuals(traj, k, "consistent")
        rt = (time.perf_counter() - t0) / 4
        soft = k != 0
        tol = tol_mid if soft else tol_start
        tag = f"t{traj[k].t:.6g}"
        for key, part in (("b", "J-linear"), ("a", "J-anti-linear")):
            report.add(Record(f"{prefix}evol_{key}@{tag}", f"parabolic evolution of the {part} part",
                              res[key.upper()], tol, runtime=rt, soft=soft))
            report.add(Record(f"{prefix}evol_{key}_sign_consistent@{tag}",
                              f"parabolic evolution of the {part} part, A-odd terms flipped",
                              alt[key.upper()], tol, runtime=rt, soft=True))
    return report


# -- export -----------------------------------------------------------------------

def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()[:16]


def export_trajectory(traj: list, outdir, config: dict, every: int = 10) -> Path:
    """Write snapshots of g and J for every ``every``-th step plus a JSON manifest."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    snaps = []
    for k, fs in enumerate(traj):
        if k % every and k != len(traj) - 1:
            continue
        for name, T in (("g", fs.state.m.g), ("J", fs.state.J)):
            fname = f"step{k:05d}_{name}.kvs"
            save_snapshot(T, outdir / fname, {"t": fs.t, "step": k})
            snaps.append(fname)
    keys = list(traj[0].diagnostics)
    manifest = {
        "config_hash": config_hash(config),
        "times": [fs.t for fs in traj],
        "diagnostics": {k: [fs.diagnostics[k] for fs in traj] for k in keys},
        "snapshots": snaps,
    }
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path
