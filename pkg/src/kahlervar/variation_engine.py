"""Variations of Kahler structures: admissible data, paths, the FD oracle and formula evaluators.

A variation datum is a base state plus a symmetric 2-tensor v (the metric velocity).
The J-velocity is fixed by the first-order ODE ``2 Jdot = J v* - v* J``.  Every
formula evaluator returns the right-hand side of an identity of the form
``2 d/dt Q(g_t, J_t) = RHS``; the harness compares it with twice the
finite-difference derivative of Q along the path ``g_t = g + t v``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from . import kernels
from . import riemannian_core as rc
from .bakry_emery import KahlerState
from .kahler_ops import (adjoint_dbar, adjoint_del, compose_form_endo, covariant_exterior, del_dbar_TX,
                         j_pullback, nabla_01, type_project_endo, type_project_form)
from .riemannian_core import MetricField, nabla_array
from .spectral_fields import (CO, CONTRA, ContractViolation, FourierSpec, TensorField, TorusGrid,
                              compose_arrays, dealias, spectral_gradient)

DEFAULT_LADDER = (1e-2, 5e-3, 2.5e-3)
MEMBERSHIP_TOL = 1e-7


class PreconditionError(ValueError):
    """A formula was asked for on data outside its hypotheses."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class ProjectionError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


def _comp(*arrs):
    out = arrs[0]
    for a in arrs[1:]:
        out = compose_arrays(out, a)
    return out


# -- random band-limited data ---------------------------------------------------

def random_scalar(grid: TorusGrid, rng: np.random.Generator, max_mode: int = 2, amp: float = 0.05,
                  nterms: int = 4) -> np.ndarray:
    return FourierSpec.random(rng, grid.dim, max_mode, nterms, amp).synthesize(grid)


def random_tensor(grid: TorusGrid, slots: tuple, rng: np.random.Generator, max_mode: int = 2,
                  amp: float = 0.3, symmetric: bool = False) -> TensorField:
    d = grid.dim
    data = np.zeros((d,) * len(slots) + grid.shape)
    for idx in np.ndindex(*((d,) * len(slots))):
        data[idx] = random_scalar(grid, rng, max_mode, amp, 3) + rng.uniform(-amp, amp)
    if symmetric:
        data = 0.5 * (data + np.swapaxes(data, 0, 1))
    return TensorField(grid, tuple(slots), data)


# -- data -------------------------------------------------------------------------

class VariationDatum:
    """Base state, metric velocity v and the induced J-velocity.

    ``jdot`` may be overridden to build paths that violate the standing symmetry
    hypothesis (negative controls); the override is then used everywhere.
    """

    def __init__(self, base: KahlerState, v: TensorField, jdot: TensorField | None = None):
        if v.slots != (CO, CO):
            raise ContractViolation("a metric variation is a covariant 2-tensor")
        if np.max(np.abs(v.data - np.swapaxes(v.data, 0, 1))) > 1e-14 * max(1.0, v.linf()):
            raise ContractViolation("a metric variation must be symmetric")
        self.base = base
        self.v = v
        self.vsharp = rc.sharp(v, base.m)
        self.v10, self.v01 = type_project_endo(self.vsharp, base.J)
        self.jdot_override = jdot is not None
        J = base.J.data
        self.jdot = jdot if jdot is not None else self.vsharp.like(
            0.5 * (compose_arrays(J, self.vsharp.data) - compose_arrays(self.vsharp.data, J)))

    @property
    def A(self) -> TensorField:
        return -self.v01

    @property
    def B(self) -> TensorField:
        return self.v10

    def invariants(self) -> dict:
        m, J = self.base.m, self.base.J.data
        jd = self.jdot.data
        scale = max(1.0, self.jdot.linf())
        return {
            "jdot_symmetry": float(np.max(np.abs(jd - rc.transpose_g_array(jd, m)))) / scale,
            "type_sum": float(np.max(np.abs(self.v10.data + self.v01.data - self.vsharp.data))),
            "a_equals_j_jdot": float(np.max(np.abs(-self.v01.data - compose_arrays(J, jd)))) / scale,
        }


def membership_D(datum: VariationDatum) -> tuple:
    """(|del v10|, |dbar v01|) relative to max(1, |nabla v*|)."""
    st = datum.base
    scale = max(1.0, float(np.max(np.abs(nabla_array(datum.vsharp.data, datum.vsharp.slots, st.m)))))
    d10, _ = del_dbar_TX(datum.v10, st.m, st.J)
    _, d01 = del_dbar_TX(datum.v01, st.m, st.J)
    return d10.linf() / scale, d01.linf() / scale


def membership_F(datum: VariationDatum) -> tuple:
    """(|d^nabla v*|, |dbar v10 + del v01|, gap between the two descriptions).

    Both vanish on the closed class; the gap is the sup of their difference,
    which equals the holomorphic-type part of d^nabla v* and is zero on D.
    """
    st = datum.base
    scale = max(1.0, float(np.max(np.abs(nabla_array(datum.vsharp.data, datum.vsharp.slots, st.m)))))
    dnabla = covariant_exterior(datum.vsharp, st.m)
    _, db10 = del_dbar_TX(datum.v10, st.m, st.J)
    d01, _ = del_dbar_TX(datum.v01, st.m, st.J)
    kah = db10.data + d01.data
    return (dnabla.linf() / scale, float(np.max(np.abs(kah))) / scale,
            float(np.max(np.abs(dnabla.data - kah))) / scale)


def require(datum: VariationDatum, space: str, tol: float = MEMBERSHIP_TOL) -> None:
    if space == "D":
        r = max(membership_D(datum))
        if r > tol:
            raise PreconditionError("variation is not in D", r)
    elif space == "F":
        r = max(membership_F(datum)[:2])
        if r > tol:
            raise PreconditionError("variation is not in F", r)


# -- samplers -------------------------------------------------------------------

def flat_hessian(u: np.ndarray, grid: TorusGrid) -> np.ndarray:
    H = spectral_gradient(spectral_gradient(u, grid), grid)
    return 0.5 * (H + np.swapaxes(H, 0, 1))


def sample_F_flat(grid: TorusGrid, u: np.ndarray, h: np.ndarray | None = None,
                  c: float = 0.0) -> VariationDatum:
    """v = Hess u + c g over the flat base with Omega = exp(-h) dV."""
    base = KahlerState.from_potential(grid, None, h)
    v = flat_hessian(u, grid) + c * base.m.g.data
    return VariationDatum(base, TensorField(grid, (CO, CO), v))


def hessian_array(u: np.ndarray, m: MetricField) -> np.ndarray:
    return rc.hessian(TensorField(m.grid, (), u), m).data


def datum_from_potentials(base: KahlerState, u: np.ndarray, w: np.ndarray, c: float = 0.0) -> VariationDatum:
    """v = (Hess u)'' + (Hess w)' + c g, an element of D on any Kahler base."""
    J = base.J
    hu = TensorField(base.grid, (CO, CO), hessian_array(u, base.m))
    hw = TensorField(base.grid, (CO, CO), hessian_array(w, base.m))
    v = type_project_form(hu, J)[1].data + type_project_form(hw, J)[0].data + c * base.m.g.data
    v = 0.5 * (v + np.swapaxes(v, 0, 1))
    return VariationDatum(base, TensorField(base.grid, (CO, CO), v))


def _hessian_adjoint(k: np.ndarray, m: MetricField) -> np.ndarray:
    """Flat-L2 adjoint of u -> Hess_g u: sum d_a d_b k_ab + d_c (Gamma^c_ab k_ab)."""
    grid = m.grid
    out = np.einsum("abab...->...", spectral_gradient(spectral_gradient(k, grid), grid))
    gk = np.einsum("abc...,ab...->c...", m.christoffel, k)
    return out + np.einsum("cc...->...", spectral_gradient(gk, grid))


def _form_adjoint(k: np.ndarray, J: np.ndarray, sign: float) -> np.ndarray:
    """Euclidean adjoint of h -> (h + sign J* h J) / 2."""
    return 0.5 * (k + sign * np.einsum("am...,bn...,ab...->mn...", J, J, k))


@dataclass
class ProjectionInfo:
    iterations: int
    residual: float
    fit_error: float


def sample_D(base: KahlerState, v_raw: TensorField, maxiter: int = 500,
             tol: float = 1e-8) -> tuple:
    """Least-squares projection of a raw symmetric v onto span{(Hess u)'', (Hess w)', g}.

    Returns (datum, ProjectionInfo).  Every element of that span lies in D, so the
    returned datum is admissible whatever the solver achieved; the solver only
    controls how close it stays to ``v_raw``.
    """
    grid, m, J = base.grid, base.m, base.J.data
    P = grid.npoints
    g = m.g.data
    target = 0.5 * (v_raw.data + np.swapaxes(v_raw.data, 0, 1))

    def forward(x):
        u = x[:P].reshape(grid.shape)
        w = x[P:2 * P].reshape(grid.shape)
        hu, hw = hessian_array(u, m), hessian_array(w, m)
        return (0.5 * (hu - j_pullback(hu, J)) + 0.5 * (hw + j_pullback(hw, J)) + x[-1] * g)

    def adjoint(k):
        k = 0.5 * (k + np.swapaxes(k, 0, 1))
        ku = _hessian_adjoint(_form_adjoint(k, J, -1.0), m)
        kw = _hessian_adjoint(_form_adjoint(k, J, 1.0), m)
        return np.concatenate([ku.ravel(), kw.ravel(), [float(np.sum(k * g))]])

    k2 = sum(kk ** 2 for kk in np.meshgrid(*[2 * np.pi * np.fft.fftfreq(grid.resolution, 1.0 / grid.resolution)]
                                           * grid.dim, indexing="ij"))
    inv_bi = np.divide(1.0, k2 ** 2, out=np.ones_like(k2), where=k2 > 0)

    def precond(x):
        out = np.empty_like(x)
        for s in range(2):
            blk = x[s * P:(s + 1) * P].reshape(grid.shape)
            out[s * P:(s + 1) * P] = np.real(np.fft.ifftn(np.fft.fftn(blk) * inv_bi)).ravel()
        out[-1] = x[-1] / max(float(np.sum(g * g)), 1e-300)
        return out

    n = 2 * P + 1
    normal = LinearOperator((n, n), matvec=lambda x: adjoint(forward(x)), dtype=float)
    M = LinearOperator((n, n), matvec=precond, dtype=float)
    count = [0]

    def cb(_):
        count[0] += 1

    x, _ = cg(normal, adjoint(target), M=M, maxiter=maxiter, rtol=1e-12, callback=cb)
    u = dealias(x[:P].reshape(grid.shape), grid)
    w = dealias(x[P:2 * P].reshape(grid.shape), grid)
    datum = datum_from_potentials(base, u, w, float(x[-1]))
    res = max(membership_D(datum))
    fit = float(np.max(np.abs(datum.v.data - target))) / max(1.0, float(np.max(np.abs(target))))
    if res > tol:
        raise ProjectionError("projection onto D did not reach the membership tolerance", res)
    return datum, ProjectionInfo(count[0], res, fit)


# -- paths ------------------------------------------------------------------------

class PathIntegrator:
    """g_t = g + t v with J_t from RK4 on 2 Jdot = J S - S J, S = g_t^{-1} v.

    The ODE is pointwise, so J is integrated with steps of at most ``max_step`` and
    every computed time is kept as a restart point for later requests.  With a
    J-velocity override the path is instead the straight line J + t Jdot.
    """

    def __init__(self, datum: VariationDatum, max_step: float = 1.25e-3):
        self.datum = datum
        self.max_step = max_step
        self._states: dict = {}
        self._js: dict = {0.0: datum.base.J.data}

    def metric(self, t: float) -> MetricField:
        g0 = self.datum.base.m.g
        return MetricField(g0.like(g0.data + t * self.datum.v.data))

    def _rhs(self, J: np.ndarray, t: float) -> np.ndarray:
        v = self.datum.v.data
        ginv, _ = kernels.sym_inverse(self.datum.base.m.g.data + t * v)
        S = np.einsum("ab...,bc...->ac...", v, ginv)
        return 0.5 * (compose_arrays(J, S) - compose_arrays(S, J))

    def complex_structure(self, t: float) -> TensorField:
        J0 = self.datum.base.J
        t = float(t)
        if self.datum.jdot_override:
            return J0.like(J0.data + t * self.datum.jdot.data)
        if t not in self._js:
            start = max((s for s in self._js if s * t >= 0 and abs(s) <= abs(t)), key=abs)
            steps = max(1, math.ceil(abs(t - start) / self.max_step - 1e-9))
            h = (t - start) / steps
            J, s = self._js[start], start
            for _ in range(steps):
                k1 = self._rhs(J, s)
                k2 = self._rhs(J + 0.5 * h * k1, s + 0.5 * h)
                k3 = self._rhs(J + 0.5 * h * k2, s + 0.5 * h)
                k4 = self._rhs(J + h * k3, s + h)
                J = J + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                s += h
            self._js[t] = J
        return J0.like(self._js[t])

    def state(self, t: float) -> KahlerState:
        key = float(t)
        if key not in self._states:
            base = self.datum.base
            self._states[key] = KahlerState(self.metric(t), self.complex_structure(t), base.omega)
        return self._states[key]

    def invariants(self, t: float) -> dict:
        st = self.state(t)
        J = st.J.data
        return {"j_square": st.cs.square_residual(),
                "j_skew": float(np.max(np.abs(J + rc.transpose_g_array(J, st.m))))}


@dataclass
class FDResult:
    value: TensorField
    order: float
    central: list = field(default_factory=list)
    diffs: tuple = ()


def fd_derivative(quantity, path: PathIntegrator, ladder: tuple = DEFAULT_LADDER) -> FDResult:
    """Central differences on a halving ladder, Richardson value and observed order."""
    central = []
    for eps in ladder:
        qp = quantity(path.state(eps))
        qm = quantity(path.state(-eps))
        central.append(qp.like((qp.data - qm.data) / (2.0 * eps)))
    value = central[-1].like((4.0 * central[-1].data - central[-2].data) / 3.0)
    diffs = tuple(float(np.max(np.abs(a.data - b.data))) for a, b in zip(central, central[1:]))
    floor = 1e-11 * max(1.0, value.linf())
    if len(diffs) < 2 or diffs[-1] <= floor:
        order = math.inf
    else:
        order = math.log(diffs[-2] / diffs[-1]) / math.log(ladder[-2] / ladder[-1])
    return FDResult(value, order, central, diffs)


# -- left-hand quantities (functions of a state on the path) -----------------------

def q_bakry_emery(st, xi=None):
    return st.bakry_emery


def q_bakry_emery_endo(st, xi=None):
    return st.bakry_emery_endo


def q_ricci_form(st, xi=None):
    return st.ricci_form_omega


def q_ricci_form_j(st, xi=None):
    """Ric_J(Omega) composed with J, i.e. (x, y) -> Ric_J(Omega)(Jx, y)."""
    R = st.ricci_form_omega
    return R.like(compose_form_endo(R.data, st.J.data))


def q_anti_invariant_ricci(st, xi=None):
    return type_project_form(st.bakry_emery, st.J)[1]


def q_j_linear(st, xi=None):
    return st.complex_components[0]


def q_j_antilinear(st, xi=None):
    return st.complex_components[1]


def q_dbar_vector(st, xi):
    return nabla_01(xi, st.m, st.J)


# -- right-hand sides -----------------------------------------------------------

def _omega_div_D(v: TensorField, st: KahlerState) -> TensorField:
    return rc.omega_divergence(rc.d_operator(v, st.m), st.m, st.f)


def _ext_d(beta: np.ndarray, grid: TorusGrid) -> np.ndarray:
    db = spectral_gradient(beta, grid)
    return db - np.swapaxes(db, 0, 1)


def _nabla_along(T: TensorField, vec: np.ndarray, st: KahlerState) -> np.ndarray:
    return np.einsum("e...,e...->...", vec, nabla_array(T.data, T.slots, st.m))


def _hess_endo(st: KahlerState) -> np.ndarray:
    return rc.sharp(st.hess_f, st.m).data


def _f_block(d: VariationDatum) -> TensorField:
    """g(nabla_{J grad f} Jdot + Jdot H J - J H Jdot) with H the Hessian endomorphism of f."""
    st = d.base
    J, jd, H = st.J.data, d.jdot.data, _hess_endo(st)
    Jgf = np.einsum("ac...,a...->c...", J, st.grad_f.data)
    X = _nabla_along(d.jdot, Jgf, st) + _comp(jd, H, J) - _comp(J, H, jd)
    return rc.flat(d.jdot.like(X), st.m)


def rhs_var_om_ric(d, xi=None):
    return _omega_div_D(d.v, d.base)


def rhs_vr_o_rc_fm(d, xi=None):
    st = d.base
    beta = rc.omega_divergence(rc.flat(d.jdot, st.m), st.m, st.f)
    return TensorField(st.grid, (CO, CO), _ext_d(beta.data, st.grid))


def rhs_dec_vr_o_rc(d, xi=None):
    st = d.base
    N = nabla_array(d.jdot.data, d.jdot.slots, st.m)
    tr = np.einsum("aba...->b...", N)
    jdf = np.einsum("bc...,c...->b...", d.jdot.data, st.df)
    return TensorField(st.grid, (CO, CO), _ext_d(tr - jdf, st.grid))


def rhs_rm_vr_rc_fm(d, xi=None):
    st = d.base
    v2 = type_project_form(d.v, st.J)[1]
    return -_omega_div_D(v2, st) - _f_block(d)


def rhs_vr_ant_hess(d, xi=None):
    st = d.base
    v1 = type_project_form(d.v, st.J)[0]
    return _omega_div_D(v1, st) - _f_block(d)


def _tr(E: np.ndarray, st) -> np.ndarray:
    return rc.transpose_g_array(E, st.m)


def _br(a, b):
    return compose_arrays(a, b) - compose_arrays(b, a)


def rhs_thm_b(d, xi=None):
    st = d.base
    m, J = st.m, st.J
    P = del_dbar_TX(adjoint_dbar(d.v01, m, J, st.f), m, J)[0].data
    R = st.ricci_endo_j.data
    out = -P - _tr(P, st) + _br(R, d.v01.data) - 2.0 * compose_arrays(d.v10.data, R)
    return d.vsharp.like(out)


def rhs_thm_a(d, xi=None):
    st = d.base
    m, J = st.m, st.J
    Q = del_dbar_TX(adjoint_del(d.v10, m, J, st.f), m, J)[1].data
    Jgf = np.einsum("ac...,a...->c...", J.data, st.grad_f.data)
    a01 = st.anti_hessian.data
    h10 = st.hol_hessian.data
    out = (-Q - _tr(Q, st) - compose_arrays(J.data, _nabla_along(d.v01, Jgf, st))
           + _br(a01, d.vsharp.data) - compose_arrays(d.v01.data, h10) - compose_arrays(h10, d.v01.data))
    return d.vsharp.like(out)


def rhs_thm_b_alt(d, xi=None):
    st = d.base
    m, J = st.m, st.J
    A = d.A
    R = adjoint_dbar(del_dbar_TX(A, m, J)[0], m, J, st.f).data
    a01 = st.anti_hessian.data
    Rj = st.ricci_endo_j.data
    out = (-0.5 * R - 0.5 * _tr(R, st) + compose_arrays(A.data, a01) + compose_arrays(a01, A.data)
           - _br(Rj, A.data) - 2.0 * compose_arrays(d.B.data, Rj))
    return d.vsharp.like(out)


def rhs_vr_om_endrc(d, xi=None):
    st = d.base
    lap = rc.omega_laplacian(d.vsharp, st.m, st.f).data
    return d.vsharp.like(-lap - 2.0 * compose_arrays(d.vsharp.data, st.bakry_emery_endo.data))


def rhs_part_a(d, xi=None):
    st = d.base
    m, J = st.m, st.J
    T = del_dbar_TX(adjoint_dbar(d.v01, m, J), m, J)[1].data
    a01, h10 = st.anti_hessian.data, st.hol_hessian.data
    v01, v10 = d.v01.data, d.v10.data
    out = (-2.0 * T - _nabla_along(d.v01, st.grad_f.data, st) - compose_arrays(v01, h10)
           - compose_arrays(h10, v01) + _br(a01, v01) - 2.0 * compose_arrays(v10, a01))
    return d.vsharp.like(out)


def rhs_part_b(d, xi=None):
    st = d.base
    m, J = st.m, st.J
    T = del_dbar_TX(adjoint_del(d.v10, m, J), m, J)[0].data
    a01, Rj, Ric = st.anti_hessian.data, st.ricci_endo_j.data, st.ricci_endo.data
    v01, v10 = d.v01.data, d.v10.data
    out = (-2.0 * T - _nabla_along(d.v10, st.grad_f.data, st) - compose_arrays(v01, a01)
           - compose_arrays(a01, v01) - _br(Ric, v10) + _br(Rj, v01) - 2.0 * compose_arrays(v10, Rj))
    return d.vsharp.like(out)


def rhs_var_dbar_vf(d, xi):
    st = d.base
    J, jd = st.J.data, d.jdot.data
    nxi = nabla_array(xi.data, xi.slots, st.m)
    out = (-compose_arrays(J, np.einsum("a...,a...->...", xi.data, nabla_array(jd, d.jdot.slots, st.m)))
           + _comp(J, nxi, jd) + _comp(jd, nxi, J))
    return d.vsharp.like(out)


@dataclass(frozen=True)
class Formula:
    formula_id: str
    anchor: str
    lhs: object
    rhs: object
    requires: str
    needs_vector: bool = False


FORMULAS = {f.formula_id: f for f in (
    Formula("VAR_OM_RIC", "first variation of the weighted Bakry-Emery-Ricci tensor",
            q_bakry_emery, rhs_var_om_ric, "none"),
    Formula("VR_O_RC_FM", "first variation of the weighted Ricci form as d of a weighted divergence",
            q_ricci_form, rhs_vr_o_rc_fm, "D"),
    Formula("DEC_VR_O_RC", "weighted Ricci form variation via the real trace of nabla Jdot",
            q_ricci_form, rhs_dec_vr_o_rc, "D"),
    Formula("RM_VR_RC_FM", "variation of Ric_J(Omega) J via the J-anti-invariant metric velocity",
            q_ricci_form_j, rhs_rm_vr_rc_fm, "D"),
    Formula("VR_ANT_HESS", "variation of g times dbar grad f via the J-invariant metric velocity",
            q_anti_invariant_ricci, rhs_vr_ant_hess, "D"),
    Formula("THM_B", "variation of the J-linear Bakry-Emery endomorphism component",
            q_j_linear, rhs_thm_b, "D"),
    Formula("THM_A", "variation of the J-anti-linear Bakry-Emery endomorphism component",
            q_j_antilinear, rhs_thm_a, "D"),
    Formula("THM_B_ALT", "alternative variation of the J-linear component in terms of A",
            q_j_linear, rhs_thm_b_alt, "D"),
    Formula("VR_OM_ENDRC", "variation of the Bakry-Emery endomorphism for closed variations",
            q_bakry_emery_endo, rhs_vr_om_endrc, "F"),
    Formula("PART_A", "parabolic variation of dbar grad f for closed variations",
            q_j_antilinear, rhs_part_a, "F"),
    Formula("PART_B", "parabolic variation of the J-linear component for closed variations",
            q_j_linear, rhs_part_b, "F"),
    Formula("VAR_DBAR_VF", "variation of the dbar operator on a fixed vector field",
            q_dbar_vector, rhs_var_dbar_vf, "D", needs_vector=True),
)}


def variation_rhs(formula_id: str, datum: VariationDatum, xi: TensorField | None = None,
                  check: bool = True) -> TensorField:
    try:
        F = FORMULAS[formula_id]
    except KeyError:
        raise ContractViolation(f"unknown formula id {formula_id}") from None
    if F.needs_vector and xi is None:
        raise ContractViolation(f"{formula_id} needs a vector field argument")
    if check:
        require(datum, F.requires)
    return F.rhs(datum, xi)


@dataclass
class VariationCheck:
    formula_id: str
    residual: float
    order: float
    fd: TensorField
    rhs: TensorField


def check_formula(formula_id: str, datum: VariationDatum, path: PathIntegrator | None = None,
                  xi: TensorField | None = None, ladder: tuple = DEFAULT_LADDER,
                  check: bool = True) -> VariationCheck:
    """Compare 2 * FD derivative of the formula's left quantity with its right-hand side."""
    if formula_id not in FORMULAS:
        raise ContractViolation(f"unknown formula id {formula_id}")
    F = FORMULAS[formula_id]
    path = path or PathIntegrator(datum)
    rhs = variation_rhs(formula_id, datum, xi, check=check)
    fd = fd_derivative(lambda st: F.lhs(st, xi), path, ladder)
    two_fd = fd.value * 2.0
    res = float(np.max(np.abs(two_fd.data - rhs.data))) / max(1.0, rhs.linf(), two_fd.linf())
    return VariationCheck(formula_id, res, fd.order, two_fd, rhs)


DEFECT_FLOOR = 1e-12


def kahler_defect_exponent(datum: VariationDatum, times: tuple = (1e-2, 5e-3)) -> tuple:
    """Measured exponent p in |nabla_{g_t} J_t| ~ t^p along the ODE path."""
    path = PathIntegrator(datum, max_step=2.5e-4)
    defects = [path.state(t).cs.kahler_residual(path.state(t).m) for t in times]
    if max(defects) <= DEFECT_FLOOR:
        # exactly Kahler path (e.g. constant-coefficient velocity on a flat base)
        return math.inf, defects
    return math.log(defects[0] / defects[1]) / math.log(times[0] / times[1]), defects


def static_identity_suite(state: KahlerState, rng: np.random.Generator | None = None, **kw):
    from .identity_suite import static_identity_suite as _suite
    return _suite(state, rng=rng, **kw)
