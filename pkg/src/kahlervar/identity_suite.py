"""Fixed-state identities: each check evaluates both sides of an identity independently.

Residuals are ``|lhs - rhs|_inf / max(1, |rhs|_inf)``.  Identities whose right side
vanishes identically are normalized by the largest constituent term instead, so
they measure cancellation rather than an absolute size.
"""

from __future__ import annotations

import time

import numpy as np

from . import riemannian_core as rc
from .bakry_emery import (KahlerState, decomposition_residuals, density_ricci_form,
                          kahler_ricci_form_oracle)
from .kahler_ops import (_nabla_types, adjoint_dbar, adjoint_del, complex_partials, coframe, compose_form_endo,
                         covariant_exterior, covariant_exterior_adjoint, del_dbar_TX, frame_vectors,
                         hodge_laplacian, hodge_laplacians, i_ddbar, l2_pairing, nabla_01, nabla_10,
                         type_project_endo, type_project_form)
from .report import Record, ResidualReport
from .riemannian_core import nabla_array
from .spectral_fields import CO, CONTRA, TensorField, TorusGrid, compose_arrays, spectral_gradient
from .variation_engine import (VariationDatum, _f_block, _ext_d, datum_from_potentials, random_scalar,
                               random_tensor, sample_F_flat)

TOL = 1e-7


def _a(x):
    return x.data if isinstance(x, TensorField) else np.asarray(x)


def _sup(x) -> float:
    return float(np.max(np.abs(_a(x))))


def gap(lhs, rhs) -> float:
    """|lhs - rhs| / max(1, |rhs|)."""
    return _sup(_a(lhs) - _a(rhs)) / max(1.0, _sup(rhs))


def cancellation(*terms) -> float:
    """|sum terms| / max(1, max |term|) for identities of the form sum = 0."""
    total = sum(_a(t) for t in terms)
    return _sup(total) / max(1.0, max(_sup(t) for t in terms))


def _tr(E, m):
    return rc.transpose_g_array(_a(E), m)


def _tr_endo_slots(N, m):
    """g-transpose of the trailing endomorphism of a derivative array N[e, a, c]."""
    low = np.einsum("eam...,mb...->eab...", N, m.g.data)
    return np.einsum("eba...,bc...->eac...", low, m.ginv.data)


# -- sample construction ----------------------------------------------------------

class Samples:
    """Random band-limited inputs shared by the identities of one suite run."""

    def __init__(self, st: KahlerState, rng: np.random.Generator, amp: float = 0.3):
        g, m = st.grid, st.m
        self.u = random_tensor(g, (CO, CO), rng, amp=amp, symmetric=True)
        us = rc.sharp(self.u, m)
        self.B, self.A = type_project_endo(us, st.J)
        self.E = random_tensor(g, (CO, CONTRA), rng, amp=amp)
        beta = random_tensor(g, (CO, CO, CONTRA), rng, amp=amp)
        self.beta = beta.like(beta.data - np.swapaxes(beta.data, 0, 1))
        self.xi = random_tensor(g, (CONTRA,), rng, amp=amp)
        self.alpha = random_tensor(g, (CO,), rng, amp=amp)
        self.scalar = random_scalar(g, rng, 2, amp)
        pamp = 0.02 if g.n == 1 else 0.004
        self.d_datum = datum_from_potentials(st, random_scalar(g, rng, 2, pamp),
                                             random_scalar(g, rng, 2, pamp), 0.1)
        self._st = st
        self._dd: dict = {}
        self._types: dict = {}

    def del_dbar(self, name: str) -> tuple:
        if name not in self._dd:
            self._dd[name] = del_dbar_TX(getattr(self, name), self._st.m, self._st.J)
        return self._dd[name]

    def types(self, name: str) -> tuple:
        """(nabla^{1,0}, nabla^{0,1}) arrays of a sample, from one covariant derivative."""
        if name not in self._types:
            S = getattr(self, name)
            self._types[name] = _nabla_types(S.data, S.slots, self._st.m, self._st.J.data)
        return self._types[name]


def product_potential(grid: TorusGrid, amp: float) -> np.ndarray:
    """A potential that is a sum of functions of one complex variable each."""
    x = grid.coords()
    n = grid.n
    phi = np.zeros(grid.shape)
    for k in range(n):
        phi += amp * (np.cos(2 * np.pi * x[k]) + 0.6 * np.sin(2 * np.pi * (x[k] + x[n + k])))
        amp *= 0.7
    return phi


def codazzi_datum(grid: TorusGrid, h: np.ndarray | None, rng: np.random.Generator,
                  amp: float) -> VariationDatum:
    """Closed variation on a curved product base.

    Each factor carries a constant trace-free J-anti-invariant form (a holomorphic
    quadratic differential) plus a constant multiple of its own metric; both are
    Codazzi on the factor, so the sum has d^nabla v* = 0 while the base is curved.
    """
    st = KahlerState.from_potential(grid, product_potential(grid, amp), h)
    n = grid.n
    v = np.zeros((2 * n, 2 * n) + grid.shape)
    for k in range(n):
        a, b, lam = rng.uniform(-0.5, 0.5, 3)
        ix, iy = k, n + k
        v[ix, ix] += a
        v[iy, iy] -= a
        v[ix, iy] += b
        v[iy, ix] += b
        blk = [ix, iy]
        v[np.ix_(blk, blk)] += lam * st.m.g.data[np.ix_(blk, blk)]
    return VariationDatum(st, TensorField(grid, (CO, CO), v))


# -- individual identity groups ----------------------------------------------------

def _decompositions(st, s):
    out = decomposition_residuals(st)
    out["anti_hessian_component"] = gap(st.anti_hessian_component, st.anti_hessian)
    inv, anti = type_project_form(st.bakry_emery, st.J)
    out["form_type_split"] = gap(inv + anti, st.bakry_emery)
    return out


def _oracles(st, s):
    m, grid = st.m, st.grid
    out = {}
    out["density_ricci_form_oracle"] = gap(st.ricci_form_omega, density_ricci_form(st))
    inv = type_project_form(st.ricci, st.J)[0]
    out["kahler_ricci_form_oracle"] = gap(compose_form_endo(inv.data, st.J.data), kahler_ricci_form_oracle(st))
    n = grid.n
    zeta = frame_vectors(n)
    dz = coframe(n)
    G = m.christoffel
    # A^p_{k,l} = (zeta_p . W_{l,r}) W^{r,k} with W_{k,l} = 2 g(zeta_k, conj zeta_l)
    W = 2.0 * np.einsum("ka,lb,ab...->kl...", zeta, zeta.conj(), m.g.data)
    Wm = np.moveaxis(W.reshape(n, n, -1), -1, 0)
    Winv = np.moveaxis(np.linalg.inv(Wm), 0, -1).reshape(W.shape)
    dW = spectral_gradient(W.real, grid) + 1j * spectral_gradient(W.imag, grid)
    zdW = np.einsum("pe,elr...->plr...", zeta, dW)
    A_frame = np.einsum("plr...,rk...->pkl...", zdW, Winv)
    A_real = np.einsum("kc,pa,lb,abc...->pkl...", dz, zeta, zeta, G)
    out["complex_frame_christoffel"] = gap(A_real, A_frame)
    logdet = np.log(np.abs(np.linalg.det(Wm))).reshape(grid.shape)
    _, dzb = complex_partials(logdet, grid)
    Rkl = -np.stack([complex_partials(dzb[l].real, grid)[0] + 1j * complex_partials(dzb[l].imag, grid)[0]
                     for l in range(n)], axis=1)
    R_real = np.einsum("ka,lb,ab...->kl...", zeta, zeta.conj(), st.ricci.data)
    out["complex_frame_ricci"] = gap(R_real, Rkl)
    return out


def _chern(st, s):
    m, J = st.m, st.J.data
    d = st.grid.dim
    xi = s.xi.data
    out = {}
    omega = rc.flat(st.J, m).data
    h = m.g.data - 1j * omega
    Jxi = np.einsum("a...,ac...->c...", xi, J)
    xi10 = 0.5 * (xi - 1j * Jxi)
    out["key_contract"] = gap(np.einsum("a...,ab...->b...", xi, h),
                              -2j * np.einsum("a...,ab...->b...", xi10, omega))
    alpha = np.einsum("a...,ab...->b...", xi10, m.g.data)
    grad = spectral_gradient(alpha.real, st.grid) + 1j * spectral_gradient(alpha.imag, st.grid)
    D10 = 0.5 * (grad - 1j * np.einsum("ac...,cb...->ab...", J, grad))
    dalpha = D10 - np.swapaxes(D10, 0, 1)
    P10 = 0.5 * (np.eye(d).reshape((d, d) + (1,) * d) - 1j * J)
    Y = 1j * np.einsum("ea...,ab...->eb...", P10, dalpha)
    Z = np.einsum("eb...,bc...->ec...", Y, m.ginv.data)
    mu = -np.einsum("ec...,cd...->ed...", Z, J)
    out["chern_connection"] = gap(2.0 * mu.real, nabla_10(s.xi, m, st.J))
    return out


def _riemannian(st, s):
    m = st.m
    out = {}
    out["metric_compatibility"] = _sup(nabla_array(m.g.data, (CO, CO), m)) / max(1.0, _sup(spectral_gradient(m.g.data, st.grid)))
    H = rc.hessian(TensorField(st.grid, (), s.scalar), m).data
    out["torsion_free"] = cancellation(H, -np.swapaxes(H, 0, 1))
    divric = rc.divergence(st.ricci, m).data
    dS = spectral_gradient(rc.scalar_curvature(m, st.ricci).data, st.grid)
    out["contracted_bianchi"] = gap(divric, 0.5 * dS)
    ef = np.exp(st.f)
    scaled = s.alpha.like(np.exp(-st.f) * s.alpha.data)
    out["omega_divergence_two_route"] = gap(ef * rc.divergence(scaled, m).data,
                                            rc.omega_divergence(s.alpha, m, st.f))
    us = rc.sharp(s.u, m)
    lhs = rc.sharp(rc.omega_divergence(rc.d_operator(s.u, m), m, st.f), m)
    X = covariant_exterior_adjoint(covariant_exterior(us, m), m, st.f).data
    rhs = 0.5 * X + 0.5 * _tr(X, m) - rc.omega_laplacian(us, m, st.f).data
    out["endo_div"] = gap(lhs, rhs)
    return out


def _kahler_structure(st, s):
    m = st.m
    om = st.kahler_form.data
    dom = spectral_gradient(om, st.grid)
    cyc = dom + np.transpose(dom, (1, 2, 0) + tuple(range(3, dom.ndim))) + np.transpose(dom, (2, 0, 1) + tuple(range(3, dom.ndim)))
    return {
        "kahler_nabla_j": st.cs.kahler_residual(m) / max(1.0, _sup(spectral_gradient(st.J.data, st.grid))),
        "kahler_form_closed": _sup(cyc) / max(1.0, _sup(dom)),
    }


def _weitzenbock(st, s):
    m, J = st.m, st.J
    Ric = st.ricci_endo.data
    A, B = s.A, s.B
    wa = adjoint_del(s.del_dbar("A")[0], m, J).data - compose_arrays(A.data, Ric) - compose_arrays(Ric, A.data)
    wb = adjoint_dbar(s.del_dbar("B")[1], m, J).data - compose_arrays(B.data, Ric) + compose_arrays(Ric, B.data)
    out = {"weitzenbock_a": gap(rc.rough_laplacian(A, m), wa),
           "weitzenbock_b": gap(rc.rough_laplacian(B, m), wb)}
    dp, dpp = hodge_laplacians(s.E, m, J)
    out["hodge_split"] = gap(hodge_laplacian(s.E, m), dp + dpp)
    return out


def _twisted(st, s):
    m, J, f = st.m, st.J, st.f
    A, B = s.A, s.B
    a01 = st.anti_hessian.data
    gf = st.grad_f.data
    out = {}
    dA = s.del_dbar("A")[0]
    X = adjoint_del(dA, m, J, f)
    out["sym_adjoint_del_del_a"] = gap(X, _tr(X, m))
    t1 = del_dbar_TX(adjoint_dbar(A, m, J, f), m, J)[0].data
    t2 = 0.5 * adjoint_dbar(dA, m, J, f).data
    out["commute_del_adjoint_dbar_omega"] = gap(t1 + t2, compose_arrays(A.data, a01))
    dbB = s.del_dbar("B")[1]
    Y = adjoint_dbar(dbB, m, J, f)
    n10, n01 = s.types("B")
    drift = np.einsum("e...,e...->...", gf, n10 - n01)
    Ric = st.ricci_endo.data
    # the curvature term enters as 2[B, Ric*]; the opposite bracket fails by O(1)
    rhs = _tr(Y, m) - 2.0 * drift + 2.0 * (compose_arrays(B.data, Ric) - compose_arrays(Ric, B.data))
    out["sym_adjoint_dbar_dbar_b"] = gap(Y, rhs)
    t1 = del_dbar_TX(adjoint_del(B, m, J, f), m, J)[1].data
    t2 = 0.5 * adjoint_del(dbB, m, J, f).data
    out["commute_dbar_adjoint_del_omega"] = gap(t1 + t2, compose_arrays(B.data, a01))
    E = s.E
    dE, dbE = s.del_dbar("E")
    c1 = (del_dbar_TX(adjoint_dbar(E, m, J), m, J)[0].data, 0.5 * adjoint_dbar(dE, m, J).data)
    c2 = (del_dbar_TX(adjoint_del(E, m, J), m, J)[1].data, 0.5 * adjoint_del(dbE, m, J).data)
    out["commutator_del_adjoint_dbar"] = cancellation(*c1)
    out["commutator_dbar_adjoint_del"] = cancellation(*c2)
    dd = del_dbar_TX(dE, m, J)[0].data
    bb = del_dbar_TX(dbE, m, J)[1].data
    out["del_squared"] = _sup(dd) / max(1.0, _sup(dE) * 2 * np.pi * st.grid.band_limit)
    out["dbar_squared"] = _sup(bb) / max(1.0, _sup(dbE) * 2 * np.pi * st.grid.band_limit)
    gfA = np.einsum("a...,ac...->c...", gf, A.data)
    out["twisted_adjoint_two_route"] = gap(adjoint_dbar(A, m, J, f), adjoint_dbar(A, m, J).data + gfA)
    rho = st.omega.rho
    for name, op, adj in (("dbar", 1, adjoint_dbar), ("del", 0, adjoint_del)):
        lhs = l2_pairing(s.del_dbar("E")[op], s.beta, m, rho)
        rhs_ = l2_pairing(E, adj(s.beta, m, J, f), m, rho)
        out[f"adjoint_{name}_l2"] = abs(lhs - rhs_) / max(abs(lhs), abs(rhs_), 1e-300)
    return out


def _symmetries(st, s):
    m, J = st.m, st.J
    A, B = s.A, s.B
    out = {}
    for name, N in zip(("a1", "a2"), s.types("A")):
        out[f"cx_sym_{name}"] = gap(N, _tr_endo_slots(N, m))
    b10, b01 = s.types("B")
    out["kh_sym_b1"] = gap(b10, _tr_endo_slots(b01, m))
    d = s.d_datum
    N = nabla_01(d.jdot, m, J).data
    out["tangent_complex_symmetry"] = gap(N, np.swapaxes(N, 0, 1))
    return out


def _ricci_form(st, s):
    R = st.ricci_form_omega.data
    dR = spectral_gradient(R, st.grid)
    cyc = dR + np.transpose(dR, (1, 2, 0) + tuple(range(3, dR.ndim))) + np.transpose(dR, (2, 0, 1) + tuple(range(3, dR.ndim)))
    out = {"ricci_form_closed": _sup(cyc) / max(1.0, _sup(dR))}
    om = st.kahler_form.data
    n = st.grid.n
    if n == 1:
        top, scale = R[0, 1], np.abs(R[0, 1])
    else:
        top = (R[0, 1] * om[2, 3] - R[0, 2] * om[1, 3] + R[0, 3] * om[1, 2]
               + R[1, 2] * om[0, 3] - R[1, 3] * om[0, 2] + R[2, 3] * om[0, 1])
        scale = sum(np.abs(R[i, j] * om[k, l]) for i, j, k, l in
                    ((0, 1, 2, 3), (0, 2, 1, 3), (0, 3, 1, 2), (1, 2, 0, 3), (1, 3, 0, 2), (2, 3, 0, 1)))
    out["ricci_form_integral"] = abs(float(np.mean(top))) / max(1.0, float(np.mean(scale)))
    return out


def _anti_invariant_split(st, s):
    return split_residuals(s.d_datum)


def split_residuals(d: VariationDatum) -> dict:
    """The two identities that split the variation of Ric_J(Omega) J.

    Both use the datum's Jdot; a Jdot that is not g-symmetric breaks them.
    """
    st = d.base
    m, J = st.m, st.J.data
    jd = d.jdot.data
    v2 = type_project_form(d.v, st.J)[1]
    lhs1 = rc.divergence(rc.d_operator(v2, m), m)
    N = nabla_array(jd, d.jdot.slots, m)
    dtr = _ext_d(np.einsum("aba...->b...", N), st.grid)
    ric_form = compose_form_endo(type_project_form(st.ricci, st.J)[0].data, J)
    rhs1 = -compose_form_endo(dtr, J) - 2.0 * compose_form_endo(ric_form, jd)
    gf = st.grad_f.data
    lhs2 = -np.einsum("e...,e...->...", gf, rc.d_operator(v2, m).data)
    jdf = np.einsum("bc...,c...->b...", jd, st.df)
    rhs2 = (compose_form_endo(_ext_d(jdf, st.grid), J) - 2.0 * compose_form_endo(i_ddbar(st.f, st.grid), jd)
            - _f_block(d).data)
    return {"anti_invariant_divergence_split": gap(lhs1, rhs1), "anti_invariant_drift_split": gap(lhs2, rhs2)}


def closed_class_residuals(datum: VariationDatum, prefix: str = "") -> dict:
    return _closed_class(datum, prefix)


def oracle_residuals(state: KahlerState) -> dict:
    return _oracles(state, None)


def adjointness_residuals(state: KahlerState, rng: np.random.Generator, amp: float = 0.3) -> dict:
    """Weighted L2 adjointness of dbar/del on T_X-valued 1-forms for one random pair."""
    g, m, J, f = state.grid, state.m, state.J, state.f
    E = random_tensor(g, (CO, CONTRA), rng, amp=amp)
    beta = random_tensor(g, (CO, CO, CONTRA), rng, amp=amp)
    beta = beta.like(beta.data - np.swapaxes(beta.data, 0, 1))
    dE = del_dbar_TX(E, m, J)
    out = {}
    for name, op, adj in (("dbar", 1, adjoint_dbar), ("del", 0, adjoint_del)):
        lhs = l2_pairing(dE[op], beta, m, state.omega.rho)
        rhs = l2_pairing(E, adj(beta, m, J, f), m, state.omega.rho)
        out[f"adjoint_{name}_l2"] = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
    return out


def _closed_class(datum: VariationDatum, prefix: str):
    st = datum.base
    m, J = st.m, st.J
    v10, v01 = datum.v10, datum.v01
    out = {}
    d10 = del_dbar_TX(adjoint_del(v10, m, J), m, J)[0]
    r10 = 0.5 * adjoint_dbar(del_dbar_TX(v10, m, J)[1], m, J).data
    out[f"{prefix}dadd"] = gap(d10, r10)
    d01 = del_dbar_TX(adjoint_dbar(v01, m, J), m, J)[1]
    r01 = 0.5 * adjoint_del(del_dbar_TX(v01, m, J)[0], m, J).data
    out[f"{prefix}bar_adbar"] = gap(d01, r01)
    lhs = nabla_01(v10, m, J).data
    rhs = np.swapaxes(nabla_10(v01, m, J).data, 0, 1)
    out[f"{prefix}closed_class_symmetry"] = gap(lhs, rhs)
    return out


# -- anchors ----------------------------------------------------------------

ANCHORS = {
    "hessian_decomposition": "Hessian splits into i ddbar f composed with J plus g dbar grad f",
    "bakry_emery_decomposition": "Bakry-Emery tensor splits into the weighted Ricci form and g dbar grad f",
    "endomorphism_decomposition": "Bakry-Emery endomorphism splits into J-linear and anti-linear parts",
    "anti_hessian_component": "J-anti-linear part of the Bakry-Emery endomorphism is dbar grad f",
    "form_type_split": "J-invariant and anti-invariant parts reconstruct a bilinear form",
    "density_ricci_form_oracle": "weighted Ricci form equals -i ddbar log of the density",
    "kahler_ricci_form_oracle": "Ricci form equals -i ddbar log det of the complex metric",
    "complex_frame_christoffel": "holomorphic-frame connection coefficients from the Kahler form",
    "complex_frame_ricci": "holomorphic-frame Ricci components from log det",
    "key_contract": "contraction with the hermitian metric through the (1,0) part",
    "chern_connection": "Chern (1,0)-derivative of a real vector field",
    "metric_compatibility": "Levi-Civita connection preserves g",
    "torsion_free": "second covariant derivative of a function is symmetric",
    "contracted_bianchi": "div Ric equals half the gradient of scalar curvature",
    "omega_divergence_two_route": "weighted divergence as conjugated plain divergence",
    "endo_div": "weighted divergence of D_g u in terms of covariant exterior Laplacians",
    "kahler_nabla_j": "J is parallel",
    "kahler_form_closed": "the Kahler form is closed",
    "weitzenbock_a": "rough Laplacian of a J-anti-linear endomorphism via del",
    "weitzenbock_b": "rough Laplacian of a J-linear endomorphism via dbar",
    "hodge_split": "Hodge Laplacian on T_X-valued forms splits into holomorphic and antiholomorphic parts",
    "sym_adjoint_del_del_a": "weighted del-adjoint del of symmetric A is symmetric",
    "commute_del_adjoint_dbar_omega": "weighted commutation of del with dbar-adjoint on A",
    "sym_adjoint_dbar_dbar_b": "weighted dbar-adjoint dbar of symmetric B up to drift and curvature",
    "commute_dbar_adjoint_del_omega": "weighted commutation of dbar with del-adjoint on B",
    "commutator_del_adjoint_dbar": "degree-one commutator of del and dbar-adjoint vanishes",
    "commutator_dbar_adjoint_del": "degree-one commutator of dbar and del-adjoint vanishes",
    "del_squared": "del squared vanishes on degree-one forms",
    "dbar_squared": "dbar squared vanishes on degree-one forms",
    "twisted_adjoint_two_route": "weighted dbar-adjoint equals plain adjoint plus A grad f",
    "adjoint_dbar_l2": "dbar-adjoint is the weighted L2 adjoint",
    "adjoint_del_l2": "del-adjoint is the weighted L2 adjoint",
    "cx_sym_a1": "(1,0)-derivative of symmetric A is symmetric",
    "cx_sym_a2": "(0,1)-derivative of symmetric A is symmetric",
    "kh_sym_b1": "(1,0)- and (0,1)-derivatives of symmetric B are mutual transposes",
    "tangent_complex_symmetry": "(0,1)-derivative of the J-velocity is symmetric",
    "ricci_form_closed": "the weighted Ricci form is closed",
    "ricci_form_integral": "the weighted Ricci form integrates to zero against omega^(n-1)",
    "anti_invariant_divergence_split": "divergence of D applied to the anti-invariant velocity",
    "anti_invariant_drift_split": "drift term of D applied to the anti-invariant velocity",
    "dadd": "del del-adjoint equals half dbar-adjoint dbar on closed variations",
    "bar_adbar": "dbar dbar-adjoint equals half del-adjoint del on closed variations",
    "closed_class_symmetry": "closed variations: (0,1)-derivative of the linear part mirrors the anti-linear part",
}


def anchor_for(check_id: str) -> str:
    base = check_id.split(":", 1)[-1]
    for prefix in ("flat_", "curved_"):
        if base.startswith(prefix):
            base = base[len(prefix):]
    return ANCHORS.get(base, base)


GROUPS = (_decompositions, _oracles, _chern, _riemannian, _kahler_structure, _weitzenbock,
          _twisted, _symmetries, _ricci_form, _anti_invariant_split)


def static_identity_suite(state: KahlerState, rng: np.random.Generator | None = None, label: str = "",
                          tolerance: float = TOL, closed_data: tuple | None = None) -> ResidualReport:
    """Run every fixed-state identity on ``state`` and return named records.

    ``closed_data`` holds (prefix, VariationDatum) pairs in the closed class; by
    default a flat datum with the state's density and a curved product datum are used.
    """
    rng = rng or np.random.default_rng(0)
    s = Samples(state, rng)
    report = ResidualReport()
    prefix = f"{label}:" if label else ""

    def add(results: dict, elapsed: float):
        share = elapsed / max(1, len(results))
        for k, r in results.items():
            report.add(Record(prefix + k, anchor_for(k), float(r), tolerance, runtime=share))

    for group in GROUPS:
        t0 = time.perf_counter()
        add(group(state, s), time.perf_counter() - t0)
    if closed_data is None:
        grid = state.grid
        h = -state.omega.log_rho
        amp = 0.02 if grid.n == 1 else 0.004
        u = random_scalar(grid, rng, 2, amp)
        closed_data = (("flat_", sample_F_flat(grid, u, h, 0.1)),
                       ("curved_", codazzi_datum(grid, h, rng, 0.01 if grid.n == 1 else 0.002)))
    for pre, datum in closed_data:
        t0 = time.perf_counter()
        add(_closed_class(datum, pre), time.perf_counter() - t0)
    return report
