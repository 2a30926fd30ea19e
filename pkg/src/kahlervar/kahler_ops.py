"""Complex-structure algebra and complex covariant operators on T_X-valued forms.

A T_X-valued q-form is a TensorField with q covariant slots followed by one
contravariant slot; endomorphisms are the q = 1 case and vector fields q = 0.
J acts on values through the last slot.  Exterior derivatives use the
unweighted alternating sum, adjoints the trace formula ``-q Tr_g nabla^{..}``,
and the pointwise inner product is a full contraction without degree factors.
"""

from __future__ import annotations

import numpy as np

from .riemannian_core import MetricField, nabla_array, metric_trace
from .spectral_fields import (CO, CONTRA, ContractViolation, TensorField,
                              compose_arrays, spectral_gradient)

_L = "abcdefghijklmnopqrstuvw"


def precompose(T: np.ndarray, rank: int, slot: int, E: np.ndarray) -> np.ndarray:
    """T(.., E x, ..) in the given covariant slot."""
    src = _L[:rank]
    tgt = src[:slot] + "z" + src[slot + 1:]
    return np.einsum(f"{src[slot]}z...,{tgt}...->{src}...", E, T)


def postcompose(T: np.ndarray, rank: int, slot: int, E: np.ndarray) -> np.ndarray:
    """E applied to the value held in the given contravariant slot."""
    src = _L[:rank]
    tgt = src[:slot] + "z" + src[slot + 1:]
    return np.einsum(f"z{src[slot]}...,{tgt}...->{src}...", E, T)


def form_degree(S: TensorField) -> int:
    if not S.slots or S.slots[-1] != CONTRA or any(s != CO for s in S.slots[:-1]):
        raise ContractViolation(f"expected a T_X-valued form, got valence {S.slots}")
    return S.rank - 1


class ComplexStructureField:
    def __init__(self, J: TensorField):
        if J.slots != (CO, CONTRA):
            raise ContractViolation("J must be an endomorphism field")
        self.J = J
        self.grid = J.grid

    @property
    def data(self) -> np.ndarray:
        return self.J.data

    def square_residual(self) -> float:
        sq = compose_arrays(self.data, self.data)
        eye = np.eye(self.grid.dim).reshape((self.grid.dim,) * 2 + (1,) * self.grid.dim)
        return float(np.max(np.abs(sq + eye)))

    def compatibility_residual(self, m: MetricField) -> float:
        """g = J* g J."""
        JgJ = np.einsum("am...,bn...,mn...->ab...", self.data, self.data, m.g.data)
        return float(np.max(np.abs(JgJ - m.g.data)))

    def kahler_residual(self, m: MetricField) -> float:
        """sup |nabla_g J|."""
        return float(np.max(np.abs(nabla_array(self.data, self.J.slots, m))))


# -- type projections ----------------------------------------------------------

def _jsj(S: np.ndarray, J: np.ndarray) -> np.ndarray:
    return compose_arrays(J, compose_arrays(S, J))


def type_project_endo(S: TensorField, J: TensorField) -> tuple:
    """(S^{1,0}, S^{0,1}) = (1/2)(S - JSJ), (1/2)(S + JSJ)."""
    if S.slots != (CO, CONTRA):
        raise ContractViolation("type_project_endo expects an endomorphism")
    jsj = _jsj(S.data, J.data)
    return S.like(0.5 * (S.data - jsj)), S.like(0.5 * (S.data + jsj))


def j_pullback(h: np.ndarray, J: np.ndarray) -> np.ndarray:
    """(J* h J)(x, y) = h(Jx, Jy)."""
    return np.einsum("am...,bn...,mn...->ab...", J, J, h)


def type_project_form(h: TensorField, J: TensorField) -> tuple:
    """(h', h'') = J-invariant and J-anti-invariant parts of a bilinear form."""
    if h.slots != (CO, CO):
        raise ContractViolation("type_project_form expects a covariant 2-tensor")
    jhj = j_pullback(h.data, J.data)
    return h.like(0.5 * (h.data + jhj)), h.like(0.5 * (h.data - jhj))


def compose_form_endo(h: np.ndarray, E: np.ndarray) -> np.ndarray:
    """(h E)(x, y) = h(E x, y)."""
    return np.einsum("am...,mb...->ab...", E, h)


# -- complex covariant derivatives ---------------------------------------------

def _split_array(N: np.ndarray, rank: int, J: np.ndarray):
    """Return (N, J N(J.,...)) for a derivative array whose first slot is the derivative."""
    X = postcompose(N, rank, rank - 1, J)
    X = precompose(X, rank, 0, J)
    return N, X


def outer_df(df: np.ndarray, data: np.ndarray, rank: int) -> np.ndarray:
    """df (x) T with the 1-form in front."""
    return df.reshape(df.shape[:1] + (1,) * rank + df.shape[1:]) * data[None]


def _nabla_types(data: np.ndarray, slots: tuple, m: MetricField, J: np.ndarray, df=None):
    N = nabla_array(data, slots, m)
    if df is not None:
        N = N - outer_df(df, data, len(slots))
    N, X = _split_array(N, len(slots) + 1, J)
    return 0.5 * (N - X), 0.5 * (N + X)


def nabla_10(S: TensorField, m: MetricField, J: TensorField) -> TensorField:
    """nabla^{1,0} S(x, ..) = (1/2)[nabla S(x, ..) - J nabla S(Jx, ..)]."""
    if not S.slots or S.slots[-1] != CONTRA:
        raise ContractViolation("nabla_10 needs a vector-valued field")
    p, _ = _nabla_types(S.data, S.slots, m, J.data)
    return TensorField(S.grid, (CO,) + S.slots, p)


def nabla_01(S: TensorField, m: MetricField, J: TensorField) -> TensorField:
    """nabla^{0,1} S(x, ..) = (1/2)[nabla S(x, ..) + J nabla S(Jx, ..)]."""
    if not S.slots or S.slots[-1] != CONTRA:
        raise ContractViolation("nabla_01 needs a vector-valued field")
    _, q = _nabla_types(S.data, S.slots, m, J.data)
    return TensorField(S.grid, (CO,) + S.slots, q)


def _alternate(N: np.ndarray, q: int) -> np.ndarray:
    out = np.array(N, copy=True)
    for j in range(1, q + 1):
        out += (-1) ** j * np.moveaxis(N, 0, j)
    return out


def del_TX(S: TensorField, m: MetricField, J: TensorField) -> TensorField:
    q = form_degree(S)
    N = nabla_10(S, m, J)
    return N.like(_alternate(N.data, q))


def dbar_TX(S: TensorField, m: MetricField, J: TensorField) -> TensorField:
    q = form_degree(S)
    N = nabla_01(S, m, J)
    return N.like(_alternate(N.data, q))


def del_dbar_TX(S: TensorField, m: MetricField, J: TensorField) -> tuple:
    """(del S, dbar S) sharing one covariant derivative."""
    q = form_degree(S)
    p10, p01 = _nabla_types(S.data, S.slots, m, J.data)
    slots = (CO,) + S.slots
    return (TensorField(S.grid, slots, _alternate(p10, q)),
            TensorField(S.grid, slots, _alternate(p01, q)))


def covariant_exterior(S: TensorField, m: MetricField) -> TensorField:
    """nabla_{T_X} S: unweighted alternating sum of nabla S."""
    q = form_degree(S)
    N = nabla_array(S.data, S.slots, m)
    return TensorField(S.grid, (CO,) + S.slots, _alternate(N, q))


def _adjoint(S: TensorField, m: MetricField, J: TensorField, f, part: int) -> TensorField:
    q = form_degree(S)
    if q == 0:
        raise ContractViolation("adjoint needs a form of degree >= 1")
    N = nabla_array(S.data, S.slots, m)
    if f is not None:
        N = N - outer_df(spectral_gradient(f, m.grid), S.data, S.rank)
    # Tr_g of J N(J., ...) = J applied to K[m, b] N[m, b, ...] with K[m, b] = g^{ab} J[a, m]
    K = np.einsum("ab...,am...->mb...", m.ginv.data, J.data)
    plain = metric_trace(N, m)
    twisted = postcompose(np.einsum("mb...,mb...->...", K, N), S.rank - 1, S.rank - 2, J.data)
    sign = -1.0 if part == 10 else 1.0
    return TensorField(S.grid, S.slots[1:], -0.5 * q * (plain + sign * twisted))


def adjoint_del(S, m, J, f=None) -> TensorField:
    """del* S = -q Tr_g nabla^{0,1} S; twisted by exp(-f) when f is given."""
    return _adjoint(S, m, J, f, 1)


def adjoint_dbar(S, m, J, f=None) -> TensorField:
    """dbar* S = -q Tr_g nabla^{1,0} S; twisted by exp(-f) when f is given."""
    return _adjoint(S, m, J, f, 10)


def covariant_exterior_adjoint(S: TensorField, m: MetricField, f=None) -> TensorField:
    """nabla*_{T_X} S = -q Tr_g nabla S, optionally Omega-twisted."""
    q = form_degree(S)
    N = nabla_array(S.data, S.slots, m)
    if f is not None:
        df = spectral_gradient(f, m.grid)
        N = N - outer_df(df, S.data, S.rank)
    return TensorField(S.grid, S.slots[1:], -q * metric_trace(N, m))


def hodge_laplacians(S: TensorField, m: MetricField, J: TensorField) -> tuple:
    """(Delta' S, Delta'' S) with the 1/q, 1/(q+1) weights."""
    q = form_degree(S)
    dS, dbS = del_dbar_TX(S, m, J)
    dp = adjoint_del(dS, m, J).data / (q + 1)
    dpp = adjoint_dbar(dbS, m, J).data / (q + 1)
    if q >= 1:
        dp = dp + del_TX(adjoint_del(S, m, J), m, J).data / q
        dpp = dpp + dbar_TX(adjoint_dbar(S, m, J), m, J).data / q
    return S.like(dp), S.like(dpp)


def hodge_laplacian(S: TensorField, m: MetricField) -> TensorField:
    """Delta_{T_X} from the covariant exterior derivative with the same weights."""
    q = form_degree(S)
    out = covariant_exterior_adjoint(covariant_exterior(S, m), m).data / (q + 1)
    if q >= 1:
        out = out + covariant_exterior(covariant_exterior_adjoint(S, m), m).data / q
    return S.like(out)


def inner_product(A: TensorField, B: TensorField, m: MetricField) -> np.ndarray:
    """Pointwise full contraction <A, B>_g, no degree factors."""
    A._check(B)
    a = A.data
    for k, s in enumerate(A.slots):
        a = precompose(a, A.rank, k, m.ginv.data if s == CO else m.g.data)
    return (a * B.data).reshape((-1,) + A.grid.shape).sum(axis=0)


def l2_pairing(A: TensorField, B: TensorField, m: MetricField, rho: np.ndarray) -> float:
    """integral of <A, B>_g against Omega = rho dV_flat on the unit torus."""
    return float(np.mean(inner_product(A, B, m) * rho))


# -- standard-J complex-coordinate oracles --------------------------------------

def _check_standard(grid) -> None:
    if grid.n not in (1, 2):
        raise ContractViolation("complex-frame oracle supports n = 1, 2")


def frame_vectors(n: int) -> np.ndarray:
    """Rows are zeta_k = d/dz_k = (1/2)(d/dx_k - i d/dy_k) in real components."""
    u = np.zeros((n, 2 * n), dtype=complex)
    for k in range(n):
        u[k, k] = 0.5
        u[k, n + k] = -0.5j
    return u


def coframe(n: int) -> np.ndarray:
    """Rows are dz_k in real components: dz_k(d/dx_k) = 1, dz_k(d/dy_k) = i."""
    c = np.zeros((n, 2 * n), dtype=complex)
    for k in range(n):
        c[k, k] = 1.0
        c[k, n + k] = 1.0j
    return c


def complex_partials(F: np.ndarray, grid) -> tuple:
    """(dF/dz_k, dF/dzbar_k) stacked on a leading axis, flat derivatives."""
    n = grid.n
    dF = spectral_gradient(F, grid)
    dz = 0.5 * (dF[:n] - 1j * dF[n:])
    dzb = 0.5 * (dF[:n] + 1j * dF[n:])
    return dz, dzb


def i_ddbar(F: np.ndarray, grid) -> np.ndarray:
    """Real components of i ddbar F = i sum F_{k lbar} dz_k ^ dzbar_l at the standard J."""
    _check_standard(grid)
    n = grid.n
    _, dzb = complex_partials(F, grid)
    Fkl = np.stack([complex_partials(dzb[l].real, grid)[0] + 1j * complex_partials(dzb[l].imag, grid)[0]
                    for l in range(n)], axis=1)          # Fkl[k, l] = d_k d_lbar F
    c = coframe(n)
    cb = c.conj()
    wedge = np.einsum("ka,lb->klab", c, cb) - np.einsum("kb,la->klab", c, cb)
    out = 1j * np.einsum("kl...,klab->ab...", Fkl, wedge)
    return out.real
