"""Kahler states with a reference volume form and their Bakry-Emery objects.

For a state (g, J, Omega) with Omega = rho dV_flat:

* ``f = log(dV_g / Omega)``;
* ``Ric_g(Omega) = Ric(g) + Hess f`` and its sharp ``Ric*_g(Omega)``;
* ``Ric_J(Omega)`` is the J-invariant part of ``Ric_g(Omega)`` composed with J, so that
  ``Ric_g(Omega) = -Ric_J(Omega) J + g dbar grad f`` on Kahler states;
* the two complex components are the J-linear and J-anti-linear parts of
  ``Ric*_g(Omega)``.  Off the Kahler locus these parts are the definitions.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from . import riemannian_core as rc
from .kahler_ops import (ComplexStructureField, compose_form_endo, i_ddbar, nabla_01,
                         nabla_10, type_project_endo, type_project_form)
from .riemannian_core import MetricField, VolumeDensityField
from .spectral_fields import (CO, CONTRA, ContractViolation, TensorField, TorusGrid,
                              spectral_gradient, standard_j)


def potential_metric(grid: TorusGrid, phi: np.ndarray) -> MetricField:
    """g = flat + the metric of (i/2) ddbar phi at the standard J.

    In real terms g = I + (1/2) H'(phi), H' the J-invariant part of the flat Hessian,
    so for n = 1 this is (1 + Laplacian(phi) / 4) I.
    """
    d = grid.dim
    J = standard_j(grid).data
    H = spectral_gradient(spectral_gradient(phi, grid), grid)
    H = 0.5 * (H + np.swapaxes(H, 0, 1))
    JHJ = np.einsum("am...,bn...,mn...->ab...", J, J, H)
    g = np.eye(d).reshape((d, d) + (1,) * d) + 0.25 * (H + JHJ)
    return MetricField(TensorField(grid, (CO, CO), g))


class KahlerState:
    """(g, J, Omega) with eagerly computed Bakry-Emery caches."""

    def __init__(self, m: MetricField, J, omega: VolumeDensityField):
        self.m = m
        self.grid = m.grid
        self.J = J.J if isinstance(J, ComplexStructureField) else J
        self.cs = ComplexStructureField(self.J)
        if omega.grid != m.grid:
            raise ContractViolation("density and metric live on different grids")
        self.omega = omega

    @classmethod
    def from_potential(cls, grid: TorusGrid, phi=None, h=None) -> "KahlerState":
        phi = np.zeros(grid.shape) if phi is None else phi
        h = np.zeros(grid.shape) if h is None else h
        return cls(potential_metric(grid, phi), standard_j(grid),
                   VolumeDensityField.from_potential(grid, h))

    # scalar and first-order data
    @cached_property
    def f(self) -> np.ndarray:
        return self.m.log_volume - self.omega.log_rho

    @cached_property
    def df(self) -> np.ndarray:
        return spectral_gradient(self.f, self.grid)

    @cached_property
    def grad_f(self) -> TensorField:
        return TensorField(self.grid, (CONTRA,), np.einsum("ab...,a...->b...", self.m.ginv.data, self.df))

    @cached_property
    def kahler_form(self) -> TensorField:
        """omega(x, y) = g(Jx, y)."""
        return rc.flat(self.J, self.m)

    # curvature
    @cached_property
    def ricci(self) -> TensorField:
        return rc.ricci(self.m)

    @cached_property
    def ricci_endo(self) -> TensorField:
        return rc.sharp(self.ricci, self.m)

    @cached_property
    def hess_f(self) -> TensorField:
        return rc.covariant_derivative(TensorField(self.grid, (CO,), self.df), self.m)

    @cached_property
    def bakry_emery(self) -> TensorField:
        return self.ricci + self.hess_f

    @cached_property
    def bakry_emery_endo(self) -> TensorField:
        return rc.sharp(self.bakry_emery, self.m)

    @cached_property
    def ricci_form_omega(self) -> TensorField:
        """Ric_J(Omega)(x, y) = Ric_g(Omega)'(Jx, y)."""
        inv, _ = type_project_form(self.bakry_emery, self.J)
        return inv.like(compose_form_endo(inv.data, self.J.data))

    @cached_property
    def complex_components(self) -> tuple:
        """(J-linear, J-anti-linear) parts of Ric*_g(Omega)."""
        return type_project_endo(self.bakry_emery_endo, self.J)

    @property
    def ricci_endo_j(self) -> TensorField:
        """Ric*_J(Omega)_g, the J-linear component."""
        return self.complex_components[0]

    @property
    def anti_hessian_component(self) -> TensorField:
        """J-anti-linear component; equals dbar grad f on Kahler states."""
        return self.complex_components[1]

    @cached_property
    def anti_hessian(self) -> TensorField:
        """dbar_{T_X} grad f = (1/2)(nabla grad f + J nabla_{J.} grad f)."""
        return nabla_01(self.grad_f, self.m, self.J)

    @cached_property
    def hol_hessian(self) -> TensorField:
        """del_{T_X} grad f = nabla^{1,0} grad f."""
        return nabla_10(self.grad_f, self.m, self.J)

    def kahler_residuals(self) -> dict:
        return {"j_square": self.cs.square_residual(),
                "compatibility": self.cs.compatibility_residual(self.m),
                "nabla_j": self.cs.kahler_residual(self.m)}


def bakry_emery_tensor(state: KahlerState) -> TensorField:
    return state.bakry_emery


def bakry_emery_endo(state: KahlerState) -> TensorField:
    return state.bakry_emery_endo


def ricci_form_omega(state: KahlerState) -> TensorField:
    return state.ricci_form_omega


def anti_hessian(state: KahlerState) -> TensorField:
    return state.anti_hessian


def density_ricci_form(state: KahlerState) -> TensorField:
    """Ric_J(Omega) = -i ddbar log rho at the standard J (complex-coordinate oracle)."""
    return TensorField(state.grid, (CO, CO), -i_ddbar(state.omega.log_rho, state.grid))


def kahler_ricci_form_oracle(state: KahlerState) -> TensorField:
    """Ric_J(omega) = -i ddbar log det(g_{k lbar}) at the standard J."""
    return TensorField(state.grid, (CO, CO), -i_ddbar(state.m.log_volume, state.grid))


def decomposition_residuals(state: KahlerState) -> dict:
    """Gaps of the Hessian, Ricci and endomorphism decompositions (relative sup norms)."""
    from .spectral_fields import relative_residual
    J = state.J.data
    g = state.m.g
    iddf = i_ddbar(state.f, state.grid)
    gA = rc.flat(state.anti_hessian, state.m)
    hess_rhs = g.like(-compose_form_endo(iddf, J) + gA.data)
    ricJ = density_ricci_form(state)
    ric_rhs = g.like(-compose_form_endo(ricJ.data, J) + gA.data)
    ricJ_endo = rc.sharp(g.like(-compose_form_endo(ricJ.data, J)), state.m)
    endo_rhs = ricJ_endo + state.anti_hessian
    return {
        "hessian_decomposition": relative_residual(state.hess_f, hess_rhs),
        "bakry_emery_decomposition": relative_residual(state.bakry_emery, ric_rhs),
        "endomorphism_decomposition": relative_residual(state.bakry_emery_endo, endo_rhs),
    }
