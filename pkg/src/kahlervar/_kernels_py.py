"""Pure-numpy reference kernels.  The compiled module mirrors these signatures."""

import string

import numpy as np


def christoffel(ginv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """Gamma[a, b, c] = Gamma^c_{ab} from g^{-1} and dg[e, a, b] = d_e g_ab."""
    low = 0.5 * (dg + np.swapaxes(dg, 0, 1) - np.transpose(dg, (1, 2, 0) + tuple(range(3, dg.ndim))))
    # low[a, b, d] = 1/2 (d_a g_bd + d_b g_ad - d_d g_ab)
    return np.einsum("abd...,dc...->abc...", low, ginv)


def connection_terms(T: np.ndarray, gamma: np.ndarray, kinds: tuple) -> np.ndarray:
    """Christoffel part of the covariant derivative; the derivative slot goes first.

    kinds[s] is True for a covariant slot, False for a contravariant one.
    """
    r = len(kinds)
    out = np.zeros((gamma.shape[0],) + T.shape)
    letters = string.ascii_letters[:r]
    for s, covariant in enumerate(kinds):
        src = letters[:s] + "z" + letters[s + 1:]
        if covariant:
            out -= np.einsum(f"y{letters[s]}z...,{src}...->y{letters}...", gamma, T)
        else:
            out += np.einsum(f"yz{letters[s]}...,{src}...->y{letters}...", gamma, T)
    return out


def sym_inverse(g: np.ndarray):
    """Pointwise inverse and determinant of symmetric positive definite matrices."""
    d = g.shape[0]
    moved = np.moveaxis(g.reshape(d, d, -1), -1, 0)
    inv = np.linalg.inv(moved)
    det = np.linalg.det(moved)
    return np.moveaxis(inv, 0, -1).reshape(g.shape), det.reshape(g.shape[2:])
