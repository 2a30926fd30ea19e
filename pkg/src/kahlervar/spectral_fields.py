"""Periodic grids on the real 2n-torus and tensor fields sampled on them.

Components are stored real, slots outermost and grid axes innermost, so a
field of rank r on an n-dimensional complex torus at resolution N has array
shape ``(2n,) * r + (N,) * 2n``.  Axes are ordered ``(x_1..x_n, y_1..y_n)``
with ``z_k = x_k + i y_k``.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import fft as sfft

CO = "co"
CONTRA = "contra"


class ContractViolation(ValueError):
    """Raised when an operation receives incompatible grids or valences."""


@dataclass(frozen=True)
class TorusGrid:
    n: int
    resolution: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ContractViolation(f"complex dimension must be 1 or 2, got {self.n}")
        r = self.resolution
        if r < 8 or r & (r - 1):
            raise ContractViolation(f"resolution must be a power of two >= 8, got {r}")

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def shape(self) -> tuple:
        return (self.resolution,) * self.dim

    @property
    def npoints(self) -> int:
        return self.resolution ** self.dim

    @property
    def spacing(self) -> float:
        return 1.0 / self.resolution

    @property
    def band_limit(self) -> int:
        return self.resolution // 3

    def coords(self) -> list[np.ndarray]:
        x = np.arange(self.resolution) / self.resolution
        return list(np.meshgrid(*([x] * self.dim), indexing="ij"))

    def describe(self) -> dict:
        return {"n": self.n, "resolution": self.resolution, "period": 1.0,
                "axes": [f"x{k + 1}" for k in range(self.n)] + [f"y{k + 1}" for k in range(self.n)]}


@lru_cache(maxsize=16)
def _wavenumbers(grid: TorusGrid):
    """Angular wavenumbers per axis in the rfftn layout, Nyquist zeroed."""
    N = grid.resolution
    D = grid.dim
    full = np.fft.fftfreq(N, d=1.0 / N)
    full[N // 2] = 0.0
    half = np.fft.rfftfreq(N, d=1.0 / N)
    half[-1] = 0.0
    ks = []
    for axis in range(D):
        k = half if axis == D - 1 else full
        shape = [1] * D
        shape[axis] = k.size
        ks.append((2.0 * np.pi * k).reshape(shape))
    return ks


@lru_cache(maxsize=16)
def _band_mask(grid: TorusGrid):
    N = grid.resolution
    D = grid.dim
    cut = grid.band_limit
    full = np.abs(np.fft.fftfreq(N, d=1.0 / N)) <= cut
    half = np.abs(np.fft.rfftfreq(N, d=1.0 / N)) <= cut
    mask = np.ones((1,) * D, dtype=bool)
    for axis in range(D):
        m = half if axis == D - 1 else full
        shape = [1] * D
        shape[axis] = m.size
        mask = mask & m.reshape(shape)
    return mask


def _grid_axes(grid: TorusGrid, arr: np.ndarray):
    return tuple(range(arr.ndim - grid.dim, arr.ndim))


def spectral_gradient(arr: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """All first partials of a component array; the new axis goes first."""
    axes = _grid_axes(grid, arr)
    spec = sfft.rfftn(arr, axes=axes, workers=-1)
    out = np.empty((grid.dim,) + arr.shape)
    for e, k in enumerate(_wavenumbers(grid)):
        out[e] = sfft.irfftn(spec * (1j * k), s=grid.shape, axes=axes, workers=-1)
    return out


def spectral_partial(arr: np.ndarray, grid: TorusGrid, axis: int) -> np.ndarray:
    if not 0 <= axis < grid.dim:
        raise ContractViolation(f"axis {axis} out of range for a {grid.dim}-dimensional torus")
    axes = _grid_axes(grid, arr)
    spec = sfft.rfftn(arr, axes=axes, workers=-1)
    k = _wavenumbers(grid)[axis]
    return sfft.irfftn(spec * (1j * k), s=grid.shape, axes=axes, workers=-1)


def dealias(arr: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Truncate to the 2/3 band (|mode| <= N/3 on every axis)."""
    axes = _grid_axes(grid, arr)
    spec = sfft.rfftn(arr, axes=axes, workers=-1)
    spec = spec * _band_mask(grid)
    return sfft.irfftn(spec, s=grid.shape, axes=axes, workers=-1)


def tail_energy(arr: np.ndarray, grid: TorusGrid) -> float:
    """Spectral energy outside the 2/3 band, relative to the total."""
    axes = _grid_axes(grid, arr)
    spec = np.abs(sfft.rfftn(arr, axes=axes, workers=-1)) ** 2
    total = float(spec.sum())
    if total == 0.0:
        return 0.0
    return float((spec * ~_band_mask(grid)).sum()) / total


@dataclass(frozen=True)
class FourierSpec:
    """Band-limited real scalar: sum of ``amp * cos`` or ``amp * sin`` of 2*pi*m.x."""

    terms: tuple = ()

    @classmethod
    def from_list(cls, items: Sequence) -> "FourierSpec":
        terms = []
        for it in items:
            if isinstance(it, dict):
                terms.append((tuple(int(m) for m in it["mode"]), float(it["amp"]), it.get("kind", "cos")))
            else:
                mode, amp, *rest = it
                terms.append((tuple(int(m) for m in mode), float(amp), rest[0] if rest else "cos"))
        for _, _, kind in terms:
            if kind not in ("cos", "sin"):
                raise ContractViolation(f"unknown Fourier term kind {kind!r}")
        return cls(tuple(terms))

    @classmethod
    def random(cls, rng: np.random.Generator, dim: int, max_mode: int, nterms: int,
               amplitude: float) -> "FourierSpec":
        terms = []
        for _ in range(nterms):
            mode = tuple(int(m) for m in rng.integers(-max_mode, max_mode + 1, size=dim))
            terms.append((mode, float(amplitude * rng.uniform(-1, 1)), str(rng.choice(["cos", "sin"]))))
        return cls(tuple(terms))

    def to_list(self) -> list:
        return [{"mode": list(m), "amp": a, "kind": k} for m, a, k in self.terms]

    def max_mode(self) -> int:
        return max((max(abs(x) for x in m) for m, _, _ in self.terms), default=0)

    def check(self, grid: TorusGrid) -> None:
        for mode, _, _ in self.terms:
            if len(mode) != grid.dim:
                raise ContractViolation(f"mode {mode} has wrong length for dim {grid.dim}")
        if self.max_mode() > grid.band_limit:
            raise ContractViolation(
                f"mode {self.max_mode()} exceeds band limit {grid.band_limit} at resolution {grid.resolution}")

    def synthesize(self, grid: TorusGrid) -> np.ndarray:
        self.check(grid)
        xs = grid.coords()
        out = np.zeros(grid.shape)
        for mode, amp, kind in self.terms:
            phase = 2.0 * np.pi * sum(m * x for m, x in zip(mode, xs))
            out += amp * (np.cos(phase) if kind == "cos" else np.sin(phase))
        return out

    def derivative(self, grid: TorusGrid, axis: int) -> np.ndarray:
        """Analytic derivative along one axis, mode by mode."""
        xs = grid.coords()
        out = np.zeros(grid.shape)
        for mode, amp, kind in self.terms:
            phase = 2.0 * np.pi * sum(m * x for m, x in zip(mode, xs))
            w = 2.0 * np.pi * mode[axis]
            out += amp * w * (-np.sin(phase) if kind == "cos" else np.cos(phase))
        return out


@dataclass(frozen=True, eq=False)
class TensorField:
    grid: TorusGrid
    slots: tuple
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        slots = tuple(self.slots)
        object.__setattr__(self, "slots", slots)
        for s in slots:
            if s not in (CO, CONTRA):
                raise ContractViolation(f"unknown slot kind {s!r}")
        expected = (self.grid.dim,) * len(slots) + self.grid.shape
        data = np.asarray(self.data, dtype=np.float64)
        if data.shape != expected:
            raise ContractViolation(f"component shape {data.shape} != expected {expected}")
        if not np.all(np.isfinite(data)):
            raise ContractViolation("non-finite tensor components")
        object.__setattr__(self, "data", data)

    @property
    def rank(self) -> int:
        return len(self.slots)

    def like(self, data: np.ndarray) -> "TensorField":
        return TensorField(self.grid, self.slots, data)

    def _check(self, other: "TensorField"):
        if other.grid != self.grid:
            raise ContractViolation("fields live on different grids")
        if other.slots != self.slots:
            raise ContractViolation(f"valence mismatch {self.slots} vs {other.slots}")

    def __add__(self, other):
        self._check(other)
        return self.like(self.data + other.data)

    def __sub__(self, other):
        self._check(other)
        return self.like(self.data - other.data)

    def __neg__(self):
        return self.like(-self.data)

    def __mul__(self, c):
        if isinstance(c, TensorField):
            if c.rank != 0:
                raise ContractViolation("only scalar fields multiply pointwise")
            return self.like(self.data * c.data)
        if isinstance(c, np.ndarray):
            return self.like(self.data * c)
        return self.like(self.data * float(c))

    __rmul__ = __mul__

    def linf(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0

    def l2(self) -> float:
        """Flat-measure L2 norm (sum of squared components, averaged over the unit torus)."""
        sq = self.data ** 2
        if self.rank:
            sq = sq.reshape((-1,) + self.grid.shape).sum(axis=0)
        return float(np.sqrt(sq.mean()))


def scalar(grid: TorusGrid, data) -> TensorField:
    return TensorField(grid, (), np.broadcast_to(np.asarray(data, dtype=float), grid.shape).copy())


def constant(grid: TorusGrid, slots, comps) -> TensorField:
    comps = np.asarray(comps, dtype=float)
    data = np.broadcast_to(comps.reshape(comps.shape + (1,) * grid.dim),
                           comps.shape + grid.shape).copy()
    return TensorField(grid, slots, data)


def identity_endo(grid: TorusGrid) -> TensorField:
    return constant(grid, (CO, CONTRA), np.eye(grid.dim))


def standard_j(grid: TorusGrid) -> TensorField:
    """J dx_k -> dy_k, J dy_k -> -dx_k, stored as E[a, c] with J(e_a) = E[a, c] e_c."""
    n, d = grid.n, grid.dim
    E = np.zeros((d, d))
    for k in range(n):
        E[k, n + k] = 1.0
        E[n + k, k] = -1.0
    return constant(grid, (CO, CONTRA), E)


# -- pointwise multilinear algebra -------------------------------------------

def partial_derivative(T: TensorField, axis: int) -> TensorField:
    return T.like(spectral_partial(T.data, T.grid, axis))


def outer_product(A: TensorField, B: TensorField) -> TensorField:
    if A.grid != B.grid:
        raise ContractViolation("fields live on different grids")
    la, lb = string.ascii_letters[:A.rank], string.ascii_letters[A.rank:A.rank + B.rank]
    data = np.einsum(f"{la}...,{lb}...->{la}{lb}...", A.data, B.data)
    return TensorField(A.grid, A.slots + B.slots, data)


def contract(A: TensorField, slot_a: int, B: TensorField, slot_b: int) -> TensorField:
    """Contract one covariant slot against one contravariant slot of two fields."""
    if A.grid != B.grid:
        raise ContractViolation("fields live on different grids")
    if {A.slots[slot_a], B.slots[slot_b]} != {CO, CONTRA}:
        raise ContractViolation("contraction needs one covariant and one contravariant slot")
    la = list(string.ascii_letters[:A.rank])
    lb = list(string.ascii_letters[A.rank:A.rank + B.rank])
    lb[slot_b] = la[slot_a]
    out = [c for i, c in enumerate(la) if i != slot_a] + [c for i, c in enumerate(lb) if i != slot_b]
    data = np.einsum(f"{''.join(la)}...,{''.join(lb)}...->{''.join(out)}...", A.data, B.data)
    slots = tuple(s for i, s in enumerate(A.slots) if i != slot_a) + \
        tuple(s for i, s in enumerate(B.slots) if i != slot_b)
    return TensorField(A.grid, slots, data)


def trace_with_metric(T: TensorField, slots: tuple, ginv: TensorField) -> TensorField:
    """Contract two covariant slots of T with an inverse metric."""
    i, j = slots
    if T.slots[i] != CO or T.slots[j] != CO or ginv.slots != (CONTRA, CONTRA):
        raise ContractViolation("metric trace needs two covariant slots and a (2,0) inverse metric")
    letters = list(string.ascii_letters[:T.rank])
    p, q = letters[i], letters[j]
    out = [c for k, c in enumerate(letters) if k not in (i, j)]
    data = np.einsum(f"{p}{q}...,{''.join(letters)}...->{''.join(out)}...", ginv.data, T.data)
    return TensorField(T.grid, tuple(s for k, s in enumerate(T.slots) if k not in (i, j)), data)


def transpose_slots(T: TensorField, perm: Sequence[int]) -> TensorField:
    perm = tuple(perm)
    if sorted(perm) != list(range(T.rank)):
        raise ContractViolation(f"bad slot permutation {perm}")
    data = np.transpose(T.data, perm + tuple(range(T.rank, T.data.ndim)))
    return TensorField(T.grid, tuple(T.slots[p] for p in perm), np.ascontiguousarray(data))


def _require_endo(*fields):
    for F in fields:
        if F.slots != (CO, CONTRA):
            raise ContractViolation(f"expected an endomorphism, got valence {F.slots}")


def compose_arrays(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(a o b) for endomorphism arrays, i.e. apply b first."""
    return np.einsum("ab...,bc...->ac...", b, a)


def pointwise_compose(A: TensorField, B: TensorField) -> TensorField:
    _require_endo(A, B)
    if A.grid != B.grid:
        raise ContractViolation("fields live on different grids")
    return A.like(compose_arrays(A.data, B.data))


def relative_residual(a: TensorField, b: TensorField) -> float:
    a._check(b)
    return float(np.max(np.abs(a.data - b.data))) / max(1.0, b.linf())


def norms(a: TensorField, ref: TensorField | None = None) -> tuple:
    """(L-infinity, L2, relative residual against ``ref`` or nan)."""
    rel = relative_residual(a, ref) if ref is not None else float("nan")
    return a.linf(), a.l2(), rel


# -- snapshots ---------------------------------------------------------------

_MAGIC = b"KVSNAP1\n"


def save_snapshot(T: TensorField, path, extra: dict | None = None) -> None:
    header = {"grid": T.grid.describe(), "slots": list(T.slots), "byte_order": "little",
              "dtype": "float64", "shape": list(T.data.shape), "layout": "slots-outer-grid-inner"}
    if extra:
        header["extra"] = extra
    raw = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(len(raw).to_bytes(8, "little"))
        fh.write(raw)
        fh.write(np.ascontiguousarray(T.data, dtype="<f8").tobytes())


def load_snapshot(path) -> TensorField:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ContractViolation(f"{path} is not a field snapshot")
        size = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(size))
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(header["shape"])
    grid = TorusGrid(header["grid"]["n"], header["grid"]["resolution"])
    return TensorField(grid, tuple(header["slots"]), data.copy())
