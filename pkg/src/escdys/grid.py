"""Periodic cell-centred grid and the matrix-free difference operators.

Fields are stored as C-ordered arrays of shape ``(m,) * dim``.  With the
flattened index ``k = i + m(j-1) [+ m^2(l-1)]`` running fastest in x, the
last array axis is x, the one before it y and (in 3D) the first axis z.
Gradient fields carry a leading component axis ordered (x, y[, z]).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import StructuralError


@dataclass(frozen=True)
class GridSpec:
    dim: int
    m: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise StructuralError(f"dim must be 2 or 3, got {self.dim}")
        if self.m < 2:
            raise StructuralError(f"need at least 2 nodes per dimension, got {self.m}")

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.m,) * self.dim

    @property
    def size(self) -> int:
        return self.m ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    def centers(self) -> np.ndarray:
        """1D cell centres x_i = (i - 1/2) h."""
        return (np.arange(self.m) + 0.5) * self.h

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays (x, y[, z]), each of shape ``self.shape``."""
        c = self.centers()
        axes = np.meshgrid(*([c] * self.dim), indexing="ij")
        # meshgrid 'ij' gives axis 0 first; axis order is (z,) y, x
        return tuple(reversed(axes))

    def axis_of(self, component: int) -> int:
        """Array axis holding the given Cartesian direction (0 = x)."""
        return self.dim - 1 - component


def as_field(values, spec: GridSpec) -> np.ndarray:
    """Return ``values`` viewed with the grid shape; accepts flat vectors."""
    arr = np.asarray(values, dtype=float)
    if arr.shape == spec.shape:
        return arr
    if arr.ndim == 1 and arr.size == spec.size:
        return arr.reshape(spec.shape)
    raise StructuralError(f"field of shape {arr.shape} does not match grid {spec.shape}")


def _as_gradient(flux, spec: GridSpec) -> np.ndarray:
    arr = np.asarray(flux, dtype=float)
    if arr.shape == (spec.dim,) + spec.shape:
        return arr
    if arr.shape == (spec.dim, spec.size):
        return arr.reshape((spec.dim,) + spec.shape)
    raise StructuralError(
        f"gradient field of shape {arr.shape} does not match {(spec.dim,) + spec.shape}")


def forward_diff(field, spec: GridSpec) -> np.ndarray:
    """One-sided periodic differences p = (D_x phi, D_y phi[, D_z phi])."""
    phi = as_field(field, spec)
    out = np.empty((spec.dim,) + spec.shape)
    for c in range(spec.dim):
        ax = spec.axis_of(c)
        np.subtract(np.roll(phi, -1, axis=ax), phi, out=out[c])
    out *= spec.m
    return out


def adjoint_diff(flux, spec: GridSpec) -> np.ndarray:
    """Apply D_x^T a_x + D_y^T a_y [+ D_z^T a_z]."""
    a = _as_gradient(flux, spec)
    out = np.zeros(spec.shape)
    for c in range(spec.dim):
        ax = spec.axis_of(c)
        # (D^T a)_i = (a_{i-1} - a_i) / h
        out += np.roll(a[c], 1, axis=ax) - a[c]
    out *= spec.m
    return out


def apply_neg_laplacian(field, spec: GridSpec) -> np.ndarray:
    """L phi with L = sum_c D_c^T D_c (the 2*dim+1 point stencil, scaled by 1/h^2)."""
    phi = as_field(field, spec)
    out = 2.0 * spec.dim * phi
    for c in range(spec.dim):
        ax = spec.axis_of(c)
        out -= np.roll(phi, 1, axis=ax) + np.roll(phi, -1, axis=ax)
    out *= spec.m ** 2
    return out


def laplacian_symbol(spec: GridSpec, half: bool = False) -> np.ndarray:
    """Eigenvalues of L on the DFT basis, shaped like the (r)fftn output.

    Entry for mode (j_1, ..., j_d) is (4/h^2) sum_c sin^2(pi j_c / m).  With
    ``half=True`` the last axis is truncated to m//2 + 1 modes to match
    ``numpy.fft.rfftn``.
    """
    return _symbol(spec, half).copy()


@lru_cache(maxsize=32)
def _symbol(spec: GridSpec, half: bool) -> np.ndarray:
    m = spec.m
    s_full = 4.0 * m * m * np.sin(np.pi * np.arange(m) / m) ** 2
    s_last = s_full[: m // 2 + 1] if half else s_full
    parts = [s_full] * (spec.dim - 1) + [s_last]
    grids = np.meshgrid(*parts, indexing="ij")
    sym = np.zeros(grids[0].shape)
    for g in grids:
        sym += g
    sym[(0,) * spec.dim] = 0.0
    sym.setflags(write=False)
    return sym


def grid_norm(v, spec: GridSpec, mode: str = "grid_weighted") -> float:
    """Euclidean norm, optionally weighted by h^(dim/2) so it approximates the L2 norm."""
    n = float(np.sqrt(np.vdot(v, v).real))
    if mode == "grid_weighted":
        return n * spec.h ** (spec.dim / 2)
    if mode == "raw_l2":
        return n
    raise ValueError(f"unknown norm mode {mode!r}")
