"""Regular 2D grids, field containers and first-order difference operators.

Arrays are stored with shape ``(nz, nx)`` in C order, so the flattened
vector is row-major with x varying fastest.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class Grid2D:
    nx: int
    nz: int
    dx: float = 1.0
    dz: float = 1.0

    def __post_init__(self):
        if self.nx < 3 or self.nz < 3:
            raise ValueError(f"grid must be at least 3x3, got nx={self.nx}, nz={self.nz}")
        if not (self.dx > 0 and self.dz > 0):
            raise ValueError(f"grid spacing must be positive, got dx={self.dx}, dz={self.dz}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nz, self.nx)

    @property
    def n(self) -> int:
        return self.nx * self.nz

    def index(self, ix: int, iz: int) -> int:
        """Flat index of node (ix, iz)."""
        return iz * self.nx + ix

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical coordinates ``(x, z)`` of every node, each of shape (nz, nx)."""
        x = np.arange(self.nx) * self.dx
        z = np.arange(self.nz) * self.dz
        return np.meshgrid(x, z)

    def check(self, a: np.ndarray, name: str = "field") -> np.ndarray:
        a = np.asarray(a)
        if a.shape != self.shape:
            raise ValueError(f"{name} has shape {a.shape}, expected {self.shape}")
        return a


@dataclass(frozen=True)
class ScalarField2D:
    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("scalar field contains non-finite values")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class ComplexField2D:
    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128).reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("complex field contains non-finite values")
        object.__setattr__(self, "values", v)


class GradientPair(NamedTuple):
    gx: np.ndarray
    gz: np.ndarray


def gradient(m: np.ndarray, grid: Grid2D) -> GradientPair:
    """Forward differences, zero on the last column (x) and last row (z)."""
    m = grid.check(m, "m")
    gx = np.zeros_like(m)
    gz = np.zeros_like(m)
    gx[:, :-1] = (m[:, 1:] - m[:, :-1]) / grid.dx
    gz[:-1, :] = (m[1:, :] - m[:-1, :]) / grid.dz
    return GradientPair(gx, gz)


def gradient_adjoint(g: GradientPair, grid: Grid2D) -> np.ndarray:
    """Exact transpose of :func:`gradient` applied to the stacked pair."""
    gx = grid.check(g[0], "gx")
    gz = grid.check(g[1], "gz")
    dtype = np.result_type(gx, gz)
    out = np.zeros(grid.shape, dtype=dtype)
    hx = gx[:, :-1] / grid.dx
    hz = gz[:-1, :] / grid.dz
    out[:, :-1] -= hx
    out[:, 1:] += hx
    out[:-1, :] -= hz
    out[1:, :] += hz
    return out


def _diff_1d(n: int, h: float) -> sp.csr_matrix:
    d = sp.diags([-np.ones(n), np.ones(n - 1)], [0, 1], shape=(n, n), format="lil")
    d[n - 1, n - 1] = 0.0
    return (d / h).tocsr()


def gradient_matrices(grid: Grid2D) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Sparse matrices ``(Dx, Dz)`` reproducing :func:`gradient` on flattened fields."""
    dx = sp.kron(sp.identity(grid.nz), _diff_1d(grid.nx, grid.dx), format="csr")
    dz = sp.kron(_diff_1d(grid.nz, grid.dz), sp.identity(grid.nx), format="csr")
    return dx, dz


def laplacian(u: np.ndarray, grid: Grid2D, stretch=None) -> np.ndarray:
    """Five-point Laplacian with homogeneous Dirichlet exterior.

    ``stretch`` is an optional :class:`anisotik.helmholtz.Stretch` holding the
    complex PML factors on nodes and half nodes; when given, each second
    derivative becomes ``1/s d/dx (1/s d/dx)``.
    """
    u = grid.check(u, "u")
    up = np.pad(u, 1)
    c = up[1:-1, 1:-1]
    fx = up[1:-1, 2:] - c
    bx = c - up[1:-1, :-2]
    fz = up[2:, 1:-1] - c
    bz = c - up[:-2, 1:-1]
    if stretch is None:
        return (fx - bx) / grid.dx**2 + (fz - bz) / grid.dz**2
    sx, sxh, sz, szh = stretch.sx, stretch.sx_half, stretch.sz, stretch.sz_half
    # sxh[k] sits between nodes k-1 and k (length nx + 1), likewise szh
    lx = (fx / sxh[None, 1:] - bx / sxh[None, :-1]) / (sx[None, :] * grid.dx**2)
    lz = (fz / szh[1:, None] - bz / szh[:-1, None]) / (sz[:, None] * grid.dz**2)
    return lx + lz
