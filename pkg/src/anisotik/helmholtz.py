"""Frequency-domain acoustic Helmholtz operator with PML boundaries.

``A(m) = omega^2 diag(m) + Lap`` where ``m`` is slowness squared and ``Lap``
is the five-point Laplacian whose second derivatives become
``1/s d/dx (1/s d/dx)`` inside the absorbing layer, with
``s(x) = 1 + i d(x) / omega``. The time convention is ``exp(-i omega t)``,
so outgoing waves behave like ``H0^(1)(k r)``.

The PML occupies the outer ``npml`` nodes of whatever grid is handed to
:func:`assemble`. Models are usually defined on a smaller grid and padded
with :class:`Padding` before assembly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConfigError, SolverError
from .grid import Grid2D


@dataclass(frozen=True)
class Pml:
    npml: int = 20
    power: float = 2.0
    r_coeff: float = 1e-4
    c_ref: float | None = None  # damping reference velocity; None -> max velocity of m

    def __post_init__(self):
        if self.npml < 8:
            raise ConfigError(f"pml.npml must be >= 8, got {self.npml}")
        if not 2 <= self.power <= 4:
            raise ConfigError(f"pml.power must lie in [2, 4], got {self.power}")
        if not 0 < self.r_coeff < 1:
            raise ConfigError(f"pml.r_coeff must lie in (0, 1), got {self.r_coeff}")
        if self.c_ref is not None and not self.c_ref > 0:
            raise ConfigError(f"pml.c_ref must be positive, got {self.c_ref}")


@dataclass(frozen=True)
class Stretch:
    """Complex stretching factors on nodes and on the nx+1 / nz+1 half nodes."""

    sx: np.ndarray
    sx_half: np.ndarray
    sz: np.ndarray
    sz_half: np.ndarray

    @classmethod
    def identity(cls, grid: Grid2D) -> "Stretch":
        return cls(
            np.ones(grid.nx, complex),
            np.ones(grid.nx + 1, complex),
            np.ones(grid.nz, complex),
            np.ones(grid.nz + 1, complex),
        )


def _damping(n: int, h: float, npml: int, power: float, dmax: float):
    nodes = np.arange(n, dtype=float)
    half = np.arange(n + 1, dtype=float) - 0.5

    def profile(pos):
        left = np.clip(npml - pos, 0.0, None)
        right = np.clip(pos - (n - 1 - npml), 0.0, None)
        return dmax * ((left + right) / npml) ** power

    return profile(nodes), profile(half)


def pml_stretch(grid: Grid2D, omega: float, pml: Pml, c_ref: float) -> Stretch:
    if grid.nx <= 2 * pml.npml + 2 or grid.nz <= 2 * pml.npml + 2:
        raise ConfigError(
            f"grid {grid.nx}x{grid.nz} too small for a PML of {pml.npml} nodes on each side"
        )
    out = []
    for n, h in ((grid.nx, grid.dx), (grid.nz, grid.dz)):
        thickness = pml.npml * h
        dmax = -(pml.power + 1.0) * c_ref * np.log(pml.r_coeff) / (2.0 * thickness)
        d_node, d_half = _damping(n, h, pml.npml, pml.power, dmax)
        out += [1.0 + 1j * d_node / omega, 1.0 + 1j * d_half / omega]
    return Stretch(*out)


def _second_derivative(s: np.ndarray, s_half: np.ndarray, h: float) -> sp.csr_matrix:
    n = s.size
    inv_r = 1.0 / s_half[1:]
    inv_l = 1.0 / s_half[:-1]
    scale = 1.0 / (s * h * h)
    main = -(inv_r + inv_l) * scale
    upper = (inv_r * scale)[:-1]
    lower = (inv_l * scale)[1:]
    return sp.diags([lower, main, upper], [-1, 0, 1], shape=(n, n), format="csr")


def laplacian_matrix(grid: Grid2D, stretch: Stretch | None = None) -> sp.csr_matrix:
    if stretch is None:
        stretch = Stretch.identity(grid)
    lx = _second_derivative(stretch.sx, stretch.sx_half, grid.dx)
    lz = _second_derivative(stretch.sz, stretch.sz_half, grid.dz)
    return (sp.kron(sp.identity(grid.nz), lx) + sp.kron(lz, sp.identity(grid.nx))).tocsr()


@dataclass
class HelmholtzSystem:
    grid: Grid2D
    omega: float
    m: np.ndarray
    pml: Pml | None
    matrix: sp.csr_matrix
    laplacian: sp.csr_matrix
    stretch: Stretch | None = None
    factorization: object = field(default=None, repr=False)

    def apply(self, u: np.ndarray) -> np.ndarray:
        return (self.matrix @ np.asarray(u).reshape(self.grid.n, -1)).reshape(np.shape(u))


def assemble(m: np.ndarray, omega: float, grid: Grid2D, pml: Pml | None = Pml()) -> HelmholtzSystem:
    """Build ``A(m)`` on ``grid``; ``pml=None`` gives plain Dirichlet boundaries."""
    m = grid.check(m, "m")
    if not omega > 0:
        raise ConfigError(f"omega must be positive, got {omega}")
    if not np.all(m > 0):
        raise ConfigError("slowness squared must be positive everywhere")
    stretch = None
    if pml is not None:
        c_ref = pml.c_ref if pml.c_ref is not None else float(1.0 / np.sqrt(m.min()))
        stretch = pml_stretch(grid, omega, pml, c_ref)
    lap = laplacian_matrix(grid, stretch)
    a = (lap + sp.diags(omega**2 * m.ravel().astype(complex))).tocsr()
    return HelmholtzSystem(grid, omega, m, pml, a, lap, stretch)


def factorize(sys: HelmholtzSystem) -> HelmholtzSystem:
    try:
        lu = splu(sys.matrix.tocsc())
    except RuntimeError as exc:
        raise SolverError(f"Helmholtz factorization failed: {exc}") from exc
    return replace(sys, factorization=lu)


def solve(sys: HelmholtzSystem, b: np.ndarray) -> np.ndarray:
    """Solve ``A u = b`` for one field (shape ``grid.shape``) or a stack ``(k, nz, nx)``."""
    if sys.factorization is None:
        raise SolverError("Helmholtz system is not factorized")
    b = np.asarray(b, dtype=complex)
    flat = b.reshape(-1, sys.grid.n).T
    u = sys.factorization.solve(np.ascontiguousarray(flat))
    return u.T.reshape(b.shape)


def ricker_spectrum(f_peak_hz: float, f_hz):
    """Zero-phase amplitude spectrum of a Ricker wavelet."""
    f = np.asarray(f_hz, dtype=float)
    return 2.0 * f**2 / (np.sqrt(np.pi) * f_peak_hz**3) * np.exp(-(f**2) / f_peak_hz**2)


def velocity_to_slowness2(v):
    return 1.0 / np.asarray(v, dtype=float) ** 2


def slowness2_to_velocity(m):
    return 1.0 / np.sqrt(np.asarray(m, dtype=float))


@dataclass(frozen=True)
class Padding:
    """Edge-replicating extension of a model grid by ``npml`` nodes per side."""

    grid: Grid2D
    npml: int

    @property
    def ext_grid(self) -> Grid2D:
        g = self.grid
        return Grid2D(g.nx + 2 * self.npml, g.nz + 2 * self.npml, g.dx, g.dz)

    def extend(self, m: np.ndarray) -> np.ndarray:
        return np.pad(self.grid.check(m, "m"), self.npml, mode="edge")

    def crop(self, u: np.ndarray) -> np.ndarray:
        k = self.npml
        return np.asarray(u)[..., k:-k, k:-k]

    def matrix(self) -> sp.csr_matrix:
        """Sparse ``E`` with ``E @ m.ravel() == extend(m).ravel()``."""
        g, k = self.grid, self.npml
        eg = self.ext_grid
        iz = np.clip(np.arange(eg.nz) - k, 0, g.nz - 1)
        ix = np.clip(np.arange(eg.nx) - k, 0, g.nx - 1)
        cols = (iz[:, None] * g.nx + ix[None, :]).ravel()
        return sp.csr_matrix((np.ones(eg.n), (np.arange(eg.n), cols)), shape=(eg.n, g.n))

    def node(self, x: float, z: float) -> int:
        """Flat index on the extended grid of the model node nearest to (x, z) metres."""
        g = self.grid
        ix = int(round(x / g.dx))
        iz = int(round(z / g.dz))
        if not (0 <= ix < g.nx and 0 <= iz < g.nz):
            raise ConfigError(f"position ({x}, {z}) m lies outside the model grid")
        return self.ext_grid.index(ix + self.npml, iz + self.npml)


@dataclass(frozen=True)
class Acquisition:
    """Sources ``(x, z, amplitude)`` and receivers ``(x, z)`` in metres."""

    sources: tuple
    receivers: tuple
    frequencies_hz: tuple
    f_peak_hz: float = 10.0

    def __post_init__(self):
        if not self.sources:
            raise ConfigError("acquisition needs at least one source")
        if not self.frequencies_hz or any(f <= 0 for f in self.frequencies_hz):
            raise ConfigError("acquisition frequencies must be positive and nonempty")
        if not self.f_peak_hz > 0:
            raise ConfigError("f_peak_hz must be positive")

    @property
    def n_src(self) -> int:
        return len(self.sources)

    @property
    def n_rec(self) -> int:
        return len(self.receivers)

    def to_dict(self) -> dict:
        return {
            "frequencies_hz": [float(f) for f in self.frequencies_hz],
            "f_peak_hz": float(self.f_peak_hz),
            "sources": [
                {"x": float(x), "z": float(z), "amplitude": [float(complex(a).real), float(complex(a).imag)]}
                for x, z, a in self.sources
            ],
            "receivers": [{"x": float(x), "z": float(z)} for x, z in self.receivers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Acquisition":
        try:
            sources = tuple(
                (float(s["x"]), float(s["z"]), complex(*s.get("amplitude", (1.0, 0.0))))
                for s in d["sources"]
            )
            receivers = tuple((float(r["x"]), float(r["z"])) for r in d["receivers"])
            freqs = tuple(float(f) for f in d["frequencies_hz"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed acquisition description: {exc!r}") from exc
        return cls(sources, receivers, freqs, float(d.get("f_peak_hz", 10.0)))

    @classmethod
    def surface_line(cls, grid: Grid2D, src_spacing: float, rec_spacing: float, depth: float,
                     frequencies_hz, f_peak_hz: float = 10.0) -> "Acquisition":
        """Sources and receivers on one horizontal line at ``depth`` spanning the model."""
        width = (grid.nx - 1) * grid.dx
        if not (src_spacing > 0 and rec_spacing > 0):
            raise ConfigError("acquisition spacings must be positive")
        xs = np.arange(0.0, width + 1e-9 * width, src_spacing)
        xr = np.arange(0.0, width + 1e-9 * width, rec_spacing)
        return cls(
            tuple((float(x), float(depth), 1.0 + 0j) for x in xs),
            tuple((float(x), float(depth)) for x in xr),
            tuple(float(f) for f in frequencies_hz),
            float(f_peak_hz),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Acquisition":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


class Survey:
    """Acquisition mapped onto the padded computational grid."""

    def __init__(self, grid: Grid2D, acq: Acquisition, pml: Pml = Pml()):
        self.grid = grid
        self.acq = acq
        self.pml = pml
        self.padding = Padding(grid, pml.npml)
        self.ext_grid = self.padding.ext_grid
        self.src_index = np.array([self.padding.node(x, z) for x, z, _ in acq.sources], dtype=int)
        self.src_amp = np.array([a for _, _, a in acq.sources], dtype=complex)
        self.rec_index = np.array([self.padding.node(x, z) for x, z in acq.receivers], dtype=int)
        n = self.ext_grid.n
        self.sampling = sp.csr_matrix(
            (np.ones(self.rec_index.size), (np.arange(self.rec_index.size), self.rec_index)),
            shape=(self.rec_index.size, n),
        )

    def sources(self, f_hz: float) -> np.ndarray:
        """Right-hand sides for all sources at ``f_hz``, shape (n_src, n_ext)."""
        g = self.ext_grid
        b = np.zeros((self.acq.n_src, g.n), dtype=complex)
        w = ricker_spectrum(self.acq.f_peak_hz, f_hz) / (g.dx * g.dz)
        b[np.arange(self.acq.n_src), self.src_index] = self.src_amp * w
        return b

    def system(self, m: np.ndarray, f_hz: float) -> HelmholtzSystem:
        return assemble(self.padding.extend(m), 2 * np.pi * f_hz, self.ext_grid, self.pml)


def synthesize_data(m_true: np.ndarray, grid: Grid2D, acq: Acquisition, pml: Pml = Pml()) -> np.ndarray:
    """Receiver data for every (frequency, source), shape (n_freq, n_src, n_rec)."""
    survey = Survey(grid, acq, pml)
    out = np.zeros((len(acq.frequencies_hz), acq.n_src, acq.n_rec), dtype=complex)
    for k, f in enumerate(acq.frequencies_hz):
        sys = factorize(survey.system(m_true, f))
        u = solve(sys, survey.sources(f))
        out[k] = (survey.sampling @ u.T).T
    return out
