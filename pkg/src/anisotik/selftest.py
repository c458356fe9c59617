"""Adjoint, oracle and derivative checks run by ``aniso-tik selftest``.

Every check returns a :class:`Check` holding the measured worst-case error,
its tolerance and the elapsed time, so callers can print or tabulate results.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .denoise import DenoiseConfig, solve_m
from .grid import Grid2D, gradient, gradient_adjoint, gradient_matrices
from .helmholtz import Pml, assemble, factorize, solve
from .regularizer import (
    AnisoParams,
    reg_operator_adjoint,
    reg_operator_apply,
    reg_value,
    rotate,
    rotate_derivative,
    sigma_closed_form,
)


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tol: float
    seconds: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tol)


def _timed(name, tol, fn) -> Check:
    t0 = time.perf_counter()
    value = float(fn())
    return Check(name, value, tol, time.perf_counter() - t0)


def _random_params(rng, grid):
    return AnisoParams(rng.uniform(-np.pi / 2, np.pi / 2, grid.shape), rng.uniform(0, 1, grid.shape))


def gradient_adjoint_error(rng, grid=Grid2D(13, 11, 0.8, 1.7), trials=100) -> float:
    """Worst dot-product mismatch of the gradient and its adjoint, relative to the Cauchy-Schwarz bound."""
    worst = 0.0
    for _ in range(trials):
        m = rng.standard_normal(grid.shape)
        hx, hz = rng.standard_normal((2, *grid.shape))
        gx, gz = gradient(m, grid)
        lhs = np.vdot(gx, hx) + np.vdot(gz, hz)
        rhs = np.vdot(m, gradient_adjoint((hx, hz), grid))
        scale = np.hypot(np.linalg.norm(gx), np.linalg.norm(gz)) * np.hypot(np.linalg.norm(hx), np.linalg.norm(hz))
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


def reg_adjoint_error(rng, grid=Grid2D(12, 10, 1.3, 0.7), trials=100) -> float:
    worst = 0.0
    for _ in range(trials):
        p = _random_params(rng, grid)
        m = rng.standard_normal(grid.shape)
        y = rng.standard_normal(2 * grid.n)
        lm = reg_operator_apply(m, p, grid)
        lhs = lm @ y
        rhs = np.vdot(m, reg_operator_adjoint(y, p, grid))
        worst = max(worst, abs(lhs - rhs) / (np.linalg.norm(lm) * np.linalg.norm(y)))
    return worst


def rotation_orthogonality_error(rng, n=10_000) -> float:
    """max |R^T R - I| over random angles, with R built from :func:`rotate`."""
    t = rng.uniform(-10, 10, n)
    c1 = np.array(rotate(t, 1.0, 0.0))  # first column of R
    c2 = np.array(rotate(t, 0.0, 1.0))
    gram = np.array([[np.sum(c1 * c1, 0), np.sum(c1 * c2, 0)], [np.sum(c2 * c1, 0), np.sum(c2 * c2, 0)]])
    return float(np.abs(gram - np.eye(2)[:, :, None]).max())


def isotropic_reduction_error(rng, grid=Grid2D(12, 10, 1.3, 0.7), trials=100) -> float:
    worst = 0.0
    for _ in range(trials):
        m = rng.standard_normal(grid.shape)
        p = AnisoParams(rng.uniform(-2, 2, grid.shape), np.full(grid.shape, 0.5))
        gx, gz = gradient(m, grid)
        iso = 0.5 * np.sum(gx**2 + gz**2)
        worst = max(worst, abs(reg_value(m, p, grid) - 0.25 * iso) / iso)
    return worst


def periodicity_error(rng, grid=Grid2D(12, 10, 1.3, 0.7), trials=100) -> float:
    worst = 0.0
    for _ in range(trials):
        m = rng.standard_normal(grid.shape)
        p = _random_params(rng, grid)
        v = reg_value(m, p, grid)
        worst = max(worst, abs(reg_value(m, AnisoParams(p.theta + np.pi, p.sigma), grid) - v) / v)
    return worst


def sigma_oracle_error(rng, n=10_000, samples=4001) -> float:
    """Closed-form weight versus a brute-force grid search on [0, 1]."""
    rx, rz = rng.standard_normal((2, n))
    s = np.linspace(0.0, 1.0, samples)
    best = np.empty(n)
    for lo in range(0, n, 1000):
        x, z = rx[lo:lo + 1000, None], rz[lo:lo + 1000, None]
        best[lo:lo + 1000] = s[np.argmin(s**2 * x**2 + (1 - s) ** 2 * z**2, axis=1)]
    return float(np.abs(sigma_closed_form(rx, rz) - best).max())


def theta_jacobian_error(rng, n=1000, h=1e-6) -> float:
    """Central finite differences of the weighted rotated gradient in theta."""
    t = rng.uniform(-np.pi / 2, np.pi / 2, n)
    gx, gz = rng.standard_normal((2, n))
    s = rng.uniform(0, 1, n)
    w = np.array([s, 1 - s])
    fd = (w * np.array(rotate(t + h, gx, gz)) - w * np.array(rotate(t - h, gx, gz))) / (2 * h)
    jac = w * np.array(rotate_derivative(t, gx, gz))
    return float(np.max(np.linalg.norm(fd - jac, axis=0) / np.linalg.norm(jac, axis=0)))


def reciprocity_error(rng, grid=Grid2D(41, 37, 10.0, 10.0), pml=Pml(10, c_ref=2000.0)) -> float:
    """|G(a, b) - G(b, a)| / |G(a, b)| for random node pairs of a heterogeneous model.

    Nodes are drawn outside the absorbing layer, where the stretching is 1.
    """
    m = (1.0 / rng.uniform(1600, 2800, grid.shape)) ** 2
    sys = factorize(assemble(m, 2 * np.pi * 12.0, grid, pml))
    k = pml.npml
    ix = rng.integers(k, grid.nx - k, size=(5, 2))
    iz = rng.integers(k, grid.nz - k, size=(5, 2))
    idx = iz * grid.nx + ix
    worst = 0.0
    for a, b in idx:
        rhs = np.zeros((2, grid.n), dtype=complex)
        rhs[0, a] = rhs[1, b] = 1.0
        u = solve(sys, rhs)
        worst = max(worst, abs(u[0, b] - u[1, a]) / abs(u[0, b]))
    return worst


def tikhonov_solve_error(rng, grid=Grid2D(20, 16)) -> float:
    """Isotropic denoising m-step against a direct sparse solve."""
    d = rng.standard_normal(grid.shape)
    m = solve_m(d, 3.0, AnisoParams.isotropic(grid), grid, DenoiseConfig(alpha=3.0))
    dx, dz = gradient_matrices(grid)
    ref = spsolve((sp.identity(grid.n) + 0.75 * (dx.T @ dx + dz.T @ dz)).tocsc(), d.ravel())
    return float(np.linalg.norm(m.ravel() - ref) / np.linalg.norm(ref))


def operator_checks(seed: int = 0) -> list[Check]:
    rng = np.random.Generator(np.random.PCG64(seed))
    return [
        _timed("gradient_adjoint", 1e-12, lambda: gradient_adjoint_error(rng)),
        _timed("reg_operator_adjoint", 1e-12, lambda: reg_adjoint_error(rng)),
        _timed("rotation_orthogonality", 1e-15, lambda: rotation_orthogonality_error(rng)),
        _timed("isotropic_reduction", 1e-12, lambda: isotropic_reduction_error(rng)),
        _timed("pi_periodicity", 1e-12, lambda: periodicity_error(rng)),
    ]


def run_all(seed: int = 0) -> list[Check]:
    rng = np.random.Generator(np.random.PCG64(seed + 1))
    return operator_checks(seed) + [
        _timed("sigma_oracle", 1e-3, lambda: sigma_oracle_error(rng)),
        _timed("theta_jacobian_fd", 1e-6, lambda: theta_jacobian_error(rng)),
        _timed("helmholtz_reciprocity", 1e-8, lambda: reciprocity_error(rng)),
        _timed("tikhonov_direct_solve", 1e-7, lambda: tikhonov_solve_error(rng)),
    ]
