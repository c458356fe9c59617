"""Space-variant anisotropic Tikhonov regularizer.

For each pixel the model gradient is rotated by the local tilt ``theta`` and
weighted by ``diag(sigma, 1 - sigma)``::

    R(m; theta, sigma) = 1/2 sum_i || S_i R(theta_i) grad(m)_i ||^2

with ``R(t) = [[cos t, sin t], [-sin t, cos t]]``. ``sigma = 0.5`` everywhere
gives a quarter of the classical gradient penalty.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy import ndimage

from .grid import Grid2D, gradient, gradient_adjoint, gradient_matrices
from .linalg import pcg

HALF_PI = 0.5 * np.pi


@dataclass(frozen=True)
class AnisoParams:
    theta: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if theta.shape != sigma.shape:
            raise ValueError(f"theta {theta.shape} and sigma {sigma.shape} differ in shape")
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(sigma))):
            raise ValueError("theta and sigma must be finite")
        if sigma.min() < 0.0 or sigma.max() > 1.0:
            raise ValueError("sigma must lie in [0, 1]")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def isotropic(cls, grid: Grid2D, theta=None) -> "AnisoParams":
        t = np.zeros(grid.shape) if theta is None else theta
        return cls(t, np.full(grid.shape, 0.5))


@dataclass(frozen=True)
class ThetaAugState:
    """Auxiliary variables of the split tilt constraint.

    ``z`` is the clipped copy of theta, ``nu`` its multiplier, ``tau`` the
    penalty and ``beta`` the weight of the tilt smoothing term.
    """

    z: np.ndarray
    nu: np.ndarray
    tau: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")

    @classmethod
    def start(cls, theta: np.ndarray, tau: float = 1.0, beta: float = 1.0) -> "ThetaAugState":
        return cls(clip_theta(theta), np.zeros_like(theta, dtype=np.float64), tau, beta)


def clip_theta(theta: np.ndarray) -> np.ndarray:
    return np.minimum(np.maximum(theta, -HALF_PI), HALF_PI)


def fold_angle(theta):
    """Map angles onto (-pi/2, pi/2] modulo pi."""
    return HALF_PI - np.mod(HALF_PI - np.asarray(theta, dtype=np.float64), np.pi)


def rotate(theta, gx, gz):
    """Rotate gradient components into the frame aligned with ``theta``."""
    c, s = np.cos(theta), np.sin(theta)
    return c * gx + s * gz, -s * gx + c * gz


def rotate_derivative(theta, gx, gz):
    """Derivative of :func:`rotate` with respect to ``theta``."""
    c, s = np.cos(theta), np.sin(theta)
    return -s * gx + c * gz, -c * gx - s * gz


def reg_value(m: np.ndarray, p: AnisoParams, grid: Grid2D) -> float:
    y = reg_operator_apply(m, p, grid)
    return 0.5 * float(np.vdot(y, y).real)


def reg_operator_apply(m: np.ndarray, p: AnisoParams, grid: Grid2D) -> np.ndarray:
    """Stacked ``(sigma * g_x', (1 - sigma) * g_z')`` flattened to length 2n."""
    gx, gz = gradient(m, grid)
    rx, rz = rotate(p.theta, gx, gz)
    return np.concatenate([(p.sigma * rx).ravel(), ((1.0 - p.sigma) * rz).ravel()])


def reg_operator_adjoint(y: np.ndarray, p: AnisoParams, grid: Grid2D) -> np.ndarray:
    n = grid.n
    y = np.asarray(y)
    if y.shape != (2 * n,):
        raise ValueError(f"expected stacked vector of length {2 * n}, got {y.shape}")
    yx = p.sigma * y[:n].reshape(grid.shape)
    yz = (1.0 - p.sigma) * y[n:].reshape(grid.shape)
    c, s = np.cos(p.theta), np.sin(p.theta)
    # transpose of the rotation
    gx = c * yx - s * yz
    gz = s * yx + c * yz
    return gradient_adjoint((gx, gz), grid)


def reg_matrix(p: AnisoParams, grid: Grid2D) -> sp.csr_matrix:
    """Sparse ``L`` with ``reg_value = 1/2 ||L m||^2``, shape (2n, n)."""
    dx, dz = gradient_matrices(grid)
    c = np.cos(p.theta).ravel()
    s = np.sin(p.theta).ravel()
    sx = p.sigma.ravel()
    sz = 1.0 - sx
    top = sp.diags(sx * c) @ dx + sp.diags(sx * s) @ dz
    bottom = sp.diags(-sz * s) @ dx + sp.diags(sz * c) @ dz
    return sp.vstack([top, bottom], format="csr")


def box_filter_5x5(f: np.ndarray) -> np.ndarray:
    """Normalized 5x5 moving average with replicate padding."""
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 2 or min(f.shape) < 5:
        raise ValueError(f"box_filter_5x5 needs a grid of at least 5x5, got {f.shape}")
    return ndimage.uniform_filter(f, size=5, mode="nearest")


def sigma_closed_form(rx: np.ndarray, rz: np.ndarray, tiny: float = 0.0) -> np.ndarray:
    """Per-pixel minimizer of ``s^2 rx^2 + (1 - s)^2 rz^2``; 0.5 where both vanish."""
    ex = rx * rx
    ez = rz * rz
    den = ex + ez
    degenerate = ((np.abs(rx) < tiny) & (np.abs(rz) < tiny)) | (den == 0.0)
    out = np.full(np.shape(rx), 0.5)
    ok = ~degenerate
    out[ok] = ez[ok] / den[ok]
    return out


def sigma_update(m: np.ndarray, theta: np.ndarray, grid: Grid2D, smooth: bool = True) -> np.ndarray:
    gx, gz = gradient(m, grid)
    rx, rz = rotate(theta, gx, gz)
    gmax = max(np.abs(gx).max(), np.abs(gz).max())
    sigma = sigma_closed_form(rx, rz, tiny=1e-12 * gmax)
    if smooth:
        sigma = box_filter_5x5(sigma)
    return np.clip(sigma, 0.0, 1.0)


@lru_cache(maxsize=8)
def _unit_laplacian(grid: Grid2D) -> sp.csr_matrix:
    dx, dz = gradient_matrices(Grid2D(grid.nx, grid.nz))
    return (dx.T @ dx + dz.T @ dz).tocsr()


def theta_update(
    m: np.ndarray,
    p: AnisoParams,
    aug: ThetaAugState,
    grid: Grid2D,
    cg_tol: float = 1e-8,
    cg_maxiter: int = 2000,
) -> tuple[np.ndarray, ThetaAugState]:
    """One damped Gauss-Newton step on the tilt field.

    Minimizes, linearized about the current tilt,

        w R(m; theta, sigma) + beta/2 ||grad theta||^2
            + tau/2 ||theta - z||^2 - nu^T (theta - z)

    where ``w = 1 / mean |grad m|^2`` makes the data term independent of the
    units of ``m``. The tilt smoothing uses unit grid spacing. Returns the new
    tilt and the state with ``z`` re-clipped; the multiplier update is left to
    the caller (:func:`update_multiplier`).
    """
    theta = p.theta
    gx, gz = gradient(m, grid)
    energy = float(np.mean(gx * gx + gz * gz))
    w = 1.0 / energy if energy > 0 else 0.0
    rx, rz = rotate(theta, gx, gz)
    jx, jz = rotate_derivative(theta, gx, gz)
    sx, sz = p.sigma, 1.0 - p.sigma
    # per-pixel residual r = S R g, Jacobian J = S R' g
    jtj = w * ((sx * jx) ** 2 + (sz * jz) ** 2)
    jtr = w * ((sx * jx) * (sx * rx) + (sz * jz) * (sz * rz))

    lap = _unit_laplacian(grid)
    t = theta.ravel()
    rhs = -(jtr.ravel() + aug.beta * (lap @ t) + aug.tau * (t - aug.z.ravel()) - aug.nu.ravel())
    diag = jtj.ravel() + aug.tau
    a = sp.diags(diag) + aug.beta * lap
    delta = pcg(a.tocsr(), rhs, cg_tol, cg_maxiter, what="theta CG")
    theta_new = theta + delta.reshape(grid.shape)
    return theta_new, replace(aug, z=clip_theta(theta_new))


def update_multiplier(aug: ThetaAugState, theta: np.ndarray) -> ThetaAugState:
    """``nu <- nu - tau (theta - z)``."""
    return replace(aug, nu=aug.nu - aug.tau * (theta - aug.z))


def theta_init(m: np.ndarray, grid: Grid2D, pre_smooth: int = 3) -> np.ndarray:
    """Tilt of least directional variation from the smoothed structure tensor.

    Pixels whose neighbourhood carries no gradient at all get ``theta = 0``.
    """
    gx, gz = gradient(m, grid)
    size = max(int(pre_smooth), 1)
    jxx = ndimage.uniform_filter(gx * gx, size=size, mode="nearest")
    jzz = ndimage.uniform_filter(gz * gz, size=size, mode="nearest")
    jxz = ndimage.uniform_filter(gx * gz, size=size, mode="nearest")
    # orientation of the dominant gradient, turned by a right angle
    theta = fold_angle(0.5 * np.arctan2(2.0 * jxz, jxx - jzz) + HALF_PI)
    scale = jxx + jzz
    flat = scale <= 1e-24 * max(scale.max(), np.finfo(float).tiny)
    theta[flat] = 0.0
    return theta
