"""Frequency-domain FWI by ADMM on the wavefield-reconstruction Lagrangian.

For one frequency the augmented Lagrangian is::

    sum_s 1/2 |P u_s - d_s|^2 + mu/2 |A(m) u_s - b_s|^2 - Re<lam_s, A(m) u_s - b_s>
        + alpha R(m; theta, sigma) + tilt terms

and each ADMM sweep updates theta, sigma, the wavefields, the model and the
multipliers in turn. ``A(m) u`` is linear in ``m`` for fixed ``u``, which
makes the model step a real SPD linear solve.

Models live on the physical grid; wavefields, sources and multipliers live on
the grid padded by the PML (see :class:`~anisotik.helmholtz.Padding`).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConfigError, SolverError
from .grid import Grid2D
from .helmholtz import Acquisition, HelmholtzSystem, Pml, Survey, slowness2_to_velocity
from .linalg import lu_preconditioner, pcg
from .regularizer import (
    AnisoParams,
    ThetaAugState,
    reg_matrix,
    reg_value,
    sigma_update,
    theta_init,
    theta_update,
    update_multiplier,
)

log = logging.getLogger(__name__)

SIGMA_MODES = ("isotropic", "fixed", "adaptive")


@dataclass
class FwiConfig:
    """ADMM and continuation settings.

    ``mu`` is relative: the penalty actually used at a frequency is
    ``mu / |A(m)|_1^2``, with ``m`` the model entering that frequency, so that
    ``mu A^H A`` and ``P^T P`` are comparable.
    ``alpha`` is relative as well and is scaled by the mean diagonal of the
    model-step data matrix times ``dx dz``. A list gives one value per cycle.
    """

    mu: float = 1e-2
    mu_growth: float = 1.0
    tau: float = 1.0
    alpha: float | list = 1e-2
    beta: float = 1.0
    iters_per_freq: int = 10
    cycles: list = field(default_factory=lambda: [(3.0, 8.0, 1.0), (3.0, 8.0, 1.0)])
    sigma_mode: str = "adaptive"
    sigma_fixed: float = 0.9
    m_bounds: tuple | None = (1.0 / 6000.0**2, 1.0 / 1400.0**2)
    cg_tol: float = 1e-8
    cg_maxiter: int = 2000

    def __post_init__(self):
        if not self.mu > 0:
            raise ConfigError(f"fwi.mu must be positive, got {self.mu}")
        if not self.mu_growth >= 1.0:
            raise ConfigError(f"fwi.mu_growth must be >= 1, got {self.mu_growth}")
        if not self.tau > 0:
            raise ConfigError(f"fwi.tau must be positive, got {self.tau}")
        if self.beta < 0:
            raise ConfigError(f"fwi.beta must be nonnegative, got {self.beta}")
        if self.iters_per_freq < 1:
            raise ConfigError("fwi.iters_per_freq must be >= 1")
        if not self.cycles:
            raise ConfigError("fwi.cycles nonempty: at least one (f_min, f_max, f_step) band is required")
        cycles = []
        for c in self.cycles:
            try:
                f0, f1, df = (float(v) for v in c)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"fwi.cycles entries must be (f_min, f_max, f_step), got {c!r}") from exc
            if not (0 < f0 <= f1 and df > 0):
                raise ConfigError(f"fwi.cycles band {c!r} needs 0 < f_min <= f_max and f_step > 0")
            cycles.append((f0, f1, df))
        self.cycles = cycles
        alphas = self.alpha if isinstance(self.alpha, (list, tuple)) else [self.alpha]
        if isinstance(self.alpha, (list, tuple)) and len(alphas) != len(cycles):
            raise ConfigError("fwi.alpha list must have one entry per cycle")
        if not all(a > 0 for a in alphas):
            raise ConfigError("fwi.alpha must be positive")
        if self.sigma_mode not in SIGMA_MODES:
            raise ConfigError(f"fwi.sigma_mode must be one of {SIGMA_MODES}")
        if not 0.0 <= self.sigma_fixed <= 1.0:
            raise ConfigError("fwi.sigma_fixed must lie in [0, 1]")
        if self.m_bounds is not None:
            lo, hi = (float(v) for v in self.m_bounds)
            if not 0 < lo < hi:
                raise ConfigError("fwi.m_bounds must satisfy 0 < m_min < m_max")
            self.m_bounds = (lo, hi)

    def alpha_for(self, cycle: int) -> float:
        if isinstance(self.alpha, (list, tuple)):
            return float(self.alpha[cycle])
        return float(self.alpha)


def cycle_frequencies(band) -> list[float]:
    f0, f1, df = band
    n = int(np.floor((f1 - f0) / df + 1e-9)) + 1
    return [float(f0 + k * df) for k in range(n)]


@dataclass
class FrequencyBlock:
    """Everything fixed while inverting one frequency."""

    survey: Survey
    freq_hz: float
    data: np.ndarray  # (n_src, n_rec)
    sources: np.ndarray  # (n_src, n_ext)
    mu: float

    @property
    def omega(self) -> float:
        return 2.0 * np.pi * self.freq_hz


@dataclass
class InversionState:
    m: np.ndarray
    p: AnisoParams
    aug: ThetaAugState
    lam: np.ndarray | None = None
    u: np.ndarray | None = None
    system: HelmholtzSystem | None = field(default=None, repr=False)
    cycle: int = 0
    iteration: int = 0
    history: tuple = ()


def relative_error(m_k: np.ndarray, m_star: np.ndarray) -> float:
    """``100 |m_k - m*| / |m*|`` in percent."""
    m_k = np.asarray(m_k, dtype=float)
    m_star = np.asarray(m_star, dtype=float)
    if m_k.shape != m_star.shape:
        raise ValueError(f"shape mismatch {m_k.shape} vs {m_star.shape}")
    ref = np.linalg.norm(m_star)
    if ref == 0.0:
        raise ValueError("relative_error needs a nonzero reference model")
    return float(100.0 * np.linalg.norm(m_k - m_star) / ref)


def penalty_scale(system: HelmholtzSystem) -> float:
    """``|A|_1^2``, a cheap upper estimate of the largest eigenvalue of ``A^H A``."""
    col = np.asarray(abs(system.matrix).sum(axis=0)).ravel()
    return float(col.max()) ** 2


def u_update(sys: HelmholtzSystem, d: np.ndarray, lam: np.ndarray, b: np.ndarray,
             sampling: sp.spmatrix, mu: float, tol: float = 1e-8) -> np.ndarray:
    """Wavefields minimizing ``1/2|P u - d|^2 + mu/2 |A u - b|^2 - Re<lam, A u - b>``.

    Solves ``(P^T P + mu A^H A) u = P^T d + A^H (mu b + lam)`` for every source
    with one sparse LU. Arrays are stacked per source: ``d`` is (n_src, n_rec),
    ``lam`` and ``b`` are (n_src, n). Returns (n_src, n).
    """
    a = sys.matrix
    ah = a.conj().T.tocsr()
    pt = sampling.T.tocsr()
    h = (pt @ sampling + mu * (ah @ a)).tocsc()
    b = np.atleast_2d(b)
    d = np.atleast_2d(d)
    lam = np.zeros_like(b) if lam is None else np.atleast_2d(lam)
    rhs = (pt @ d.T) + ah @ (mu * b + lam).T
    try:
        lu = splu(h)
    except RuntimeError as exc:
        raise SolverError(f"wavefield normal-equation factorization failed: {exc}") from exc
    u = lu.solve(np.ascontiguousarray(rhs))
    r = rhs - h @ u
    rel = _rel_residual(r, rhs)
    if rel > tol:
        # one step of iterative refinement against round-off growth
        u += lu.solve(np.ascontiguousarray(r))
        rel = _rel_residual(rhs - h @ u, rhs)
        if rel > tol:
            raise SolverError("wavefield normal equations not solved to tolerance", residual=rel)
    return u.T


def _rel_residual(r, rhs) -> float:
    den = np.linalg.norm(rhs)
    return float(np.linalg.norm(r) / den) if den > 0 else float(np.linalg.norm(r))


def model_normal_equations(u, lam, b, omega, laplacian, mu, ext=None):
    """Diagonal data matrix and right-hand side of the model step.

    Returns ``(diag, rhs)`` on the model grid, already pulled back through the
    padding operator ``ext`` when one is given.
    """
    u = np.atleast_2d(u)
    b = np.atleast_2d(b)
    lam = np.zeros_like(u) if lam is None else np.atleast_2d(lam)
    lap_u = (laplacian @ u.T).T
    w2 = omega**2
    diag = mu * w2 * w2 * np.sum(np.abs(u) ** 2, axis=0)
    rhs = w2 * np.sum(np.real(np.conj(u) * (mu * (b - lap_u) + lam)), axis=0)
    if ext is not None:
        return ext.T @ sp.diags(diag) @ ext, ext.T @ rhs
    return sp.diags(diag), rhs


def m_update(u, lam, b, p: AnisoParams, grid: Grid2D, omega: float, laplacian, mu: float, alpha: float,
             ext=None, bounds=None, cg_tol: float = 1e-8, cg_maxiter: int = 2000, x0=None) -> np.ndarray:
    """Model minimizing the Lagrangian for fixed wavefields and multipliers.

    Solves ``(E^T diag(mu w^4 sum|u|^2) E + a L^T L) m = E^T Re[w^2 sum conj(u)(mu(b - Lap u) + lam)]``
    by CG, where ``a = alpha * mean(diag) * dx * dz``; then clips to ``bounds``.
    With ``alpha == 0`` the data matrix must be definite.
    """
    dmat, rhs = model_normal_equations(u, lam, b, omega, laplacian, mu, ext)
    dmat = dmat.tocsr()
    a = dmat
    if alpha > 0:
        lmat = reg_matrix(p, grid)
        scale = alpha * float(dmat.diagonal().mean()) * grid.dx * grid.dz
        a = (dmat + scale * (lmat.T @ lmat)).tocsr()
    x0 = None if x0 is None else np.asarray(x0, dtype=float).ravel()
    m = pcg(a, rhs, cg_tol, cg_maxiter, x0=x0, precond=lu_preconditioner(a), what="model-step CG")
    m = m.reshape(grid.shape)
    if bounds is not None:
        m = np.clip(m, bounds[0], bounds[1])
    return m


def wave_residual(sys: HelmholtzSystem, u: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``A u_s - b_s`` stacked per source."""
    return (sys.matrix @ np.atleast_2d(u).T).T - b


def start_state(m0: np.ndarray, grid: Grid2D, cfg: FwiConfig) -> InversionState:
    m0 = np.asarray(grid.check(m0, "m0"), dtype=float)
    if cfg.sigma_mode == "isotropic":
        p = AnisoParams.isotropic(grid)
    else:
        theta = theta_init(m0, grid)
        s0 = 0.5 if cfg.sigma_mode == "adaptive" else cfg.sigma_fixed
        p = AnisoParams(theta, np.full(grid.shape, s0))
    return InversionState(m0, p, ThetaAugState.start(p.theta, cfg.tau, cfg.beta))


def admm_iteration(state: InversionState, block: FrequencyBlock, cfg: FwiConfig,
                   m_true: np.ndarray | None = None) -> InversionState:
    """One ADMM sweep: tilt, weights, wavefields, model, multipliers.

    Returns a new state; the input state is never modified.
    """
    survey = block.survey
    grid = survey.grid
    omega = block.omega
    b = block.sources
    alpha = cfg.alpha_for(state.cycle)

    p, aug = state.p, state.aug
    if cfg.sigma_mode != "isotropic":
        theta, aug = theta_update(state.m, p, aug, grid, cfg.cg_tol, cfg.cg_maxiter)
        if cfg.sigma_mode == "adaptive":
            sigma = sigma_update(state.m, theta, grid)
        else:
            sigma = p.sigma
        p = AnisoParams(theta, sigma)

    sys = state.system
    if sys is None or sys.omega != omega:
        sys = survey.system(state.m, block.freq_hz)
    lam = state.lam if state.lam is not None else np.zeros_like(b)
    u = u_update(sys, block.data, lam, b, survey.sampling, block.mu)
    m = m_update(u, lam, b, p, grid, omega, sys.laplacian, block.mu, alpha,
                 ext=survey.padding.matrix(), bounds=cfg.m_bounds,
                 cg_tol=cfg.cg_tol, cg_maxiter=cfg.cg_maxiter, x0=state.m)
    sys_new = survey.system(m, block.freq_hz)
    res = wave_residual(sys_new, u, b)
    lam = lam - block.mu * res
    if cfg.sigma_mode != "isotropic":
        aug = update_multiplier(aug, p.theta)

    d_norm = np.linalg.norm(block.data)
    pred = (survey.sampling @ u.T).T
    row = {
        "iteration": state.iteration + 1,
        "cycle": state.cycle + 1,
        "freq_hz": float(block.freq_hz),
        "relative_error": relative_error(m, m_true) if m_true is not None else float("nan"),
        "data_residual": float(np.linalg.norm(pred - block.data) / d_norm) if d_norm > 0 else 0.0,
        "waveeq_residual": float(np.sum(np.linalg.norm(res, axis=1))),
        "reg_value": reg_value(m, p, grid),
    }
    log.debug("iter %(iteration)d f=%(freq_hz)g err=%(relative_error).4g dres=%(data_residual).3e "
              "wres=%(waveeq_residual).3e", row)
    return replace(state, m=m, p=p, aug=aug, lam=lam, u=u, system=sys_new,
                   iteration=state.iteration + 1, history=state.history + (row,))


def frequency_index(acq: Acquisition, f_hz: float) -> int:
    freqs = np.asarray(acq.frequencies_hz, dtype=float)
    k = int(np.argmin(np.abs(freqs - f_hz)))
    if abs(freqs[k] - f_hz) > 1e-6 * max(1.0, f_hz):
        raise ConfigError(f"no observed data at {f_hz} Hz; available {list(freqs)}")
    return k


def continuation_driver(m0: np.ndarray, grid: Grid2D, acq: Acquisition, data: np.ndarray, cfg: FwiConfig,
                        pml: Pml = Pml(), m_true: np.ndarray | None = None, on_cycle=None):
    """Multiscale inversion, low to high frequency, repeated over the cycles.

    ``data`` has shape (n_freq, n_src, n_rec) ordered like
    ``acq.frequencies_hz``. ``m``, ``theta`` and ``sigma`` carry over between
    frequencies and cycles; multipliers restart from zero at each frequency.
    ``on_cycle(cycle_index, state)`` is called after every cycle.
    Returns ``(m_final, state)``.
    """
    data = np.asarray(data)
    if data.shape != (len(acq.frequencies_hz), acq.n_src, acq.n_rec):
        raise ConfigError(
            f"data shape {data.shape} does not match acquisition "
            f"({len(acq.frequencies_hz)}, {acq.n_src}, {acq.n_rec})"
        )
    plan = [[(f, frequency_index(acq, f)) for f in cycle_frequencies(band)] for band in cfg.cycles]
    if pml.c_ref is None:
        # the damping must not follow m, or A(m) stops being linear in m
        pml = replace(pml, c_ref=float(slowness2_to_velocity(np.min(m0))))
    survey = Survey(grid, acq, pml)
    state = start_state(m0, grid, cfg)
    for c, freqs in enumerate(plan):
        state = replace(state, cycle=c)
        for f, k in freqs:
            sys = survey.system(state.m, f)
            mu = cfg.mu / penalty_scale(sys)
            block = FrequencyBlock(survey, f, data[k], survey.sources(f), mu)
            state = replace(state, lam=None, u=None, system=sys)
            for _ in range(cfg.iters_per_freq):
                state = admm_iteration(state, block, cfg, m_true)
                block = replace(block, mu=block.mu * cfg.mu_growth)
            log.info("cycle %d f=%.3g Hz: %s", c + 1, f, state.history[-1])
        if on_cycle is not None:
            on_cycle(c, state)
    return state.m, state
