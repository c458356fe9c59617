"""Deterministic synthetic images and velocity models.

Noise uses numpy's PCG64 bit generator seeded from the run seed, so
realizations are reproducible across platforms.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError
from .grid import Grid2D

KINDS = (
    "layers_fault_image",
    "layered_velocity",
    "ramp",
    "homogeneous",
    "two_layer",
    "layers_fault_velocity",
)


@dataclass(frozen=True)
class SynthSpec:
    kind: str
    grid: Grid2D
    # layers_fault_image
    dip_deg: float = 18.0
    upper_dip_deg: float = -4.0
    layer_cycles: float = 14.0
    unconformity_depth: float = 0.32
    unconformity_dip_deg: float = 6.0
    fault_x: float = 0.62
    fault_curvature: float = 0.5
    fault_throw: float = 0.05
    # velocity models (m/s, m/s per m)
    v0: float = 1500.0
    v_gradient: float = 0.8
    v_min: float = 1500.0
    v_max: float = 3500.0
    interface_depth: float = 400.0
    noise_snr_db: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"synth.kind must be one of {KINDS}, got {self.kind!r}")
        if not (self.v0 > 0 and self.v_min > 0 and self.v_max > 0):
            raise ConfigError("synth velocities must be positive")
        if self.v_max < self.v_min:
            raise ConfigError("synth.v_max must be >= synth.v_min")
        for name in ("dip_deg", "upper_dip_deg", "unconformity_dip_deg"):
            d = getattr(self, name)
            if not -90.0 < d <= 90.0:
                raise ConfigError(f"synth.{name} must lie in (-90, 90], got {d}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = asdict(self.grid)
        return d


def layers_fault_image(spec: SynthSpec) -> np.ndarray:
    """Dipping stratification cut by a curved fault, beneath a plane unconformity.

    Values lie in [-1, 1]. Horizontal coordinates are normalized by the
    image width and vertical ones by the height.
    """
    g = spec.grid
    x = (np.arange(g.nx) + 0.5) / g.nx
    z = (np.arange(g.nz) + 0.5) / g.nz
    x, z = np.meshgrid(x, z)

    # curved fault trace x_f(z) and downthrow on its right-hand side
    xf = spec.fault_x + spec.fault_curvature * 0.25 * (z - 0.5) ** 2 - 0.12 * (z - 0.5)
    hanging = x > xf
    zl = z - spec.fault_throw * hanging

    slope = np.tan(np.radians(spec.dip_deg))
    phase_low = zl - slope * (x - 0.5) + 0.015 * np.sin(2 * np.pi * 1.3 * x)
    lower = np.sin(2 * np.pi * spec.layer_cycles * phase_low)
    lower *= 0.75 + 0.25 * np.cos(2 * np.pi * 2.7 * phase_low)

    slope_up = np.tan(np.radians(spec.upper_dip_deg))
    phase_up = z - slope_up * (x - 0.5)
    upper = 0.8 * np.sin(2 * np.pi * 1.4 * spec.layer_cycles * phase_up + 0.7)

    zu = spec.unconformity_depth + np.tan(np.radians(spec.unconformity_dip_deg)) * (x - 0.5)
    return np.where(z < zu, upper, lower)


def layered_velocity(spec: SynthSpec) -> np.ndarray:
    """Velocity increasing linearly with depth, ``v(z) = v0 + gradient * z``."""
    _, z = spec.grid.coords()
    return spec.v0 + spec.v_gradient * z


def two_layer(spec: SynthSpec) -> np.ndarray:
    _, z = spec.grid.coords()
    return np.where(z < spec.interface_depth, spec.v_min, spec.v_max)


def layers_fault_velocity(spec: SynthSpec) -> np.ndarray:
    """Dipping layers with a fault, velocity rising with depth between v_min and v_max."""
    g = spec.grid
    x, z = g.coords()
    width = (g.nx - 1) * g.dx
    depth = (g.nz - 1) * g.dz
    xn, zn = x / width, z / depth
    xf = spec.fault_x + 0.2 * (zn - 0.5) ** 2 - 0.1 * (zn - 0.5)
    zl = zn - spec.fault_throw * (xn > xf)
    slope = np.tan(np.radians(spec.dip_deg))
    phase = zl - slope * (xn - 0.5)
    n_layers = 6
    # stair-stepped background trend plus a layer-wise perturbation
    layer = np.floor(np.clip(phase, 0.0, 0.999999) * n_layers)
    trend = layer / (n_layers - 1)
    wiggle = 0.12 * np.sin(1.7 * layer + 0.4)
    frac = np.clip(trend + wiggle, 0.0, 1.0)
    v = spec.v_min + (spec.v_max - spec.v_min) * frac
    return np.where(zn < 0.08, spec.v_min, v)


def synth_model(spec: SynthSpec) -> np.ndarray:
    g = spec.grid
    if spec.kind == "homogeneous":
        return np.full(g.shape, spec.v0)
    if spec.kind == "ramp":
        x, z = g.coords()
        slope = np.tan(np.radians(spec.dip_deg))
        return z - slope * x
    if spec.kind == "layered_velocity":
        return layered_velocity(spec)
    if spec.kind == "two_layer":
        return two_layer(spec)
    if spec.kind == "layers_fault_velocity":
        return layers_fault_velocity(spec)
    return layers_fault_image(spec)


def noise_at_snr(clean: np.ndarray, snr_db: float, seed: int) -> np.ndarray:
    """Gaussian noise scaled so that ``20 log10(|clean| / |noise|) == snr_db``."""
    rng = np.random.Generator(np.random.PCG64(seed))
    e = rng.standard_normal(clean.shape)
    target = np.linalg.norm(clean) / 10.0 ** (snr_db / 20.0)
    return e * (target / np.linalg.norm(e))


def synth_with_noise(spec: SynthSpec, seed: int):
    """Clean model plus, when ``spec.noise_snr_db`` is set, a noisy copy and the noise."""
    clean = synth_model(spec)
    if spec.noise_snr_db is None:
        return clean, None, None
    e = noise_at_snr(clean, spec.noise_snr_db, seed)
    return clean, clean + e, e
