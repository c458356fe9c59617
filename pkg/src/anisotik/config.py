"""Run configuration: one flat YAML document per run.

Example::

    mode: denoise
    seed: 7
    paths:
      input: noisy.agf
      reference: clean.agf
    denoise:
      alpha: auto
      noise_norm: 81.3
      sigma_mode: adaptive

Sections are ``paths``, ``denoise``, ``fwi``, ``pml``, ``synth`` and
``acquisition``; which of them a mode accepts is listed in
:data:`MODE_SECTIONS`. Unknown keys anywhere
are rejected, and every validation message names the offending field.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .denoise import DenoiseConfig
from .errors import ConfigError
from .fwi import FwiConfig
from .grid import Grid2D
from .helmholtz import Pml
from .synth import SynthSpec

MODES = ("denoise", "fwi", "forward", "synth", "selftest")
MODEL_UNITS = ("velocity", "slowness2")

# required and optional path keys per mode; inputs must exist
MODE_PATHS = {
    "denoise": ({"input"}, {"reference"}),
    "fwi": ({"data", "acquisition", "initial_model"}, {"true_model"}),
    "forward": ({"model", "acquisition"}, set()),
    "synth": (set(), set()),
    "selftest": (set(), set()),
}
MODE_SECTIONS = {
    "denoise": {"denoise"},
    "fwi": {"fwi", "pml"},
    "forward": {"pml"},
    "synth": {"synth", "acquisition"},
    "selftest": set(),
}
SECTIONS = ("denoise", "fwi", "pml", "synth", "acquisition")
TOP_KEYS = {"mode", "seed", "figures", "model_units", "paths", *SECTIONS}
SYNTH_GRID_KEYS = ("nx", "nz", "dx", "dz")


@dataclass
class LineAcquisition:
    """Surface line geometry written next to a synthetic model (metres, Hz)."""

    src_spacing: float
    rec_spacing: float
    depth: float
    frequencies_hz: list
    f_peak_hz: float = 10.0

    def __post_init__(self):
        if not (self.src_spacing > 0 and self.rec_spacing > 0):
            raise ConfigError("acquisition.src_spacing and rec_spacing must be positive")
        if self.depth < 0:
            raise ConfigError("acquisition.depth must be nonnegative")
        if not self.frequencies_hz or any(f <= 0 for f in self.frequencies_hz):
            raise ConfigError("acquisition.frequencies_hz must be a nonempty list of positive numbers")
        if not self.f_peak_hz > 0:
            raise ConfigError("acquisition.f_peak_hz must be positive")


@dataclass
class RunConfig:
    mode: str
    seed: int = 0
    figures: bool = True
    model_units: str = "velocity"
    paths: dict = field(default_factory=dict)
    denoise: DenoiseConfig | None = None
    fwi: FwiConfig | None = None
    pml: Pml | None = None
    synth: SynthSpec | None = None
    acquisition: LineAcquisition | None = None

    def resolve_paths(self, base_dir) -> "RunConfig":
        """Paths made absolute against ``base_dir``; required inputs must exist."""
        base = Path(base_dir)
        paths = {k: str((base / v).resolve()) for k, v in self.paths.items()}
        for key, p in paths.items():
            if not Path(p).is_file():
                raise ConfigError(f"paths.{key}: file {p} does not exist")
        return dataclasses.replace(self, paths=paths)


def _line_of(exc) -> str:
    mark = getattr(exc, "problem_mark", None)
    return f" at line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""


def _check_keys(section: str, given: dict, allowed) -> None:
    unknown = sorted(set(given) - set(allowed))
    if unknown:
        where = f"{section}." if section else ""
        raise ConfigError(f"unknown key(s) {', '.join(where + k for k in unknown)}")


def _build(cls, section: str, raw, convert=None):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{section}: expected a mapping")
    names = [f.name for f in dataclasses.fields(cls)]
    _check_keys(section, raw, names)
    kwargs = dict(raw)
    if convert:
        kwargs = convert(kwargs)
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        msg = str(exc)
        raise ConfigError(msg if msg.startswith(section) else f"{section}: {msg}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from exc


def _number(section, key, value, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    if kind is int:
        if float(value) != int(value):
            raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def _convert_denoise(kw):
    for key in ("noise_norm", "sigma_fixed", "tau", "beta", "tol", "cg_tol"):
        if key in kw and kw[key] is not None:
            kw[key] = _number("denoise", key, kw[key])
    for key in ("outer_iters", "cg_maxiter"):
        if key in kw:
            kw[key] = _number("denoise", key, kw[key], int)
    if "alpha" in kw and not isinstance(kw["alpha"], str):
        kw["alpha"] = _number("denoise", "alpha", kw["alpha"])
    return kw


def _convert_fwi(kw):
    for key in ("mu", "mu_growth", "tau", "beta", "sigma_fixed", "cg_tol"):
        if key in kw:
            kw[key] = _number("fwi", key, kw[key])
    for key in ("iters_per_freq", "cg_maxiter"):
        if key in kw:
            kw[key] = _number("fwi", key, kw[key], int)
    if "alpha" in kw:
        a = kw["alpha"]
        kw["alpha"] = [_number("fwi", "alpha", v) for v in a] if isinstance(a, list) else _number("fwi", "alpha", a)
    if "cycles" in kw:
        if not isinstance(kw["cycles"], list):
            raise ConfigError("fwi.cycles must be a list of [f_min, f_max, f_step]")
        cycles = []
        for c in kw["cycles"]:
            if not isinstance(c, list) or len(c) != 3:
                raise ConfigError(f"fwi.cycles entries must be [f_min, f_max, f_step], got {c!r}")
            cycles.append(tuple(_number("fwi", "cycles", v) for v in c))
        kw["cycles"] = cycles
    if kw.get("m_bounds") is not None:
        b = kw["m_bounds"]
        if not isinstance(b, list) or len(b) != 2:
            raise ConfigError("fwi.m_bounds must be [m_min, m_max] or null")
        kw["m_bounds"] = tuple(_number("fwi", "m_bounds", v) for v in b)
    return kw


def _convert_pml(kw):
    for key in ("power", "r_coeff"):
        if key in kw:
            kw[key] = _number("pml", key, kw[key])
    if "npml" in kw:
        kw["npml"] = _number("pml", "npml", kw["npml"], int)
    if kw.get("c_ref") is not None:
        kw["c_ref"] = _number("pml", "c_ref", kw["c_ref"])
    return kw


def _convert_acquisition(kw):
    for key in ("src_spacing", "rec_spacing", "depth", "f_peak_hz"):
        if key in kw:
            kw[key] = _number("acquisition", key, kw[key])
    if "frequencies_hz" in kw:
        f = kw["frequencies_hz"]
        if not isinstance(f, list):
            raise ConfigError("acquisition.frequencies_hz must be a list")
        kw["frequencies_hz"] = [_number("acquisition", "frequencies_hz", v) for v in f]
    return kw


def _build_synth(raw):
    if not isinstance(raw, dict):
        raise ConfigError("synth: expected a mapping")
    names = [f.name for f in dataclasses.fields(SynthSpec) if f.name != "grid"]
    _check_keys("synth", raw, list(names) + list(SYNTH_GRID_KEYS))
    kw = dict(raw)
    try:
        grid = Grid2D(
            _number("synth", "nx", kw.pop("nx", 256), int),
            _number("synth", "nz", kw.pop("nz", 256), int),
            _number("synth", "dx", kw.pop("dx", 1.0)),
            _number("synth", "dz", kw.pop("dz", 1.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"synth grid: {exc}") from exc
    for key, value in list(kw.items()):
        if key != "kind" and value is not None:
            kw[key] = _number("synth", key, value)
    return SynthSpec(grid=grid, **kw)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML run configuration."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse error{_line_of(exc)}: {getattr(exc, 'problem', exc)}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping with at least a 'mode' key")
    _check_keys("", raw, TOP_KEYS)
    mode = raw.get("mode")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")

    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError(f"seed must be an integer in [0, 2^64), got {seed!r}")
    figures = raw.get("figures", True)
    if not isinstance(figures, bool):
        raise ConfigError(f"figures must be true or false, got {figures!r}")
    units = raw.get("model_units", "velocity")
    if units not in MODEL_UNITS:
        raise ConfigError(f"model_units must be one of {MODEL_UNITS}, got {units!r}")

    paths = raw.get("paths") or {}
    if not isinstance(paths, dict) or not all(isinstance(v, str) for v in paths.values()):
        raise ConfigError("paths must map names to file paths")
    required, optional = MODE_PATHS[mode]
    _check_keys("paths", paths, required | optional)
    missing = sorted(required - set(paths))
    if missing:
        raise ConfigError(f"paths.{missing[0]} is required for mode {mode}")

    wanted = MODE_SECTIONS[mode]
    extra = sorted(s for s in SECTIONS if s in raw and s not in wanted)
    if extra:
        raise ConfigError(f"section {extra[0]} is not used by mode {mode}")

    cfg = RunConfig(mode=mode, seed=seed, figures=figures, model_units=units, paths=dict(paths))
    if "denoise" in wanted:
        cfg.denoise = _build(DenoiseConfig, "denoise", raw.get("denoise"), _convert_denoise)
    if "fwi" in wanted:
        cfg.fwi = _build(FwiConfig, "fwi", raw.get("fwi"), _convert_fwi)
    if "pml" in wanted:
        cfg.pml = _build(Pml, "pml", raw.get("pml"), _convert_pml)
    if "synth" in wanted:
        if raw.get("synth") is None:
            raise ConfigError("synth section is required for mode synth")
        cfg.synth = _build_synth(raw["synth"])
    if "acquisition" in wanted and raw.get("acquisition") is not None:
        cfg.acquisition = _build(LineAcquisition, "acquisition", raw["acquisition"], _convert_acquisition)
    return cfg


def to_dict(cfg: RunConfig) -> dict:
    out = {"mode": cfg.mode, "seed": cfg.seed, "figures": cfg.figures, "model_units": cfg.model_units}
    if cfg.paths:
        out["paths"] = dict(cfg.paths)
    if cfg.denoise is not None:
        out["denoise"] = dataclasses.asdict(cfg.denoise)
    if cfg.fwi is not None:
        d = dataclasses.asdict(cfg.fwi)
        d["cycles"] = [list(c) for c in cfg.fwi.cycles]
        d["m_bounds"] = list(cfg.fwi.m_bounds) if cfg.fwi.m_bounds is not None else None
        if isinstance(d["alpha"], tuple):
            d["alpha"] = list(d["alpha"])
        out["fwi"] = d
    if cfg.pml is not None:
        out["pml"] = dataclasses.asdict(cfg.pml)
    if cfg.synth is not None:
        d = dataclasses.asdict(cfg.synth)
        g = d.pop("grid")
        out["synth"] = {**{k: g[k] for k in SYNTH_GRID_KEYS}, **d}
    if cfg.acquisition is not None:
        out["acquisition"] = dataclasses.asdict(cfg.acquisition)
    return out


def serialize_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text)
