"""Command-line entry point ``aniso-tik``.

::

    aniso-tik denoise  --config run.yaml [--out-dir DIR] [--seed N] [--no-figures]
    aniso-tik fwi      --config run.yaml ...
    aniso-tik forward  --config run.yaml ...
    aniso-tik synth    --config run.yaml ...
    aniso-tik selftest [--config run.yaml] ...

Exit codes: 0 success, 1 invalid configuration, 2 solver failure or failed
self-test, 3 file or format error. Relative paths in the config resolve
against the directory of the config file.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import formats
from .config import RunConfig, load_config, serialize_config
from .denoise import denoise, snr_db
from .errors import ConfigError, SolverError
from .fwi import continuation_driver, relative_error
from .grid import ScalarField2D
from .helmholtz import Acquisition, slowness2_to_velocity, synthesize_data, velocity_to_slowness2
from .selftest import run_all
from .synth import synth_with_noise

log = logging.getLogger("anisotik")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3


def _plotting(cfg: RunConfig):
    if not cfg.figures:
        return None
    from . import plotting

    return plotting


def _read_field(path) -> ScalarField2D:
    f = formats.read_agf(path)
    if not isinstance(f, ScalarField2D):
        raise formats.FormatError(f"{path}: expected a real64 field")
    return f


def _to_slowness2(values, units):
    if np.any(values <= 0):
        raise ConfigError("model values must be positive")
    return velocity_to_slowness2(values) if units == "velocity" else values


def _from_slowness2(m, units):
    return slowness2_to_velocity(m) if units == "velocity" else m


def run_denoise(cfg: RunConfig, out: Path) -> int:
    noisy = _read_field(cfg.paths["input"])
    grid = noisy.grid
    reference = None
    if "reference" in cfg.paths:
        ref = _read_field(cfg.paths["reference"])
        if ref.grid != grid:
            raise ConfigError(f"paths.reference: grid {ref.grid} does not match input grid {grid}")
        reference = ref.values
    m, p, rep = denoise(noisy.values, grid, cfg.denoise, reference=reference)
    formats.write_agf(out / "denoised.agf", ScalarField2D(grid, m))
    formats.write_agf(out / "theta.agf", ScalarField2D(grid, p.theta))
    formats.write_agf(out / "sigma.agf", ScalarField2D(grid, p.sigma))
    formats.write_metrics(out / "metrics.csv", {
        "snr_db": rep.snr_db,
        "reg_value_final": rep.reg_value_final,
        "alpha_used": rep.alpha_used,
        "residual_norm": rep.residual_norm,
        "iterations_run": rep.iterations_run,
    })
    if rep.probes:
        with open(out / "alpha_probes.csv", "w") as fh:
            fh.write("alpha,residual_norm\n")
            for a, r in rep.probes:
                fh.write(f"{a!r},{r!r}\n")
    plt = _plotting(cfg)
    if plt is not None:
        panels = [("input", noisy.values), ("denoised", m)]
        if reference is not None:
            panels.insert(0, ("reference", reference))
        plt.field_panels(out / "denoise.png", grid, panels,
                         suptitle=f"{cfg.denoise.sigma_mode}, alpha={rep.alpha_used:.4g}")
        plt.tilt_weight(out / "theta_sigma.png", grid, p.theta, p.sigma)
    log.info("denoise: alpha=%.4g snr=%.3f dB iterations=%d", rep.alpha_used, rep.snr_db, rep.iterations_run)
    return EXIT_OK


def _load_acquisition(path):
    try:
        return Acquisition.load(path)
    except ValueError as exc:  # bad JSON or an invalid geometry
        raise formats.FormatError(f"{path}: {exc}") from exc


def run_fwi(cfg: RunConfig, out: Path) -> int:
    start = _read_field(cfg.paths["initial_model"])
    grid = start.grid
    acq = _load_acquisition(cfg.paths["acquisition"])
    data = formats.read_adt(cfg.paths["data"])
    m0 = _to_slowness2(start.values, cfg.model_units)
    m_true = None
    if "true_model" in cfg.paths:
        true = _read_field(cfg.paths["true_model"])
        if true.grid != grid:
            raise ConfigError(f"paths.true_model: grid {true.grid} does not match initial model grid {grid}")
        m_true = _to_slowness2(true.values, cfg.model_units)
    plt = _plotting(cfg)
    snapshots = []

    def on_cycle(c, state):
        k = c + 1
        model = _from_slowness2(state.m, cfg.model_units)
        formats.write_agf(out / f"model_cycle{k}.agf", ScalarField2D(grid, model))
        formats.write_agf(out / f"theta_cycle{k}.agf", ScalarField2D(grid, state.p.theta))
        formats.write_agf(out / f"sigma_cycle{k}.agf", ScalarField2D(grid, state.p.sigma))
        formats.write_history(out / "history.csv", state.history)
        snapshots.append((f"cycle {k}", model))

    m, state = continuation_driver(m0, grid, acq, data, cfg.fwi, cfg.pml, m_true=m_true, on_cycle=on_cycle)
    formats.write_agf(out / "model_final.agf", ScalarField2D(grid, _from_slowness2(m, cfg.model_units)))
    metrics = {"iterations": state.iteration, "cycles": len(cfg.fwi.cycles)}
    last = state.history[-1]
    if m_true is not None:
        metrics["initial_relative_error"] = relative_error(m0, m_true)
        metrics["final_relative_error"] = last["relative_error"]
    metrics["final_data_residual"] = last["data_residual"]
    metrics["final_waveeq_residual"] = last["waveeq_residual"]
    formats.write_metrics(out / "metrics.csv", metrics)
    if plt is not None:
        panels = [("initial", start.values)] + snapshots
        if m_true is not None:
            panels.append(("true", _from_slowness2(m_true, cfg.model_units)))
        plt.field_panels(out / "models.png", grid, panels, cmap="jet")
        plt.tilt_weight(out / "theta_sigma.png", grid, state.p.theta, state.p.sigma)
        plt.history_curves(out / "history.png", state.history)
    log.info("fwi: %d iterations, final %s", state.iteration, last)
    return EXIT_OK


def run_forward(cfg: RunConfig, out: Path) -> int:
    model = _read_field(cfg.paths["model"])
    acq = _load_acquisition(cfg.paths["acquisition"])
    m = _to_slowness2(model.values, cfg.model_units)
    pml = cfg.pml
    if pml.c_ref is None:
        pml = dataclasses.replace(pml, c_ref=float(slowness2_to_velocity(m.min())))
    data = synthesize_data(m, model.grid, acq, pml)
    formats.write_adt(out / "data.adt", data)
    formats.write_metrics(out / "metrics.csv", {
        "n_freq": data.shape[0], "n_src": data.shape[1], "n_rec": data.shape[2],
        "data_norm": float(np.linalg.norm(data)),
    })
    plt = _plotting(cfg)
    if plt is not None:
        plt.data_amplitude(out / "data.png", data, acq.frequencies_hz)
    return EXIT_OK


def run_synth(cfg: RunConfig, out: Path) -> int:
    spec = cfg.synth
    clean, noisy, e = synth_with_noise(spec, cfg.seed)
    grid = spec.grid
    formats.write_agf(out / "model.agf", ScalarField2D(grid, clean))
    metrics = {"min": float(clean.min()), "max": float(clean.max())}
    if noisy is not None:
        formats.write_agf(out / "noisy.agf", ScalarField2D(grid, noisy))
        metrics["noise_norm"] = float(np.linalg.norm(e))
        metrics["snr_db"] = snr_db(clean, noisy)
    if cfg.acquisition is not None:
        a = cfg.acquisition
        Acquisition.surface_line(grid, a.src_spacing, a.rec_spacing, a.depth,
                                 a.frequencies_hz, a.f_peak_hz).save(out / "acquisition.json")
    formats.write_metrics(out / "metrics.csv", metrics)
    plt = _plotting(cfg)
    if plt is not None:
        panels = [("model", clean)] + ([("noisy", noisy)] if noisy is not None else [])
        cmap = "jet" if spec.kind.endswith("velocity") or spec.kind in ("two_layer", "homogeneous") else "gray"
        plt.field_panels(out / "model.png", grid, panels, cmap=cmap, suptitle=spec.kind)
    return EXIT_OK


def run_selftest(cfg: RunConfig, out: Path) -> int:
    checks = run_all(cfg.seed)
    with open(out / "selftest.csv", "w") as fh:
        fh.write("check,value,tol,passed\n")
        for c in checks:
            fh.write(f"{c.name},{c.value!r},{c.tol!r},{int(c.passed)}\n")
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.3e} (tol {c.tol:.0e})")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_SOLVER


RUNNERS = {
    "denoise": run_denoise,
    "fwi": run_fwi,
    "forward": run_forward,
    "synth": run_synth,
    "selftest": run_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aniso-tik", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in RUNNERS:
        p = sub.add_parser(mode)
        p.add_argument("--config", required=mode != "selftest", help="YAML run configuration")
        p.add_argument("--out-dir", default=None, help="output directory (default: out/<mode> next to the config)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--no-figures", action="store_true", help="skip PNG figures")
        p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def prepare(args) -> tuple[RunConfig, Path]:
    if args.config is None:
        cfg, base = RunConfig(mode=args.mode), Path.cwd()
    else:
        cfg = load_config(args.config)
        base = Path(args.config).resolve().parent
        if cfg.mode != args.mode:
            raise ConfigError(f"config mode {cfg.mode!r} does not match command {args.mode!r}")
    cfg = cfg.resolve_paths(base)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError(f"seed must be an integer in [0, 2^64), got {args.seed}")
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.no_figures:
        cfg = dataclasses.replace(cfg, figures=False)
    out = Path(args.out_dir) if args.out_dir else base / "out" / args.mode
    return cfg, out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=(logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, out = prepare(args)
        formats.ensure_dir(out)
        (out / "config.yaml").write_text(serialize_config(cfg))
        return RUNNERS[cfg.mode](cfg, out)
    except ConfigError as exc:
        print(f"aniso-tik: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"aniso-tik: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (OSError, formats.FormatError) as exc:
        print(f"aniso-tik: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
