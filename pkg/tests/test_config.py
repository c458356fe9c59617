import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from anisotik.config import load_config, parse_config, serialize_config, to_dict
from anisotik.errors import ConfigError

DENOISE = """\
mode: denoise
seed: 7
paths:
  input: noisy.agf
denoise:
  alpha: auto
  noise_norm: 81.3
"""

FWI = """\
mode: fwi
seed: 1
paths:
  data: data.adt
  acquisition: acq.json
  initial_model: m0.agf
fwi:
  mu: 1.0
  alpha: [100.0, 30.0]
  cycles: [[3, 8, 1], [3, 8, 1]]
  iters_per_freq: 10
pml:
  npml: 10
"""


def test_minimal_denoise_auto_is_valid():
    cfg = parse_config(DENOISE)
    assert cfg.mode == "denoise"
    assert cfg.denoise.alpha == "auto"
    assert cfg.denoise.noise_norm == 81.3
    assert cfg.denoise.sigma_mode == "adaptive"
    assert cfg.figures is True


def test_fwi_defaults_and_lists():
    cfg = parse_config(FWI)
    assert cfg.fwi.cycles == [(3.0, 8.0, 1.0), (3.0, 8.0, 1.0)]
    assert cfg.fwi.alpha_for(1) == 30.0
    assert cfg.pml.npml == 10
    assert cfg.pml.c_ref is None


def test_empty_cycles_rejected():
    with pytest.raises(ConfigError, match="cycles nonempty"):
        parse_config(FWI.replace("[[3, 8, 1], [3, 8, 1]]", "[]"))


@pytest.mark.parametrize("text", [DENOISE, FWI, "mode: selftest\n",
                                  "mode: synth\nsynth: {kind: ramp, nx: 8, nz: 4}\n",
                                  "mode: synth\nsynth: {kind: homogeneous}\n"
                                  "acquisition: {src_spacing: 100, rec_spacing: 20, depth: 40, frequencies_hz: [3, 4]}\n"])
def test_round_trip(text):
    cfg = parse_config(text)
    again = parse_config(serialize_config(cfg))
    assert again == cfg
    assert serialize_config(again) == serialize_config(cfg)


@settings(max_examples=60, deadline=None)
@given(
    alpha=st.one_of(st.just("auto"), st.floats(0, 1e6)),
    outer=st.integers(1, 100),
    mode=st.sampled_from(["isotropic", "fixed", "adaptive"]),
    sigma=st.floats(0, 1),
    seed=st.integers(0, 2**63),
    figures=st.booleans(),
)
def test_round_trip_generated(alpha, outer, mode, sigma, seed, figures):
    doc = {
        "mode": "denoise", "seed": seed, "figures": figures,
        "paths": {"input": "x.agf"},
        "denoise": {"alpha": alpha, "noise_norm": 2.5, "outer_iters": outer,
                    "sigma_mode": mode, "sigma_fixed": sigma},
    }
    cfg = parse_config(yaml.safe_dump(doc))
    assert parse_config(serialize_config(cfg)) == cfg


@pytest.mark.parametrize(
    "base, mutation, field",
    [
        (DENOISE, ("noise_norm: 81.3", "noise_nrom: 81.3"), "noise_nrom"),
        (DENOISE, ("seed: 7", "seed: -1"), "seed"),
        (DENOISE, ("seed: 7", "seed: 7\nbogus: 1"), "bogus"),
        (DENOISE, ("alpha: auto", "alpha: -2"), "alpha"),
        (DENOISE, ("alpha: auto", "alpha: often"), "alpha"),
        (DENOISE, ("noise_norm: 81.3", "noise_norm: 81.3\n  outer_iters: 0"), "outer_iters"),
        (DENOISE, ("noise_norm: 81.3", "noise_norm: 81.3\n  sigma_fixed: 1.5"), "sigma_fixed"),
        (DENOISE, ("noise_norm: 81.3", "noise_norm: 81.3\n  sigma_mode: wobbly"), "sigma_mode"),
        (DENOISE, ("noise_norm: 81.3", "noise_norm: 81.3\n  tau: 0"), "tau"),
        (DENOISE, ("noise_norm: 81.3", "noise_norm: 81.3\n  beta: -1"), "beta"),
        (DENOISE, ("noise_norm: 81.3", "sigma_mode: fixed"), "noise_norm"),
        (DENOISE, ("  input: noisy.agf\n", ""), "input"),
        (DENOISE, ("mode: denoise", "mode: denoise\nfwi: {}"), "fwi"),
        (DENOISE, ("mode: denoise", "mode: denoise\nfigures: maybe"), "figures"),
        (DENOISE, ("mode: denoise", "mode: denoise\nmodel_units: feet"), "model_units"),
        (DENOISE, ("mode: denoise", "mode: wiggle"), "mode"),
        (FWI, ("mu: 1.0", "mu: 0.0"), "mu"),
        (FWI, ("mu: 1.0", "mu: 1.0\n  mu_growth: 0.5"), "mu_growth"),
        (FWI, ("mu: 1.0", "mu: 1.0\n  tau: -1"), "tau"),
        (FWI, ("mu: 1.0", "mu: 1.0\n  sigma_mode: spiky"), "sigma_mode"),
        (FWI, ("mu: 1.0", "mu: 1.0\n  m_bounds: [2.0, 1.0]"), "m_bounds"),
        (FWI, ("alpha: [100.0, 30.0]", "alpha: [100.0]"), "alpha"),
        (FWI, ("alpha: [100.0, 30.0]", "alpha: -1"), "alpha"),
        (FWI, ("iters_per_freq: 10", "iters_per_freq: 0"), "iters_per_freq"),
        (FWI, ("iters_per_freq: 10", "iters_per_freq: 2.5"), "iters_per_freq"),
        (FWI, ("[[3, 8, 1], [3, 8, 1]]", "[[8, 3, 1]]"), "cycles"),
        (FWI, ("[[3, 8, 1], [3, 8, 1]]", "[[3, 8]]"), "cycles"),
        (FWI, ("npml: 10", "npml: 0"), "npml"),
        (FWI, ("npml: 10", "npml: 10\n  r_coeff: 2.0"), "r_coeff"),
        (FWI, ("npml: 10", "npml: 10\n  c_ref: -5"), "c_ref"),
        (FWI, ("  data: data.adt\n", ""), "data"),
    ],
)
def test_mutations_rejected(base, mutation, field):
    text = base.replace(*mutation)
    assert text != base
    with pytest.raises(ConfigError, match=field):
        parse_config(text)


@pytest.mark.parametrize(
    "synth, field",
    [
        ("{kind: blobs}", "kind"),
        ("{kind: ramp, dip_deg: 95}", "dip_deg"),
        ("{kind: homogeneous, v0: -1}", "velocit"),
        ("{kind: homogeneous, nx: 0}", "nx"),
        ("{kind: homogeneous, nx: 8, wobble: 3}", "wobble"),
        ("{kind: homogeneous}\nacquisition: {src_spacing: 0, rec_spacing: 20, depth: 40, frequencies_hz: [3]}",
         "src_spacing"),
        ("{kind: homogeneous}\nacquisition: {src_spacing: 9, rec_spacing: 20, depth: 40, frequencies_hz: []}",
         "frequencies_hz"),
        ("{kind: homogeneous}\nacquisition: {src_spacing: 9, rec_spacing: 20, depth: 4}", "frequencies_hz"),
    ],
)
def test_synth_mutations_rejected(synth, field):
    with pytest.raises(ConfigError, match=field):
        parse_config(f"mode: synth\nsynth: {synth}\n")


def test_acquisition_only_in_synth_mode():
    with pytest.raises(ConfigError, match="acquisition"):
        parse_config(DENOISE + "acquisition: {src_spacing: 1, rec_spacing: 1, depth: 0, frequencies_hz: [1]}\n")


def test_parse_error_has_line():
    with pytest.raises(ConfigError, match="line 3, column 10"):
        parse_config("mode: denoise\npaths:\n  input: : x\n")


def test_paths_resolve_and_must_exist(tmp_path):
    (tmp_path / "noisy.agf").write_bytes(b"")
    cfg_file = tmp_path / "run.yaml"
    cfg_file.write_text(DENOISE)
    cfg = load_config(cfg_file).resolve_paths(tmp_path)
    assert cfg.paths["input"] == str((tmp_path / "noisy.agf").resolve())
    with pytest.raises(ConfigError, match="paths.input"):
        load_config(cfg_file).resolve_paths(tmp_path / "elsewhere")


def test_to_dict_is_plain_yaml():
    d = to_dict(parse_config(FWI))
    assert yaml.safe_load(yaml.safe_dump(d)) == d
