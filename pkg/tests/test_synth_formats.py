import csv

import numpy as np
import pytest

from anisotik.denoise import snr_db
from anisotik.errors import ConfigError
from anisotik.formats import (
    HISTORY_COLUMNS,
    FormatError,
    read_adt,
    read_agf,
    read_csv_rows,
    write_adt,
    write_agf,
    write_history,
    write_metrics,
)
from anisotik.grid import ComplexField2D, Grid2D, ScalarField2D
from anisotik.synth import KINDS, SynthSpec, synth_model, synth_with_noise


def test_homogeneous_is_constant():
    v = synth_model(SynthSpec("homogeneous", Grid2D(9, 7), v0=2100.0))
    assert np.all(v == 2100.0)


def test_linear_velocity_arithmetic():
    g = Grid2D(5, 101, 10.0, 10.0)
    v = synth_model(SynthSpec("layered_velocity", g, v0=1500.0, v_gradient=0.8))
    assert v[100, 2] == pytest.approx(2300.0, abs=1e-9)
    np.testing.assert_allclose(v[:, 0], 1500.0 + 0.8 * 10.0 * np.arange(101))


@pytest.mark.parametrize("seed", [0, 1, 12345])
def test_noise_at_exact_snr(seed):
    clean, noisy, e = synth_with_noise(SynthSpec("layers_fault_image", Grid2D(64, 48), noise_snr_db=5.0), seed)
    assert snr_db(clean, noisy) == pytest.approx(5.0, abs=0.01)
    np.testing.assert_array_equal(noisy, clean + e)


@pytest.mark.parametrize("kind", KINDS)
def test_generators_are_pure(kind):
    spec = SynthSpec(kind, Grid2D(40, 30, 20.0, 20.0), noise_snr_db=10.0)
    a = synth_with_noise(spec, 9)
    b = synth_with_noise(spec, 9)
    for x, y in zip(a, b):
        assert x.tobytes() == y.tobytes()
    assert np.all(np.isfinite(a[0]))
    assert not np.array_equal(synth_with_noise(spec, 10)[1], a[1])


def test_velocity_models_in_range():
    g = Grid2D(101, 51, 20.0, 20.0)
    v = synth_model(SynthSpec("layers_fault_velocity", g, v_min=1500.0, v_max=3500.0))
    assert v.min() >= 1500.0 and v.max() <= 3500.0
    two = synth_model(SynthSpec("two_layer", g, v_min=1800.0, v_max=2600.0, interface_depth=500.0))
    assert set(np.unique(two)) == {1800.0, 2600.0}


def test_spec_validation():
    g = Grid2D(4, 4)
    with pytest.raises(ConfigError):
        SynthSpec("homogeneous", g, v0=0.0)
    with pytest.raises(ConfigError):
        SynthSpec("ramp", g, dip_deg=-90.0)
    with pytest.raises(ConfigError):
        SynthSpec("layered_velocity", g, v_min=3000.0, v_max=2000.0)


@pytest.mark.parametrize("complex_payload", [False, True])
def test_agf_round_trip_bit_exact(tmp_path, rng, complex_payload):
    g = Grid2D(13, 7, 2.5, 0.1)
    values = rng.standard_normal(g.shape)
    if complex_payload:
        values = values + 1j * rng.standard_normal(g.shape)
        field = ComplexField2D(g, values)
    else:
        field = ScalarField2D(g, values)
    path = tmp_path / "f.agf"
    write_agf(path, field)
    back = read_agf(path)
    assert back.grid == g
    assert back.values.tobytes() == values.tobytes()


def test_adt_size_and_round_trip(tmp_path, rng):
    data = rng.standard_normal((2, 3, 4)) + 1j * rng.standard_normal((2, 3, 4))
    path = tmp_path / "d.adt"
    write_adt(path, data)
    header = len(b"ADT1 2 3 4\n")
    assert path.stat().st_size == header + 2 * 3 * 4 * 16
    assert read_adt(path).tobytes() == data.tobytes()


def test_malformed_files(tmp_path):
    bad = tmp_path / "bad.agf"
    bad.write_bytes(b"AGF1 4 4 1.0 1.0 real64\n" + b"\0" * 10)
    with pytest.raises(FormatError, match="bad.agf"):
        read_agf(bad)
    bad.write_bytes(b"GIF89a")
    with pytest.raises(FormatError):
        read_agf(bad)
    with pytest.raises(FormatError):
        read_adt(bad)
    with pytest.raises(FileNotFoundError, match="missing"):
        read_agf(tmp_path / "missing.agf")


def test_history_csv_header(tmp_path):
    rows = [dict(zip(HISTORY_COLUMNS, (1, 0, 3.0, 12.5, 0.1, 2.0, 0.3)))]
    path = tmp_path / "history.csv"
    write_history(path, rows)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        assert tuple(next(reader)) == HISTORY_COLUMNS
        assert len(list(reader)) == 1
    assert float(read_csv_rows(path)[0]["relative_error"]) == 12.5


def test_metrics_csv(tmp_path):
    path = tmp_path / "m.csv"
    write_metrics(path, {"snr_db": 0.1 + 0.2, "iterations_run": 4})
    rows = read_csv_rows(path)
    assert [r["metric"] for r in rows] == ["snr_db", "iterations_run"]
    assert float(rows[0]["value"]) == 0.1 + 0.2
