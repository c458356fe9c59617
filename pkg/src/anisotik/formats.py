"""Binary readers and writers for gridded fields (AGF1) and data tables (ADT1),
plus the metric and history CSV files.

AGF1::

    AGF1 <nx> <nz> <dx> <dz> <kind>\\n
    <little-endian payload, row-major, x fastest>

``kind`` is ``real64`` or ``complex64x2`` (interleaved re/im float64 pairs).

ADT1::

    ADT1 <n_freq> <n_src> <n_rec>\\n
    <n_freq * n_src records of n_rec complex samples, frequency-major>
"""

from __future__ import annotations

import csv
import os
from pathlib import Path

import numpy as np

from .grid import ComplexField2D, Grid2D, ScalarField2D

HISTORY_COLUMNS = (
    "iteration",
    "cycle",
    "freq_hz",
    "relative_error",
    "data_residual",
    "waveeq_residual",
    "reg_value",
)

_KINDS = {"real64": np.dtype("<f8"), "complex64x2": np.dtype("<c16")}


class FormatError(ValueError):
    """Malformed file contents."""


def _read_header(fh, path) -> list[str]:
    line = fh.readline(256)
    if not line.endswith(b"\n"):
        raise FormatError(f"{path}: missing or overlong header line")
    try:
        return line.decode("ascii").split()
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: header is not ASCII") from exc


def write_agf(path, field: ScalarField2D | ComplexField2D) -> None:
    g = field.grid
    if np.iscomplexobj(field.values):
        kind = "complex64x2"
    else:
        kind = "real64"
    payload = np.ascontiguousarray(field.values, dtype=_KINDS[kind])
    header = f"AGF1 {g.nx} {g.nz} {g.dx!r} {g.dz!r} {kind}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_agf(path) -> ScalarField2D | ComplexField2D:
    with open(path, "rb") as fh:
        tokens = _read_header(fh, path)
        raw = fh.read()
    if len(tokens) != 6 or tokens[0] != "AGF1":
        raise FormatError(f"{path}: expected 'AGF1 nx nz dx dz kind' header, got {tokens}")
    _, nx, nz, dx, dz, kind = tokens
    if kind not in _KINDS:
        raise FormatError(f"{path}: unknown kind {kind!r}")
    try:
        grid = Grid2D(int(nx), int(nz), float(dx), float(dz))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    dtype = _KINDS[kind]
    if len(raw) != grid.n * dtype.itemsize:
        raise FormatError(f"{path}: payload has {len(raw)} bytes, expected {grid.n * dtype.itemsize}")
    values = np.frombuffer(raw, dtype=dtype).reshape(grid.shape).astype(dtype.newbyteorder("="))
    if kind == "real64":
        return ScalarField2D(grid, values)
    return ComplexField2D(grid, values)


def write_adt(path, data: np.ndarray) -> None:
    """Write a complex data cube of shape (n_freq, n_src, n_rec)."""
    data = np.asarray(data)
    if data.ndim != 3:
        raise ValueError(f"data must have shape (n_freq, n_src, n_rec), got {data.shape}")
    nf, ns, nr = data.shape
    with open(path, "wb") as fh:
        fh.write(f"ADT1 {nf} {ns} {nr}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(data, dtype="<c16").tobytes())


def read_adt(path) -> np.ndarray:
    with open(path, "rb") as fh:
        tokens = _read_header(fh, path)
        raw = fh.read()
    if len(tokens) != 4 or tokens[0] != "ADT1":
        raise FormatError(f"{path}: expected 'ADT1 n_freq n_src n_rec' header, got {tokens}")
    nf, ns, nr = (int(t) for t in tokens[1:])
    if len(raw) != nf * ns * nr * 16:
        raise FormatError(f"{path}: payload has {len(raw)} bytes, expected {nf * ns * nr * 16}")
    return np.frombuffer(raw, dtype="<c16").reshape(nf, ns, nr).astype(np.complex128)


def write_metrics(path, metrics: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value"])
        for k, v in metrics.items():
            w.writerow([k, _fmt(v)])


def write_history(path, rows) -> None:
    """Write FWI history rows (mappings keyed by :data:`HISTORY_COLUMNS`)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in HISTORY_COLUMNS])


def read_csv_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
