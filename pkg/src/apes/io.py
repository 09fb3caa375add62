"""Snapshots, checkpoints, monitor CSV, checksums and configuration files.

Snapshot layout::

    b"APES1\\n"
    <one line of JSON header>\\n
    \\n
    <raw little-endian float64 data>

The header records grid dims, ``h``, field names with parity tags, time,
step and byte order.  Each field's complex coefficients follow in header order,
flattened in C order over ``(kx, ky, m, re/im)`` with ``kx`` and ``ky`` in FFT
order (non-negative wavenumbers first).
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .monitors import MonitorRecord, record_columns
from .spectral import Grid, SpectralField3D
from .state import Params, State

MAGIC = b"APES1\n"
FORMAT_VERSION = 1


class SnapshotError(OSError):
    """Malformed or unreadable snapshot file."""


def _encode_fields(named: list[tuple[str, SpectralField3D]]) -> bytes:
    chunks = []
    for _, f in named:
        arr = np.empty(f.coeffs.shape + (2,), dtype="<f8")
        arr[..., 0] = f.coeffs.real
        arr[..., 1] = f.coeffs.imag
        chunks.append(arr.tobytes(order="C"))
    return b"".join(chunks)


def _write(path, header: dict, named) -> None:
    path = Path(path)
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    data = MAGIC + head + b"\n\n" + _encode_fields(named)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


def _header(state: State, names_parities, kind: str) -> dict:
    g = state.grid
    return {
        "format": FORMAT_VERSION,
        "kind": kind,
        "nx": g.nx,
        "ny": g.ny,
        "nz": g.nz,
        "h": g.h,
        "t": state.t,
        "step": state.step,
        "endianness": "little",
        "dtype": "float64",
        "order": "kx,ky,m,re/im",
        "fields": [{"name": n, "parity": p} for n, p in names_parities],
    }


def write_snapshot(path, state: State) -> None:
    named = [("v1", state.v1), ("v2", state.v2), ("T", state.T)]
    _write(path, _header(state, [(n, f.parity) for n, f in named], "snapshot"), named)


def write_checkpoint(path, state: State, prev_explicit=None) -> None:
    """Snapshot plus the previous explicit tendency, for a bit-exact restart."""
    named = [("v1", state.v1), ("v2", state.v2), ("T", state.T)]
    if prev_explicit is not None:
        g = state.grid
        named += [
            ("E1", SpectralField3D(g, "even", prev_explicit[0])),
            ("E2", SpectralField3D(g, "even", prev_explicit[1])),
            ("ET", SpectralField3D(g, "odd", prev_explicit[2])),
        ]
    _write(path, _header(state, [(n, f.parity) for n, f in named], "checkpoint"), named)


def _read(path) -> tuple[dict, dict]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise SnapshotError(f"cannot read {path}: {exc}") from exc
    if not raw.startswith(MAGIC):
        raise SnapshotError(f"{path} is not an APES1 snapshot")
    end = raw.find(b"\n\n", len(MAGIC))
    if end < 0:
        raise SnapshotError(f"{path}: header not terminated")
    try:
        header = json.loads(raw[len(MAGIC):end].decode())
    except ValueError as exc:
        raise SnapshotError(f"{path}: bad header: {exc}") from exc
    if header.get("endianness") != "little":
        raise SnapshotError(f"{path}: unsupported byte order")
    grid = Grid(header["nx"], header["ny"], header["nz"], header["h"])
    body = raw[end + 2:]
    n_each = grid.nx * grid.ny * grid.nz * 2
    specs = header["fields"]
    if len(body) != 8 * n_each * len(specs):
        raise SnapshotError(f"{path}: payload has {len(body)} bytes, expected {8 * n_each * len(specs)}")
    data = np.frombuffer(body, dtype="<f8").reshape(len(specs), grid.nx, grid.ny, grid.nz, 2)
    fields = {}
    for spec, block in zip(specs, data):
        coeffs = block[..., 0] + 1j * block[..., 1]
        fields[spec["name"]] = SpectralField3D(grid, spec["parity"], coeffs)
    return header, fields


def read_snapshot(path) -> tuple[State, dict]:
    header, fields = _read(path)
    try:
        state = State(fields["v1"], fields["v2"], fields["T"], header["t"], header.get("step", 0))
    except KeyError as exc:
        raise SnapshotError(f"{path}: missing field {exc}") from exc
    return state, header


def read_checkpoint(path):
    """Return ``(state, prev_explicit)``; the second item is None for plain snapshots."""
    header, fields = _read(path)
    state = State(fields["v1"], fields["v2"], fields["T"], header["t"], header.get("step", 0))
    prev = None
    if "E1" in fields:
        prev = (fields["E1"].coeffs, fields["E2"].coeffs, fields["ET"].coeffs)
    return state, prev


# ---------------------------------------------------------------------------
# Monitor CSV
# ---------------------------------------------------------------------------


def format_float(x: float) -> str:
    return f"{x:.17g}"


class MonitorWriter:
    """Streams :class:`MonitorRecord` rows; the first line names the columns."""

    def __init__(self, path, q_list, append: bool = False):
        self.path = Path(path)
        self.q_list = tuple(q_list)
        exists = self.path.exists() and self.path.stat().st_size > 0
        self._fh = open(self.path, "a" if append else "w", encoding="ascii", newline="")
        if not (append and exists):
            self._fh.write(",".join(record_columns(self.q_list)) + "\n")

    def write(self, rec: MonitorRecord) -> None:
        self._fh.write(",".join(format_float(v) for v in rec.values()) + "\n")
        self._fh.flush()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()


def read_monitor_csv(path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    with open(path, encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


# ---------------------------------------------------------------------------
# Checksums and manifest
# ---------------------------------------------------------------------------

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of a byte string."""
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _MASK
    return h


def file_checksum(path) -> str:
    h = FNV_OFFSET
    with open(path, "rb") as fh:
        while chunk := fh.read(1 << 20):
            for b in chunk:
                h = ((h ^ b) * FNV_PRIME) & _MASK
    return f"{h:016x}"


def write_manifest(path, manifest: dict, files) -> dict:
    inventory = []
    for f in files:
        f = Path(f)
        if f.exists():
            inventory.append({"path": f.name, "bytes": f.stat().st_size, "fnv1a64": file_checksum(f)})
    manifest = dict(manifest)
    manifest["files"] = inventory
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


class ConfigError(ValueError):
    """Invalid configuration key or value."""


def _convert(name: str, raw: str, default):
    raw = raw.strip()
    try:
        if name == "q_list":
            parts = raw.replace(",", " ").split()
            return tuple(float(p) if "." in p or "e" in p.lower() else int(p) for p in parts)
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment.  Unknown keys are errors."""
    defaults = {f.name: f.default for f in dataclasses.fields(Params)}
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "resolution":
            parts = value.split()
            if len(parts) != 3:
                raise ConfigError(f"line {lineno}: resolution needs three integers")
            out["nx"], out["ny"], out["nz"] = (int(p) for p in parts)
            continue
        if key not in defaults:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _convert(key, value, defaults[key])
    return out


def load_config(path) -> dict:
    return parse_config_text(Path(path).read_text())
