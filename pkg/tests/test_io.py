"""Snapshot format, monitor CSV, checksums and configuration parsing."""

import json

import numpy as np
import pytest

from apes.io import (
    MAGIC,
    ConfigError,
    MonitorWriter,
    SnapshotError,
    file_checksum,
    fnv1a64,
    format_float,
    parse_config_text,
    read_checkpoint,
    read_monitor_csv,
    read_snapshot,
    write_checkpoint,
    write_manifest,
    write_snapshot,
)
from apes.monitors import monitor_report, record_columns
from apes.state import Params


class TestChecksum:
    @pytest.mark.parametrize(
        "data,expected",
        [(b"", 0xCBF29CE484222325), (b"a", 0xAF63DC4C8601EC8C), (b"foobar", 0x85944171F73967E8)],
    )
    def test_reference_vectors(self, data, expected):
        assert fnv1a64(data) == expected

    def test_file_checksum(self, tmp_path):
        f = tmp_path / "x.bin"
        f.write_bytes(b"foobar")
        assert file_checksum(f) == "85944171f73967e8"


class TestSnapshot:
    def test_roundtrip(self, state, tmp_path):
        path = tmp_path / "s.apes"
        write_snapshot(path, state.with_fields(t=0.25, step=7))
        back, header = read_snapshot(path)
        assert back.t == 0.25 and back.step == 7
        for a, b in zip(state.fields(), back.fields()):
            assert np.array_equal(a.coeffs, b.coeffs) and a.parity == b.parity
        assert header["fields"][2] == {"name": "T", "parity": "odd"}

    def test_layout(self, state, tmp_path):
        """Magic, one JSON line, blank line, then little-endian (kx, ky, m, re/im)."""
        path = tmp_path / "s.apes"
        write_snapshot(path, state)
        raw = path.read_bytes()
        assert raw.startswith(MAGIC)
        end = raw.index(b"\n\n", len(MAGIC))
        header = json.loads(raw[len(MAGIC):end])
        assert header["endianness"] == "little"
        data = np.frombuffer(raw[end + 2:], "<f8")
        g = state.grid
        first = data[: g.nx * g.ny * g.nz * 2].reshape(g.nx, g.ny, g.nz, 2)
        assert np.array_equal(first[..., 0], state.v1.coeffs.real)
        assert np.array_equal(first[..., 1], state.v1.coeffs.imag)

    def test_checkpoint(self, state, tmp_path):
        g = state.grid
        prev = tuple(np.full(g.shape, i + 1j) for i in range(3))
        write_checkpoint(tmp_path / "c.apes", state, prev)
        s, p = read_checkpoint(tmp_path / "c.apes")
        assert all(np.array_equal(a, b) for a, b in zip(p, prev))
        write_snapshot(tmp_path / "s.apes", state)
        assert read_checkpoint(tmp_path / "s.apes")[1] is None

    def test_corrupt(self, state, tmp_path):
        bad = tmp_path / "bad.apes"
        bad.write_bytes(b"nope")
        with pytest.raises(SnapshotError):
            read_snapshot(bad)
        write_snapshot(tmp_path / "s.apes", state)
        raw = (tmp_path / "s.apes").read_bytes()
        (tmp_path / "t.apes").write_bytes(raw[:-8])
        with pytest.raises(SnapshotError):
            read_snapshot(tmp_path / "t.apes")
        with pytest.raises(SnapshotError):
            read_snapshot(tmp_path / "missing.apes")


class TestMonitorCsv:
    def test_header_and_precision(self, params, state, tmp_path):
        w = MonitorWriter(tmp_path / "m.csv", params.q_list)
        rec = monitor_report(state, params)
        w.write(rec)
        w.close()
        header, data = read_monitor_csv(tmp_path / "m.csv")
        assert header == record_columns(params.q_list)
        assert list(data[0]) == rec.values()

    def test_format_float_roundtrips(self):
        for x in (0.1, 1 / 3, 1e-300, 123456789.123456789):
            assert float(format_float(x)) == x


class TestConfig:
    def test_parse(self):
        cfg = parse_config_text("""
            # comment
            resolution = 24 24 12
            epsilon = 0.01   # trailing comment
            q_list = 4, 8
            scheme = imex_euler
        """)
        assert cfg == {"nx": 24, "ny": 24, "nz": 12, "epsilon": 0.01, "q_list": (4, 8),
                       "scheme": "imex_euler"}
        Params(**cfg)

    def test_every_field_addressable(self):
        import dataclasses

        for f in dataclasses.fields(Params):
            if f.name in ("q_list", "init_file", "init", "scheme"):
                continue
            assert f.name in parse_config_text(f"{f.name} = {f.default}")

    @pytest.mark.parametrize("text", ["bogus = 1", "dt 0.1", "dt = fast", "resolution = 8 8"])
    def test_errors(self, text):
        with pytest.raises(ConfigError):
            parse_config_text(text)


def test_manifest_lists_files(tmp_path):
    a = tmp_path / "a.txt"
    a.write_text("x")
    m = write_manifest(tmp_path / "manifest.json", {"status": "ok"}, [a, tmp_path / "gone"])
    assert m["files"] == [{"path": "a.txt", "bytes": 1, "fnv1a64": file_checksum(a)}]
    assert json.loads((tmp_path / "manifest.json").read_text())["status"] == "ok"
