import json
import struct

import numpy as np
import pytest

from bridgefloer.dump import (MAGIC, TrajectoryLog, dump_spectral_field, load_spectral_field, read_field,
                              read_log, write_field)
from bridgefloer.spectral import SpectralField, TorusGrid


@pytest.mark.parametrize("layout", ["real-space row-major", "coeffs centered"])
@pytest.mark.parametrize("complex_", [False, True])
def test_roundtrip(tmp_path, rng, layout, complex_):
    vals = rng.standard_normal((3, 8, 10))
    if complex_:
        vals = vals + 1j * rng.standard_normal((3, 8, 10))
    path = tmp_path / "f.bfsd"
    write_field(path, vals, layout, meta={"note": "x"})
    header, back = read_field(path)
    assert header["layout"] == layout and header["meta"]["note"] == "x"
    assert np.iscomplexobj(back) == complex_
    assert np.abs(back - vals).max() < 1e-13


def test_byte_layout(tmp_path):
    vals = np.arange(64, dtype=float).reshape(8, 8)
    path = tmp_path / "f.bfsd"
    write_field(path, vals)
    raw = path.read_bytes()
    assert raw[:4] == MAGIC
    version, hlen = struct.unpack("<HI", raw[4:10])
    header = json.loads(raw[10:10 + hlen])
    assert version == 1 and header["dtype"] == "<f8" and header["components"] == 1
    payload = np.frombuffer(raw[10 + hlen:], "<f8")
    assert np.array_equal(payload, vals.ravel())


def test_centered_zero_mode_position(tmp_path):
    vals = np.full((1, 8, 8), 2.5)
    path = tmp_path / "c.bfsd"
    write_field(path, vals, "coeffs centered")
    raw = path.read_bytes()
    hlen = struct.unpack("<HI", raw[4:10])[1]
    c = np.frombuffer(raw[10 + hlen:], "<c16").reshape(8, 8)
    assert c[4, 4] == pytest.approx(2.5)
    assert np.abs(c).sum() == pytest.approx(2.5)


def test_spectral_field_helpers(tmp_path):
    g = TorusGrid(8, 8)
    f = SpectralField.from_function(g, lambda a, b: np.sin(a) * np.cos(2 * b))
    dump_spectral_field(tmp_path / "s.bfsd", f, "coeffs centered", origin="test")
    back = load_spectral_field(tmp_path / "s.bfsd")
    assert np.abs(back.values - f.values).max() < 1e-14


def test_rejects_garbage(tmp_path):
    p = tmp_path / "bad"
    p.write_bytes(b"nope")
    with pytest.raises(ValueError):
        read_field(p)


def test_trajectory_log(tmp_path):
    path = tmp_path / "log.jsonl"
    with TrajectoryLog(path) as log:
        log.append(s=0.0, action=1.0)
        log.append(s=0.1, action=0.5)
    assert [r["s"] for r in read_log(path)] == [0.0, 0.1]
