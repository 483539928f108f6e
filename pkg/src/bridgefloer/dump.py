"""Spectral field dumps and trajectory logs.

Dump layout (all integers little-endian)::

    offset 0   4 bytes   magic b"BFSD"
    offset 4   uint16    format version (1)
    offset 6   uint32    header length H in bytes
    offset 10  H bytes   UTF-8 JSON header
    offset 10+H          payload

The JSON header carries ``n1``, ``n2``, ``components``, ``layout`` (one of
``"real-space row-major"`` or ``"coeffs centered"``), ``dtype`` (``"<f8"`` or
``"<c16"``) and a free-form ``meta`` object. The payload is the C-order array of
shape ``(components, n1, n2)`` in that dtype. With ``"coeffs centered"`` the
payload holds Fourier-series coefficients after ``fftshift`` over the last two
axes, so mode (0, 0) sits at index ``(n1//2, n2//2)``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .spectral import SpectralField, TorusGrid, forward, inverse

MAGIC = b"BFSD"
VERSION = 1
LAYOUTS = ("real-space row-major", "coeffs centered")


def write_field(path, values: np.ndarray, layout: str = "real-space row-major", meta: dict | None = None) -> None:
    values = np.asarray(values)
    if values.ndim == 2:
        values = values[None]
    if layout not in LAYOUTS:
        raise ValueError(f"layout must be one of {LAYOUTS}")
    payload = values
    if layout == "coeffs centered":
        payload = np.fft.fftshift(forward(values), axes=(-2, -1))
    dtype = "<c16" if np.iscomplexobj(payload) else "<f8"
    payload = np.ascontiguousarray(payload, dtype=dtype)
    header = {
        "n1": int(values.shape[-2]),
        "n2": int(values.shape[-1]),
        "components": int(values.shape[0]),
        "layout": layout,
        "dtype": dtype,
        "meta": {"real": bool(np.isrealobj(values)), **(meta or {})},
    }
    raw = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", VERSION, len(raw)))
        fh.write(raw)
        fh.write(payload.tobytes())


def read_field(path) -> tuple[dict, np.ndarray]:
    """Return ``(header, real-space samples)`` regardless of stored layout."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a spectral field dump")
    version, hlen = struct.unpack("<HI", data[4:10])
    if version != VERSION:
        raise ValueError(f"{path}: unsupported dump version {version}")
    header = json.loads(data[10:10 + hlen])
    shape = (header["components"], header["n1"], header["n2"])
    arr = np.frombuffer(data[10 + hlen:], dtype=header["dtype"]).reshape(shape)
    if header["layout"] == "coeffs centered":
        arr = inverse(np.fft.ifftshift(arr, axes=(-2, -1)))
        if header["meta"].get("real", False):
            arr = arr.real
    return header, np.array(arr)


def dump_spectral_field(path, f: SpectralField, layout: str = "real-space row-major", **meta) -> None:
    write_field(path, f.values, layout, meta)


def load_spectral_field(path, d: int = 1) -> SpectralField:
    header, vals = read_field(path)
    return SpectralField(TorusGrid(header["n1"], header["n2"], d), vals)


class TrajectoryLog:
    """Append-only JSON-lines log: one record per flow sample."""

    def __init__(self, path, fresh: bool = False):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w" if fresh else "a")

    def append(self, **record) -> None:
        self._fh.write(json.dumps(record) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_log(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
