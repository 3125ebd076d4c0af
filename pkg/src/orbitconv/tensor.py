"""Spatial transforms on the last two axes of an array, and the EITF file format.

Tensors are plain float64 numpy arrays. Activations are laid out N x C x H x W
and kernels Cout x Cin x kH x kW; every transform here only touches the two
trailing (spatial) axes.

EITF layout, little-endian::

    b"EITF" | version u8 = 1 | dtype u8 | ndim u16 | ndim x u32 dims | payload

with dtype 1 = f32, 2 = f64, 3 = u8 and the payload in row-major order.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

MAGIC = b"EITF"
VERSION = 1
DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8"), 3: np.dtype("u1")}
DTYPE_CODES = {"f32": 1, "f64": 2, "u8": 3}

# outer ring of a 3x3 slice, counterclockwise starting at the top-left corner
RING = [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2), (1, 2), (0, 2), (0, 1)]


class TensorFormatError(ValueError):
    pass


def _check_spatial(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t)
    if t.ndim < 2:
        raise ValueError(f"need at least 2 dims, got shape {t.shape}")
    return t


def rot90(t, quarter_turns: int = 1) -> np.ndarray:
    """Rotate the trailing H x W slices counterclockwise by ``quarter_turns``.

    One turn sends the value at (r, c) to (W-1-c, r), which is numpy's
    ``rot90`` on axes (-2, -1).
    """
    t = _check_spatial(t)
    return np.ascontiguousarray(np.rot90(t, quarter_turns % 4, axes=(-2, -1)))


def flip(t, axis: str) -> np.ndarray:
    """``"h"`` reverses columns, ``"v"`` reverses rows."""
    t = _check_spatial(t)
    if axis in ("h", "horizontal"):
        return np.ascontiguousarray(t[..., :, ::-1])
    if axis in ("v", "vertical"):
        return np.ascontiguousarray(t[..., ::-1, :])
    raise ValueError(f"unknown flip axis {axis!r}")


def rot45_ring(k, steps: int = 1) -> np.ndarray:
    """Discrete 45-degree rotation of 3x3 slices: shift the outer ring by one
    position counterclockwise, keeping the center fixed.

    Two steps equal one quarter turn of :func:`rot90`.
    """
    k = _check_spatial(k)
    if k.shape[-2:] != (3, 3):
        raise ValueError(f"ring rotation needs 3x3 slices, got {k.shape[-2:]}")
    steps %= 8
    out = k.copy()
    for i, (r, c) in enumerate(RING):
        r2, c2 = RING[(i + steps) % 8]
        out[..., r2, c2] = k[..., r, c]
    return out


def write_tensor(t, fh: BinaryIO, dtype: str = "f64") -> None:
    if dtype not in DTYPE_CODES:
        raise TensorFormatError(f"unknown dtype {dtype!r}")
    code = DTYPE_CODES[dtype]
    arr = np.asarray(t)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if any(d < 1 for d in arr.shape):
        raise TensorFormatError(f"all dims must be >= 1, got {arr.shape}")
    if dtype == "u8":
        if not np.all((arr >= 0) & (arr <= 255) & (arr == np.round(arr))):
            raise TensorFormatError("u8 payload needs integers in [0, 255]")
    fh.write(MAGIC)
    fh.write(struct.pack("<BBH", VERSION, code, arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    fh.write(np.ascontiguousarray(arr, dtype=DTYPES[code]).tobytes())


def read_tensor(fh: BinaryIO) -> np.ndarray:
    """Read one EITF tensor. f64 comes back bit-exact; f32 and u8 are widened
    to float64."""
    head = fh.read(8)
    if len(head) < 8:
        raise TensorFormatError("truncated header")
    if head[:4] != MAGIC:
        raise TensorFormatError(f"bad magic {head[:4]!r}")
    version, code, ndim = struct.unpack("<BBH", head[4:])
    if version != VERSION:
        raise TensorFormatError(f"unknown version {version}")
    if code not in DTYPES:
        raise TensorFormatError(f"unknown dtype code {code}")
    raw_dims = fh.read(4 * ndim)
    if len(raw_dims) < 4 * ndim:
        raise TensorFormatError("truncated header")
    dims = struct.unpack(f"<{ndim}I", raw_dims)
    dt = DTYPES[code]
    nbytes = int(np.prod(dims, dtype=np.int64)) * dt.itemsize
    payload = fh.read(nbytes)
    if len(payload) < nbytes:
        raise TensorFormatError(f"truncated payload: {len(payload)} of {nbytes} bytes")
    return np.frombuffer(payload, dtype=dt).reshape(dims).astype(np.float64)


def save_tensor(path, t, dtype: str = "f64") -> None:
    with open(Path(path), "wb") as fh:
        write_tensor(t, fh, dtype)


def load_tensor(path) -> np.ndarray:
    with open(Path(path), "rb") as fh:
        return read_tensor(fh)
