"""Depth map and tensor file I/O.

Three interchange formats are supported:

* ``pfm``    Portable FloatMap, grayscale ("Pf").  Rows are stored
             bottom-up; a negative scale in the header means little-endian.
             Non-finite samples mark invalid pixels.
* ``png16``  16-bit grayscale PNG.  Depth = pixel * scale, and pixel value
             0 is reserved as the invalid sentinel, so a scale factor is
             required for both reading and writing.
* ``raw``    A minimal binary tensor container: magic ``DVDT``, a u32 rank,
             rank u32 dims, then the float32 little-endian payload in C
             order.  NaN marks invalid samples.

All readers reject malformed headers with :class:`FormatError` rather than
returning partial data.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image

from .tensors import DepthMap

__all__ = [
    "FormatError",
    "TensorFileHeader",
    "DEPTH_FORMATS",
    "RAW_MAGIC",
    "read_depth_map",
    "write_depth_map",
    "read_raw_tensor",
    "write_raw_tensor",
]

DEPTH_FORMATS = ("pfm", "png16", "raw")
RAW_MAGIC = b"DVDT"

# Guard against absurd headers before allocating: 2^31 elements of f32 is
# already an 8 GiB payload, nothing in this pipeline comes close.
_MAX_ELEMENTS = 2**31
_MAX_RANK = 8

PathLike = Union[str, Path]


class FormatError(ValueError):
    """A depth or tensor file failed to parse, or violates the format."""


@dataclass(frozen=True)
class TensorFileHeader:
    """Parsed header of a ``raw`` tensor file."""

    magic: bytes
    rank: int
    dims: tuple[int, ...]
    dtype: str = "f32"

    def element_count(self) -> int:
        n = 1
        for d in self.dims:
            n *= d
        return n


# ---------------------------------------------------------------------------
# PFM


def _read_pfm(path: PathLike) -> DepthMap:
    with open(path, "rb") as fh:
        data = fh.read()

    def next_token(pos: int) -> tuple[bytes, int]:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PFM header")
        return data[start:pos], pos

    magic, pos = next_token(0)
    if magic == b"PF":
        raise FormatError(f"{path}: color PFM (PF) is not supported, expected grayscale Pf")
    if magic != b"Pf":
        raise FormatError(f"{path}: bad PFM magic {magic!r}")

    wtok, pos = next_token(pos)
    htok, pos = next_token(pos)
    try:
        width, height = int(wtok), int(htok)
    except ValueError:
        raise FormatError(f"{path}: non-integer PFM dimensions {wtok!r} {htok!r}") from None
    if width < 1 or height < 1:
        raise FormatError(f"{path}: non-positive PFM dimensions {width}x{height}")
    if width * height > _MAX_ELEMENTS:
        raise FormatError(f"{path}: PFM dimensions overflow ({width}x{height})")

    stok, pos = next_token(pos)
    try:
        scale = float(stok)
    except ValueError:
        raise FormatError(f"{path}: non-numeric PFM scale {stok!r}") from None
    if not np.isfinite(scale) or scale == 0.0:
        raise FormatError(f"{path}: PFM scale must be finite and non-zero, got {stok!r}")

    # Exactly one whitespace byte terminates the header, then the payload.
    pos += 1
    payload = data[pos:]
    need = width * height * 4
    if len(payload) < need:
        raise FormatError(
            f"{path}: truncated PFM payload, need {need} bytes, have {len(payload)}"
        )
    dtype = "<f4" if scale < 0 else ">f4"
    flat = np.frombuffer(payload[:need], dtype=dtype).astype(np.float64)
    rows = flat.reshape(height, width)
    values = np.flipud(rows)  # stored bottom-up
    return DepthMap(values, np.isfinite(values))


def _write_pfm(depth: DepthMap, path: PathLike) -> None:
    values = np.where(depth.valid, depth.values, np.nan)
    height, width = values.shape
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{width} {height}\n".encode("ascii"))
        fh.write(b"-1.0\n")  # negative scale: little-endian payload
        fh.write(np.flipud(values).astype("<f4").tobytes())


# ---------------------------------------------------------------------------
# png16


def _read_png16(path: PathLike, scale: Optional[float]) -> DepthMap:
    _check_png16_scale(scale, path)
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            px = np.asarray(img)
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise FormatError(f"{path}: not a readable PNG ({exc})") from exc
    if mode not in ("I;16", "I;16B", "I"):
        raise FormatError(f"{path}: expected 16-bit grayscale PNG, got mode {mode!r}")
    if px.ndim != 2:
        raise FormatError(f"{path}: expected a single-channel PNG, got shape {px.shape}")
    px = px.astype(np.int64)
    if px.min() < 0 or px.max() > 65535:
        raise FormatError(f"{path}: PNG sample values outside the 16-bit range")
    values = px.astype(np.float64) * float(scale)
    valid = px > 0  # pixel 0 is the invalid sentinel
    return DepthMap(np.where(valid, values, np.nan), valid)


def _write_png16(depth: DepthMap, path: PathLike, scale: Optional[float]) -> None:
    _check_png16_scale(scale, path)
    quant = np.zeros(depth.shape, dtype=np.int64)
    v = depth.valid
    quant[v] = np.rint(depth.values[v] / float(scale)).astype(np.int64)
    if quant[v].size and (quant[v].min() < 0 or quant[v].max() > 65535):
        raise FormatError(
            f"{path}: depth range exceeds 16 bits at scale {scale} "
            f"(quantised extent {quant[v].min()}..{quant[v].max()})"
        )
    # 0 is reserved for invalid pixels; a valid depth that quantises to 0
    # is clamped up to 1 so validity survives the round trip.
    quant[v] = np.maximum(quant[v], 1)
    Image.fromarray(quant.astype(np.uint16)).save(path, format="PNG")


def _check_png16_scale(scale: Optional[float], path: PathLike) -> None:
    if scale is None:
        raise FormatError(f"{path}: png16 requires a scale factor")
    if not np.isfinite(scale) or scale <= 0:
        raise FormatError(f"{path}: png16 scale must be finite and positive, got {scale}")


# ---------------------------------------------------------------------------
# raw tensor container


def _read_raw_header(data: bytes, path: PathLike) -> tuple[TensorFileHeader, int]:
    if len(data) < 8:
        raise FormatError(f"{path}: truncated raw header")
    magic = data[:4]
    if magic != RAW_MAGIC:
        raise FormatError(f"{path}: bad raw magic {magic!r}, expected {RAW_MAGIC!r}")
    (rank,) = struct.unpack_from("<I", data, 4)
    if rank < 1 or rank > _MAX_RANK:
        raise FormatError(f"{path}: raw rank {rank} out of range 1..{_MAX_RANK}")
    end = 8 + 4 * rank
    if len(data) < end:
        raise FormatError(f"{path}: truncated raw dims")
    dims = struct.unpack_from(f"<{rank}I", data, 8)
    if any(d < 1 for d in dims):
        raise FormatError(f"{path}: non-positive raw dimension in {dims}")
    n = 1
    for d in dims:
        n *= d
        if n > _MAX_ELEMENTS:
            raise FormatError(f"{path}: raw dimensions overflow {dims}")
    return TensorFileHeader(magic, rank, tuple(int(d) for d in dims)), end


def read_raw_tensor(path: PathLike) -> np.ndarray:
    """Read a raw tensor file and return its payload as float64."""
    with open(path, "rb") as fh:
        data = fh.read()
    header, offset = _read_raw_header(data, path)
    need = header.element_count() * 4
    payload = data[offset:]
    if len(payload) < need:
        raise FormatError(
            f"{path}: truncated raw payload, need {need} bytes, have {len(payload)}"
        )
    flat = np.frombuffer(payload[:need], dtype="<f4").astype(np.float64)
    return flat.reshape(header.dims)


def write_raw_tensor(path: PathLike, values: np.ndarray) -> None:
    """Write an array as a raw tensor file (float32 little-endian payload)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim < 1 or arr.ndim > _MAX_RANK:
        raise FormatError(f"{path}: raw tensors must have rank 1..{_MAX_RANK}, got {arr.ndim}")
    if any(s < 1 for s in arr.shape):
        raise FormatError(f"{path}: cannot write an empty tensor, shape {arr.shape}")
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC)
        fh.write(struct.pack("<I", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_raw_depth(path: PathLike) -> DepthMap:
    arr = read_raw_tensor(path)
    if arr.ndim != 2:
        raise FormatError(f"{path}: depth maps need a rank-2 raw tensor, got rank {arr.ndim}")
    return DepthMap(arr, np.isfinite(arr))


def _write_raw_depth(depth: DepthMap, path: PathLike) -> None:
    write_raw_tensor(path, np.where(depth.valid, depth.values, np.nan))


# ---------------------------------------------------------------------------
# dispatch


def read_depth_map(path: PathLike, fmt: str, *, png16_scale: Optional[float] = None) -> DepthMap:
    """Read a single depth frame in one of :data:`DEPTH_FORMATS`."""
    if fmt == "pfm":
        return _read_pfm(path)
    if fmt == "png16":
        return _read_png16(path, png16_scale)
    if fmt == "raw":
        return _read_raw_depth(path)
    raise FormatError(f"unknown depth format {fmt!r}, expected one of {DEPTH_FORMATS}")


def write_depth_map(
    depth: DepthMap, path: PathLike, fmt: str, *, png16_scale: Optional[float] = None
) -> None:
    """Write a single depth frame in one of :data:`DEPTH_FORMATS`."""
    if fmt == "pfm":
        _write_pfm(depth, path)
    elif fmt == "png16":
        _write_png16(depth, path, png16_scale)
    elif fmt == "raw":
        _write_raw_depth(depth, path)
    else:
        raise FormatError(f"unknown depth format {fmt!r}, expected one of {DEPTH_FORMATS}")
