"""Byte-exact codecs for disparity maps, 8-bit images and cost volumes.

PFM (grayscale ``Pf`` only)
    ``b"Pf\\n"``, ``b"<W> <H>\\n"``, ``b"<scale>\\n"``, then ``W*H`` float32 values,
    rows stored bottom-to-top.  A negative scale means little-endian payload.
    Writers emit scale ``-1.0``.  Lossless for float32 data.

KITTI 16-bit PNG
    Single-channel 16-bit PNG holding ``round(disparity * 256)``; 0 marks an
    invalid pixel.  Resolution is 1/256 px, and any disparity below 1/512
    rounds onto the invalid sentinel.  Use PFM when finer precision matters.

PGM (binary ``P5``, maxval 255)
    8-bit grayscale images for stereo pairs.

Raw cost volume
    24-byte header then the row-major ``(H, W, D)`` payload::

        0   4  magic  b"CVOL"
        4   1  byte order  b"<" or b">"
        5   1  dtype code  b"f" (float32) or b"d" (float64)
        6   2  reserved, zero
        8  16  height, width, depth, version (=1) as uint32 in the declared byte order

``depth`` is ``d_max + 1``.  Lossless.
"""
from __future__ import annotations

import enum
import io
import re
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError, RangeError, StructuralError


class FileFormat(str, enum.Enum):
    PFM = "pfm"
    KITTI_PNG16 = "png16"
    PGM = "pgm"
    RAW_VOLUME = "cvol"


# -- PFM ---------------------------------------------------------------------

def pfm_write(values) -> bytes:
    a = np.asarray(values)
    if a.ndim != 2:
        raise StructuralError(f"PFM holds a 2-D map, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise RangeError("PFM writer requires finite values")
    h, w = a.shape
    header = b"Pf\n%d %d\n-1.0\n" % (w, h)
    return header + np.ascontiguousarray(a[::-1], dtype="<f4").tobytes()


_PFM_HEADER = re.compile(rb"\A(P[fF])\s+(\d+)\s+(\d+)\s+(\S+)\s")


def pfm_read(data: bytes) -> np.ndarray:
    """Decode a grayscale PFM; returns float32 with row 0 at the top."""
    m = _PFM_HEADER.match(data)
    if m is None:
        raise FormatError("malformed PFM header")
    kind, w, h, scale = m.groups()
    if kind == b"PF":
        raise FormatError("colour PFM ('PF') is not supported; disparity maps are 'Pf'")
    w, h = int(w), int(h)
    try:
        scale = float(scale)
    except ValueError:
        raise FormatError(f"bad PFM scale {scale!r}") from None
    if scale == 0 or not np.isfinite(scale):
        raise FormatError("PFM scale must be a non-zero number")
    payload = data[m.end():]
    need = 4 * w * h
    if len(payload) < need:
        raise FormatError(f"truncated PFM payload: {len(payload)} of {need} bytes")
    dtype = "<f4" if scale < 0 else ">f4"
    a = np.frombuffer(payload[:need], dtype=dtype).reshape(h, w)[::-1]
    return a.astype(np.float32)


# -- KITTI PNG16 ---------------------------------------------------------------

def kitti_png_encode(disp, mask=None) -> np.ndarray:
    """uint16 array with ``round(disp * 256)`` at valid pixels and 0 elsewhere."""
    d = np.asarray(disp, dtype=np.float64)
    valid = np.ones(d.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if valid.shape != d.shape:
        raise StructuralError(f"mask shape {valid.shape} != map shape {d.shape}")
    v = d[valid]
    if v.size and (not np.all(np.isfinite(v)) or v.min() < 0 or v.max() >= 256):
        raise RangeError("KITTI PNG16 disparities must lie in [0, 256)")
    q = np.zeros(d.shape, dtype=np.uint16)
    q[valid] = np.round(v * 256.0).astype(np.uint16)
    return q


def kitti_png_write(disp, mask=None) -> bytes:
    q = kitti_png_encode(disp, mask)
    if q.ndim != 2:
        raise StructuralError("KITTI PNG16 holds a 2-D map")
    buf = io.BytesIO()
    Image.fromarray(q).save(buf, format="PNG")
    return buf.getvalue()


def kitti_png_read(data: bytes):
    """Return ``(disparity float64, validity mask)``; stored 0 is invalid."""
    try:
        im = Image.open(io.BytesIO(data))
        im.load()
    except Exception as e:  # Pillow raises a zoo of types on corrupt input
        raise FormatError(f"not a readable PNG: {e}") from None
    if im.format != "PNG" or im.mode not in ("I;16", "I;16B", "I;16L"):
        raise FormatError(f"expected a 16-bit single-channel PNG, got {im.format} mode {im.mode}")
    q = np.array(im, dtype=np.uint16)
    mask = q != 0
    return q.astype(np.float64) / 256.0, mask


# -- PGM / 8-bit images ------------------------------------------------------------

def pgm_write(img) -> bytes:
    a = np.asarray(img)
    if a.ndim != 2 or a.dtype != np.uint8:
        raise StructuralError("PGM writer takes a 2-D uint8 image")
    h, w = a.shape
    return b"P5\n%d %d\n255\n" % (w, h) + a.tobytes()


_PGM_HEADER = re.compile(rb"\AP5\s+(\d+)\s+(\d+)\s+(\d+)\s")


def pgm_read(data: bytes) -> np.ndarray:
    m = _PGM_HEADER.match(data)
    if m is None:
        raise FormatError("malformed PGM header (only binary P5 is supported)")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise FormatError(f"only 8-bit PGM (maxval 255) is supported, got {maxval}")
    payload = data[m.end():]
    if len(payload) < w * h:
        raise FormatError(f"truncated PGM payload: {len(payload)} of {w * h} bytes")
    return np.frombuffer(payload[: w * h], dtype=np.uint8).reshape(h, w).copy()


def gray8_png_write(img) -> bytes:
    a = np.asarray(img)
    if a.ndim != 2 or a.dtype != np.uint8:
        raise StructuralError("expected a 2-D uint8 image")
    buf = io.BytesIO()
    Image.fromarray(a).save(buf, format="PNG")
    return buf.getvalue()


def read_gray8(path) -> np.ndarray:
    """Load an 8-bit grayscale image from PGM or any Pillow-readable file."""
    data = Path(path).read_bytes()
    if data[:2] == b"P5":
        return pgm_read(data)
    try:
        im = Image.open(io.BytesIO(data))
        im.load()
    except Exception as e:
        raise FormatError(f"{path}: not a readable image: {e}") from None
    if im.mode != "L":
        raise FormatError(f"{path}: expected 8-bit grayscale, got mode {im.mode}")
    return np.array(im, dtype=np.uint8)


# -- raw cost volume -----------------------------------------------------------------

VOLUME_MAGIC = b"CVOL"
VOLUME_VERSION = 1
_DTYPES = {b"f": "f4", b"d": "f8"}


def raw_volume_write(vol, dtype="d", byteorder="<") -> bytes:
    a = np.asarray(vol)
    if a.ndim != 3:
        raise StructuralError(f"cost volume must be (H, W, D), got shape {a.shape}")
    code = dtype.encode() if isinstance(dtype, str) else dtype
    if code not in _DTYPES or byteorder not in ("<", ">"):
        raise FormatError(f"unsupported dtype {dtype!r} / byte order {byteorder!r}")
    h, w, d = a.shape
    header = VOLUME_MAGIC + byteorder.encode() + code + b"\0\0"
    header += struct.pack(byteorder + "4I", h, w, d, VOLUME_VERSION)
    return header + np.ascontiguousarray(a, dtype=byteorder + _DTYPES[code]).tobytes()


def raw_volume_read(data: bytes) -> np.ndarray:
    """Decode a raw volume; float32 payloads are widened to float64."""
    if len(data) < 24:
        raise FormatError("truncated cost-volume header")
    if data[:4] != VOLUME_MAGIC:
        raise FormatError(f"bad cost-volume magic {data[:4]!r}")
    order, code = data[4:5].decode("latin-1"), data[5:6]
    if order not in ("<", ">") or code not in _DTYPES:
        raise FormatError("bad byte-order or dtype field in cost-volume header")
    h, w, d, version = struct.unpack(order + "4I", data[8:24])
    if version != VOLUME_VERSION:
        raise FormatError(f"unsupported cost-volume version {version}")
    if h < 1 or w < 1 or d < 2:
        raise FormatError(f"bad cost-volume dimensions {(h, w, d)}")
    dt = np.dtype(order + _DTYPES[code])
    need = h * w * d * dt.itemsize
    payload = data[24:]
    if len(payload) != need:
        raise FormatError(f"cost-volume payload is {len(payload)} bytes, header implies {need}")
    return np.frombuffer(payload, dtype=dt).reshape(h, w, d).astype(np.float64)


# -- path helpers --------------------------------------------------------------------

def read_disparity(path):
    """``(disparity, mask)`` from a .png (KITTI) or .pfm file.

    PFM carries no validity channel; non-finite values are treated as invalid.
    """
    p = Path(path)
    data = p.read_bytes()
    if p.suffix.lower() == ".png":
        return kitti_png_read(data)
    a = pfm_read(data).astype(np.float64)
    return a, np.isfinite(a)


def read_map(path) -> np.ndarray:
    return pfm_read(Path(path).read_bytes()).astype(np.float64)
