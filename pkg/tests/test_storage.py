import io
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from stereodist.errors import FormatError, RangeError
from stereodist.storage import (
    kitti_png_encode,
    kitti_png_read,
    kitti_png_write,
    pfm_read,
    pfm_write,
    pgm_read,
    pgm_write,
    raw_volume_read,
    raw_volume_write,
    read_disparity,
)

PFM_2X2 = b"Pf\n2 2\n-1.0\n" + struct.pack("<4f", 3, 4, 1, 2)

finite32 = st.floats(-1e6, 1e6, allow_nan=False, width=32)
maps32 = arrays(np.float32, st.tuples(st.integers(1, 9), st.integers(1, 9)), elements=finite32)


def test_pfm_byte_layout():
    assert pfm_write(np.array([[1, 2], [3, 4]], np.float32)) == PFM_2X2
    assert pfm_read(PFM_2X2).tolist() == [[1, 2], [3, 4]]


def test_pfm_big_endian():
    data = b"Pf\n2 1\n1.0\n" + struct.pack(">2f", 0.5, -7.25)
    assert pfm_read(data).tolist() == [[0.5, -7.25]]


@pytest.mark.parametrize(
    "data",
    [
        b"PF\n1 1\n-1.0\n" + b"\0" * 12,
        b"P5\n1 1\n-1.0\n" + b"\0" * 4,
        b"Pf\n2 2\n-1.0\n" + b"\0" * 15,
        b"Pf\n1 1\nabc\n" + b"\0" * 4,
        b"Pf\n1 1\n0\n" + b"\0" * 4,
        b"",
    ],
)
def test_pfm_rejects(data):
    with pytest.raises(FormatError):
        pfm_read(data)


@given(maps32)
def test_pfm_round_trip_is_bitwise(a):
    assert pfm_read(pfm_write(a)).tobytes() == a.tobytes()


def test_kitti_examples():
    assert kitti_png_encode(np.array([[8.25]]))[0, 0] == 2112
    d, m = kitti_png_read(kitti_png_write(np.array([[8.25, 0.001]])))
    assert d[0, 0] == 8.25 and m.tolist() == [[True, False]]


def test_kitti_png_is_sixteen_bit():
    im = Image.open(io.BytesIO(kitti_png_write(np.full((3, 4), 100.0))))
    assert im.mode.startswith("I;16") and im.size == (4, 3)


def test_kitti_mask_and_range():
    d = np.array([[5.0, 300.0]])
    _, m = kitti_png_read(kitti_png_write(d, np.array([[True, False]])))
    assert m.tolist() == [[True, False]]
    with pytest.raises(RangeError):
        kitti_png_write(d)


def test_kitti_rejects_eight_bit():
    buf = io.BytesIO()
    Image.fromarray(np.zeros((2, 2), np.uint8)).save(buf, format="PNG")
    with pytest.raises(FormatError):
        kitti_png_read(buf.getvalue())


@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 8)), elements=st.floats(0.002, 255.99)))
def test_kitti_round_trip_bound(d):
    back, mask = kitti_png_read(kitti_png_write(d))
    assert mask.all()
    assert np.abs(back - d).max() <= 1 / 512


def test_pgm_round_trip():
    img = np.random.default_rng(0).integers(0, 256, (5, 7), dtype=np.uint8)
    data = pgm_write(img)
    assert data.startswith(b"P5\n7 5\n255\n")
    assert np.array_equal(pgm_read(data), img)
    with pytest.raises(FormatError):
        pgm_read(b"P5\n2 2\n65535\n" + b"\0" * 8)


def test_volume_big_endian_fixture():
    values = [0.5, -1.0, 2.25, 3.0, 4.0, 1e-3]
    data = b"CVOL>d\0\0" + struct.pack(">4I", 1, 2, 3, 1) + struct.pack(">6d", *values)
    vol = raw_volume_read(data)
    assert vol.shape == (1, 2, 3)
    assert vol.ravel().tolist() == values
    assert raw_volume_write(vol, "d", ">") == data


def test_volume_float32_is_widened():
    vol = np.arange(12, dtype=np.float32).reshape(2, 2, 3) / 7
    back = raw_volume_read(raw_volume_write(vol, "f"))
    assert back.dtype == np.float64
    assert back.astype(np.float32).tobytes() == vol.tobytes()


@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5), st.integers(2, 6)),
              elements=st.floats(allow_nan=False)), st.sampled_from("<>"))
def test_volume_round_trip_is_bitwise(vol, order):
    assert raw_volume_read(raw_volume_write(vol, "d", order)).tobytes() == vol.tobytes()


def test_volume_rejects():
    good = raw_volume_write(np.zeros((1, 1, 2)))
    for bad in (b"XVOL" + good[4:], good[:-1], good[:20], good[:4] + b"=" + good[5:],
                good[:20] + struct.pack("<I", 2) + good[24:]):
        with pytest.raises(FormatError):
            raw_volume_read(bad)


@given(st.binary(max_size=200))
def test_readers_fail_cleanly(blob):
    for reader in (pfm_read, pgm_read, raw_volume_read, kitti_png_read):
        try:
            reader(blob)
        except FormatError:
            pass


@given(st.binary(max_size=64))
def test_pfm_reader_fails_cleanly_on_plausible_headers(tail):
    try:
        pfm_read(b"Pf\n3 2\n-1.0\n" + tail)
    except FormatError:
        pass


def test_read_disparity_by_suffix(tmp_path):
    d = np.array([[1.5, 2.0]])
    (tmp_path / "a.png").write_bytes(kitti_png_write(d))
    (tmp_path / "a.pfm").write_bytes(pfm_write(d.astype(np.float32)))
    for name in ("a.png", "a.pfm"):
        back, mask = read_disparity(tmp_path / name)
        assert back.tolist() == d.tolist() and mask.all()
