""" Unit tests for the kmfv.fileio modules """

import os
import struct
import tempfile

import numpy as np
import pytest
from numpy.testing import assert_array_equal, assert_allclose

from kmfv.fileio import bitstream
from kmfv.fileio import ckpt
from kmfv.fileio import fileiobase
from kmfv.fileio import imgdir
from kmfv.fileio import table
from kmfv.fileio import yuv


def _flat(value, width=16, height=16, nframes=1):
    return np.full((nframes, 3, height, width), value, dtype='float32')


# fileiobase
def test_create_blank_vdic():
    """ video dictionary keys and colorspace validation """
    vdic = fileiobase.create_blank_vdic(64, 32, 5, 25.0)
    assert vdic["width"] == 64
    assert vdic["height"] == 32
    assert vdic["nframes"] == 5
    assert vdic["colorspace"] == "RGB"
    with pytest.raises(ValueError):
        fileiobase.create_blank_vdic(colorspace="XYZ")


def test_check_frames():
    """ out of range and non finite frames are rejected """
    assert fileiobase.check_frames(_flat(0.5))
    with pytest.raises(ValueError):
        fileiobase.check_frames(_flat(1.5))
    bad = _flat(0.5)
    bad[0, 1, 2, 3] = np.nan
    with pytest.raises(ValueError):
        fileiobase.check_frames(bad)
    with pytest.raises(ValueError):
        fileiobase.check_frames(np.zeros((2, 4, 4, 4), dtype='float32'))


def test_config_roundtrip():
    """ key = value files with nested keys and comments """
    with tempfile.TemporaryDirectory() as d:
        fname = os.path.join(d, "run.cfg")
        with open(fname, "w") as f:
            f.write("# training\nsteps = 100\nlr = 1e-4\nquant = ste\n"
                    "clip = none\nmodel.KS = 51\nmodel.use_interpolator = "
                    "false  # ablation\n")
        dic = fileiobase.read_config(fname)
        assert dic["steps"] == 100
        assert dic["lr"] == 1e-4
        assert dic["quant"] == "ste"
        assert dic["clip"] is None
        assert dic["model"] == {"KS": 51, "use_interpolator": False}

        out = os.path.join(d, "copy.cfg")
        fileiobase.write_config(out, dic)
        assert fileiobase.read_config(out) == dic
        with pytest.raises(IOError):
            fileiobase.write_config(out, dic)


def test_write_atomic():
    """ atomic writes refuse to overwrite unless asked """
    with tempfile.TemporaryDirectory() as d:
        fname = os.path.join(d, "sub", "blob")
        fileiobase.write_atomic(fname, b"abc")
        with pytest.raises(IOError):
            fileiobase.write_atomic(fname, b"xyz")
        fileiobase.write_atomic(fname, b"xyz", overwrite=True)
        with open(fname, "rb") as f:
            assert f.read() == b"xyz"
        assert os.listdir(os.path.join(d, "sub")) == ["blob"]


# yuv
def test_yuv_white_black():
    """ limited range white and black decode to RGB 1 and 0 """
    white = np.array([[[235]], [[128]], [[128]]], dtype='float64')
    black = np.array([[[16]], [[128]], [[128]]], dtype='float64')
    assert_allclose(yuv.yuv_to_rgb(white), np.ones((3, 1, 1)), atol=1e-12)
    assert_allclose(yuv.yuv_to_rgb(black), np.zeros((3, 1, 1)), atol=1e-12)


def test_yuv_file_white_black():
    """ all white and all black files read back exactly """
    with tempfile.TemporaryDirectory() as d:
        fname = os.path.join(d, "wb.yuv")
        w, h = 8, 4
        frames = []
        for y in (235, 16):
            frames.append(np.full(w * h, y, dtype='uint8'))
            frames.append(np.full(w * h // 2, 128, dtype='uint8'))
        np.concatenate(frames).tofile(fname)
        vdic, data = yuv.load_yuv420(fname, w, h)
        assert data.shape == (2, 3, h, w)
        assert data.dtype == np.float32
        assert vdic["colorspace"] == "YUV420-source"
        assert_allclose(data[0], 1.0, atol=1e-6)
        assert_allclose(data[1], 0.0, atol=1e-6)


def test_yuv_truncated_and_odd():
    """ truncated files and odd sizes raise """
    with tempfile.TemporaryDirectory() as d:
        fname = os.path.join(d, "short.yuv")
        np.zeros(yuv.frame_bytes(8, 8) + 10, dtype='uint8').tofile(fname)
        with pytest.raises(IOError):
            yuv.load_yuv420(fname, 8, 8, max_frames=2)
        with pytest.raises(ValueError):
            yuv.load_yuv420(fname, 7, 8)


def test_yuv_write_read():
    """ writing then reading stays within 8-bit quantisation error """
    rng = np.random.default_rng(3)
    # smooth content keeps chroma subsampling error small
    base = rng.random((2, 3, 1, 1)).astype('float32') * 0.6 + 0.2
    data = np.repeat(np.repeat(base, 8, axis=2), 8, axis=3)
    vdic = fileiobase.guess_vdic(data)
    with tempfile.TemporaryDirectory() as d:
        fname = os.path.join(d, "rt.yuv")
        yuv.write_yuv420(fname, vdic, data)
        assert os.path.getsize(fname) == 2 * yuv.frame_bytes(8, 8)
        _, back = yuv.load_yuv420(fname, 8, 8, max_frames=2)
        assert_allclose(back, data, atol=0.02)


# imgdir
def test_imgdir_roundtrip():
    """ PNG frames written then read keep 8-bit values """
    rng = np.random.default_rng(0)
    data = (np.round(rng.random((3, 3, 6, 10)) * 255) / 255).astype('float32')
    vdic = fileiobase.guess_vdic(data)
    with tempfile.TemporaryDirectory() as d:
        imgdir.write(d, vdic, data)
        assert sorted(os.listdir(d))[0] == "frame_00000.png"
        vdic2, back = imgdir.read(d)
        assert vdic2["nframes"] == 3
        assert_allclose(back, data, atol=1e-6)
        _, two = imgdir.read(d, max_frames=2)
        assert two.shape[0] == 2
        with pytest.raises(IOError):
            imgdir.write(d, vdic, data)


def test_imgdir_empty():
    """ a directory without frames raises IOError """
    with tempfile.TemporaryDirectory() as d:
        with pytest.raises(IOError):
            imgdir.read(d)


# table
def test_table_write_read():
    """ RD tables round trip with strings and floats """
    rows = [("translate", "kmfv", 0.005, 0.0123456789, 31.5),
            ("translate", "kmfv", 0.05, 0.25, 38.25)]
    rec = table.make_table(rows, ("sequence", "codec", "lambda", "bpp",
                                  "psnr_rgb"),
                           ("U16", "U16", "f8", "f8", "f8"))
    with tempfile.TemporaryDirectory() as d:
        fname = os.path.join(d, "rd.csv")
        table.write(fname, rec, comments=["desk run"])
        comments, back = table.read(fname)
        assert comments == ["desk run"]
        assert_array_equal(back["bpp"], rec["bpp"])
        assert list(back["sequence"]) == ["translate", "translate"]
        assert len(table.select(back, **{"lambda": 0.05})) == 1


def test_table_append_rows():
    """ metric logs grow and keep a single header """
    names = ("step", "frame_level", "D", "R_bpp", "loss")
    with tempfile.TemporaryDirectory() as d:
        fname = os.path.join(d, "metrics.csv")
        table.append_rows(fname, names, [(1, 0, 0.1, 0.5, 1.0)])
        table.append_rows(fname, names, [(2, 0, 0.05, 0.4, 0.8),
                                         (2, 1, 0.07, 0.3, 0.8)])
        _, rec = table.read(fname)
        assert_array_equal(rec["step"], [1, 2, 2])
        with pytest.raises(ValueError):
            table.append_rows(fname, ("a", "b"), [(1, 2)])


def test_table_single_row():
    """ a one row table reads as a one element array """
    with tempfile.TemporaryDirectory() as d:
        fname = os.path.join(d, "one.csv")
        table.append_rows(fname, ("x", "y"), [(1, 2.5)])
        _, rec = table.read(fname)
        assert len(rec) == 1
        assert rec["y"][0] == 2.5


# ckpt
def test_ckpt_roundtrip():
    """ archives are byte stable and keep names, shapes and values """
    params = {"b": np.arange(6, dtype='float64').reshape(2, 3),
              "a": np.array([1, 2, 3], dtype='int32')}
    meta = {"kind": "test", "cfg": {"KS": 31}, "lambda": 0.01}
    buf1, id1 = ckpt.pack(meta, params)
    buf2, id2 = ckpt.pack(dict(reversed(list(meta.items()))), params)
    assert buf1 == buf2
    assert id1 == id2
    assert buf1[:4] == b"KMFP"

    meta2, params2 = ckpt.unpack(buf1)
    assert meta2["ckpt_id"] == id1
    assert meta2["cfg"] == {"KS": 31}
    assert params2["b"].dtype == np.dtype('<f4')
    assert params2["a"].dtype == np.dtype('<i8')
    assert_array_equal(params2["b"], params["b"])

    with tempfile.TemporaryDirectory() as d:
        fname = os.path.join(d, "p.kmfp")
        assert ckpt.write(fname, meta2, params) == id1
        meta3, _ = ckpt.read(fname)
        assert meta3["ckpt_id"] == id1


def test_ckpt_bad_magic():
    """ foreign files are refused """
    buf, _ = ckpt.pack({}, {"x": np.zeros(2)})
    with pytest.raises(IOError):
        ckpt.unpack(b"XXXX" + buf[4:])
    with pytest.raises(IOError):
        ckpt.unpack(buf[:3])


# bitstream
def _container():
    cdic = bitstream.create_blank_cdic(64, 48, 8, 0x1234abcd)
    bitstream.add_step(cdic, 0, "I", b"\x01\x02", b"\x03")
    bitstream.add_step(cdic, 2, "I", b"", b"\x04\x05\x06")
    bitstream.add_step(cdic, 1, "B", b"\x07", b"")
    return cdic


def test_bitstream_roundtrip():
    """ container bytes parse back to the same steps """
    cdic = _container()
    buf = bitstream.pack(cdic)
    assert buf[:4] == b"KMFV"
    back = bitstream.unpack(buf)
    assert back["width"] == 64
    assert back["height"] == 48
    assert back["frame_count"] == 3
    assert back["flags"] & bitstream.FLAG_INTERP
    assert back["steps"] == cdic["steps"]
    assert bitstream.payload_bits(back) == 8 * 7
    with tempfile.TemporaryDirectory() as d:
        fname = os.path.join(d, "x.kmfv")
        bitstream.write(fname, cdic)
        assert bitstream.read(fname)["steps"] == cdic["steps"]


def test_bitstream_size():
    """ container size is header plus step headers plus framed chunks """
    buf = bitstream.pack(_container())
    expected = (bitstream.FILEHEADER_SIZE + 3 * bitstream.STEPHEADER_SIZE +
                6 * bitstream.CHUNKHEADER_SIZE + 7)
    assert len(buf) == expected


def test_bitstream_errors():
    """ magic, version, model, truncation and trailing byte checks """
    buf = bitstream.pack(_container())
    with pytest.raises(bitstream.MagicError):
        bitstream.unpack(b"NOPE" + buf[4:])
    with pytest.raises(bitstream.VersionError):
        bitstream.unpack(buf[:4] + struct.pack('<B', 9) + buf[5:])
    with pytest.raises(bitstream.ModelMismatchError) as e:
        bitstream.unpack(buf, model_id=0x1)
    assert e.value.found == 0x1234abcd
    for n in (3, bitstream.FILEHEADER_SIZE + 2, len(buf) - 1):
        with pytest.raises(bitstream.TruncatedError):
            bitstream.unpack(buf[:n])
    with pytest.raises(bitstream.BitstreamError):
        bitstream.unpack(buf + b"\x00")
    with pytest.raises(ValueError):
        bitstream.add_step(_container(), 3, "P", b"", b"")


def test_chunk_framing():
    """ chunks are a little endian u32 length then the payload """
    assert bitstream.pack_chunk(b"\xab") == b"\x01\x00\x00\x00\xab"
    payload, offset = bitstream.unpack_chunk(b"\x00" + bitstream.pack_chunk(
        b"xyz") + b"tail", 1)
    assert payload == b"xyz"
    assert offset == 8
