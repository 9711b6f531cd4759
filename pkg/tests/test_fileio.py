import io

import numpy as np
import pytest

from stab.fileio import PGMError, format_value, read_pgm, write_csv, write_pgm


def test_pgm_roundtrip(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, (5, 7)) / 255.0
    path = tmp_path / "a.pgm"
    write_pgm(path, img)
    assert path.read_bytes().startswith(b"P5\n7 5\n255\n")
    np.testing.assert_allclose(read_pgm(path), img, atol=1e-12)


def test_pgm_clips(tmp_path):
    path = tmp_path / "c.pgm"
    write_pgm(path, np.array([[-1.0, 0.5, 2.0]]))
    np.testing.assert_allclose(read_pgm(path), [[0.0, 128 / 255, 1.0]])


def test_pgm_header_comments_and_maxval(tmp_path):
    path = tmp_path / "b.pgm"
    path.write_bytes(b"P5\n# made by hand\n2 1\n# max\n100\n" + bytes([0, 100]))
    np.testing.assert_allclose(read_pgm(path), [[0.0, 1.0]])


@pytest.mark.parametrize("data", [
    b"P2\n1 1\n255\n0",
    b"P5\n2 2\n255\n\x00",
    b"P5\n2 x\n255\n\x00\x00\x00\x00",
    b"P5\n1 1\n65535\n\x00\x00",
    b"P5\n1",
])
def test_malformed_pgm(tmp_path, data):
    path = tmp_path / "bad.pgm"
    path.write_bytes(data)
    with pytest.raises(PGMError):
        read_pgm(path)


def test_format_value():
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(True) == "1" and format_value(np.bool_(False)) == "0"
    assert format_value(np.int64(3)) == "3"
    assert format_value(None) == ""
    assert format_value(float("nan")) == "nan"
    assert float(format_value(np.pi)) == np.pi


def test_write_csv_layout():
    buf = io.StringIO()
    write_csv(buf, ["a", "b", "c"], [{"a": 1.5, "b": True}, {"a": 2, "c": "x,y"}])
    assert buf.getvalue() == 'a,b,c\n1.5,1,\n2,,"x,y"\n'
