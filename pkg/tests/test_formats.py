"""Round-trip and malformed-input tests for all file codecs."""

import struct

import numpy as np
import pytest

from knights.formats import (
    CodecError,
    read_config,
    read_csv_preds,
    read_emb1,
    read_flo,
    read_pgm,
    write_csv_preds,
    write_emb1,
    write_flo,
    write_pgm,
)
from knights.tvl1 import FlowField


class TestEmb1:
    def test_roundtrip_bitwise(self, tmp_path):
        rng = np.random.default_rng(0)
        m = rng.standard_normal((7, 5))
        path = tmp_path / "m.emb1"
        write_emb1(path, m)
        np.testing.assert_array_equal(read_emb1(path), m)

    def test_header_layout(self, tmp_path):
        path = tmp_path / "m.emb1"
        write_emb1(path, np.zeros((3, 4)))
        raw = path.read_bytes()
        assert raw[:4] == b"EMB1"
        assert struct.unpack("<II", raw[4:12]) == (3, 4)
        assert len(raw) == 12 + 8 * 12

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.emb1"
        path.write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(CodecError, match="byte offset 0"):
            read_emb1(path)

    def test_truncated_payload_names_lengths(self, tmp_path):
        path = tmp_path / "short.emb1"
        write_emb1(path, np.ones((4, 4)))
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(CodecError, match=r"expected 140 bytes .* got 132"):
            read_emb1(path)


class TestFlo:
    def test_roundtrip_bitwise(self, tmp_path):
        rng = np.random.default_rng(0)
        # float32 values so that write(read(x)) is exact
        u1 = rng.standard_normal((6, 9)).astype(np.float32)
        u2 = rng.standard_normal((6, 9)).astype(np.float32)
        path = tmp_path / "f.flo"
        write_flo(path, FlowField(u1.astype(np.float64), u2.astype(np.float64)))
        back = read_flo(path)
        np.testing.assert_array_equal(back.u1, u1.astype(np.float64))
        np.testing.assert_array_equal(back.u2, u2.astype(np.float64))
        path2 = tmp_path / "g.flo"
        write_flo(path2, back)
        assert path.read_bytes() == path2.read_bytes()

    def test_header_decodes_to_magic_and_dims(self, tmp_path):
        path = tmp_path / "f.flo"
        write_flo(path, FlowField.zeros(3, 5))
        raw = path.read_bytes()
        magic, w, h = struct.unpack("<fii", raw[:12])
        assert magic == 202021.25
        assert (w, h) == (5, 3)

    def test_interleaved_row_major_pairs(self, tmp_path):
        u1 = np.array([[1.0, 2.0]])
        u2 = np.array([[10.0, 20.0]])
        path = tmp_path / "f.flo"
        write_flo(path, FlowField(u1, u2))
        values = struct.unpack("<4f", path.read_bytes()[12:])
        assert values == (1.0, 10.0, 2.0, 20.0)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.flo"
        path.write_bytes(struct.pack("<fii", 1.0, 2, 2) + b"\x00" * 32)
        with pytest.raises(CodecError, match="byte offset 0"):
            read_flo(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "short.flo"
        write_flo(path, FlowField.zeros(4, 4))
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(CodecError, match="expected"):
            read_flo(path)


class TestPgm:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        img = rng.integers(0, 256, (10, 12)).astype(np.float64) / 255.0
        path = tmp_path / "img.pgm"
        write_pgm(path, img)
        np.testing.assert_allclose(read_pgm(path), img, atol=1e-12)

    def test_comments_and_whitespace(self, tmp_path):
        path = tmp_path / "c.pgm"
        pixels = bytes(range(6))
        path.write_bytes(b"P5\n# a comment\n3 2\n# another\n255\n" + pixels)
        img = read_pgm(path)
        assert img.shape == (2, 3)
        np.testing.assert_allclose(img.ravel() * 255.0, np.arange(6), atol=1e-12)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P2\n2 2\n255\n1 2 3 4\n")
        with pytest.raises(CodecError, match="P5"):
            read_pgm(path)

    def test_truncated_pixels(self, tmp_path):
        path = tmp_path / "short.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + b"\x00" * 7)
        with pytest.raises(CodecError, match="expected"):
            read_pgm(path)


class TestCsvPreds:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(2)
        probs = rng.random((4, 3))
        probs /= probs.sum(axis=1, keepdims=True)
        path = tmp_path / "p.csv"
        write_csv_preds(path, ["c0", "c1", "c2"], probs)
        classes, back = read_csv_preds(path)
        assert classes == ["c0", "c1", "c2"]
        np.testing.assert_array_equal(back, probs)

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n0.5,0.5\n0.1\n")
        with pytest.raises(CodecError, match="line 3"):
            read_csv_preds(path)

    def test_empty_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(CodecError, match="empty"):
            read_csv_preds(path)


class TestConfig:
    def test_parse(self, tmp_path):
        path = tmp_path / "a.cfg"
        path.write_text("# solver settings\nlam = 0.2\nzoom=0.5\n\nn_scales = 3 # inline\n")
        assert read_config(path) == {"lam": "0.2", "zoom": "0.5", "n_scales": "3"}

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("lam 0.2\n")
        with pytest.raises(ValueError, match="key=value"):
            read_config(path)
