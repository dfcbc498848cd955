import struct

import numpy as np
import pytest

from framebank.masks import BinaryMask
from framebank.tensorio import (
    ManifestError,
    ManifestRecord,
    TensorFormatError,
    read_manifest,
    read_mask_pgm,
    read_tensor,
    write_manifest,
    write_mask_pgm,
    write_tensor,
)


def rec(frame=0, step=0, layer="ca.0", head=0, kind="cross_q", path="t.eyit", shape=(2, 2)):
    return ManifestRecord(
        frame_index=frame,
        step_index=step,
        layer_id=layer,
        head_index=head,
        kind=kind,
        path=path,
        spatial_shape=shape,
    )


class TestTensorRoundTrip:
    def test_round_trip_bitwise(self, tmp_path):
        values = np.array([[1.5, -2.25, 3.0], [0.0, 4096.5, -0.125]], dtype=np.float32)
        path = tmp_path / "t.eyit"
        write_tensor(path, values)
        out = read_tensor(path)
        assert out.dtype == np.float32
        assert out.shape == (2, 3)
        assert np.array_equal(out, values)
        assert out.tobytes() == values.tobytes()

    def test_round_trip_3d(self, tmp_path):
        rng = np.random.default_rng(0)
        values = rng.standard_normal((4, 5, 6)).astype(np.float32)
        path = tmp_path / "t.eyit"
        write_tensor(path, values)
        assert np.array_equal(read_tensor(path), values)

    def test_float64_cast_on_write(self, tmp_path):
        values = np.array([0.1, 0.2])
        path = tmp_path / "t.eyit"
        write_tensor(path, values)
        assert np.array_equal(read_tensor(path), values.astype(np.float32))

    def test_header_layout(self, tmp_path):
        path = tmp_path / "t.eyit"
        write_tensor(path, np.zeros((2, 3), dtype=np.float32))
        data = path.read_bytes()
        assert data[:4] == b"EYIT"
        version, dtype_code, rank = struct.unpack_from("<HBB", data, 4)
        assert (version, dtype_code, rank) == (1, 1, 2)
        assert struct.unpack_from("<2Q", data, 8) == (2, 3)
        assert len(data) == 8 + 16 + 24

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.eyit"
        path.write_bytes(b"XXXX" + b"\x00" * 20)
        with pytest.raises(TensorFormatError, match="magic"):
            read_tensor(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "t.eyit"
        write_tensor(path, np.zeros(10, dtype=np.float32))
        data = path.read_bytes()
        path.write_bytes(data[:-4])  # drop one value
        with pytest.raises(TensorFormatError, match="truncated"):
            read_tensor(path)

    def test_trailing_bytes(self, tmp_path):
        path = tmp_path / "t.eyit"
        write_tensor(path, np.zeros(4, dtype=np.float32))
        path.write_bytes(path.read_bytes() + b"\x00\x00\x00\x00")
        with pytest.raises(TensorFormatError, match="trailing"):
            read_tensor(path)

    def test_unsupported_version_and_dtype(self, tmp_path):
        path = tmp_path / "t.eyit"
        write_tensor(path, np.zeros(2, dtype=np.float32))
        data = bytearray(path.read_bytes())
        data[4] = 9
        path.write_bytes(bytes(data))
        with pytest.raises(TensorFormatError, match="version"):
            read_tensor(path)
        data[4] = 1
        data[6] = 7
        path.write_bytes(bytes(data))
        with pytest.raises(TensorFormatError, match="dtype"):
            read_tensor(path)

    def test_dim_overflow(self, tmp_path):
        path = tmp_path / "t.eyit"
        header = b"EYIT" + struct.pack("<HBB", 1, 1, 2) + struct.pack("<2Q", 2**40, 2**40)
        path.write_bytes(header + b"\x00" * 64)
        with pytest.raises(TensorFormatError, match="overflow|truncated"):
            read_tensor(path)

    def test_rejects_nonfinite(self, tmp_path):
        with pytest.raises(ValueError, match="finite"):
            write_tensor(tmp_path / "t.eyit", np.array([np.nan]))


class TestPgm:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        mask = BinaryMask(rng.random((5, 7)) > 0.5)
        path = tmp_path / "m.pgm"
        write_mask_pgm(path, mask)
        out = read_mask_pgm(path)
        np.testing.assert_array_equal(out.bits, mask.bits)

    def test_header_text(self, tmp_path):
        path = tmp_path / "m.pgm"
        write_mask_pgm(path, BinaryMask(np.ones((3, 4), dtype=bool)))
        assert path.read_bytes().startswith(b"P5\n4 3\n255\n")

    def test_rejects_ascii_pgm(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P2\n2 2\n255\n0 255 0 255\n")
        with pytest.raises(TensorFormatError, match="P5"):
            read_mask_pgm(path)

    def test_rejects_gray_values(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n2 1\n255\n" + bytes([0, 128]))
        with pytest.raises(TensorFormatError, match="0 or 255"):
            read_mask_pgm(path)

    def test_rejects_wrong_maxval(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n1 1\n15\n\x00")
        with pytest.raises(TensorFormatError, match="maxval"):
            read_mask_pgm(path)

    def test_rejects_short_payload(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n2 2\n255\n\x00\xff")
        with pytest.raises(TensorFormatError, match="payload"):
            read_mask_pgm(path)


class TestManifest:
    def test_round_trip(self, tmp_path):
        (tmp_path / "a.eyit").write_bytes(b"")
        (tmp_path / "b.eyit").write_bytes(b"")
        records = [
            rec(kind="cross_q", path="a.eyit"),
            rec(kind="cross_k", path="b.eyit"),
            rec(frame=1, kind="spatial_features", head=None, path="a.eyit", shape=(4, 4)),
        ]
        path = tmp_path / "manifest.tsv"
        write_manifest(path, records)
        assert read_manifest(path) == records

    def test_duplicate_key_rejected(self, tmp_path):
        (tmp_path / "a.eyit").write_bytes(b"")
        path = tmp_path / "manifest.tsv"
        write_manifest(path, [rec(path="a.eyit"), rec(path="a.eyit")])
        with pytest.raises(ManifestError, match="duplicate"):
            read_manifest(path)

    def test_missing_file_rejected(self, tmp_path):
        path = tmp_path / "manifest.tsv"
        write_manifest(path, [rec(path="ghost.eyit")])
        with pytest.raises(ManifestError, match="missing"):
            read_manifest(path)
        assert read_manifest(path, check_files=False)[0].path == "ghost.eyit"

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "manifest.tsv"
        path.write_text("#record-manifest v2\n")
        with pytest.raises(ManifestError, match="version"):
            read_manifest(path)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "manifest.tsv"
        path.write_text("0\t0\tca.0\t0\tcross_q\ta.eyit\t2\t2\n")
        with pytest.raises(ManifestError, match="header"):
            read_manifest(path)

    def test_unknown_kind_rejected_on_write_and_read(self, tmp_path):
        with pytest.raises(ManifestError, match="kind"):
            write_manifest(tmp_path / "m.tsv", [rec(kind="values")])
        path = tmp_path / "manifest.tsv"
        path.write_text("#record-manifest v1\n0\t0\tl\t0\tvalues\ta\t2\t2\n")
        with pytest.raises(ManifestError, match="kind"):
            read_manifest(path)

    def test_whitespace_layer_rejected(self, tmp_path):
        with pytest.raises(ManifestError, match="whitespace"):
            write_manifest(tmp_path / "m.tsv", [rec(layer="bad layer")])
