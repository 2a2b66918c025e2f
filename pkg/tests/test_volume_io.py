import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from harmonicseg import read_volume, write_volume
from harmonicseg.errors import VolumeFormatError
from harmonicseg.volume_io import HEADER_SIZE, MAGIC


class TestWriteVolume:
    def test_header_layout(self, tmp_path):
        path = tmp_path / "v.shv"
        write_volume(np.zeros((4, 3, 2), dtype=np.uint8), path)
        data = path.read_bytes()
        assert data[:4] == MAGIC
        assert data[4] == 0
        assert struct.unpack("<3I", data[5:17]) == (4, 3, 2)
        assert len(data) == HEADER_SIZE + 24  # u8 payload is 24 bytes

    def test_single_float_voxel(self, tmp_path):
        path = tmp_path / "v.shv"
        write_volume(np.full((1, 1, 1), 0.5, dtype=np.float32), path)
        data = path.read_bytes()
        assert len(data) == HEADER_SIZE + 4
        assert data[-4:] == struct.pack("<f", 0.5)  # IEEE-754 0x3F000000
        assert data[-4:] == b"\x00\x00\x00\x3f"

    def test_payload_is_x_fastest(self, tmp_path):
        volume = np.arange(8, dtype=np.uint8).reshape(2, 2, 2)
        path = tmp_path / "v.shv"
        write_volume(volume, path)
        payload = path.read_bytes()[HEADER_SIZE:]
        assert list(payload) == list(volume.ravel(order="F"))

    def test_bool_written_as_mask(self, tmp_path):
        path = tmp_path / "v.shv"
        write_volume(np.ones((2, 2, 2), dtype=bool), path)
        back = read_volume(path)
        assert back.dtype == np.uint8
        assert np.array_equal(back, np.ones((2, 2, 2), dtype=np.uint8))

    def test_unsupported_dtype_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_volume(np.zeros((2, 2, 2), dtype=np.int64),
                         tmp_path / "v.shv")

    def test_non_3d_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_volume(np.zeros((2, 2), dtype=np.uint8), tmp_path / "v.shv")


class TestReadVolume:
    def test_round_trip_all_dtypes(self, tmp_path):
        rng = np.random.default_rng(1)
        cases = [
            rng.integers(0, 255, size=(5, 4, 3)).astype(np.uint8),
            rng.integers(0, 60000, size=(3, 3, 3)).astype(np.uint16),
            rng.standard_normal((4, 2, 6)).astype(np.float32),
        ]
        for i, volume in enumerate(cases):
            path = tmp_path / f"v{i}.shv"
            write_volume(volume, path)
            back = read_volume(path)
            assert back.dtype == volume.dtype
            assert np.array_equal(back, volume)

    def test_write_read_write_is_byte_identical(self, tmp_path):
        volume = np.random.default_rng(2).standard_normal((6, 5, 4))
        volume = volume.astype(np.float32)
        first = tmp_path / "a.shv"
        second = tmp_path / "b.shv"
        write_volume(volume, first)
        write_volume(read_volume(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "v.shv"
        path.write_bytes(MAGIC + b"\x00\x01")
        with pytest.raises(VolumeFormatError) as excinfo:
            read_volume(path)
        assert excinfo.value.offset == 6

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "v.shv"
        path.write_bytes(b"XXXX" + bytes(13))
        with pytest.raises(VolumeFormatError) as excinfo:
            read_volume(path)
        assert excinfo.value.offset == 0

    def test_unknown_dtype_code(self, tmp_path):
        path = tmp_path / "v.shv"
        path.write_bytes(MAGIC + bytes([9]) + struct.pack("<3I", 1, 1, 1) + b"\x00")
        with pytest.raises(VolumeFormatError) as excinfo:
            read_volume(path)
        assert excinfo.value.offset == 4

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "v.shv"
        header = MAGIC + bytes([0]) + struct.pack("<3I", 2, 2, 2)
        path.write_bytes(header + bytes(5))  # 8 bytes expected
        with pytest.raises(VolumeFormatError) as excinfo:
            read_volume(path)
        assert excinfo.value.offset == HEADER_SIZE

    def test_oversized_payload(self, tmp_path):
        path = tmp_path / "v.shv"
        header = MAGIC + bytes([0]) + struct.pack("<3I", 2, 2, 2)
        path.write_bytes(header + bytes(9))
        with pytest.raises(VolumeFormatError):
            read_volume(path)

    @settings(max_examples=60, deadline=None)
    @given(
        dims=st.tuples(st.integers(1, 6), st.integers(1, 6), st.integers(1, 6)),
        code=st.integers(0, 2),
        seed=st.integers(0, 2**31 - 1),
    )
    def test_round_trip_property(self, tmp_path_factory, dims, code, seed):
        rng = np.random.default_rng(seed)
        dtype = [np.uint8, np.uint16, np.float32][code]
        if code == 2:
            volume = rng.standard_normal(dims).astype(dtype)
        else:
            volume = rng.integers(0, np.iinfo(dtype).max,
                                  size=dims).astype(dtype)
        path = tmp_path_factory.mktemp("shv") / "v.shv"
        write_volume(volume, path)
        back = read_volume(path)
        assert back.dtype == volume.dtype
        assert np.array_equal(back, volume)
