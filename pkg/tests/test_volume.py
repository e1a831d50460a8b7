"""Volume I/O: sidecar parsing, axis canonicalization, normalization."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from octseg.volume import (
    SizeMismatchError,
    Volume,
    VolumeMeta,
    load_volume,
    normalize_intensities,
    save_volume,
)


def write_raw(path, arr):
    arr.tofile(path)
    return path


class TestMeta:
    def test_roundtrip_json(self, tmp_path):
        meta = VolumeMeta(dims=(4, 5, 6), dtype="f32", endian="le", order="zxy",
                          spacing_um=(7.0, 11.5, 11.5))
        p = tmp_path / "m.json"
        meta.save(p)
        assert VolumeMeta.from_json(p) == meta

    def test_rejects_bad_order(self):
        with pytest.raises(ValueError):
            VolumeMeta(dims=(2, 2, 2), order="xxy")

    def test_rejects_bad_dtype(self):
        with pytest.raises(ValueError):
            VolumeMeta(dims=(2, 2, 2), dtype="u16")

    def test_rejects_nonpositive_dims(self):
        with pytest.raises(ValueError):
            VolumeMeta(dims=(2, 0, 2))

    def test_rejects_unknown_keys(self):
        with pytest.raises(ValueError):
            VolumeMeta.from_dict({"dims": [2, 2, 2], "flavor": "salted"})

    def test_nbytes(self):
        assert VolumeMeta(dims=(480, 300, 99), dtype="u8").nbytes == 480 * 300 * 99
        assert VolumeMeta(dims=(2, 3, 4), dtype="f32").nbytes == 96


class TestLoad:
    def test_u8_endpoint_scaling(self, tmp_path):
        arr = np.array([0, 255, 128, 51], dtype=np.uint8).reshape(1, 2, 2)
        p = write_raw(tmp_path / "v.raw", arr)
        meta = VolumeMeta(dims=(1, 2, 2), order="xyz")
        v = load_volume(p, meta)
        assert v.data[0, 0, 0] == 0.0
        assert v.data[0, 0, 1] == 1.0
        assert v.data[0, 1, 0] == np.float32(128 / 255)
        assert v.data[0, 1, 1] == np.float32(51 / 255)

    def test_size_mismatch_reports_both_sizes(self, tmp_path):
        p = tmp_path / "v.raw"
        p.write_bytes(b"\x00" * 7)
        meta = VolumeMeta(dims=(2, 2, 2), order="xyz")
        with pytest.raises(SizeMismatchError) as exc:
            load_volume(p, meta)
        assert exc.value.expected == 8
        assert exc.value.actual == 7

    def test_missing_file_raises_oserror(self, tmp_path):
        meta = VolumeMeta(dims=(2, 2, 2), order="xyz")
        with pytest.raises(OSError):
            load_volume(tmp_path / "absent.raw", meta)

    def test_axis_permutation_zxy(self, tmp_path):
        # file stores depth slowest; loader must land values at [x, y, z]
        rng = np.random.default_rng(0)
        file_arr = rng.integers(0, 256, size=(5, 3, 2), dtype=np.uint8)  # (z, x, y)
        p = write_raw(tmp_path / "v.raw", file_arr)
        meta = VolumeMeta(dims=(5, 3, 2), order="zxy")
        v = load_volume(p, meta)
        assert v.dims == (3, 2, 5)
        for z in range(5):
            for x in range(3):
                for y in range(2):
                    assert v.data[x, y, z] == np.float32(file_arr[z, x, y] / 255)

    def test_permutation_preserves_value_multiset(self, tmp_path):
        rng = np.random.default_rng(1)
        file_arr = rng.integers(0, 256, size=(4, 6, 5), dtype=np.uint8)
        p = write_raw(tmp_path / "v.raw", file_arr)
        for order, dims in [("zxy", (4, 6, 5)), ("yzx", (4, 6, 5)), ("xyz", (4, 6, 5))]:
            v = load_volume(p, VolumeMeta(dims=dims, order=order))
            assert np.array_equal(
                np.sort(v.data, axis=None),
                np.sort(file_arr.astype(np.float32).ravel() / 255),
            )

    def test_spacing_follows_axes(self, tmp_path):
        arr = np.zeros((5, 3, 2), dtype=np.uint8)
        p = write_raw(tmp_path / "v.raw", arr)
        meta = VolumeMeta(dims=(5, 3, 2), order="zxy", spacing_um=(7.0, 11.0, 13.0))
        v = load_volume(p, meta)
        # file axes are (z, x, y): dz=7, dx=11, dy=13
        assert v.spacing == (11.0, 13.0, 7.0)

    def test_ascan_scale_shape(self, tmp_path):
        # depth-major file at clinical scale lands depth on the last axis
        arr = np.zeros((480, 30, 9), dtype=np.uint8)
        p = write_raw(tmp_path / "v.raw", arr)
        v = load_volume(p, VolumeMeta(dims=(480, 30, 9), order="zxy"))
        assert v.dims == (30, 9, 480)
        assert v.data[0, 0].flags["C_CONTIGUOUS"]


class TestNormalization:
    def test_in_range_untouched(self):
        arr = np.array([0.0, 0.25, 1.0], dtype=np.float32)
        out = normalize_intensities(arr)
        assert out is arr or np.array_equal(out, arr)

    def test_out_of_range_rescaled_to_unit(self):
        arr = np.array([-2.0, 0.0, 6.0], dtype=np.float32)
        out = normalize_intensities(arr)
        assert out.min() == 0.0
        assert out.max() == 1.0
        assert np.allclose(out, [0.0, 0.25, 1.0])

    def test_constant_out_of_range_collapses_to_zero(self):
        out = normalize_intensities(np.full(5, 7.0, dtype=np.float32))
        assert np.array_equal(out, np.zeros(5, dtype=np.float32))

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_idempotent(self, seed):
        rng = np.random.default_rng(seed)
        arr = (rng.standard_normal((3, 4, 5)) * rng.uniform(0.1, 50)).astype(np.float32)
        once = normalize_intensities(arr)
        twice = normalize_intensities(once)
        assert np.array_equal(once, twice)


class TestSave:
    def test_float_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(2)
        data = rng.random((4, 3, 5)).astype(np.float32)
        data.flat[0] = 0.0
        data.flat[1] = 1.0
        v = Volume(data, spacing=(10.0, 10.0, 7.0))
        meta = save_volume(v, tmp_path / "v.raw")
        assert meta.dims == (4, 3, 5)
        back = load_volume(tmp_path / "v.raw", VolumeMeta.from_json(tmp_path / "v.raw.json"))
        assert np.array_equal(back.data, data)
        assert back.spacing == (10.0, 10.0, 7.0)

    def test_u8_roundtrip_on_quantized_values(self, tmp_path):
        data = (np.arange(24, dtype=np.float32) % 256 / 255).reshape(2, 3, 4)
        v = Volume(data)
        save_volume(v, tmp_path / "v.raw", dtype="u8")
        back = load_volume(tmp_path / "v.raw", VolumeMeta.from_json(tmp_path / "v.raw.json"))
        assert np.array_equal(back.data, data)

    def test_rejects_unknown_dtype(self, tmp_path):
        with pytest.raises(ValueError):
            save_volume(Volume(np.zeros((1, 1, 1))), tmp_path / "v.raw", dtype="f64")


class TestVolumeType:
    def test_rejects_non_3d(self):
        with pytest.raises(ValueError):
            Volume(np.zeros((2, 2)))

    def test_casts_ints_to_float32(self):
        v = Volume(np.arange(8, dtype=np.int64).reshape(2, 2, 2))
        assert v.data.dtype == np.float32

    def test_keeps_float64(self):
        v = Volume(np.zeros((2, 2, 2), dtype=np.float64))
        assert v.data.dtype == np.float64
