"""Synthetic generators, IDX parsing, image transforms."""

import struct

import numpy as np
import pytest

from encgan.datasets import (
    LabeledDataset,
    apply_transform,
    gen_disconnected_arcs,
    gen_parallel_segments,
    gen_synthetic_digits,
    load_idx,
    make_transform_family,
    write_idx,
)
from encgan.errors import ContractError, DataFormatError


class TestParallelSegments:
    def test_single_segment(self):
        ds = gen_parallel_segments(1, 50, 2, separation=0.5, noise_sd=0.02, seed=0)
        assert ds.n == 50
        assert np.all(ds.labels == 0)

    def test_noiseless_normal_coordinates_exact(self):
        ds = gen_parallel_segments(2, 100, 2, separation=0.5, noise_sd=0.0, seed=1)
        normal_coords = np.abs(ds.samples[:, 1])
        assert set(np.round(normal_coords, 12)) == {0.0, 0.5}

    def test_segment_means_differ_by_separation(self):
        sep = 0.6
        ds = gen_parallel_segments(2, 4000, 2, separation=sep, noise_sd=0.05, seed=2)
        means = [ds.samples[ds.labels == i, 1].mean() for i in (0, 1)]
        sigma = 0.05 / np.sqrt(4000)
        assert abs((means[1] - means[0]) - sep) < 3 * np.sqrt(2) * sigma

    def test_range_and_determinism(self):
        a = gen_parallel_segments(3, 100, 4, separation=0.4, noise_sd=0.05, seed=3)
        b = gen_parallel_segments(3, 100, 4, separation=0.4, noise_sd=0.05, seed=3)
        np.testing.assert_array_equal(a.samples, b.samples)
        assert a.samples.min() >= -1.0 and a.samples.max() <= 1.0

    def test_rejects_bad_arguments(self):
        with pytest.raises(ContractError):
            gen_parallel_segments(0, 10, 2, 0.5, 0.0, 0)
        with pytest.raises(ContractError):
            gen_parallel_segments(2, 10, 2, -1.0, 0.0, 0)


class TestDisconnectedArcs:
    def test_single_arc(self):
        ds = gen_disconnected_arcs(1, 40, seed=0)
        assert ds.n == 40

    def test_points_satisfy_circle_equation(self):
        ds = gen_disconnected_arcs(3, 100, seed=1, noise_sd=0.0,
                                   radius_start=0.2, radius_step=0.2)
        radii = np.linalg.norm(ds.samples, axis=1)
        expected = 0.2 + ds.labels * 0.2
        assert np.abs(radii - expected).max() < 1e-12

    def test_nearest_arc_recovers_labels(self):
        ds = gen_disconnected_arcs(3, 500, seed=2, noise_sd=0.01,
                                   radius_start=0.2, radius_step=0.25)
        radii = np.linalg.norm(ds.samples, axis=1)
        centers = np.array([0.2, 0.45, 0.7])
        predicted = np.argmin(np.abs(radii[:, None] - centers[None, :]), axis=1)
        accuracy = np.mean(predicted == ds.labels)
        assert accuracy >= 0.99


class TestIdx:
    def _write_pair(self, tmp_path, images, labels):
        img_path = tmp_path / "img.idx3-ubyte"
        lbl_path = tmp_path / "lbl.idx1-ubyte"
        write_idx(images, labels, img_path, lbl_path)
        return img_path, lbl_path

    def test_hand_built_single_image_round_trip(self, tmp_path):
        image = np.array([[[0, 51], [102, 255]]], dtype=np.uint8)
        img_path, lbl_path = self._write_pair(tmp_path, image, np.array([7]))
        ds = load_idx(img_path, lbl_path)
        expected = np.array([[0, 51], [102, 255]]) / 255.0 * 2.0 - 1.0
        np.testing.assert_allclose(ds.samples[0], expected, atol=1e-15)
        assert ds.labels[0] == 7

    def test_range_endpoints_map_exactly(self, tmp_path):
        image = np.array([[[0, 255]]], dtype=np.uint8).reshape(1, 1, 2)
        img_path, lbl_path = self._write_pair(tmp_path, image, np.array([0]))
        ds = load_idx(img_path, lbl_path)
        assert ds.samples[0, 0, 0] == -1.0
        assert ds.samples[0, 0, 1] == 1.0

    def test_bad_image_magic_reports_offset(self, tmp_path):
        img_path = tmp_path / "bad.idx"
        img_path.write_bytes(struct.pack(">IIII", 0xDEAD, 1, 2, 2) + b"\x00" * 4)
        lbl_path = tmp_path / "lbl.idx"
        lbl_path.write_bytes(struct.pack(">II", 0x00000801, 1) + b"\x00")
        with pytest.raises(DataFormatError, match="magic") as excinfo:
            load_idx(img_path, lbl_path)
        assert excinfo.value.offset == 0

    def test_truncated_file_reports_offset(self, tmp_path):
        img_path = tmp_path / "trunc.idx"
        img_path.write_bytes(struct.pack(">IIII", 0x00000803, 2, 2, 2) + b"\x00" * 5)
        lbl_path = tmp_path / "lbl.idx"
        lbl_path.write_bytes(struct.pack(">II", 0x00000801, 2) + b"\x00\x00")
        with pytest.raises(DataFormatError, match="truncated"):
            load_idx(img_path, lbl_path)

    def test_count_mismatch_rejected(self, tmp_path):
        img_path = tmp_path / "img.idx"
        img_path.write_bytes(struct.pack(">IIII", 0x00000803, 1, 1, 1) + b"\x00")
        lbl_path = tmp_path / "lbl.idx"
        lbl_path.write_bytes(struct.pack(">II", 0x00000801, 2) + b"\x00\x00")
        with pytest.raises(DataFormatError, match="disagree"):
            load_idx(img_path, lbl_path)

    def test_downsample_2x2_mean(self, tmp_path):
        image = np.arange(16, dtype=np.uint8).reshape(1, 4, 4)
        img_path, lbl_path = self._write_pair(tmp_path, image, np.array([1]))
        ds = load_idx(img_path, lbl_path, downsample=True)
        full = image[0].astype(np.float64) / 255.0 * 2.0 - 1.0
        expected = full.reshape(2, 2, 2, 2).mean(axis=(1, 3))
        np.testing.assert_allclose(ds.samples[0], expected, atol=1e-15)

    def test_limit(self, tmp_path):
        images = np.zeros((5, 2, 2), dtype=np.uint8)
        img_path, lbl_path = self._write_pair(tmp_path, images, np.arange(5))
        assert load_idx(img_path, lbl_path, limit=3).n == 3


class TestTransforms:
    def _image_dataset(self, n=3, size=12, seed=0):
        images, labels = gen_synthetic_digits(n, classes=(0,), size=size, seed=seed)
        samples = images.astype(np.float64) / 255.0 * 2.0 - 1.0
        return LabeledDataset(samples, labels)

    def test_identity_levels_are_pixel_identical(self):
        ds = self._image_dataset()
        for kind in ("shear", "width-scale", "brightness"):
            family = make_transform_family(kind, n_levels=11)
            out = apply_transform(ds, family, family.identity_level)
            np.testing.assert_array_equal(out.samples, ds.samples)

    def test_brightness_shifts_unclamped_pixels_exactly(self):
        ds = self._image_dataset()
        family = make_transform_family("brightness", n_levels=11)
        out = apply_transform(ds, family, 0.2)
        unclamped = ds.samples + 0.2 <= 1.0
        np.testing.assert_allclose(out.samples[unclamped],
                                   (ds.samples + 0.2)[unclamped], atol=1e-15)

    def test_shear_then_inverse_recovers_image(self):
        ds = self._image_dataset(n=5, size=28, seed=1)
        family = make_transform_family("shear", n_levels=11)
        sheared = apply_transform(ds, family, 12.0)
        restored = apply_transform(sheared, family, -12.0)
        # resampling loss, measured on the [0, 1] grayscale scale
        mae = np.abs(restored.samples - ds.samples).mean() / 2.0
        assert mae < 0.02

    def test_level_outside_range_rejected(self):
        ds = self._image_dataset()
        family = make_transform_family("shear", n_levels=11)
        with pytest.raises(ContractError, match="outside"):
            apply_transform(ds, family, 90.0)

    def test_labels_preserved(self):
        ds = self._image_dataset()
        family = make_transform_family("width-scale", n_levels=11)
        out = apply_transform(ds, family, family.levels[0])
        np.testing.assert_array_equal(out.labels, ds.labels)

    def test_family_validation(self):
        with pytest.raises(ContractError, match="identity"):
            from encgan.datasets import TransformFamily

            TransformFamily("brightness", [0.1, 0.2])
        with pytest.raises(ContractError):
            make_transform_family("shear", n_levels=10)

    def test_default_eleven_levels_symmetric(self):
        for kind in ("shear", "width-scale", "brightness"):
            family = make_transform_family(kind)
            assert family.levels.size == 11
            assert np.any(np.isclose(family.levels, family.identity_level))


class TestSyntheticDigits:
    def test_deterministic_and_shaped(self):
        a, la = gen_synthetic_digits(10, seed=5)
        b, lb = gen_synthetic_digits(10, seed=5)
        np.testing.assert_array_equal(a, b)
        assert a.shape == (20, 28, 28)
        assert a.dtype == np.uint8
        np.testing.assert_array_equal(np.bincount(la), [10, 10])

    def test_classes_visually_distinct_by_centroid(self):
        images, labels = gen_synthetic_digits(50, seed=6)
        flat = images.reshape(100, -1).astype(np.float64)
        c0 = flat[labels == 0].mean(axis=0)
        c1 = flat[labels == 1].mean(axis=0)
        d0 = ((flat - c0) ** 2).sum(axis=1)
        d1 = ((flat - c1) ** 2).sum(axis=1)
        predicted = (d1 < d0).astype(int)
        assert np.mean(predicted == labels) > 0.95


def test_ndjson_export(tmp_path):
    ds = gen_parallel_segments(2, 5, 2, 0.5, 0.0, seed=0)
    path = tmp_path / "ds.ndjson"
    ds.to_ndjson(path)
    import json

    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert len(rows) == 10
    assert set(rows[0]) == {"values", "label"}
    np.testing.assert_allclose(rows[0]["values"], ds.samples[0], atol=1e-15)
