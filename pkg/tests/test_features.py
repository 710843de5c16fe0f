import numpy as np
import pytest

from sceneparse.errors import InvalidInputError
from sceneparse.features import (
    CATALOG,
    DEFAULT_CHANNELS,
    HISTOGRAM_CHANNELS,
    FeatureRegistry,
    assign_training_label,
    assign_training_labels,
    extract,
)
from sceneparse.segmentation import SuperPixelMap, oversegment


def quadrant_map(h=16, w=16):
    seg = np.ones((h, w), dtype=np.int32)
    seg[: h // 2, : w // 2] = 0
    return SuperPixelMap(seg)


class TestRegistry:
    def test_full_catalogue_dimension(self):
        assert len(CATALOG) == 20
        assert FeatureRegistry.full().dimension == 1708

    def test_default_subset(self):
        reg = FeatureRegistry()
        assert reg.channels == DEFAULT_CHANNELS
        assert reg.dimension == 64 + 2 + 1 + 1 + 3 + 3 + 33 + 100 + 192

    def test_layout_contiguous(self):
        reg = FeatureRegistry.full()
        offset = 0
        for _, start, n in reg.layout:
            assert start == offset
            offset += n
        assert offset == reg.dimension

    def test_roundtrip(self):
        reg = FeatureRegistry(channels=("area", "mean_color"), hist_bins=7)
        assert FeatureRegistry.from_dict(reg.to_dict()) == reg

    def test_rejects_bad_channels(self):
        with pytest.raises(InvalidInputError):
            FeatureRegistry(channels=())
        with pytest.raises(InvalidInputError):
            FeatureRegistry(channels=("area", "nope"))
        with pytest.raises(InvalidInputError):
            FeatureRegistry(channels=("area", "area"))


class TestExtract:
    def test_constant_red_segment(self):
        img = np.zeros((16, 16, 3), dtype=np.uint8)
        img[..., 0] = 255
        reg = FeatureRegistry()
        X = extract(img, quadrant_map(), reg)
        np.testing.assert_allclose(X[0, reg.slice("mean_color")], [1.0, 0.0, 0.0])
        np.testing.assert_allclose(X[0, reg.slice("color_std")], [0.0, 0.0, 0.0])

    def test_quadrant_geometry(self):
        img = np.zeros((16, 16, 3), dtype=np.uint8)
        reg = FeatureRegistry()
        X = extract(img, quadrant_map(), reg)
        np.testing.assert_allclose(X[0, reg.slice("bounding_box")], [0.5, 0.5])
        np.testing.assert_allclose(X[0, reg.slice("area")], [0.25])
        np.testing.assert_allclose(X[0, reg.slice("top_height")], [1.0])

    def test_histograms_sum_to_one_full_registry(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, (40, 48, 3)).astype(np.uint8)
        spmap = oversegment(img, scale=300, min_size=30)
        reg = FeatureRegistry.full()
        X = extract(img, spmap, reg)
        assert X.shape == (spmap.n_segments, 1708)
        assert np.isfinite(X).all()
        for name in HISTOGRAM_CHANNELS:
            sums = X[:, reg.slice(name)].sum(axis=1)
            ok = np.isclose(sums, 1.0, atol=1e-6) | np.isclose(sums, 0.0)
            assert ok.all(), name
        for name in ("color_hist", "texton_hist", "sift_hist", "dilated_color_hist"):
            np.testing.assert_allclose(X[:, reg.slice(name)].sum(axis=1), 1.0, atol=1e-6)

    def test_translation_consistency(self):
        rng = np.random.default_rng(1)
        img = rng.integers(0, 256, (30, 30, 3)).astype(np.uint8)
        seg = np.zeros((30, 30), dtype=np.int32)
        seg[5:15, 6:14] = 1
        shifted_img = np.roll(img, (4, 5), axis=(0, 1))
        shifted_seg = np.roll(seg, (4, 5), axis=(0, 1))
        reg = FeatureRegistry(channels=("centered_mask", "mean_color", "color_std", "color_hist", "color_thumbnail"))
        a = extract(img, SuperPixelMap(seg), reg)[1]
        b = extract(shifted_img, SuperPixelMap(shifted_seg), reg)[1]
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            extract(np.zeros((4, 4, 3), dtype=np.uint8), quadrant_map())


class TestTrainingLabels:
    def seg(self, fractions):
        """Segment of 10 pixels with label counts proportional to ``fractions``."""
        mask = np.concatenate([np.full(int(round(f * 10)), lab) for lab, f in fractions.items()])
        return np.arange(10), mask

    def test_inside_one_region(self):
        pix, mask = self.seg({3: 1.0})
        assert assign_training_label(pix, mask) == 3

    def test_majority(self):
        pix, mask = self.seg({0: 0.6, 1: 0.4})
        assert assign_training_label(pix, mask) == 0

    def test_no_majority(self):
        pix, mask = self.seg({0: 0.4, 1: 0.3, 2: 0.3})
        assert assign_training_label(pix, mask) is None

    def test_exact_tie_goes_to_smaller_id(self):
        pix, mask = self.seg({4: 0.5, 2: 0.5})
        assert assign_training_label(pix, mask) == 2

    def test_void_counts_in_area(self):
        pix, mask = self.seg({1: 0.4, 255: 0.6})
        assert assign_training_label(pix, mask) is None

    def test_vectorised_matches_scalar(self):
        rng = np.random.default_rng(2)
        img = rng.integers(0, 256, (30, 30, 3)).astype(np.uint8)
        spmap = oversegment(img, scale=200, min_size=20)
        mask = rng.choice([0, 1, 2, 255], size=(30, 30), p=[0.5, 0.3, 0.1, 0.1]).astype(np.uint8)
        mask[:15] = 1
        vec = assign_training_labels(spmap, mask)
        for s in spmap.segments:
            lab = assign_training_label(s, mask)
            assert vec[s.id] == (-1 if lab is None else lab)
