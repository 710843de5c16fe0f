import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from sceneparse.errors import InvalidInputError
from sceneparse.segmentation import SegmentParams, SuperPixelMap, adjacency, oversegment, render_segments


def blocky_image(seed, h=24, w=24, block=6):
    rng = np.random.default_rng(seed)
    small = rng.integers(0, 256, (h // block, w // block, 3))
    img = np.kron(small, np.ones((block, block, 1))).astype(np.uint8)
    noise = rng.integers(-12, 13, img.shape)
    return np.clip(img.astype(int) + noise, 0, 255).astype(np.uint8)


def check_partition(spmap, shape):
    seg = spmap.segment_id
    assert seg.shape == shape
    ids = np.unique(seg)
    np.testing.assert_array_equal(ids, np.arange(spmap.n_segments))
    assert spmap.areas.sum() == shape[0] * shape[1]
    for sid in ids:
        _, n = ndimage.label(seg == sid)
        assert n == 1, f"segment {sid} is not 4-connected"


class TestOversegment:
    def test_uniform_image_is_one_segment(self, backend):
        img = np.full((32, 32, 3), 77, dtype=np.uint8)
        assert oversegment(img).n_segments == 1

    def test_black_white_halves(self, backend):
        img = np.zeros((32, 32, 3), dtype=np.uint8)
        img[:, 16:] = 255
        spmap = oversegment(img, sigma=0.0, min_size=4)
        assert spmap.n_segments == 2
        assert (spmap.segment_id[:, :16] == 0).all() and (spmap.segment_id[:, 16:] == 1).all()

    def test_black_white_halves_default_params(self, backend):
        img = np.zeros((32, 32, 3), dtype=np.uint8)
        img[:, 16:] = 255
        assert oversegment(img).n_segments == 2

    def test_partition_and_min_size(self, backend):
        img = blocky_image(1, 40, 40, 5)
        spmap = oversegment(img, scale=50, sigma=0.5, min_size=20)
        check_partition(spmap, (40, 40))
        assert spmap.areas.min() >= 20

    def test_natural_size_segment_count(self, backend):
        # smooth gradients plus texture, roughly like a 256x256 photo
        rng = np.random.default_rng(0)
        yy, xx = np.mgrid[:256, :256] / 255.0
        img = np.stack([yy, xx, 0.5 * (yy + xx)], axis=-1) * 200
        img += ndimage.gaussian_filter(rng.normal(0, 40, (256, 256, 3)), (3, 3, 0))
        img[100:180, 60:140] = [200, 40, 40]
        spmap = oversegment(np.clip(img, 0, 255).astype(np.uint8))
        assert 5 <= spmap.n_segments <= 400

    def test_deterministic(self, backend):
        img = blocky_image(2)
        a = oversegment(img, scale=30, min_size=5)
        b = oversegment(img, scale=30, min_size=5)
        np.testing.assert_array_equal(a.segment_id, b.segment_id)

    def test_segments_metadata(self):
        img = blocky_image(3)
        spmap = oversegment(img, scale=30, min_size=5)
        for s in spmap.segments:
            rows, cols = np.divmod(s.pixels, img.shape[1])
            assert s.area == s.pixels.size == spmap.areas[s.id]
            assert s.bbox == (rows.min(), cols.min(), rows.max(), cols.max())

    def test_errors(self):
        with pytest.raises(InvalidInputError):
            oversegment(np.zeros((0, 5, 3), dtype=np.uint8))
        with pytest.raises(InvalidInputError):
            oversegment(np.zeros((4, 4, 3), dtype=np.uint8), min_size=17)
        with pytest.raises(InvalidInputError):
            SegmentParams(scale=0)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), m1=st.integers(1, 40), m2=st.integers(1, 40))
    def test_min_size_monotone(self, seed, m1, m2):
        img = blocky_image(seed)
        lo, hi = sorted((m1, m2))
        n_lo = oversegment(img, scale=20, sigma=0.5, min_size=lo).n_segments
        n_hi = oversegment(img, scale=20, sigma=0.5, min_size=hi).n_segments
        assert n_hi <= n_lo

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000), scale=st.floats(1, 500), sigma=st.floats(0, 2))
    def test_partition_property(self, seed, scale, sigma):
        img = blocky_image(seed)
        check_partition(oversegment(img, scale=scale, sigma=sigma, min_size=3), img.shape[:2])


class TestAdjacency:
    def test_single_segment(self):
        assert adjacency(SuperPixelMap(np.zeros((3, 3), dtype=np.int32))) == []

    def test_two_pixels(self):
        assert adjacency(SuperPixelMap(np.array([[0], [1]]))) == [(0, 1)]

    def test_vertical_stripes(self):
        seg = np.tile(np.arange(3), (3, 1))
        assert adjacency(SuperPixelMap(seg)) == [(0, 1), (1, 2)]

    def test_matches_pixel_enumeration(self):
        spmap = oversegment(blocky_image(4), scale=30, min_size=5)
        seg = spmap.segment_id
        h, w = seg.shape
        expect = set()
        for r in range(h):
            for c in range(w):
                for dr, dc in ((0, 1), (1, 0)):
                    if r + dr < h and c + dc < w and seg[r, c] != seg[r + dr, c + dc]:
                        a, b = seg[r, c], seg[r + dr, c + dc]
                        expect.add((min(a, b), max(a, b)))
        assert adjacency(spmap) == sorted(expect)

    def test_render(self):
        spmap = oversegment(blocky_image(5), scale=30, min_size=5)
        out = render_segments(spmap)
        assert out.shape == spmap.shape + (3,) and out.dtype == np.uint8
