"""Mask operations: thresholding, components, holes, rasterization, resize."""

import numpy as np
import pytest

from pageseg.errors import ShapeMismatch
from pageseg.geometry import canonicalize, mask_quad_iou
from pageseg.raster import (
    fill_holes,
    largest_component,
    rasterize_quad,
    resize_bilinear,
    threshold,
)

import oracles


def random_blob_mask(rng, h=24, w=24, blobs=3):
    mask = np.zeros((h, w), bool)
    for _ in range(blobs):
        r0, c0 = rng.integers(0, h - 4), rng.integers(0, w - 4)
        rh, cw = rng.integers(2, 8), rng.integers(2, 8)
        mask[r0 : min(h, r0 + rh), c0 : min(w, c0 + cw)] = True
    return mask


class TestThreshold:
    def test_all_ones(self):
        assert threshold(np.ones((4, 4)), 0.5).all()

    def test_all_zeros(self):
        assert not threshold(np.zeros((4, 4)), 0.5).any()

    def test_boundary_value_is_foreground(self):
        assert threshold(np.array([[0.5]]), 0.5)[0, 0]

    def test_threshold_range_checked(self):
        with pytest.raises(ValueError):
            threshold(np.zeros((2, 2)), 1.5)


class TestLargestComponent:
    def test_single_blob_unchanged(self):
        m = np.zeros((8, 8), bool)
        m[2:5, 2:6] = True
        np.testing.assert_array_equal(largest_component(m), m)

    def test_keeps_bigger_blob(self):
        m = np.zeros((10, 10), bool)
        m[0:2, 0:5] = True  # 10 px
        m[7:8, 0:5] = True  # 5 px
        out = largest_component(m)
        assert out[0:2, 0:5].all()
        assert not out[7:8, 0:5].any()

    def test_tie_goes_to_first_in_scan_order(self):
        m = np.zeros((10, 10), bool)
        m[6, 0:3] = True  # later rows, same size
        m[1, 5:8] = True  # encountered first in row-major order
        out = largest_component(m)
        assert out[1, 5:8].all() and not out[6, 0:3].any()
        # cross-check against a BFS flood-fill oracle
        labels = oracles.flood_components(m, connectivity=8)
        sizes = np.bincount(labels.ravel())[1:]
        winners = np.flatnonzero(sizes == sizes.max()) + 1
        first = min(winners, key=lambda lab: int(np.argmax(labels.ravel() == lab)))
        np.testing.assert_array_equal(out, labels == first)

    def test_diagonal_pixels_are_one_component(self):
        m = np.zeros((5, 5), bool)
        m[0, 0] = m[1, 1] = m[2, 2] = True  # 8-connected chain
        m[4, 4] = True
        out = largest_component(m)
        assert out[0, 0] and out[1, 1] and out[2, 2] and not out[4, 4]

    def test_all_background(self):
        m = np.zeros((4, 4), bool)
        np.testing.assert_array_equal(largest_component(m), m)

    def test_matches_flood_fill_on_random_masks(self):
        rng = np.random.default_rng(21)
        for _ in range(30):
            m = rng.random((16, 16)) < 0.35
            out = largest_component(m)
            labels = oracles.flood_components(m, connectivity=8)
            if labels.max() == 0:
                assert not out.any()
                continue
            sizes = np.bincount(labels.ravel())[1:]
            winners = np.flatnonzero(sizes == sizes.max()) + 1
            first = min(winners, key=lambda lab: int(np.argmax(labels.ravel() == lab)))
            np.testing.assert_array_equal(out, labels == first)


class TestFillHoles:
    def test_solid_rect_unchanged(self):
        m = np.zeros((8, 8), bool)
        m[2:6, 2:6] = True
        np.testing.assert_array_equal(fill_holes(m), m)

    def test_donut_becomes_solid(self):
        m = np.zeros((9, 9), bool)
        m[1:8, 1:8] = True
        m[3:6, 3:6] = False
        out = fill_holes(m)
        assert out[1:8, 1:8].all()
        assert out.sum() == 49

    def test_c_shape_cavity_open_to_border_unchanged(self):
        m = np.zeros((7, 9), bool)
        m[1:6, 1:8] = True
        m[0:4, 3:6] = False  # notch open to the top border
        np.testing.assert_array_equal(fill_holes(m), m)

    def test_matches_border_flood_oracle(self):
        rng = np.random.default_rng(22)
        for _ in range(30):
            m = rng.random((14, 14)) < 0.45
            want = m | ~oracles.border_background(m)
            np.testing.assert_array_equal(fill_holes(m), want)


class TestMaskInvariants:
    def test_subset_superset_and_idempotence(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            m = random_blob_mask(rng)
            lc = largest_component(m)
            fh = fill_holes(m)
            assert not (lc & ~m).any()  # output subset of input
            assert (fh & m).sum() == m.sum()  # output superset of input
            np.testing.assert_array_equal(largest_component(lc), lc)
            np.testing.assert_array_equal(fill_holes(fh), fh)

    def test_cleanup_yields_one_component_one_background(self):
        rng = np.random.default_rng(24)
        for _ in range(30):
            m = random_blob_mask(rng, blobs=4)
            if not m.any():
                continue
            cleaned = fill_holes(largest_component(m))
            fg = oracles.flood_components(cleaned, connectivity=8)
            assert fg.max() == 1
            bg = oracles.flood_components(~cleaned, connectivity=4)
            border_bg = oracles.border_background(cleaned)
            # every background pixel must be border-connected
            np.testing.assert_array_equal(bg > 0, border_bg)


class TestRasterizeQuad:
    def test_full_frame(self):
        q = canonicalize([(-1, -1), (11, -1), (11, 11), (-1, 11)])
        assert rasterize_quad(q, 10, 10).all()

    def test_zero_area_quad(self):
        q = canonicalize([(3, 3)] * 4)
        assert not rasterize_quad(q, 10, 10).any()

    def test_axis_aligned_rect_pixel_count(self):
        q = canonicalize([(2, 2), (7, 2), (7, 5), (2, 5)])
        mask = rasterize_quad(q, 10, 10)
        assert mask.sum() == 24  # 6 x 4 centers inside under the center rule
        for r in range(10):
            for c in range(10):
                assert mask[r, c] == (2 <= c <= 7 and 2 <= r <= 5)

    def test_roundtrip_with_mask_quad_iou(self):
        rng = np.random.default_rng(25)
        for _ in range(20):
            q = oracles.random_convex_quad(rng, low=2.0, high=30.0)
            mask = rasterize_quad(q, 32, 32)
            if mask.any():
                assert mask_quad_iou(mask, q) == 1.0


class TestResizeBilinear:
    def test_identity_is_bit_exact(self):
        rng = np.random.default_rng(26)
        img = rng.integers(0, 256, size=(256, 256), dtype=np.uint8)
        out = resize_bilinear(img, 256, 256)
        assert out.dtype == img.dtype
        np.testing.assert_array_equal(out, img)

    def test_constant_image_stays_constant(self):
        img = np.full((7, 5, 3), 42.0)
        out = resize_bilinear(img, 13, 11)
        np.testing.assert_allclose(out, 42.0)

    def test_hand_computed_2x1_to_4x1(self):
        img = np.array([[0.0], [100.0]])
        out = resize_bilinear(img, 4, 1)
        # centers map to source rows -0.25, 0.25, 0.75, 1.25 (clamped)
        np.testing.assert_allclose(out[:, 0], [0.0, 25.0, 75.0, 100.0])

    def test_bad_dims_rejected(self):
        with pytest.raises(ValueError):
            resize_bilinear(np.zeros((4, 4)), 0, 4)
        with pytest.raises(ShapeMismatch):
            resize_bilinear(np.zeros(4), 2, 2)
