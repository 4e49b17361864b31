"""Full-image and mean-quadrilateral reference systems."""

import numpy as np
import pytest

from pageseg.baselines import (
    MeanQuadModel,
    fit_mean_quad,
    load_mean_quad,
    predict_full_image,
    predict_mean_quad,
    save_mean_quad,
)
from pageseg.dataset import AnnotationRecord
from pageseg.errors import EmptyDataset
from pageseg.geometry import canonicalize, polygon_area, quad_iou

import oracles


def record(path, w, h, corners, annotator=None):
    return AnnotationRecord(path, w, h, canonicalize(corners), annotator)


class TestFitMeanQuad:
    def test_single_full_frame_image(self):
        rec = record("a.png", 200, 100, [(0, 0), (200, 0), (200, 100), (0, 100)])
        model = fit_mean_quad([rec])
        assert model.corners == ((0, 0), (1, 0), (1, 1), (0, 1))

    def test_mean_of_identical_normalized_quads(self):
        q1 = [(10, 10), (90, 10), (90, 90), (10, 90)]
        q2 = [(20, 20), (180, 20), (180, 180), (20, 180)]  # same after normalizing
        model = fit_mean_quad(
            [record("a", 100, 100, q1), record("b", 200, 200, q2)]
        )
        np.testing.assert_allclose(
            model.corners, [(0.1, 0.1), (0.9, 0.1), (0.9, 0.9), (0.1, 0.9)]
        )

    def test_top_left_average(self):
        a = record("a", 100, 100, [(10, 10), (90, 10), (90, 90), (10, 90)])
        b = record("b", 100, 100, [(30, 10), (90, 10), (90, 90), (30, 90)])
        model = fit_mean_quad([a, b])
        assert model.corners[0][0] == pytest.approx(0.2)

    def test_order_invariance(self):
        rng = np.random.default_rng(41)
        recs = [
            record(f"r{i}", 128, 96, oracles.random_convex_quad(rng, 5, 90).corners)
            for i in range(10)
        ]
        m1 = fit_mean_quad(recs)
        m2 = fit_mean_quad(list(reversed(recs)))
        np.testing.assert_allclose(m1.corners, m2.corners, atol=1e-15)

    def test_matches_direct_recomputation(self):
        rng = np.random.default_rng(42)
        recs = []
        for i in range(50):
            w, h = int(rng.integers(50, 400)), int(rng.integers(50, 400))
            recs.append(record(f"r{i}", w, h, oracles.random_convex_quad(rng, 2, 45).corners))
        model = fit_mean_quad(recs)
        # independent recomputation with plain Python loops
        sums = [[0.0, 0.0] for _ in range(4)]
        for rec in recs:
            quad = canonicalize(rec.quad.corners)
            for n, p in enumerate(quad.corners):
                sums[n][0] += p.x / rec.width
                sums[n][1] += p.y / rec.height
        for n in range(4):
            assert abs(model.corners[n][0] - sums[n][0] / len(recs)) < 1e-12
            assert abs(model.corners[n][1] - sums[n][1] / len(recs)) < 1e-12

    def test_empty_rejected(self):
        with pytest.raises(EmptyDataset):
            fit_mean_quad([])


class TestPredictMeanQuad:
    def test_unit_model_full_frame(self):
        model = MeanQuadModel(((0, 0), (1, 0), (1, 1), (0, 1)))
        q = predict_mean_quad(model, 256, 256)
        assert [(p.x, p.y) for p in q.corners] == [(0, 0), (256, 0), (256, 256), (0, 256)]

    def test_scaling_arithmetic(self):
        model = MeanQuadModel(((0.25, 0.5), (1, 0.5), (1, 1), (0.25, 1)))
        q = predict_mean_quad(model, 400, 200)
        assert (q.corners[0].x, q.corners[0].y) == (100.0, 100.0)

    def test_commutes_with_uniform_scaling(self):
        rng = np.random.default_rng(43)
        base = oracles.random_convex_quad(rng, 5, 90)
        model = fit_mean_quad([record("a", 100, 100, base.corners)])
        q1 = predict_mean_quad(model, 100, 100)
        q2 = predict_mean_quad(model, 200, 200)
        assert quad_iou(q1.scaled(1 / 100, 1 / 100), q2.scaled(1 / 200, 1 / 200)) == 1.0


class TestPredictFullImage:
    def test_frame_corners(self):
        q = predict_full_image(256, 256)
        assert [(p.x, p.y) for p in q.corners] == [(0, 0), (256, 0), (256, 256), (0, 256)]

    def test_iou_equals_normalized_gt_area(self):
        rng = np.random.default_rng(44)
        for _ in range(20):
            gt = oracles.random_convex_quad(rng, 5, 95)
            frame = predict_full_image(100, 100)
            assert quad_iou(frame, gt) == pytest.approx(polygon_area(gt) / 10000.0)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(45)
        model = fit_mean_quad(
            [record("a", 123, 77, oracles.random_convex_quad(rng, 3, 70).corners)]
        )
        path = tmp_path / "meanquad.txt"
        save_mean_quad(path, model)
        loaded = load_mean_quad(path)
        assert loaded == model
        assert path.read_text().startswith("pageseg-meanquad 1\n")
