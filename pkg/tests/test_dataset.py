"""Annotation files, preprocessing, and splits."""

import numpy as np
import pytest

from pageseg.dataset import (
    AnnotationRecord,
    format_annotation_line,
    load_annotations,
    parse_annotation_line,
    preprocess,
    save_annotations,
    split,
)
from pageseg.errors import EmptyDataset, ParseError, ShapeMismatch
from pageseg.geometry import canonicalize
from pageseg.raster import rasterize_quad


def record(path="img.png", w=100, h=80, corners=None, annotator=None):
    corners = corners or [(5.5, 4.0), (95.0, 4.0), (95.0, 76.25), (5.5, 76.25)]
    return AnnotationRecord(path, w, h, canonicalize(corners), annotator)


class TestAnnotationFile:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.tsv"
        path.write_text("")
        assert load_annotations(path) == []

    def test_round_trip_single_record(self, tmp_path):
        rec = record(annotator="annotator-b")
        path = tmp_path / "ann.tsv"
        save_annotations(path, [rec])
        loaded = load_annotations(path)
        assert loaded == [rec]
        # a second save is byte-identical
        text1 = path.read_bytes()
        save_annotations(path, loaded)
        assert path.read_bytes() == text1

    def test_three_point_quad_rejected_with_line(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text(
            format_annotation_line(record("ok.png")) + "\n"
            + "bad.png\t10\t10\t0,0\t5,0\t5,5\n"
        )
        with pytest.raises(ParseError) as err:
            load_annotations(path)
        assert err.value.line == 2

    def test_duplicate_paths_rejected(self, tmp_path):
        path = tmp_path / "dup.tsv"
        line = format_annotation_line(record("same.png"))
        path.write_text(line + "\n" + line + "\n")
        with pytest.raises(ParseError) as err:
            load_annotations(path)
        assert "duplicate" in str(err.value)

    def test_bad_numbers_and_dims(self):
        with pytest.raises(ParseError):
            parse_annotation_line("a.png\t-3\t10\t0,0\t1,0\t1,1\t0,1")
        with pytest.raises(ParseError):
            parse_annotation_line("a.png\t10\t10\t0,x\t1,0\t1,1\t0,1")
        with pytest.raises(ParseError):
            parse_annotation_line("a.png\t10\t10\t0,0\t1,0\t1,1")

    def test_corners_outside_frame_allowed(self):
        rec = parse_annotation_line("a.png\t10\t10\t-1.5,-2\t12,0\t11,11\t0,12")
        assert rec.width == 10


class TestPreprocess:
    def test_intensity_mapping_extremes(self):
        img = np.zeros((8, 8, 3), np.uint8)
        img[:4] = 255
        rec = record("x.png", 8, 8, [(0, 0), (8, 0), (8, 8), (0, 8)])
        sample = preprocess(img, rec, size=8)
        assert sample.input.max() == 0.5
        assert sample.input.min() == -0.5

    def test_full_frame_quad_gives_all_foreground(self):
        img = np.full((10, 20, 3), 128, np.uint8)
        rec = record("x.png", 20, 10, [(-0.5, -0.5), (20, -0.5), (20, 10), (-0.5, 10)])
        sample = preprocess(img, rec, size=16)
        assert sample.target.all()

    def test_half_height_quad_rows(self):
        img = np.full((512, 512, 3), 90, np.uint8)
        rec = record("x.png", 512, 512, [(0, 0), (512, 0), (512, 256), (0, 256)])
        sample = preprocess(img, rec, size=256)
        # scaled quad spans y in [0, 128]; under the center rule rows 0..128
        # are inside, i.e. rows 0..127 plus the boundary row 128
        for r in range(256):
            assert sample.target[r].all() == (r <= 128)

    def test_target_matches_rasterizer_exactly(self):
        rng = np.random.default_rng(51)
        img = rng.integers(0, 256, size=(37, 53, 3), dtype=np.uint8)
        rec = record("x.png", 53, 37, [(3, 2), (50, 4), (48, 33), (5, 31)])
        sample = preprocess(img, rec, size=32)
        scaled = rec.quad.scaled(32 / 53, 32 / 37)
        np.testing.assert_array_equal(sample.target, rasterize_quad(scaled, 32, 32))

    def test_dimension_mismatch_rejected(self):
        img = np.zeros((10, 10, 3), np.uint8)
        with pytest.raises(ShapeMismatch):
            preprocess(img, record("x.png", 20, 10), size=16)

    def test_grayscale_replicated(self):
        img = np.full((8, 8), 200, np.uint8)
        rec = record("x.png", 8, 8, [(0, 0), (8, 0), (8, 8), (0, 8)])
        sample = preprocess(img, rec, size=8)
        assert sample.input.shape == (3, 8, 8)
        np.testing.assert_array_equal(sample.input[0], sample.input[2])


class TestSplit:
    def test_single_fraction_takes_all(self):
        recs = [record(f"{i}.png") for i in range(7)]
        (train,) = split(recs, (1.0,), seed=0)
        assert sorted(r.image_path for r in train) == sorted(r.image_path for r in recs)

    def test_sizes_8_1_1(self):
        recs = [record(f"{i}.png") for i in range(10)]
        train, val, test = split(recs, (0.8, 0.1, 0.1), seed=3)
        assert (len(train), len(val), len(test)) == (8, 1, 1)
        together = {r.image_path for r in train + val + test}
        assert len(together) == 10

    def test_deterministic(self):
        recs = [record(f"{i}.png") for i in range(25)]
        a = split(recs, (0.6, 0.2, 0.2), seed=9)
        b = split(recs, (0.6, 0.2, 0.2), seed=9)
        assert a == b

    def test_empty_rejected(self):
        with pytest.raises(EmptyDataset):
            split([], (0.5, 0.5), seed=0)

    def test_bad_fractions(self):
        recs = [record(f"{i}.png") for i in range(4)]
        with pytest.raises(ValueError):
            split(recs, (0.7, 0.7), seed=0)
        with pytest.raises(ValueError):
            split(recs, (), seed=0)
