"""Per-image IoU scoring, dataset mIoU, and human-agreement reports.

Quad-vs-quad scoring is geometric (exact polygon clipping) in original
image coordinates; mask predictions are scored against the ground-truth
quad rasterized at the mask's own resolution.  Every report entry records
which mode produced it so the two kinds of numbers are never silently
mixed.  Missing predictions are an error, not a zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import AnnotationRecord
from .errors import MissingPrediction, ParseError, ShapeMismatch
from .geometry import Quad, canonicalize, quad_iou
from .image_io import atomic_write_text
from .raster import rasterize_quad

__all__ = [
    "EvalEntry",
    "EvalReport",
    "evaluate_quads",
    "evaluate_pixels",
    "human_agreement",
    "save_report_text",
    "load_report_text",
    "save_report_json",
    "load_report_json",
]

_FORMAT = "pageseg-eval"
_VERSION = 1


@dataclass(frozen=True)
class EvalEntry:
    image_id: str
    iou: float
    mode: str  # "geometric" or "raster"


@dataclass(frozen=True)
class EvalReport:
    system: str
    entries: tuple[EvalEntry, ...]
    miou: float

    @property
    def count(self) -> int:
        return len(self.entries)


def _make_report(system: str, entries: list[EvalEntry]) -> EvalReport:
    miou = float(np.mean([e.iou for e in entries])) if entries else 0.0
    return EvalReport(system, tuple(entries), miou)


def _require_all(preds, gts):
    missing = [k for k in gts if k not in preds]
    if missing:
        raise MissingPrediction(missing)


def evaluate_quads(preds: dict, gts: dict, system: str = "system") -> EvalReport:
    """Geometric IoU per image between predicted and ground-truth quads."""
    _require_all(preds, gts)
    entries = []
    for image_id in sorted(gts):
        iou = quad_iou(preds[image_id], gts[image_id])
        entries.append(EvalEntry(image_id, iou, "geometric"))
    return _make_report(system, entries)


def evaluate_pixels(preds: dict, gts: dict[str, AnnotationRecord], system: str = "system") -> EvalReport:
    """Raster IoU between predicted masks and rasterized ground truth.

    Each ground-truth quad is scaled from its record's original dimensions
    to the prediction mask's resolution before rasterization, so masks may
    come from any processing size.
    """
    _require_all(preds, gts)
    entries = []
    for image_id in sorted(gts):
        rec = gts[image_id]
        mask = np.asarray(preds[image_id], dtype=bool)
        if mask.ndim != 2:
            raise ShapeMismatch(f"{image_id}: prediction mask must be 2D")
        h, w = mask.shape
        quad = rec.quad.scaled(w / rec.width, h / rec.height)
        gt_mask = rasterize_quad(quad, h, w)
        union = int(np.count_nonzero(mask | gt_mask))
        iou = (int(np.count_nonzero(mask & gt_mask)) / union) if union else 0.0
        entries.append(EvalEntry(image_id, iou, "raster"))
    return _make_report(system, entries)


def human_agreement(set_a, set_b, system: str = "human-agreement") -> EvalReport:
    """Score one annotator's quads against another's, images matched by path."""
    gts = {r.image_path: canonicalize(r.quad.corners) for r in set_a}
    preds = {r.image_path: canonicalize(r.quad.corners) for r in set_b}
    missing = set(gts) ^ set(preds)
    if missing:
        raise MissingPrediction(missing)
    return evaluate_quads(preds, gts, system=system)


# ---------------------------------------------------------------------------
# report serialization
# ---------------------------------------------------------------------------


def save_report_text(path, report: EvalReport) -> None:
    lines = [f"{_FORMAT} {_VERSION}", f"system {report.system}"]
    for e in report.entries:
        lines.append(f"image {e.image_id}\t{e.iou!r}\t{e.mode}")
    lines.append(f"miou {report.miou!r} count {report.count}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_report_text(path) -> EvalReport:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != f"{_FORMAT} {_VERSION}":
        raise ParseError("not a recognized eval report", path=str(path), line=1)
    if len(lines) < 3 or not lines[1].startswith("system "):
        raise ParseError("missing system line", path=str(path), line=2)
    system = lines[1][len("system ") :]
    entries = []
    for i, line in enumerate(lines[2:-1], start=3):
        if not line.startswith("image "):
            raise ParseError("expected an image line", path=str(path), line=i)
        image_id, iou, mode = line[len("image ") :].split("\t")
        entries.append(EvalEntry(image_id, float(iou), mode))
    summary = lines[-1].split()
    if len(summary) != 4 or summary[0] != "miou" or summary[2] != "count":
        raise ParseError("bad summary line", path=str(path), line=len(lines))
    report = _make_report(system, entries)
    if int(summary[3]) != report.count or abs(float(summary[1]) - report.miou) > 1e-9:
        raise ParseError("summary does not match entries", path=str(path), line=len(lines))
    return report


def save_report_json(path, report: EvalReport) -> None:
    doc = {
        "format": _FORMAT,
        "version": _VERSION,
        "system": report.system,
        "entries": [
            {"image": e.image_id, "iou": e.iou, "mode": e.mode} for e in report.entries
        ],
        "miou": report.miou,
        "count": report.count,
    }
    atomic_write_text(path, json.dumps(doc, indent=2) + "\n")


def load_report_json(path) -> EvalReport:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != _FORMAT or doc.get("version") != _VERSION:
        raise ParseError("not a recognized eval report", path=str(path))
    entries = [EvalEntry(e["image"], float(e["iou"]), e["mode"]) for e in doc["entries"]]
    return _make_report(doc["system"], entries)
