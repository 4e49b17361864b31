"""Command-line entry point.

Subcommands: train, infer, baseline (full-image | mean-quad-fit |
mean-quad-predict), eval, synth, annotate.  Exit codes: 0 success, 1 usage
error, 2 data error, 3 internal assertion failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import baselines, dataset, evaluation, fcn, image_io, pipeline, synthetic
from .errors import EmptyMask, PagesegError
from .geometry import canonicalize
from .training import TrainConfig, format_log, train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _default_workers() -> int:
    env = os.environ.get("PAGESEG_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pageseg", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train the pixel classifier")
    t.add_argument("--annotations", required=True)
    t.add_argument("--images-dir", required=True)
    t.add_argument("--val-annotations", required=True)
    t.add_argument("--out-model", required=True)
    t.add_argument("--out-log", default=None, help="default: <out-model>.log")
    t.add_argument("--updates", type=int, default=15000)
    t.add_argument("--batch", type=int, default=2)
    t.add_argument("--lr", type=float, default=0.001)
    t.add_argument("--lr-after", type=float, default=0.0001)
    t.add_argument("--lr-drop-at", type=int, default=10000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--restarts", type=int, default=10)
    t.add_argument("--base-channels", type=int, default=12)
    t.add_argument("--input-size", type=int, default=256)
    t.set_defaults(func=cmd_train)

    i = sub.add_parser("infer", help="run inference on images")
    i.add_argument("--model", required=True)
    i.add_argument("--images", nargs="+", required=True)
    i.add_argument("--out-dir", required=True)
    i.add_argument("--emit", choices=("probmap", "mask", "quad"), default="quad")
    i.add_argument("--on-empty", choices=("error", "full-image"), default="full-image")
    i.add_argument("--input-size", type=int, default=256)
    i.add_argument("--workers", type=int, default=None)
    i.set_defaults(func=cmd_infer)

    b = sub.add_parser("baseline", help="reference systems")
    bsub = b.add_subparsers(dest="baseline_command", required=True)
    bf = bsub.add_parser("full-image")
    bf.add_argument("--annotations", required=True)
    bf.add_argument("--out", required=True)
    bf.set_defaults(func=cmd_baseline_full)
    bm = bsub.add_parser("mean-quad-fit")
    bm.add_argument("--annotations", required=True)
    bm.add_argument("--out-model", required=True)
    bm.set_defaults(func=cmd_baseline_fit)
    bp = bsub.add_parser("mean-quad-predict")
    bp.add_argument("--model", required=True)
    bp.add_argument("--annotations", required=True)
    bp.add_argument("--out", required=True)
    bp.set_defaults(func=cmd_baseline_predict)

    e = sub.add_parser("eval", help="score predictions against ground truth")
    group = e.add_mutually_exclusive_group(required=True)
    group.add_argument("--pred-quads", help="predicted quads in annotation format")
    group.add_argument("--pred-masks", help="directory of predicted PGM masks")
    e.add_argument("--gt", required=True)
    e.add_argument("--report-out", required=True)
    e.add_argument("--system", default="system")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="generate a synthetic dataset")
    s.add_argument("--spec", default=None, help="JSON spec file (defaults used when omitted)")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=None, help="override the spec's seed")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_synth)

    a = sub.add_parser("annotate", help="serve the annotation UI and API")
    a.add_argument("--annotations", required=True)
    a.add_argument("--images-dir", required=True)
    a.add_argument("--listen", default="127.0.0.1:8799")
    a.add_argument("--model", default=None, help="FCN model for prediction overlays")
    a.add_argument("--mean-quad", default=None, help="mean-quad model for overlays")
    a.add_argument("--ui-dir", default=None, help="directory with the built web UI")
    a.add_argument("--input-size", type=int, default=256)
    a.set_defaults(func=cmd_annotate)

    return p


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    records = dataset.load_annotations(args.annotations)
    val_records = dataset.load_annotations(args.val_annotations)
    train_set = dataset.build_samples(records, args.images_dir, args.input_size)
    val_set = dataset.build_samples(val_records, args.images_dir, args.input_size)
    cfg = TrainConfig(
        total_updates=args.updates,
        batch_size=args.batch,
        lr_initial=args.lr,
        lr_after=args.lr_after,
        lr_drop_at=min(args.lr_drop_at, args.updates),
        seed=args.seed,
        num_restarts=args.restarts,
    )
    result = train(cfg, train_set, val_set, base_channels=args.base_channels)
    fcn.save_model(result.model, args.out_model)
    log_path = args.out_log or (args.out_model + ".log")
    image_io.atomic_write_text(log_path, format_log(result))
    best = result.val_mious[result.best_restart]
    print(f"best restart {result.best_restart} val miou {best:.6f}")
    print(f"model written to {args.out_model}")
    return EXIT_OK


def _infer_one(model, path, out_dir, args):
    img = image_io.read_image(path)
    stem = Path(path).stem
    prob = pipeline.predict_probmap(model, img, args.input_size)
    if args.emit == "probmap":
        image_io.write_probmap_pgm(out_dir / f"{stem}.prob.pgm", prob)
        return None
    if args.emit == "mask":
        try:
            mask = pipeline.cleanup_mask(prob)
        except EmptyMask:
            if args.on_empty == "error":
                raise EmptyMask(f"{path}: prediction is empty at threshold 0.5") from None
            mask = np.ones(prob.shape, dtype=bool)
        image_io.write_mask_pgm(out_dir / f"{stem}.mask.pgm", mask)
        return None
    h, w = img.shape[:2]
    try:
        quad = pipeline.predict_quad(model, img, args.input_size, on_empty="error")
    except EmptyMask:
        if args.on_empty == "error":
            raise EmptyMask(f"{path}: prediction is empty at threshold 0.5") from None
        quad = baselines.predict_full_image(w, h)
    return dataset.AnnotationRecord(Path(path).name, w, h, quad)


def cmd_infer(args) -> int:
    model = fcn.load_model(args.model)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = args.workers or _default_workers()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda p: _infer_one(model, p, out_dir, args), args.images))
    if args.emit == "quad":
        dataset.save_annotations(out_dir / "quads.tsv", [r for r in results if r])
    print(f"processed {len(args.images)} image(s) into {out_dir}")
    return EXIT_OK


def cmd_baseline_full(args) -> int:
    records = dataset.load_annotations(args.annotations)
    preds = [
        dataset.AnnotationRecord(
            r.image_path, r.width, r.height, baselines.predict_full_image(r.width, r.height)
        )
        for r in records
    ]
    dataset.save_annotations(args.out, preds)
    print(f"wrote {len(preds)} full-image quads to {args.out}")
    return EXIT_OK


def cmd_baseline_fit(args) -> int:
    records = dataset.load_annotations(args.annotations)
    model = baselines.fit_mean_quad(records)
    baselines.save_mean_quad(args.out_model, model)
    print(f"mean quad fitted from {len(records)} records; model at {args.out_model}")
    return EXIT_OK


def cmd_baseline_predict(args) -> int:
    model = baselines.load_mean_quad(args.model)
    records = dataset.load_annotations(args.annotations)
    preds = [
        dataset.AnnotationRecord(
            r.image_path, r.width, r.height, baselines.predict_mean_quad(model, r.width, r.height)
        )
        for r in records
    ]
    dataset.save_annotations(args.out, preds)
    print(f"wrote {len(preds)} mean-quad predictions to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    gt_records = dataset.load_annotations(args.gt)
    gts_quads = {r.image_path: canonicalize(r.quad.corners) for r in gt_records}
    if args.pred_quads:
        pred_records = dataset.load_annotations(args.pred_quads)
        preds = {r.image_path: canonicalize(r.quad.corners) for r in pred_records}
        report = evaluation.evaluate_quads(preds, gts_quads, system=args.system)
    else:
        mask_dir = Path(args.pred_masks)
        masks = {}
        for r in gt_records:
            stem = Path(r.image_path).stem
            for candidate in (f"{stem}.mask.pgm", f"{stem}.pgm"):
                path = mask_dir / candidate
                if path.exists():
                    masks[r.image_path] = image_io.read_mask_pgm(path)
                    break
        gts_records = {r.image_path: r for r in gt_records}
        report = evaluation.evaluate_pixels(masks, gts_records, system=args.system)
    evaluation.save_report_text(args.report_out, report)
    evaluation.save_report_json(args.report_out + ".json", report)
    print(f"miou {report.miou!r} over {report.count} image(s)")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = synthetic.load_spec(args.spec) if args.spec else synthetic.SyntheticSpec()
    if args.seed is not None:
        spec = synthetic.SyntheticSpec(**{**spec.__dict__, "seed": args.seed})
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs = synthetic.generate_synthetic(spec, args.n)
    for img, record in pairs:
        image_io.write_image(out_dir / record.image_path, img)
    dataset.save_annotations(out_dir / "annotations.tsv", [r for _, r in pairs])
    synthetic.save_spec(out_dir / "spec.json", spec)
    print(f"wrote {len(pairs)} synthetic images to {out_dir}")
    return EXIT_OK


def cmd_annotate(args) -> int:
    from . import server

    host, _, port_str = args.listen.rpartition(":")
    if not host or not port_str.isdigit():
        raise _UsageError(f"--listen must be host:port, got {args.listen!r}")
    srv = server.make_server(
        host,
        int(port_str),
        annotations_path=args.annotations,
        images_dir=args.images_dir,
        model_path=args.model,
        mean_quad_path=args.mean_quad,
        ui_dir=args.ui_dir,
        input_size=args.input_size,
    )
    print(f"annotation server listening on http://{host}:{srv.server_address[1]}/")
    try:
        srv.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        srv.server_close()
    return EXIT_OK


def main(argv=None) -> int:
    try:
        parser = build_parser()
        try:
            args = parser.parse_args(argv)
        except _UsageError as e:
            print(f"usage error: {e}", file=sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except PagesegError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except AssertionError as e:
        print(f"internal assertion failed: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
