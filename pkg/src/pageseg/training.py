"""SGD training loop with momentum, weight decay, clipping, and restarts.

Training runs num_restarts independently seeded trainings and keeps the
model with the best validation quad mIoU, scored through the full
post-processing pipeline (extract a quad from each validation probability
map, upscale to original coordinates, IoU against the annotated quad).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDataset, EmptyMask
from .fcn import FcnModel, ModelGrads, forward, init_model, loss_and_gradients, zero_grads
from .geometry import canonicalize, quad_iou
from .quadfit import extract_quad, upscale_quad

__all__ = ["TrainConfig", "TrainResult", "sgd_step", "train", "validation_miou"]


@dataclass
class TrainConfig:
    total_updates: int = 15000
    batch_size: int = 2
    lr_initial: float = 0.001
    lr_after: float = 0.0001
    lr_drop_at: int = 10000
    momentum: float = 0.9
    weight_decay: float = 0.0005
    grad_clip_norm: float = 10.0
    seed: int = 0
    num_restarts: int = 10

    def __post_init__(self):
        if self.lr_drop_at > self.total_updates:
            raise ValueError("lr_drop_at must not exceed total_updates")
        if self.lr_initial <= 0 or self.lr_after <= 0:
            raise ValueError("learning rates must be positive")

    def lr_at(self, update_index: int) -> float:
        return self.lr_initial if update_index < self.lr_drop_at else self.lr_after


@dataclass
class TrainResult:
    model: FcnModel
    best_restart: int
    val_mious: list[float]
    # One (update_index, loss) list per restart.
    logs: list[list[tuple[int, float]]] = field(default_factory=list)


def sgd_step(
    model: FcnModel,
    grads: ModelGrads,
    state: ModelGrads,
    cfg: TrainConfig,
    update_index: int,
) -> FcnModel:
    """One momentum SGD update, in place.

    Weight decay is added to the raw gradients first; the concatenated
    gradient vector is then rescaled to L2 norm <= grad_clip_norm; finally
    v <- mu*v - lr*g and w <- w + v.  state holds the momentum buffers.
    """
    lr = cfg.lr_at(update_index)
    params = list(model.param_arrays())
    gs = [g.copy() for g in grads.param_arrays()]
    for g, w in zip(gs, params):
        if cfg.weight_decay:
            g += cfg.weight_decay * w
    norm_sq = sum(float(np.sum(g * g)) for g in gs)
    norm = math.sqrt(norm_sq)
    if norm > cfg.grad_clip_norm:
        scale = cfg.grad_clip_norm / norm
        for g in gs:
            g *= scale
    for w, g, v in zip(params, gs, state.param_arrays()):
        v *= cfg.momentum
        v -= lr * g
        w += v
    return model


def validation_miou(model: FcnModel, val_set) -> float:
    """Mean quad IoU over validation samples, through full post-processing.

    An empty thresholded prediction falls back to the full-frame quad (a
    trained model may legitimately label a well-cropped image all page, and
    selection should not crash on a bad restart).
    """
    if not val_set:
        raise EmptyDataset("validation set is empty")
    ious = []
    for sample in val_set:
        prob = forward(model, sample.input[None])[0]
        h, w = prob.shape
        try:
            quad = extract_quad(prob)
        except EmptyMask:
            quad = canonicalize([(0, 0), (w, 0), (w, h), (0, h)])
        quad = upscale_quad(quad, (h, w), (sample.meta.height, sample.meta.width))
        ious.append(quad_iou(quad, canonicalize(sample.meta.quad.corners)))
    return float(np.mean(ious))


def train(
    cfg: TrainConfig,
    train_set,
    val_set,
    base_channels: int = 12,
    kernel_size: int = 3,
) -> TrainResult:
    """Run seeded restarts and keep the best model by validation quad mIoU.

    train_set and val_set are sequences of dataset.Sample.  Restart r uses
    seed cfg.seed + r for both initialization and batch sampling.  Ties on
    the validation score go to the earliest restart.
    """
    if not train_set:
        raise EmptyDataset("training set is empty")
    if not val_set:
        raise EmptyDataset("validation set is empty")
    if cfg.num_restarts < 1:
        raise ValueError("num_restarts must be at least 1")

    n = len(train_set)
    best_model = None
    best_miou = -1.0
    best_restart = 0
    val_mious: list[float] = []
    logs: list[list[tuple[int, float]]] = []

    for r in range(cfg.num_restarts):
        seed = cfg.seed + r
        rng = np.random.default_rng(seed)
        model = init_model(base_channels, kernel_size, seed=seed)
        state = zero_grads(model)
        log: list[tuple[int, float]] = []
        for u in range(cfg.total_updates):
            idx = rng.choice(n, size=cfg.batch_size, replace=n < cfg.batch_size)
            x = np.stack([train_set[i].input for i in idx])
            y = np.stack([train_set[i].target for i in idx])
            loss, grads = loss_and_gradients(model, x, y)
            sgd_step(model, grads, state, cfg, u)
            log.append((u, loss))
        miou = validation_miou(model, val_set)
        val_mious.append(miou)
        logs.append(log)
        if miou > best_miou:
            best_miou = miou
            best_model = model
            best_restart = r

    return TrainResult(best_model, best_restart, val_mious, logs)


def format_log(result: TrainResult) -> str:
    """Plain-text training log: update<TAB>loss lines, '#' metadata lines."""
    lines = []
    for r, log in enumerate(result.logs):
        lines.append(f"# restart {r}")
        for u, loss in log:
            lines.append(f"{u}\t{loss!r}")
        lines.append(f"# val_miou {result.val_mious[r]!r}")
    lines.append(f"# best_restart {result.best_restart}")
    return "\n".join(lines) + "\n"
