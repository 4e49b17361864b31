"""Multi-scale fully convolutional network for page/background pixel labels.

The network runs four branches at scales 1, 1/2, 1/4 and 1/8.  The full
scale stacks 7 conv+ReLU layers and each coarser branch drops one layer
(6, 5, 4).  A branch's input is the 2x2 average pool of the first-layer
output of the next finer branch.  Branch outputs are bilinearly upsampled
back to the input size, concatenated, and passed through two head convs;
the last conv has no ReLU and feeds a 2-channel softmax whose channel 0 is
the page probability.

Everything is plain numpy on (batch, channels, height, width) float64
tensors, with hand-written backpropagation.  Convolutions are 3x3 (odd
kernels generally) with same padding, so spatial sizes are preserved and
inputs only need height/width divisible by 8 for the pooling chain.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelFileError, ShapeMismatch
from .image_io import atomic_write_bytes

__all__ = [
    "BRANCH_DEPTHS",
    "ConvLayerParams",
    "FcnModel",
    "init_model",
    "conv_layer",
    "avg_pool_2x2",
    "upsample_bilinear",
    "forward",
    "loss_and_gradients",
    "save_model",
    "load_model",
]

BRANCH_DEPTHS = (7, 6, 5, 4)
IN_CHANNELS = 3
OUT_CLASSES = 2
FORMAT_VERSION = 1
_MAGIC = b"PSEGFCN\x00"


@dataclass
class ConvLayerParams:
    """Weights (out_c, in_c, k, k) and bias (out_c,) of one conv layer."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        k = self.weights.shape[-1]
        if self.weights.ndim != 4 or self.weights.shape[-2] != k:
            raise ShapeMismatch(f"bad weight shape {self.weights.shape}")
        if k % 2 != 1:
            raise ShapeMismatch("kernel size must be odd for same padding")
        if self.bias.shape != (self.weights.shape[0],):
            raise ShapeMismatch("bias shape does not match output channels")


@dataclass
class FcnModel:
    """Parameters of the 4-scale network plus its architecture description."""

    scale_branches: list[list[ConvLayerParams]]
    head: list[ConvLayerParams]
    base_channels: int
    kernel_size: int
    version: int = FORMAT_VERSION

    def __post_init__(self):
        depths = tuple(len(b) for b in self.scale_branches)
        if depths != BRANCH_DEPTHS:
            raise ShapeMismatch(f"branch depths must be {BRANCH_DEPTHS}, got {depths}")
        if len(self.head) != 2:
            raise ShapeMismatch("head must have exactly 2 layers")
        if self.head[-1].weights.shape[0] != OUT_CLASSES:
            raise ShapeMismatch("head output must have exactly 2 channels")

    def layers(self):
        """All layers in declaration order: branch 0..3 then head."""
        for branch in self.scale_branches:
            yield from branch
        yield from self.head

    def param_arrays(self):
        for layer in self.layers():
            yield layer.weights
            yield layer.bias


@dataclass
class ModelGrads:
    """Gradient arrays mirroring an FcnModel's parameters."""

    scale_branches: list[list[ConvLayerParams]]
    head: list[ConvLayerParams]

    def layers(self):
        for branch in self.scale_branches:
            yield from branch
        yield from self.head

    def param_arrays(self):
        for layer in self.layers():
            yield layer.weights
            yield layer.bias


def _layer_plan(base_channels: int) -> tuple[list[list[tuple[int, int]]], list[tuple[int, int]]]:
    """(in_c, out_c) per layer for each branch and the head."""
    branches = []
    for s, depth in enumerate(BRANCH_DEPTHS):
        plan = []
        for i in range(depth):
            in_c = IN_CHANNELS if (s == 0 and i == 0) else base_channels
            plan.append((in_c, base_channels))
        branches.append(plan)
    head = [
        (len(BRANCH_DEPTHS) * base_channels, base_channels),
        (base_channels, OUT_CLASSES),
    ]
    return branches, head


def init_model(base_channels: int = 12, kernel_size: int = 3, seed: int = 0) -> FcnModel:
    """Fan-in scaled Gaussian weights (std sqrt(2/fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    branch_plan, head_plan = _layer_plan(base_channels)

    def make(in_c, out_c):
        fan_in = in_c * kernel_size * kernel_size
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(out_c, in_c, kernel_size, kernel_size))
        return ConvLayerParams(w, np.zeros(out_c))

    branches = [[make(i, o) for i, o in plan] for plan in branch_plan]
    head = [make(i, o) for i, o in head_plan]
    return FcnModel(branches, head, base_channels, kernel_size)


def zero_grads(model: FcnModel) -> ModelGrads:
    branches = [
        [ConvLayerParams(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in b]
        for b in model.scale_branches
    ]
    head = [ConvLayerParams(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in model.head]
    return ModelGrads(branches, head)


# ---------------------------------------------------------------------------
# primitive ops
# ---------------------------------------------------------------------------


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """Unfold same-padded kxk windows to (B, C*k*k, H*W)."""
    b, c, h, w = x.shape
    pad = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    # (B, C, H, W, k, k) -> (B, C, k, k, H, W)
    cols = windows.transpose(0, 1, 4, 5, 2, 3)
    return cols.reshape(b, c * k * k, h * w)


def _conv_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    b, c, h, w = x.shape
    out_c, in_c, k, _ = weights.shape
    if in_c != c:
        raise ShapeMismatch(f"layer expects {in_c} input channels, got {c}")
    cols = _im2col(x, k)
    wm = weights.reshape(out_c, in_c * k * k)
    y = np.matmul(wm, cols) + bias[:, None]
    return y.reshape(b, out_c, h, w)


def _conv_backward(dy: np.ndarray, x: np.ndarray, weights: np.ndarray):
    """Gradients of a same-padded convolution: (dx, dW, db)."""
    out_c, in_c, k, _ = weights.shape
    b = x.shape[0]
    cols = _im2col(x, k)
    dy_mat = dy.reshape(b, out_c, -1)
    dw = np.matmul(dy_mat, cols.transpose(0, 2, 1)).sum(axis=0).reshape(weights.shape)
    db = dy.sum(axis=(0, 2, 3))
    # Input gradient is a same-padded conv with the flipped, transposed kernel.
    w_t = weights[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
    dx = _conv_forward(dy, np.ascontiguousarray(w_t), np.zeros(in_c))
    return dx, dw, db


def conv_layer(x: np.ndarray, p: ConvLayerParams, activation: str = "relu") -> np.ndarray:
    """Same-padded conv + bias, optionally through ReLU."""
    if activation not in ("relu", "none"):
        raise ValueError(f"unknown activation {activation!r}")
    y = _conv_forward(np.asarray(x, dtype=float), p.weights, p.bias)
    if activation == "relu":
        y = np.maximum(y, 0.0)
    if __debug__:
        assert np.isfinite(y).all()
    return y


def _conv_relu_backward(dy, x, y, p: ConvLayerParams):
    dpre = dy * (y > 0.0)
    return _conv_backward(dpre, x, p.weights)


def avg_pool_2x2(x: np.ndarray) -> np.ndarray:
    """Mean over non-overlapping 2x2 blocks; spatial dims must be even."""
    b, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeMismatch(f"avg_pool_2x2 needs even spatial dims, got {h}x{w}")
    return x.reshape(b, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))


def _avg_pool_backward(dy: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(dy, 2, axis=2), 2, axis=3) * 0.25


_interp_cache: dict[tuple[int, int], np.ndarray] = {}


def _interp_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Dense 1D bilinear interpolation operator (half-pixel convention)."""
    key = (n_in, n_out)
    cached = _interp_cache.get(key)
    if cached is not None:
        return cached
    m = np.zeros((n_out, n_in))
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    i0 = np.floor(src).astype(int)
    frac = src - i0
    i1 = np.minimum(i0 + 1, n_in - 1)
    rows = np.arange(n_out)
    np.add.at(m, (rows, i0), 1.0 - frac)
    np.add.at(m, (rows, i1), frac)
    _interp_cache[key] = m
    return m


def upsample_bilinear(x: np.ndarray, factor: int) -> np.ndarray:
    """Bilinear upsampling by a power-of-two factor, channel count preserved."""
    if factor < 1 or factor & (factor - 1):
        raise ValueError(f"factor must be a power of two, got {factor}")
    if factor == 1:
        return x.copy()
    b, c, h, w = x.shape
    rh = _interp_matrix(h, h * factor)
    rw = _interp_matrix(w, w * factor)
    return np.matmul(np.matmul(rh, x), rw.T)


def _upsample_backward(dy: np.ndarray, factor: int) -> np.ndarray:
    if factor == 1:
        return dy
    out_h, out_w = dy.shape[2], dy.shape[3]
    rh = _interp_matrix(out_h // factor, out_h)
    rw = _interp_matrix(out_w // factor, out_w)
    return np.matmul(np.matmul(rh.T, dy), rw)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------


@dataclass
class _Trace:
    """Intermediate activations kept for backpropagation."""

    branch_inputs: list = field(default_factory=list)
    branch_acts: list = field(default_factory=list)  # per branch: layer outputs
    ups: list = field(default_factory=list)
    cat: np.ndarray | None = None
    hidden: np.ndarray | None = None
    logits: np.ndarray | None = None
    probs: np.ndarray | None = None


def _check_input(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 4 or x.shape[1] != IN_CHANNELS:
        raise ShapeMismatch(f"expected (b, {IN_CHANNELS}, H, W) input, got {x.shape}")
    if x.shape[2] % 8 or x.shape[3] % 8:
        raise ShapeMismatch("input height and width must be divisible by 8")
    return x


def _forward_trace(model: FcnModel, x: np.ndarray) -> _Trace:
    tr = _Trace()
    inp = x
    for s, branch in enumerate(model.scale_branches):
        tr.branch_inputs.append(inp)
        acts = [conv_layer(inp, branch[0], "relu")]
        if s + 1 < len(model.scale_branches):
            inp = avg_pool_2x2(acts[0])
        for layer in branch[1:]:
            acts.append(conv_layer(acts[-1], layer, "relu"))
        tr.branch_acts.append(acts)
    tr.ups = [
        upsample_bilinear(acts[-1], 2**s) if s else acts[-1]
        for s, acts in enumerate(tr.branch_acts)
    ]
    tr.cat = np.concatenate(tr.ups, axis=1)
    tr.hidden = conv_layer(tr.cat, model.head[0], "relu")
    tr.logits = conv_layer(tr.hidden, model.head[1], "none")
    tr.probs = _softmax(tr.logits)
    return tr


def forward(model: FcnModel, x: np.ndarray) -> np.ndarray:
    """Page probability maps, shape (b, H, W); channel sums are 1 by softmax."""
    x = _check_input(x)
    tr = _forward_trace(model, x)
    return tr.probs[:, 0]


def loss_and_gradients(model: FcnModel, x: np.ndarray, target_mask: np.ndarray):
    """Mean per-pixel cross-entropy and its gradients.

    target_mask is (b, H, W) or (H, W) bool, True where the pixel belongs
    to the page.  Returns (loss, ModelGrads).
    """
    x = _check_input(x)
    target = np.asarray(target_mask, dtype=bool)
    if target.ndim == 2:
        target = target[None]
    if target.shape != (x.shape[0], x.shape[2], x.shape[3]):
        raise ShapeMismatch(
            f"target shape {target.shape} does not match input {x.shape}"
        )
    tr = _forward_trace(model, x)

    onehot = np.stack([target, ~target], axis=1).astype(float)
    z = tr.logits - tr.logits.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = target.size
    loss = float(-(onehot * log_probs).sum() / n)

    grads = zero_grads(model)
    dlogits = (tr.probs - onehot) / n

    dhidden, dw, db = _conv_backward(dlogits, tr.hidden, model.head[1].weights)
    grads.head[1].weights += dw
    grads.head[1].bias += db
    dcat, dw, db = _conv_relu_backward(dhidden, tr.cat, tr.hidden, model.head[0])
    grads.head[0].weights += dw
    grads.head[0].bias += db

    # Split the concatenation gradient back into per-branch slices.
    widths = [u.shape[1] for u in tr.ups]
    offsets = np.cumsum([0] + widths)
    dups = [dcat[:, offsets[s] : offsets[s + 1]] for s in range(len(widths))]

    # Walk branches coarse-to-fine so the pooled-input path of branch s+1
    # lands on branch s's first-layer activation before we backprop it.
    pooled_grad = [None] * len(model.scale_branches)
    for s in range(len(model.scale_branches) - 1, -1, -1):
        branch = model.scale_branches[s]
        acts = tr.branch_acts[s]
        g = _upsample_backward(dups[s], 2**s) if s else dups[s]
        for i in range(len(branch) - 1, 0, -1):
            g, dw, db = _conv_relu_backward(g, acts[i - 1], acts[i], branch[i])
            grads.scale_branches[s][i].weights += dw
            grads.scale_branches[s][i].bias += db
        if pooled_grad[s] is not None:
            g = g + pooled_grad[s]
        din, dw, db = _conv_relu_backward(g, tr.branch_inputs[s], acts[0], branch[0])
        grads.scale_branches[s][0].weights += dw
        grads.scale_branches[s][0].bias += db
        if s > 0:
            pooled_grad[s - 1] = _avg_pool_backward(din)

    if __debug__:
        assert all(np.isfinite(a).all() for a in grads.param_arrays())
    return loss, grads


# ---------------------------------------------------------------------------
# model file format
# ---------------------------------------------------------------------------


def save_model(model: FcnModel, path) -> None:
    """Versioned binary container; see load_model for the layout."""
    header = _MAGIC + struct.pack(
        "<6I",
        FORMAT_VERSION,
        model.base_channels,
        model.kernel_size,
        IN_CHANNELS,
        len(BRANCH_DEPTHS),
        len(model.head),
    )
    header += struct.pack(f"<{len(BRANCH_DEPTHS)}I", *BRANCH_DEPTHS)
    chunks = [header]
    for arr in model.param_arrays():
        chunks.append(arr.astype("<f4").tobytes())
    body = b"".join(chunks)
    checksum = struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    atomic_write_bytes(path, body + checksum)


def load_model(path) -> FcnModel:
    """Read a model file, verifying magic, version, and checksum.

    Layout: magic, format version, architecture header (base channels,
    kernel size, input channels, branch count + depths, head depth), then
    little-endian float32 weight/bias arrays in declaration order, then a
    CRC32 trailer over everything before it.
    """
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < len(_MAGIC) + 4:
        raise ModelFileError(f"{path}: file too short to be a model")
    if blob[: len(_MAGIC)] != _MAGIC:
        raise ModelFileError(f"{path}: bad magic; not a model file")
    body, trailer = blob[:-4], blob[-4:]
    if struct.unpack("<I", trailer)[0] != (zlib.crc32(body) & 0xFFFFFFFF):
        raise ModelFileError(f"{path}: checksum mismatch; file is corrupt")
    off = len(_MAGIC)
    version, base_c, k, in_c, n_branches, head_depth = struct.unpack_from("<6I", body, off)
    off += 24
    if version != FORMAT_VERSION:
        raise ModelFileError(f"{path}: unsupported format version {version}")
    depths = struct.unpack_from(f"<{n_branches}I", body, off)
    off += 4 * n_branches
    if depths != BRANCH_DEPTHS or in_c != IN_CHANNELS or head_depth != 2:
        raise ModelFileError(f"{path}: unsupported architecture header")

    branch_plan, head_plan = _layer_plan(base_c)

    def take(shape):
        nonlocal off
        count = int(np.prod(shape))
        arr = np.frombuffer(body, dtype="<f4", count=count, offset=off)
        off += 4 * count
        return arr.astype(float).reshape(shape)

    try:
        branches = []
        for plan in branch_plan:
            layers = []
            for ic, oc in plan:
                layers.append(ConvLayerParams(take((oc, ic, k, k)), take((oc,))))
            branches.append(layers)
        head = []
        for ic, oc in head_plan:
            head.append(ConvLayerParams(take((oc, ic, k, k)), take((oc,))))
    except ValueError as e:
        raise ModelFileError(f"{path}: truncated parameter data") from e
    if off != len(body):
        raise ModelFileError(f"{path}: trailing bytes after parameters")
    return FcnModel(branches, head, base_c, k, version)
