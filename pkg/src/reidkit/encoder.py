"""Small dense encoder with explicit forward and backward passes.

Parameters live in float32 (the checkpoint precision); arithmetic runs in
float64 so gradients can be checked against central finite differences.
Checkpoints are a fixed little-endian binary layout:

    magic      4 bytes  b"F2FM"
    version    u16      currently 1
    activation u8       0 relu / 1 tanh / 2 identity
    normalize  u8       1 when outputs are L2-normalized by default
    n_dims     u32      number of entries in layer_dims
    layer_dims u32 * n_dims
    per layer: weights float32 row-major (fan_in, fan_out), then bias float32

Round trips are bit-exact and writes are atomic (temp file + rename).
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from ._rng import spawn_rng
from .core import EmbeddingSet
from .errors import (
    CorruptFileError,
    DataValidationError,
    DimensionError,
    FormatError,
    InvalidSpecError,
)

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"F2FM"
CHECKPOINT_VERSION = 1

ACTIVATIONS = ("relu", "tanh", "identity")
_ACT_TAG = {name: i for i, name in enumerate(ACTIVATIONS)}


@dataclass
class EncoderModel:
    """Feed-forward encoder: hidden layers use ``activation``, the last is linear."""

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray] = field(repr=False)
    biases: list[np.ndarray] = field(repr=False)
    activation: str = "relu"
    l2_normalize: bool = False

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise InvalidSpecError(f"layer_dims needs >= 2 positive entries, got {dims}")
        if self.activation not in _ACT_TAG:
            raise InvalidSpecError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise DimensionError("one weight matrix and bias vector per layer transition")
        ws, bs = [], []
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            w = np.ascontiguousarray(w, dtype=np.float32)
            b = np.ascontiguousarray(b, dtype=np.float32)
            if w.shape != (dims[l], dims[l + 1]) or b.shape != (dims[l + 1],):
                raise DimensionError(
                    f"layer {l}: expected weights {(dims[l], dims[l + 1])} and bias "
                    f"({dims[l + 1]},), got {w.shape} and {b.shape}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise DataValidationError(f"layer {l} parameters must be finite")
            ws.append(w)
            bs.append(b)
        self.layer_dims = dims
        self.weights = ws
        self.biases = bs

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    def params64(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Float64 working copies of the parameters."""
        return (
            [w.astype(np.float64) for w in self.weights],
            [b.astype(np.float64) for b in self.biases],
        )

    def forward(self, x) -> np.ndarray:
        """Raw encoder output (no normalization), float64, shape (n, out_dim)."""
        w64, b64 = self.params64()
        out, _ = forward_pass(w64, b64, self.activation, np.asarray(x, dtype=np.float64))
        return out


def init_encoder(
    layer_dims, activation: str = "relu", seed: int = 0, l2_normalize: bool = False
) -> EncoderModel:
    """Seeded uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise InvalidSpecError(f"layer_dims needs >= 2 positive entries, got {dims}")
    rng = spawn_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(np.float32))
        biases.append(np.zeros(fan_out, dtype=np.float32))
    return EncoderModel(dims, weights, biases, activation, l2_normalize)


def forward_pass(weights, biases, activation: str, x: np.ndarray):
    """Run the network; returns (output, cache) with per-layer pre-activations.

    Hidden layers apply ``activation``; the final layer is linear. All float64.
    """
    if activation not in _ACT_TAG:
        raise InvalidSpecError(f"unknown activation {activation!r}")
    h = np.asarray(x, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != weights[0].shape[0]:
        raise DimensionError(
            f"input must be (n, {weights[0].shape[0]}), got {h.shape}"
        )
    inputs = []
    pre = []
    last = len(weights) - 1
    for l, (w, b) in enumerate(zip(weights, biases)):
        inputs.append(h)
        z = h @ w + b
        pre.append(z)
        if l == last:
            h = z
        elif activation == "relu":
            h = np.maximum(z, 0.0)
        elif activation == "tanh":
            h = np.tanh(z)
        else:
            h = z
    return h, {"inputs": inputs, "pre": pre}


def backward_pass(weights, activation: str, cache, grad_out: np.ndarray):
    """Gradients of a scalar loss w.r.t. parameters and input.

    ``grad_out`` is d(loss)/d(output) for the cached forward pass. Returns
    (grad_weights, grad_biases, grad_input). relu uses subgradient 0 at z == 0.
    """
    grad_ws = [None] * len(weights)
    grad_bs = [None] * len(weights)
    g = np.asarray(grad_out, dtype=np.float64)
    last = len(weights) - 1
    for l in range(last, -1, -1):
        if l == last:
            gz = g
        elif activation == "relu":
            gz = g * (cache["pre"][l] > 0.0)
        elif activation == "tanh":
            t = np.tanh(cache["pre"][l])
            gz = g * (1.0 - t * t)
        else:
            gz = g
        grad_ws[l] = cache["inputs"][l].T @ gz
        grad_bs[l] = gz.sum(axis=0)
        g = gz @ weights[l].T
    return grad_ws, grad_bs, g


def l2_normalize_rows(y: np.ndarray):
    """Scale each row to unit norm; zero rows stay zero. Returns (out, norms)."""
    norms = np.sqrt(np.sum(y * y, axis=1, keepdims=True))
    out = np.divide(y, norms, out=np.zeros_like(y), where=norms > 0.0)
    return out, norms


def l2_normalize_backward(grad_out: np.ndarray, normalized: np.ndarray, norms: np.ndarray):
    """Backprop through l2_normalize_rows; zero rows pass zero gradient."""
    inner = np.sum(normalized * grad_out, axis=1, keepdims=True)
    return np.divide(
        grad_out - normalized * inner,
        norms,
        out=np.zeros_like(grad_out),
        where=norms > 0.0,
    )


def encode(model: EncoderModel, inputs: EmbeddingSet, l2_normalize: bool | None = None) -> EmbeddingSet:
    """Record-aligned embedding of every input vector.

    ``l2_normalize=None`` defers to the model's stored flag. Zero output
    vectors cannot be normalized; they are left at the origin and counted in
    a warning.
    """
    if inputs.dim != model.in_dim:
        raise DimensionError(f"model expects dim {model.in_dim}, set has dim {inputs.dim}")
    flag = model.l2_normalize if l2_normalize is None else bool(l2_normalize)
    out = model.forward(inputs.vectors)
    if flag:
        out, norms = l2_normalize_rows(out)
        n_zero = int(np.sum(norms == 0.0))
        if n_zero:
            log.warning("l2-normalize: %d zero vector(s) left at the origin", n_zero)
    return EmbeddingSet.from_arrays(
        model.out_dim, inputs.subjects, inputs.images, out.astype(np.float32)
    )


def checkpoint_bytes(model: EncoderModel) -> bytes:
    head = struct.pack(
        "<4sHBBI",
        CHECKPOINT_MAGIC,
        CHECKPOINT_VERSION,
        _ACT_TAG[model.activation],
        1 if model.l2_normalize else 0,
        len(model.layer_dims),
    )
    dims = struct.pack(f"<{len(model.layer_dims)}I", *model.layer_dims)
    body = b"".join(
        w.astype("<f4").tobytes(order="C") + b.astype("<f4").tobytes(order="C")
        for w, b in zip(model.weights, model.biases)
    )
    return head + dims + body


def save_checkpoint(model: EncoderModel, path) -> None:
    from .store import atomic_write_bytes

    atomic_write_bytes(path, checkpoint_bytes(model))


def load_checkpoint(path) -> EncoderModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12:
        raise CorruptFileError(f"{path}: truncated checkpoint header")
    magic, version, act_tag, norm_flag, n_dims = struct.unpack_from("<4sHBBI", blob, 0)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    if act_tag >= len(ACTIVATIONS):
        raise FormatError(f"{path}: unknown activation tag {act_tag}")
    if n_dims < 2:
        raise CorruptFileError(f"{path}: layer_dims needs >= 2 entries, header says {n_dims}")
    off = 12
    if len(blob) < off + 4 * n_dims:
        raise CorruptFileError(f"{path}: truncated layer_dims table")
    dims = struct.unpack_from(f"<{n_dims}I", blob, off)
    off += 4 * n_dims
    if any(d < 1 for d in dims):
        raise CorruptFileError(f"{path}: nonpositive layer width in {dims}")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        n_w = fan_in * fan_out
        need = 4 * (n_w + fan_out)
        if len(blob) < off + need:
            raise CorruptFileError(f"{path}: truncated parameter body")
        w = np.frombuffer(blob, dtype="<f4", count=n_w, offset=off).reshape(fan_in, fan_out)
        off += 4 * n_w
        b = np.frombuffer(blob, dtype="<f4", count=fan_out, offset=off)
        off += 4 * fan_out
        weights.append(w.copy())
        biases.append(b.copy())
    if off != len(blob):
        raise CorruptFileError(f"{path}: {len(blob) - off} trailing byte(s) after parameters")
    for l, (w, b) in enumerate(zip(weights, biases)):
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise DataValidationError(f"{path}: non-finite parameters in layer {l}")
    return EncoderModel(dims, weights, biases, ACTIVATIONS[act_tag], bool(norm_flag))
