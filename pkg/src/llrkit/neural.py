"""Self-contained dense neural-network engine with exact backpropagation.

Models are small DAGs over node ids: node 0 is the network input and the
output of layer i is node i + 1.  Five layer kinds cover everything the
LLR networks need: dense (optionally reading a slice of its source, which
is how per-input projection layers split a concatenated feature vector),
relu, tanh, elementwise add (residual connections) and concat.

Conventions fixed here and asserted by tests: relu'(0) = 0, Glorot-uniform
weight init with zero biases, bias-corrected Adam, float32 parameters by
default (float64 available for finite-difference work).
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .numerics import RngStream

_KINDS = ("dense", "relu", "tanh", "add", "concat")


@dataclass(frozen=True)
class LayerSpec:
    """One DAG node; srcs are node ids (0 = input, i+1 = output of layer i)."""

    kind: str
    srcs: tuple[int, ...]
    in_dim: int | None = None
    out_dim: int | None = None
    in_slice: tuple[int, int] | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind == "dense" and (self.in_dim is None or self.out_dim is None):
            raise ValueError("dense layers need in_dim and out_dim")
        if self.kind != "dense" and self.in_slice is not None:
            raise ValueError("in_slice is only valid on dense layers")


def dense(src: int, in_dim: int, out_dim: int,
          in_slice: tuple[int, int] | None = None) -> LayerSpec:
    return LayerSpec("dense", (src,), in_dim, out_dim, in_slice)


def relu(src: int) -> LayerSpec:
    return LayerSpec("relu", (src,))


def tanh(src: int) -> LayerSpec:
    return LayerSpec("tanh", (src,))


def add(a: int, b: int) -> LayerSpec:
    return LayerSpec("add", (a, b))


def concat(*srcs: int) -> LayerSpec:
    return LayerSpec("concat", tuple(srcs))


class NeuralModel:
    """Layer list plus parameters; single writer while training, shareable after.

    params holds [W0, b0, W1, b1, ...] for the dense layers in layer order.
    version increments on every parameter update so stale tapes are caught.
    """

    def __init__(self, layers: list[LayerSpec], input_width: int,
                 rng: RngStream, dtype=np.float32):
        self.layers = tuple(layers)
        self.input_width = int(input_width)
        self.dtype = np.dtype(dtype)
        self.widths = _check_widths(self.layers, self.input_width)
        self.frozen = False
        self.version = 0
        self.params: list[np.ndarray] = []
        for spec in self.layers:
            if spec.kind == "dense":
                limit = np.sqrt(6.0 / (spec.in_dim + spec.out_dim))
                w = rng.uniform(-limit, limit, (spec.in_dim, spec.out_dim))
                self.params.append(w.astype(self.dtype))
                self.params.append(np.zeros(spec.out_dim, dtype=self.dtype))

    @property
    def output_width(self) -> int:
        return self.widths[-1]

    def fingerprint(self) -> str:
        """SHA-256 over the architecture, for weight-file compatibility checks."""
        desc = [self.input_width] + [
            [s.kind, list(s.srcs), s.in_dim, s.out_dim,
             list(s.in_slice) if s.in_slice else None]
            for s in self.layers
        ]
        return hashlib.sha256(json.dumps(desc).encode()).hexdigest()

    def freeze(self) -> None:
        self.frozen = True

    def set_params(self, params: list[np.ndarray]) -> None:
        if self.frozen:
            raise RuntimeError("model is frozen; parameters are immutable")
        if len(params) != len(self.params) or any(
            p.shape != q.shape for p, q in zip(params, self.params)
        ):
            raise ValueError("parameter shapes do not match the model")
        self.params = [np.asarray(p, dtype=self.dtype) for p in params]
        self.version += 1

    def copy_params(self) -> list[np.ndarray]:
        return [p.copy() for p in self.params]


def _check_widths(layers: tuple[LayerSpec, ...], input_width: int) -> list[int]:
    widths = [input_width]
    for i, spec in enumerate(layers):
        if any(s < 0 or s > i for s in spec.srcs):
            raise ValueError(f"layer {i} references an undefined node")
        src_w = [widths[s] for s in spec.srcs]
        if spec.kind == "dense":
            w_in = src_w[0] if spec.in_slice is None else spec.in_slice[1] - spec.in_slice[0]
            if spec.in_slice is not None and spec.in_slice[1] > src_w[0]:
                raise ValueError(f"layer {i} slice exceeds source width")
            if w_in != spec.in_dim:
                raise ValueError(f"layer {i}: in_dim {spec.in_dim} != source width {w_in}")
            widths.append(spec.out_dim)
        elif spec.kind in ("relu", "tanh"):
            widths.append(src_w[0])
        elif spec.kind == "add":
            if src_w[0] != src_w[1]:
                raise ValueError(f"layer {i}: add sources differ in width {src_w}")
            widths.append(src_w[0])
        else:
            widths.append(sum(src_w))
    return widths


@dataclass
class Tape:
    """Forward activations plus the model version they were computed under."""

    nodes: list[np.ndarray]
    version: int


def forward(model: NeuralModel, x: np.ndarray) -> tuple[np.ndarray, Tape]:
    """Batched forward pass; returns (output (B, out_width), tape for backward)."""
    x = np.asarray(x, dtype=model.dtype)
    if x.ndim != 2 or x.shape[1] != model.input_width:
        raise ValueError(
            f"expected input shape (batch, {model.input_width}), got {x.shape}"
        )
    nodes = [x]
    p = 0
    for spec in model.layers:
        a = nodes[spec.srcs[0]]
        if spec.kind == "dense":
            if spec.in_slice is not None:
                a = a[:, spec.in_slice[0]:spec.in_slice[1]]
            nodes.append(a @ model.params[p] + model.params[p + 1])
            p += 2
        elif spec.kind == "relu":
            nodes.append(np.maximum(a, 0))
        elif spec.kind == "tanh":
            nodes.append(np.tanh(a))
        elif spec.kind == "add":
            nodes.append(a + nodes[spec.srcs[1]])
        else:
            nodes.append(np.concatenate([nodes[s] for s in spec.srcs], axis=1))
    return nodes[-1], Tape(nodes=nodes, version=model.version)


def backward(model: NeuralModel, tape: Tape,
             out_grad: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Exact gradients from a forward tape.

    Returns (param_grads aligned with model.params, input_grad); the input
    gradient is what lets composed models chain (decoder into encoder).
    """
    if tape.version != model.version:
        raise RuntimeError("stale tape: parameters changed since the forward pass")
    nodes = tape.nodes
    node_grads: list[np.ndarray | None] = [None] * len(nodes)
    node_grads[-1] = np.asarray(out_grad, dtype=model.dtype)
    param_grads: list[np.ndarray | None] = [None] * len(model.params)

    def accum(node: int, g: np.ndarray) -> None:
        if node_grads[node] is None:
            node_grads[node] = np.zeros_like(nodes[node])
        node_grads[node] = node_grads[node] + g

    p = len(model.params)
    for i in range(len(model.layers) - 1, -1, -1):
        spec = model.layers[i]
        if spec.kind == "dense":
            p -= 2
        g = node_grads[i + 1]
        if g is None:
            continue
        src = spec.srcs[0]
        if spec.kind == "dense":
            a = nodes[src]
            if spec.in_slice is not None:
                a = a[:, spec.in_slice[0]:spec.in_slice[1]]
            param_grads[p] = a.T @ g
            param_grads[p + 1] = g.sum(axis=0)
            ga = g @ model.params[p].T
            if spec.in_slice is not None:
                full = np.zeros_like(nodes[src])
                full[:, spec.in_slice[0]:spec.in_slice[1]] = ga
                ga = full
            accum(src, ga)
        elif spec.kind == "relu":
            accum(src, g * (nodes[src] > 0))
        elif spec.kind == "tanh":
            out = nodes[i + 1]
            accum(src, g * (1.0 - out * out))
        elif spec.kind == "add":
            accum(src, g)
            accum(spec.srcs[1], g)
        else:
            off = 0
            for s in spec.srcs:
                w = nodes[s].shape[1]
                accum(s, g[:, off:off + w])
                off += w
    for j, pg in enumerate(param_grads):
        if pg is None:
            param_grads[j] = np.zeros_like(model.params[j])
    input_grad = node_grads[0]
    if input_grad is None:
        input_grad = np.zeros_like(nodes[0])
    return param_grads, input_grad


@dataclass
class AdamState:
    """Bias-corrected Adam moments, one pair per parameter tensor."""

    lr: float
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: list[np.ndarray], lr: float) -> "AdamState":
        return cls(lr=lr, m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params])


def adam_step(params: list[np.ndarray], grads: list[np.ndarray],
              state: AdamState) -> list[np.ndarray]:
    """One in-place Adam update of the moment state; returns new parameters."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    out = []
    for j, (p, g) in enumerate(zip(params, grads)):
        state.m[j] = b1 * state.m[j] + (1.0 - b1) * g
        state.v[j] = b2 * state.v[j] + (1.0 - b2) * g * g
        mhat = state.m[j] / c1
        vhat = state.v[j] / c2
        out.append(p - state.lr * mhat / (np.sqrt(vhat) + state.eps))
    return out


@dataclass(frozen=True)
class LossWeights:
    """Per-bit-significance weights of the magnitude-normalized squared error.

    One weight per bit position within a stream (length K), shared across
    streams, normalized so the weights sum to K.
    """

    w: np.ndarray
    epsilon: float = 1e-6

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        object.__setattr__(self, "w", w)
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if abs(w.sum() - w.size) > 1e-9:
            raise ValueError(f"weights must sum to K={w.size}, got {w.sum()}")

    @classmethod
    def uniform(cls, k: int) -> "LossWeights":
        return cls(w=np.ones(k))


def wmse_loss(pred: np.ndarray, target: np.ndarray,
              weights: LossWeights) -> tuple[float, np.ndarray]:
    """Weighted magnitude-normalized MSE in the tanh domain.

    loss = mean over batch and streams of sum_i w_i (p_i - t_i)^2/(|t_i| + eps),
    with i indexing bit significance (position mod K).
    """
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    k = weights.w.size
    if pred.shape[1] % k != 0:
        raise ValueError(f"width {pred.shape[1]} is not a multiple of K={k}")
    streams = pred.shape[1] // k
    wt = np.tile(weights.w, streams).astype(pred.dtype)
    denom = np.abs(target) + weights.epsilon
    diff = pred - target
    scale = pred.shape[0] * streams
    loss = float(np.sum(wt * diff * diff / denom) / scale)
    grad = (2.0 * wt / denom / scale) * diff
    return loss, grad.astype(pred.dtype)


def l1_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean absolute error over all elements; subgradient 0 at exact ties."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(np.abs(diff)))
    grad = np.sign(diff) / diff.size
    return loss, grad.astype(pred.dtype)


# Weight file: magic, format version, architecture fingerprint, layer table,
# then parameter tensors as little-endian float32 in layer order.
_MAGIC = b"LLRW"
_FILE_VERSION = 1
_KIND_CODE = {k: i for i, k in enumerate(_KINDS)}


def save_model(model: NeuralModel, path: str) -> None:
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", _FILE_VERSION))
        f.write(bytes.fromhex(model.fingerprint()))
        f.write(struct.pack("<II", model.input_width, len(model.layers)))
        for s in model.layers:
            sl = s.in_slice if s.in_slice is not None else (-1, -1)
            f.write(struct.pack("<BB", _KIND_CODE[s.kind], len(s.srcs)))
            f.write(struct.pack(f"<{len(s.srcs)}i", *s.srcs))
            f.write(struct.pack("<iiii", s.in_dim if s.in_dim is not None else -1,
                                s.out_dim if s.out_dim is not None else -1, *sl))
        for p in model.params:
            f.write(np.ascontiguousarray(p, dtype="<f4").tobytes())


def load_model(path: str) -> NeuralModel:
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise ValueError(f"{path} is not a model weight file")
        (ver,) = struct.unpack("<I", f.read(4))
        if ver != _FILE_VERSION:
            raise ValueError(f"unsupported weight file version {ver}")
        fp = f.read(32).hex()
        input_width, nlayers = struct.unpack("<II", f.read(8))
        layers = []
        code_kind = {v: k for k, v in _KIND_CODE.items()}
        for _ in range(nlayers):
            kc, ns = struct.unpack("<BB", f.read(2))
            srcs = struct.unpack(f"<{ns}i", f.read(4 * ns))
            in_d, out_d, s0, s1 = struct.unpack("<iiii", f.read(16))
            layers.append(LayerSpec(
                kind=code_kind[kc], srcs=srcs,
                in_dim=None if in_d < 0 else in_d,
                out_dim=None if out_d < 0 else out_d,
                in_slice=None if s0 < 0 else (s0, s1),
            ))
        model = NeuralModel(layers, input_width, RngStream(0), dtype=np.float32)
        if model.fingerprint() != fp:
            raise ValueError(f"{path}: architecture fingerprint mismatch")
        params = []
        for p in model.params:
            buf = f.read(4 * p.size)
            params.append(np.frombuffer(buf, dtype="<f4").reshape(p.shape).copy())
        model.set_params(params)
    return model
