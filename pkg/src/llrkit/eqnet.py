"""Learned LLR compression and estimation around a shared 3*Nt latent space.

Three networks cooperate:
  f_Q  compresses a tanh-domain LLR vector into a latent code in [-1,1]^(3Nt),
  g    expands a latent code back to tanh-domain LLRs (one small MLP branch
       per output bit, concatenated),
  f_E  maps raw receiver features (y, H, sigma_n) straight to the latent
       space, skipping exact LLR computation at inference time.

Training is two-stage: Stage 1 fits the (f_Q, g) autoencoder on exact ML
LLRs with a small additive Gaussian surrogate on the latent (training
passes only); Stage 2 freezes f_Q and fits f_E to f_Q's latent targets
under an L1 loss.  A single-stage end-to-end baseline is provided for
comparison.  All learned processing happens in the tanh domain tanh(L/2).

Scalar per-dimension codebooks (k-means++ seeded Lloyd) pack the latent
into 3*Nt*Nb-bit words, independent of the modulation order K.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .channel import SystemConfig
from .detect import LlrVector
from .neural import (AdamState, LossWeights, NeuralModel, adam_step, add,
                     backward, concat, dense, forward, l1_loss, relu,
                     save_model, load_model, tanh, wmse_loss)
from .numerics import RngStream

TANH_CLIP = 1.0 - 1e-7

# Derived-stream tags: every consumer of randomness under one training seed
# gets its own stream, so adding a consumer never shifts another's draws.
_TAG_FQ, _TAG_G, _TAG_FE, _TAG_SPLIT, _TAG_NOISE, _TAG_CODEBOOK = 1, 2, 3, 4, 5, 6


class TrainingError(RuntimeError):
    """Raised when a training run diverges (non-finite loss)."""


def to_tanh(values: np.ndarray) -> np.ndarray:
    """Elementwise tanh(L/2), the hyperbolic-domain transform."""
    return np.tanh(np.asarray(values) / 2.0)


def from_tanh(values: np.ndarray) -> np.ndarray:
    """Inverse transform 2*atanh(v) with v clipped to +-(1 - 1e-7)."""
    v = np.clip(np.asarray(values, dtype=np.float64), -TANH_CLIP, TANH_CLIP)
    return 2.0 * np.arctanh(v)


def to_tanh_domain(llr: LlrVector) -> LlrVector:
    if llr.domain != "natural":
        raise RuntimeError("LLR vector is already in the tanh domain")
    return LlrVector(values=to_tanh(llr.values), domain="tanh")


def from_tanh_domain(llr: LlrVector) -> LlrVector:
    if llr.domain != "tanh":
        raise RuntimeError("LLR vector is not in the tanh domain")
    return LlrVector(values=from_tanh(llr.values), domain="natural")


@dataclass(frozen=True)
class EqNetConfig:
    """Architecture hyperparameters; None widths default to the sized rules
    4*Nt*K (f_Q hidden), 8*Nt*K (f_E hidden) and 3*Nt (latent)."""

    system: SystemConfig
    fq_width: int | None = None
    fq_hidden: int = 6
    g_branch_width: int = 16
    g_branch_hidden: int = 6
    fe_blocks: int = 1            # 1 = low-latency variant, 3 = performance variant
    fe_hidden_per_block: int = 6
    fe_width: int | None = None
    latent_dim: int | None = None
    sigma_u: float = 0.001

    def __post_init__(self):
        s = self.system
        if self.fq_width is None:
            object.__setattr__(self, "fq_width", 4 * s.nt * s.k)
        if self.fe_width is None:
            object.__setattr__(self, "fe_width", 8 * s.nt * s.k)
        if self.latent_dim is None:
            object.__setattr__(self, "latent_dim", 3 * s.nt)
        for name in ("fq_width", "g_branch_width", "fe_width", "latent_dim"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.fe_blocks < 1:
            raise ValueError("fe_blocks must be >= 1")

    @property
    def llr_width(self) -> int:
        return self.system.nt * self.system.k

    @property
    def feature_width(self) -> int:
        s = self.system
        return 2 * s.nr + 2 * s.nt * s.nr + 1


@dataclass(frozen=True)
class TrainConfig:
    batch: int = 4096
    lr: float = 0.001
    epochs: int = 50
    plateau_patience: int = 100
    val_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("validation fraction must be in (0, 1)")


def _mlp_chain(layers: list, src: int, widths: list[int]) -> int:
    """Append dense+relu pairs along widths; returns the last node id."""
    for w_in, w_out in zip(widths[:-1], widths[1:]):
        layers.append(dense(src, w_in, w_out))
        layers.append(relu(len(layers)))
        src = len(layers)
    return src


def _fq_layers(ec: EqNetConfig) -> tuple[list, int]:
    layers: list = []
    widths = [ec.llr_width] + [ec.fq_width] * ec.fq_hidden
    src = _mlp_chain(layers, 0, widths)
    layers.append(dense(src, ec.fq_width, ec.latent_dim))
    layers.append(tanh(len(layers)))
    return layers, ec.llr_width


def _g_layers(ec: EqNetConfig) -> tuple[list, int]:
    layers: list = []
    outs = []
    widths = [ec.latent_dim] + [ec.g_branch_width] * ec.g_branch_hidden
    for _ in range(ec.llr_width):
        src = _mlp_chain(layers, 0, widths)
        layers.append(dense(src, ec.g_branch_width, 1))
        layers.append(tanh(len(layers)))
        outs.append(len(layers))
    layers.append(concat(*outs))
    return layers, ec.latent_dim


def _fe_layers(ec: EqNetConfig) -> tuple[list, int]:
    s = ec.system
    d = ec.feature_width
    slices = [(0, 2 * s.nr), (2 * s.nr, 2 * s.nr + 2 * s.nt * s.nr), (d - 1, d)]
    layers: list = []
    heads = []
    for s0, s1 in slices:
        layers.append(dense(0, s1 - s0, ec.fe_width, in_slice=(s0, s1)))
        heads.append(len(layers))
    layers.append(concat(*heads))
    cur, cur_w = len(layers), 3 * ec.fe_width
    # residual blocks: identity skip around every 2 dense+relu layers where
    # the pair preserves width (the very first pair narrows the fused input)
    for _ in range(ec.fe_blocks):
        for _ in range(ec.fe_hidden_per_block // 2):
            entry, entry_w = cur, cur_w
            layers.append(dense(cur, cur_w, ec.fe_width))
            layers.append(relu(len(layers)))
            layers.append(dense(len(layers), ec.fe_width, ec.fe_width))
            layers.append(relu(len(layers)))
            cur, cur_w = len(layers), ec.fe_width
            if entry_w == cur_w:
                layers.append(add(cur, entry))
                cur = len(layers)
    layers.append(dense(cur, cur_w, ec.latent_dim))
    layers.append(tanh(len(layers)))
    return layers, d


def build_models(
    ec: EqNetConfig, seed: int = 0
) -> tuple[NeuralModel, NeuralModel, NeuralModel]:
    """Freshly initialized (f_Q, g, f_E); each has its own derived init stream
    so the same seed yields the same g whether or not f_Q is built alongside."""
    fq_layers, fq_in = _fq_layers(ec)
    g_layers, g_in = _g_layers(ec)
    fe_layers, fe_in = _fe_layers(ec)
    fq = NeuralModel(fq_layers, fq_in, RngStream((seed, _TAG_FQ)))
    g = NeuralModel(g_layers, g_in, RngStream((seed, _TAG_G)))
    fe = NeuralModel(fe_layers, fe_in, RngStream((seed, _TAG_FE)))
    return fq, g, fe


def compute_weights(dataset: np.ndarray, k: int) -> LossWeights:
    """Loss weights proportional to mean |tanh-domain LLR| per bit position,
    averaged over the dataset and streams, normalized to sum to K."""
    data = np.asarray(dataset, dtype=np.float64)
    if data.size == 0:
        raise ValueError("empty dataset")
    if data.ndim != 2 or data.shape[1] % k != 0:
        raise ValueError(f"dataset width {data.shape} incompatible with K={k}")
    m = np.abs(data.reshape(data.shape[0], -1, k)).mean(axis=(0, 1))
    return LossWeights(w=k * m / m.sum())


def make_features(y: np.ndarray, h: np.ndarray, sigma_n) -> np.ndarray:
    """Receiver features for f_E: [y, H, sigma_n] as float32 reals.

    Complex entries are interleaved (Re, Im); H is flattened row-major.
    The layout matches the stored dataset records byte-for-byte.
    """
    y = np.asarray(y)
    h = np.asarray(h)
    b = y.shape[0]
    fy = np.stack([y.real, y.imag], axis=-1).reshape(b, -1)
    fh = np.stack([h.real, h.imag], axis=-1).reshape(b, -1)
    fs = np.broadcast_to(np.asarray(sigma_n, dtype=np.float64), (b,))[:, None]
    return np.concatenate([fy, fh, fs], axis=1).astype(np.float32)


def _forward_chunks(model: NeuralModel, x: np.ndarray, chunk: int = 8192) -> np.ndarray:
    outs = [forward(model, x[i:i + chunk])[0] for i in range(0, x.shape[0], chunk)]
    return np.concatenate(outs, axis=0)


def _split(data_len: int, tc: TrainConfig) -> tuple[np.ndarray, np.ndarray]:
    perm = RngStream((tc.seed, _TAG_SPLIT)).permutation(data_len)
    nval = max(1, int(round(tc.val_fraction * data_len)))
    return perm[nval:], perm[:nval]


@dataclass
class _Trainer:
    """Shared epoch loop: minibatch SGD with Adam, per-epoch validation,
    best-validation checkpointing and optional plateau lr halving."""

    models: list[NeuralModel]
    tc: TrainConfig
    lr: float
    plateau: bool = False
    history: list[dict] = field(default_factory=list)

    def __post_init__(self):
        self.order_rng = RngStream((self.tc.seed, _TAG_SPLIT, 1))
        self.adam = [AdamState.for_params(m.params, self.lr) for m in self.models]
        self.best_val = np.inf
        self.best_params = [m.copy_params() for m in self.models]
        self._since_best = 0

    def run(self, n_train: int, step_fn, val_fn) -> None:
        for epoch in range(1, self.tc.epochs + 1):
            order = self.order_rng.permutation(n_train)
            tot, seen = 0.0, 0
            for i in range(0, n_train, self.tc.batch):
                idx = order[i:i + self.tc.batch]
                loss = step_fn(idx, self.adam)
                tot += loss * idx.size
                seen += idx.size
            train_loss = tot / max(seen, 1)
            val_loss = val_fn()
            if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
                raise TrainingError(f"loss diverged at epoch {epoch}")
            self.history.append({
                "epoch": epoch, "train_loss": train_loss,
                "val_loss": val_loss, "lr": self.adam[0].lr,
            })
            if val_loss < self.best_val:
                self.best_val = val_loss
                self.best_params = [m.copy_params() for m in self.models]
                self._since_best = 0
            else:
                self._since_best += 1
                if self.plateau and self._since_best >= self.tc.plateau_patience:
                    for st in self.adam:
                        st.lr /= 2.0
                    self._since_best = 0

    def restore_best(self) -> None:
        for m, p in zip(self.models, self.best_params):
            m.set_params(p)


def train_stage1(
    dataset: np.ndarray, ec: EqNetConfig, tc: TrainConfig
) -> tuple[NeuralModel, NeuralModel, list[dict]]:
    """Stage 1: fit the (f_Q, g) autoencoder on tanh-domain ML LLR vectors.

    Minimizes the weighted magnitude-normalized MSE of g(f_Q(x) + u) against
    x, where u ~ N(0, sigma_u^2) is the quantization surrogate, active in
    training passes only.  Returns the lowest-validation-loss parameters.
    """
    data = np.asarray(dataset, dtype=np.float32)
    if data.ndim != 2 or data.shape[1] != ec.llr_width:
        raise ValueError(f"expected (N, {ec.llr_width}) dataset, got {data.shape}")
    weights = compute_weights(data, ec.system.k)
    fq, g, _ = build_models(ec, tc.seed)
    tr_idx, val_idx = _split(data.shape[0], tc)
    train, val = data[tr_idx], data[val_idx]
    noise_rng = RngStream((tc.seed, _TAG_NOISE))

    def step(idx, adam):
        x = train[idx]
        z, tape_q = forward(fq, x)
        u = noise_rng.normal(z.shape).astype(np.float32) * ec.sigma_u
        pred, tape_g = forward(g, z + u)
        loss, gl = wmse_loss(pred, x, weights)
        g_grads, gz = backward(g, tape_g, gl)
        q_grads, _ = backward(fq, tape_q, gz)
        fq.set_params(adam_step(fq.params, q_grads, adam[0]))
        g.set_params(adam_step(g.params, g_grads, adam[1]))
        return loss

    def val_loss():
        pred = _forward_chunks(g, _forward_chunks(fq, val))
        return wmse_loss(pred, val, weights)[0]

    t = _Trainer(models=[fq, g], tc=tc, lr=tc.lr)
    t.run(train.shape[0], step, val_loss)
    t.restore_best()
    return fq, g, t.history


def train_stage2(
    features: np.ndarray, llr: np.ndarray, fq: NeuralModel,
    ec: EqNetConfig, tc: TrainConfig,
) -> tuple[NeuralModel, list[dict]]:
    """Stage 2: fit f_E to the frozen f_Q's latent codes under an L1 loss.

    llr is natural-domain; targets are f_Q(tanh(llr/2)) computed without the
    noise surrogate.  f_Q must be frozen and is never updated.
    """
    if not fq.frozen:
        raise RuntimeError("f_Q must be frozen before Stage 2")
    x = np.asarray(features, dtype=np.float32)
    if x.ndim != 2 or x.shape[1] != ec.feature_width:
        raise ValueError(f"expected (N, {ec.feature_width}) features, got {x.shape}")
    targets = _forward_chunks(fq, to_tanh(llr).astype(np.float32))
    _, _, fe = build_models(ec, tc.seed)
    tr_idx, val_idx = _split(x.shape[0], tc)
    xt, xv = x[tr_idx], x[val_idx]
    yt, yv = targets[tr_idx], targets[val_idx]

    def step(idx, adam):
        pred, tape = forward(fe, xt[idx])
        loss, gl = l1_loss(pred, yt[idx])
        grads, _ = backward(fe, tape, gl)
        fe.set_params(adam_step(fe.params, grads, adam[0]))
        return loss

    def val_loss():
        return l1_loss(_forward_chunks(fe, xv), yv)[0]

    t = _Trainer(models=[fe], tc=tc, lr=tc.lr)
    t.run(xt.shape[0], step, val_loss)
    t.restore_best()
    return fe, t.history


def train_joint_baseline(
    features: np.ndarray, llr: np.ndarray, ec: EqNetConfig, tc: TrainConfig,
) -> tuple[NeuralModel, NeuralModel, list[dict]]:
    """Single-stage baseline: end-to-end WMSE through g(f_E(features)).

    Starts from the same per-model initial weights as the two-stage protocol
    (derived init streams), at twice the learning rate, halved whenever the
    validation loss plateaus for plateau_patience epochs.
    """
    x = np.asarray(features, dtype=np.float32)
    target = to_tanh(llr).astype(np.float32)
    weights = compute_weights(target, ec.system.k)
    _, g, fe = build_models(ec, tc.seed)
    tr_idx, val_idx = _split(x.shape[0], tc)
    xt, xv = x[tr_idx], x[val_idx]
    yt, yv = target[tr_idx], target[val_idx]

    def step(idx, adam):
        z, tape_e = forward(fe, xt[idx])
        pred, tape_g = forward(g, z)
        loss, gl = wmse_loss(pred, yt[idx], weights)
        g_grads, gz = backward(g, tape_g, gl)
        e_grads, _ = backward(fe, tape_e, gz)
        fe.set_params(adam_step(fe.params, e_grads, adam[0]))
        g.set_params(adam_step(g.params, g_grads, adam[1]))
        return loss

    def val_loss():
        pred = _forward_chunks(g, _forward_chunks(fe, xv))
        return wmse_loss(pred, yv, weights)[0]

    t = _Trainer(models=[fe, g], tc=tc, lr=2.0 * tc.lr, plateau=True)
    t.run(xt.shape[0], step, val_loss)
    t.restore_best()
    return fe, g, t.history


def write_history(history: list[dict], path: str) -> None:
    """Training history CSV, shared schema across all training entry points."""
    with open(path, "w", newline="") as f:
        f.write("epoch,train_loss,val_loss,lr\n")
        for row in history:
            f.write(f"{row['epoch']},{row['train_loss']:.8e},"
                    f"{row['val_loss']:.8e},{row['lr']:.8e}\n")


@dataclass(frozen=True)
class Codebook:
    """Per-latent-dimension scalar reconstruction levels, sorted ascending."""

    levels: np.ndarray        # (latent_dim, 2**nb)
    nb: int

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=np.float64)
        object.__setattr__(self, "levels", lv)
        if lv.ndim != 2 or lv.shape[1] != 2**self.nb:
            raise ValueError(f"expected (dims, {2**self.nb}) levels, got {lv.shape}")
        if np.any(np.diff(lv, axis=1) <= 0):
            raise ValueError("levels must be strictly increasing per dimension")

    @property
    def bits(self) -> int:
        return self.levels.shape[0] * self.nb


def _kmeans_1d(x: np.ndarray, m: int, rng: RngStream) -> tuple[np.ndarray, list[float]]:
    """k-means++ seeding then Lloyd iterations on scalar data.

    Returns (sorted levels, per-iteration distortion trace).  Converges when
    the largest centroid shift drops below 1e-7 or after 100 iterations.
    """
    x = np.asarray(x, dtype=np.float64)
    if np.unique(x).size < m:
        raise ValueError(f"need at least {m} distinct values, got {np.unique(x).size}")
    centers = np.empty(m)
    centers[0] = x[rng.gen.integers(x.size)]
    d2 = (x - centers[0]) ** 2
    for j in range(1, m):
        centers[j] = x[rng.gen.choice(x.size, p=d2 / d2.sum())]
        d2 = np.minimum(d2, (x - centers[j]) ** 2)
    trace = []
    for _ in range(100):
        d = np.abs(x[:, None] - centers[None, :])
        assign = np.argmin(d, axis=1)
        trace.append(float(np.mean((x - centers[assign]) ** 2)))
        new = centers.copy()
        for j in range(m):
            sel = assign == j
            if sel.any():
                new[j] = x[sel].mean()
        shift = np.max(np.abs(new - centers))
        centers = new
        if shift < 1e-7:
            break
    return np.sort(centers), trace


def fit_codebook(
    fq: NeuralModel, dataset: np.ndarray, nb: int, seed: int = 0
) -> Codebook:
    """Per-dimension k-means++ codebooks over f_Q's latent values.

    dataset is tanh-domain LLR vectors; each of the 3*Nt latent dimensions
    is clustered independently into 2**nb levels.
    """
    if not 1 <= nb <= 8:
        raise ValueError(f"nb must be in 1..8, got {nb}")
    z = _forward_chunks(fq, np.asarray(dataset, dtype=np.float32))
    rng = RngStream((seed, _TAG_CODEBOOK))
    levels = np.stack([_kmeans_1d(z[:, d], 2**nb, rng)[0] for d in range(z.shape[1])])
    return Codebook(levels=levels, nb=nb)


def quantize_latent(z: np.ndarray, cb: Codebook) -> np.ndarray:
    """Nearest-level index per dimension (ties to the lower index); (B, dims)."""
    b, dims = z.shape
    idx = np.empty((b, dims), dtype=np.int64)
    for d in range(dims):
        lv = cb.levels[d]
        pos = np.searchsorted(lv, z[:, d])
        lo = np.clip(pos - 1, 0, lv.size - 1)
        hi = np.clip(pos, 0, lv.size - 1)
        idx[:, d] = np.where(
            np.abs(z[:, d] - lv[lo]) <= np.abs(z[:, d] - lv[hi]), lo, hi
        )
    return idx


def pack_bitword(idx: np.ndarray, nb: int) -> bytes:
    """Pack per-dimension level indices into a big-endian, dimension-major
    bitword of exactly dims*nb bits (zero-padded to whole bytes)."""
    idx = np.asarray(idx, dtype=np.int64)
    shifts = np.arange(nb - 1, -1, -1)
    bits = ((idx[:, None] >> shifts) & 1).reshape(-1).astype(np.uint8)
    return np.packbits(bits, bitorder="big").tobytes()


def unpack_bitword(word: bytes, nb: int, dims: int) -> np.ndarray:
    """Inverse of pack_bitword; returns (dims,) level indices."""
    nbits = dims * nb
    if len(word) != (nbits + 7) // 8:
        raise ValueError(f"expected {(nbits + 7) // 8} bytes, got {len(word)}")
    bits = np.unpackbits(np.frombuffer(word, dtype=np.uint8),
                         bitorder="big")[:nbits]
    weights = 1 << np.arange(nb - 1, -1, -1)
    return bits.reshape(dims, nb) @ weights


def quantize_llr(llr: LlrVector, fq: NeuralModel, cb: Codebook) -> bytes:
    """Natural-domain LLR vector -> 3*Nt*Nb-bit word via f_Q and the codebook."""
    if llr.domain != "natural":
        raise ValueError("quantize_llr expects natural-domain LLRs")
    z, _ = forward(fq, to_tanh(llr.values)[None, :].astype(np.float32))
    idx = quantize_latent(z, cb)
    return pack_bitword(idx[0], cb.nb)


def dequantize_llr(word: bytes, cb: Codebook, g: NeuralModel) -> LlrVector:
    """Bitword -> levels -> g -> natural-domain LLR vector."""
    idx = unpack_bitword(word, cb.nb, cb.levels.shape[0])
    z = cb.levels[np.arange(idx.size), idx].astype(np.float32)
    v, _ = forward(g, z[None, :])
    return LlrVector(values=from_tanh(v[0]))


def estimate_llr(
    y: np.ndarray, h: np.ndarray, sigma_n: float,
    fe: NeuralModel, g: NeuralModel,
) -> LlrVector:
    """Estimation mode: natural-domain LLRs from g(f_E(y, H, sigma_n))."""
    x = make_features(y[None, :], h[None, :, :], sigma_n)
    z, _ = forward(fe, x)
    v, _ = forward(g, z)
    return LlrVector(values=from_tanh(v[0]))


# Model bundle directory: weight files per network, codebook and config JSON.

def save_bundle(
    path: str, ec: EqNetConfig, fq: NeuralModel | None = None,
    g: NeuralModel | None = None, fe: NeuralModel | None = None,
    codebook: Codebook | None = None, meta: dict | None = None,
) -> None:
    os.makedirs(path, exist_ok=True)
    s = ec.system
    cfg = {
        "system": {"nt": s.nt, "nr": s.nr, "k": s.k},
        "fq_width": ec.fq_width, "fq_hidden": ec.fq_hidden,
        "g_branch_width": ec.g_branch_width, "g_branch_hidden": ec.g_branch_hidden,
        "fe_blocks": ec.fe_blocks, "fe_hidden_per_block": ec.fe_hidden_per_block,
        "fe_width": ec.fe_width, "latent_dim": ec.latent_dim,
        "sigma_u": ec.sigma_u, "meta": meta or {},
    }
    with open(os.path.join(path, "config.json"), "w") as f:
        json.dump(cfg, f, indent=2, sort_keys=True)
    for name, model in (("fq", fq), ("g", g), ("fe", fe)):
        if model is not None:
            save_model(model, os.path.join(path, f"{name}.weights"))
    if codebook is not None:
        with open(os.path.join(path, "codebook.json"), "w") as f:
            json.dump({"nb": codebook.nb, "levels": codebook.levels.tolist()},
                      f, sort_keys=True)


@dataclass
class Bundle:
    ec: EqNetConfig
    fq: NeuralModel | None = None
    g: NeuralModel | None = None
    fe: NeuralModel | None = None
    codebook: Codebook | None = None
    meta: dict | None = None


def load_bundle(path: str) -> Bundle:
    with open(os.path.join(path, "config.json")) as f:
        cfg = json.load(f)
    ec = EqNetConfig(
        system=SystemConfig(**cfg["system"]),
        fq_width=cfg["fq_width"], fq_hidden=cfg["fq_hidden"],
        g_branch_width=cfg["g_branch_width"], g_branch_hidden=cfg["g_branch_hidden"],
        fe_blocks=cfg["fe_blocks"], fe_hidden_per_block=cfg["fe_hidden_per_block"],
        fe_width=cfg["fe_width"], latent_dim=cfg["latent_dim"],
        sigma_u=cfg["sigma_u"],
    )
    bundle = Bundle(ec=ec, meta=cfg.get("meta"))
    for name in ("fq", "g", "fe"):
        p = os.path.join(path, f"{name}.weights")
        if os.path.exists(p):
            setattr(bundle, name, load_model(p))
    cbp = os.path.join(path, "codebook.json")
    if os.path.exists(cbp):
        with open(cbp) as f:
            raw = json.load(f)
        bundle.codebook = Codebook(levels=np.asarray(raw["levels"]), nb=raw["nb"])
    return bundle
