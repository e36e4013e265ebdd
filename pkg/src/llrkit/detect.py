"""Soft-output MIMO detection: exact ML LLRs, ZF-SIC, and its 3*Nt compression.

LLR convention throughout: natural log of P(bit=1)/P(bit=0), stream-major
layout llr[k*K + i] for bit i (MSB first) of stream k.  Exponents carry the
1/sigma_n**2 factor so magnitudes are calibrated for soft decoding.

The ZF-SIC solution depends on the observation only through the per-stream
interference-cancelled scalars t_k and the diagonal gains r_kk, all divided
by sigma_n.  zf_sic_compress emits exactly that 3*Nt-real vector and
zf_sic_expand reconstructs the LLRs from it losslessly.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import ChannelUse
from .modem import QamConstellation, build_constellation
from .numerics import qr_decompose, qr_decompose_batch

# Natural-domain LLRs are clipped to this magnitude before storage/decoding.
LLR_CLIP = 80.0

# Enumeration guard for exact ML: at most 2^20 candidate vectors.
_MAX_CANDIDATES = 1 << 20


class SingularStreamError(ValueError):
    """A ZF-SIC stream has zero effective gain (zero diagonal entry of R)."""


@dataclass(frozen=True)
class LlrVector:
    """LLRs for one channel use, stream-major: values[k*K + i] = bit i of stream k."""

    values: np.ndarray
    domain: str = "natural"

    def __post_init__(self):
        if self.domain not in ("natural", "tanh"):
            raise ValueError(f"unknown LLR domain {self.domain!r}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("LLR values must be finite")
        if self.domain == "tanh" and np.any(np.abs(self.values) > 1.0):
            raise ValueError("tanh-domain values must lie in [-1, 1]")


@dataclass(frozen=True)
class QrChannel:
    """QR-factored channel: y_hat = Q^H y, R upper triangular with real >= 0 diagonal."""

    y_hat: np.ndarray    # (nt,) complex128
    r: np.ndarray        # (nt, nt) complex128 upper triangular
    sigma_n: float

    def __post_init__(self):
        if self.sigma_n <= 0:
            raise ValueError(f"sigma_n must be > 0, got {self.sigma_n}")


@dataclass(frozen=True)
class ZfSicCode:
    """3*Nt reals, per stream k: (Re t_k, Im t_k, r_kk) / sigma_n."""

    z: np.ndarray

    def __post_init__(self):
        if self.z.shape[-1] % 3 != 0:
            raise ValueError(f"code length must be a multiple of 3, got {self.z.shape[-1]}")
        if not np.all(np.isfinite(self.z)):
            raise ValueError("code entries must be finite")

    @property
    def nt(self) -> int:
        return self.z.shape[-1] // 3


def qr_channel(use: ChannelUse) -> QrChannel:
    """Reduced QR factorization of a channel use.

    With nr > nt the component of y orthogonal to range(H) contributes a
    candidate-independent constant to ||y - Hx||^2, so LLR ratios from the
    reduced factorization match the full ones.
    """
    q, r = qr_decompose(use.h)
    return QrChannel(y_hat=q.conj().T @ use.y, r=r, sigma_n=use.sigma_n)


@lru_cache(maxsize=None)
def _bit_masks(k: int) -> np.ndarray:
    """(K, S) float mask: masks[i, p] = bit i (MSB first) of label p."""
    c = build_constellation(k)
    return np.ascontiguousarray(c.labels.T.astype(np.float64))


@lru_cache(maxsize=None)
def _enum_tables(k: int, nt: int) -> tuple[np.ndarray, np.ndarray]:
    """Candidate tables for exhaustive enumeration over S^nt symbol vectors.

    Returns (digits, masks): digits (ncand, nt) per-stream label ints with
    stream 0 most significant; masks (nt*K, ncand) with row k*K+i holding
    bit i of stream k per candidate.
    """
    s = 1 << k
    ncand = s**nt
    weights = s ** np.arange(nt - 1, -1, -1)
    digits = (np.arange(ncand)[:, None] // weights) % s
    c = build_constellation(k)
    bits = c.labels[digits]                              # (ncand, nt, k)
    masks = bits.transpose(1, 2, 0).reshape(nt * k, ncand)
    return digits, np.ascontiguousarray(masks.astype(np.float64))


def _llr_from_exponents(e: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Stable log-sum-exp ratio per bit: rows of masks select the bit=1 class.

    e: (..., ncand) exponents; masks: (nbits, ncand).  The shared max cancels
    in the ratio; a fully underflowed class yields an infinite LLR, which is
    the correct limit and is clipped downstream.
    """
    m = e.max(axis=-1, keepdims=True)
    w = np.exp(e - m)
    s1 = w @ masks.T
    s0 = w @ (1.0 - masks).T
    with np.errstate(divide="ignore"):
        return np.log(s1) - np.log(s0)


def ml_llr(use: ChannelUse, c: QamConstellation) -> LlrVector:
    """Exact ML LLRs by full enumeration: exponents -||y - Hx||^2 / sigma_n^2."""
    nt = use.h.shape[1]
    _check_enum_guard(c, nt)
    digits, masks = _enum_tables(c.k, nt)
    x = c.points[digits]                                 # (ncand, nt)
    resid = use.y[None, :] - x @ use.h.T                 # (ncand, nr)
    e = -np.sum(resid.real**2 + resid.imag**2, axis=1) / use.sigma_n**2
    return LlrVector(values=_llr_from_exponents(e, masks))


def ml_llr_qr(qc: QrChannel, c: QamConstellation) -> LlrVector:
    """Exact ML LLRs in QR coordinates: exponents -||y_hat - Rx||^2 / sigma_n^2."""
    nt = qc.r.shape[1]
    _check_enum_guard(c, nt)
    digits, masks = _enum_tables(c.k, nt)
    x = c.points[digits]
    resid = qc.y_hat[None, :] - x @ qc.r.T
    e = -np.sum(resid.real**2 + resid.imag**2, axis=1) / qc.sigma_n**2
    return LlrVector(values=_llr_from_exponents(e, masks))


def _check_enum_guard(c: QamConstellation, nt: int) -> None:
    if c.size**nt > _MAX_CANDIDATES:
        raise ValueError(
            f"enumeration over {c.size}^{nt} candidates exceeds the 2^20 guard"
        )


def scalar_llr(t: complex, r: float, sigma_n: float, c: QamConstellation) -> np.ndarray:
    """K LLRs of one stream under the scalar model t = r*x + n, Var(n) = sigma_n^2."""
    if sigma_n <= 0:
        raise ValueError(f"sigma_n must be > 0, got {sigma_n}")
    return scalar_llr_batch(np.asarray([t]), np.asarray([float(r)]), sigma_n, c)[0]


def scalar_llr_batch(
    t: np.ndarray, r: np.ndarray, sigma_n: float | np.ndarray, c: QamConstellation
) -> np.ndarray:
    """Vectorized scalar_llr: t (...,) complex, r broadcastable real; returns (..., K)."""
    d = np.abs(t[..., None] - r[..., None] * c.points) ** 2
    e = -d / np.square(np.broadcast_to(sigma_n, t.shape))[..., None]
    return _llr_from_exponents(e, _bit_masks(c.k))


def _sic_recurse(
    y_hat: np.ndarray, r: np.ndarray, c: QamConstellation
) -> tuple[np.ndarray, np.ndarray]:
    """Algorithm core shared by zf_sic_llr and zf_sic_compress.

    Batched over leading axis: y_hat (B, nt), r (B, nt, nt).  Iterates streams
    k = nt-1 .. 0, cancelling already-decided interference and taking the
    hard decision x_k = argmin_j |t_k - r_kk * point_j| with ties going to the
    lowest constellation index.  Returns (t, diag): both (B, nt) with diag real.
    """
    diag = np.einsum("bii->bi", r).real
    if np.any(diag <= 0):
        raise SingularStreamError("R has a non-positive diagonal entry")
    b, nt = y_hat.shape
    t = np.empty((b, nt), dtype=np.complex128)
    xhat = np.zeros((b, nt), dtype=np.complex128)
    for k in range(nt - 1, -1, -1):
        tk = y_hat[:, k] - np.einsum("bj,bj->b", r[:, k, k + 1:], xhat[:, k + 1:])
        d = np.abs(tk[:, None] - diag[:, k, None] * c.points) ** 2
        xhat[:, k] = c.points[np.argmin(d, axis=1)]
        t[:, k] = tk
    return t, diag


def zf_sic_llr(qc: QrChannel, c: QamConstellation) -> LlrVector:
    """ZF-SIC detection: successive interference cancellation down the streams,
    per-stream exact marginalization via scalar_llr."""
    t, diag = _sic_recurse(qc.y_hat[None, :], qc.r[None, :, :], c)
    llr = scalar_llr_batch(t, diag, qc.sigma_n, c)       # (1, nt, K)
    return LlrVector(values=llr.reshape(-1))


def zf_sic_compress(qc: QrChannel, c: QamConstellation) -> ZfSicCode:
    """Run the cancellation recursion and emit the 3*Nt-real sufficient statistic.

    Never evaluates an LLR exponential; the hard decisions need only
    nearest-point distances.
    """
    z = zf_sic_compress_batch(qc.y_hat[None, :], qc.r[None, :, :], qc.sigma_n, c)
    return ZfSicCode(z=z[0])


def zf_sic_compress_batch(
    y_hat: np.ndarray, r: np.ndarray, sigma_n: float | np.ndarray, c: QamConstellation
) -> np.ndarray:
    """Batched compression: y_hat (B, nt), r (B, nt, nt) -> (B, 3*nt) codes."""
    t, diag = _sic_recurse(y_hat, r, c)
    s = np.broadcast_to(np.asarray(sigma_n, dtype=np.float64), t.shape[:1])
    z = np.stack([t.real, t.imag, diag], axis=-1) / s[:, None, None]
    return z.reshape(t.shape[0], -1)


def zf_sic_llr_batch(
    y_hat: np.ndarray, r: np.ndarray, sigma_n: float | np.ndarray, c: QamConstellation
) -> np.ndarray:
    """Batched ZF-SIC LLRs: y_hat (B, nt), r (B, nt, nt) -> (B, nt*K)."""
    t, diag = _sic_recurse(y_hat, r, c)
    s = np.broadcast_to(np.asarray(sigma_n, dtype=np.float64), t.shape[:1])
    llr = scalar_llr_batch(t, diag, s[:, None], c)
    return llr.reshape(t.shape[0], -1)


def zf_sic_expand(z: ZfSicCode, c: QamConstellation) -> LlrVector:
    """Reconstruct ZF-SIC LLRs from the compressed code: per stream k,
    scalar_llr(t_k/sigma, r_k/sigma, 1, c)."""
    llr = zf_sic_expand_batch(z.z[None, :], c)
    return LlrVector(values=llr[0])


def zf_sic_expand_batch(z: np.ndarray, c: QamConstellation) -> np.ndarray:
    """Batched expansion: z (B, 3*nt) -> (B, nt*K) natural-domain LLRs."""
    b, dim = z.shape
    if dim % 3 != 0:
        raise ValueError(f"code length must be a multiple of 3, got {dim}")
    nt = dim // 3
    zz = z.reshape(b, nt, 3)
    t = zz[..., 0] + 1j * zz[..., 1]
    r = zz[..., 2]
    return scalar_llr_batch(t, r, 1.0, c).reshape(b, nt * c.k)


def clip_llr(values: np.ndarray, limit: float = LLR_CLIP) -> np.ndarray:
    """Clip natural-domain LLRs to +-limit; maps infinities to the clip value."""
    return np.clip(values, -limit, limit)


def qr_batch(y: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched QR projection: returns (y_hat (B, nt), r (B, nt, nt))."""
    q, r = qr_decompose_batch(h)
    y_hat = np.einsum("bij,bi->bj", q.conj(), y)
    return y_hat, r


def ml_llr_batch(
    y: np.ndarray, h: np.ndarray, sigma_n: float | np.ndarray, c: QamConstellation
) -> np.ndarray:
    """Batched exact ML LLRs: y (B, nr), h (B, nr, nt) -> (B, nt*K).

    Works in QR coordinates.  nt = 1 reduces to the scalar marginal; nt = 2
    uses a grid decomposition of the candidate distances so the S^2 metric
    table is assembled from two S-sized tables instead of being enumerated
    per candidate; larger nt falls back to plain enumeration per use.
    """
    nt = h.shape[2]
    _check_enum_guard(c, nt)
    y_hat, r = qr_batch(y, h)
    b = y.shape[0]
    sig = np.broadcast_to(np.asarray(sigma_n, dtype=np.float64), (b,))
    if nt == 1:
        return scalar_llr_batch(
            y_hat[:, 0], np.einsum("bii->bi", r).real[:, 0], sig, c
        )
    if nt == 2:
        return _ml_llr_two_stream(y_hat, r, sig, c)
    digits, masks = _enum_tables(c.k, nt)
    x = c.points[digits]
    out = np.empty((b, nt * c.k))
    for i in range(b):
        resid = y_hat[i][None, :] - x @ r[i].T
        e = -np.sum(resid.real**2 + resid.imag**2, axis=1) / sig[i] ** 2
        out[i] = _llr_from_exponents(e, masks)
    return out


def _ml_llr_two_stream(
    y_hat: np.ndarray, r: np.ndarray, sig: np.ndarray, c: QamConstellation
) -> np.ndarray:
    """nt = 2 grid kernel.

    With R upper triangular, d(x0, x1) = |y_hat_0 - r01*x1 - r00*x0|^2
    + |y_hat_1 - r11*x1|^2, so the (S, S) exponent grid is built from an
    (S,) table per stream-1 candidate and marginalized with mask matmuls;
    the shared max cancels in each LLR ratio.
    """
    pts = c.points
    masks = _bit_masks(c.k)
    r00 = r[:, 0, 0].real
    r11 = r[:, 1, 1].real
    a = np.abs(y_hat[:, 1, None] - r11[:, None] * pts) ** 2          # (B, S) over x1
    u = y_hat[:, 0, None] - r[:, 0, 1, None] * pts                   # (B, S) per x1
    g = np.abs(u[:, :, None] - r00[:, None, None] * pts) ** 2        # (B, x1, x0)
    e = -(a[:, :, None] + g) / sig[:, None, None] ** 2
    m = e.max(axis=(1, 2), keepdims=True)
    w = np.exp(e - m)
    w0 = w.sum(axis=1)                                               # (B, S) over x0
    w1 = w.sum(axis=2)                                               # (B, S) over x1
    with np.errstate(divide="ignore"):
        l0 = np.log(w0 @ masks.T) - np.log(w0 @ (1.0 - masks).T)
        l1 = np.log(w1 @ masks.T) - np.log(w1 @ (1.0 - masks).T)
    return np.concatenate([l0, l1], axis=1)
