"""Gray-coded square-QAM constellations and bit/symbol mapping.

Labeling convention (fixed for the whole repo):
  * a K-bit symbol label is [I-axis bits | Q-axis bits], most significant
    bit of each axis first;
  * per axis, the K/2-bit labels form a binary-reflected Gray code over
    the amplitude levels in ascending order, so the axis MSB is the sign
    bit and adjacent levels differ in exactly one bit;
  * constellation index p is the integer value of the full label, i.e.
    ``points[p]`` is the symbol labeled by the K-bit binary expansion of p.

Constellations are normalized to unit average energy.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SUPPORTED_K = (2, 4, 6, 8)

SNAP_TOL = 1e-9


@dataclass(frozen=True)
class QamConstellation:
    """Square QAM constellation with per-axis Gray labeling."""

    k: int                    # bits per symbol (even)
    points: np.ndarray        # (2**k,) complex128, unit average energy
    labels: np.ndarray        # (2**k, k) uint8, row p = binary expansion of p
    axis_levels: np.ndarray   # (2**(k//2),) ascending normalized PAM levels

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def bits_per_axis(self) -> int:
        return self.k // 2


def build_constellation(k: int) -> QamConstellation:
    """Gray-coded square QAM with 2**k points and unit average energy."""
    if k not in SUPPORTED_K:
        raise ValueError(f"bits per symbol must be one of {SUPPORTED_K}, got {k}")
    return _build_cached(k)


@lru_cache(maxsize=None)
def _build_cached(k: int) -> QamConstellation:
    m = k // 2
    n_axis = 1 << m
    # Levels {-(2^m - 1), ..., -1, +1, ..., +(2^m - 1)}; total symbol energy
    # 2 * (4^m - 1) / 3 before scaling.
    raw = np.arange(-(n_axis - 1), n_axis, 2, dtype=np.float64)
    scale = np.sqrt(2.0 * (4.0**m - 1.0) / 3.0)
    levels = raw / scale

    # gray[i] is the Gray label of ascending level index i; invert it to map
    # an axis label value to its level index.
    idx = np.arange(n_axis)
    gray = idx ^ (idx >> 1)
    gray_to_level = np.empty(n_axis, dtype=np.intp)
    gray_to_level[gray] = idx

    p = np.arange(1 << k)
    i_code = p >> m
    q_code = p & (n_axis - 1)
    points = levels[gray_to_level[i_code]] + 1j * levels[gray_to_level[q_code]]

    shifts = np.arange(k - 1, -1, -1)
    labels = ((p[:, None] >> shifts[None, :]) & 1).astype(np.uint8)

    for arr in (points, labels, levels):
        arr.setflags(write=False)
    return QamConstellation(k=k, points=points, labels=labels, axis_levels=levels)


def bits_to_symbols(bits: np.ndarray, c: QamConstellation, nt: int) -> np.ndarray:
    """Map nt*K bits to nt constellation points; stream k takes bits [kK, (k+1)K)."""
    bits = np.asarray(bits)
    if bits.shape != (nt * c.k,):
        raise ValueError(f"expected {nt * c.k} bits for {nt} streams, got shape {bits.shape}")
    return c.points[bits_to_indices(bits.reshape(nt, c.k))]


def bits_to_indices(bits: np.ndarray) -> np.ndarray:
    """Bit rows (..., K) to constellation indices, MSB first."""
    k = bits.shape[-1]
    weights = 1 << np.arange(k - 1, -1, -1)
    return np.asarray(bits, dtype=np.int64) @ weights


def symbols_to_bits(x: np.ndarray, c: QamConstellation) -> np.ndarray:
    """Inverse mapping; every entry must lie within SNAP_TOL of a point."""
    x = np.asarray(x, dtype=np.complex128)
    d = np.abs(x[:, None] - c.points[None, :])
    idx = d.argmin(axis=1)
    off = d[np.arange(x.shape[0]), idx]
    if np.any(off > SNAP_TOL):
        worst = int(np.argmax(off))
        raise ValueError(
            f"entry {worst} ({x[worst]}) is {off[worst]:.3e} away from the nearest "
            f"constellation point (tolerance {SNAP_TOL:.0e})"
        )
    return c.labels[idx].reshape(-1)
