"""Narrowband MIMO system model: channel sampling, SNR bookkeeping, CSI noise.

Model: y = H x + n per channel use, with n i.i.d. complex Gaussian of
per-entry variance sigma_n**2 and unit-variance channel entries, so
SNR = E[||H||_F^2] / sigma_n^2 = Nt*Nr / sigma_n^2.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .numerics import RngStream, sample_complex_gaussian


@dataclass(frozen=True)
class SystemConfig:
    """MIMO dimensions: nt transmit streams, nr receive antennas, k bits/symbol."""

    nt: int
    nr: int
    k: int

    def __post_init__(self):
        if not (self.nr >= self.nt >= 1):
            raise ValueError(f"need nr >= nt >= 1, got nt={self.nt}, nr={self.nr}")
        if self.k % 2 != 0 or self.k < 2:
            raise ValueError(f"bits per symbol must be even and >= 2, got {self.k}")

    @property
    def latent_dim(self) -> int:
        return 3 * self.nt

    @property
    def bits_per_use(self) -> int:
        return self.nt * self.k


@dataclass(frozen=True)
class ChannelUse:
    """One received vector with its channel matrix and noise level."""

    y: np.ndarray        # (nr,) complex128
    h: np.ndarray        # (nr, nt) complex128
    sigma_n: float       # noise std; per-entry complex variance sigma_n**2

    def __post_init__(self):
        if self.y.shape[0] != self.h.shape[0]:
            raise ValueError(f"y has {self.y.shape[0]} entries but H has {self.h.shape[0]} rows")
        if self.sigma_n <= 0:
            raise ValueError(f"sigma_n must be > 0, got {self.sigma_n}")


def sample_rayleigh(cfg: SystemConfig, rng: RngStream) -> np.ndarray:
    """i.i.d. Rayleigh-fading matrix: unit-variance complex Gaussian entries."""
    return sample_complex_gaussian(cfg.nr * cfg.nt, 1.0, rng).reshape(cfg.nr, cfg.nt)


def sample_rayleigh_batch(cfg: SystemConfig, n: int, rng: RngStream) -> np.ndarray:
    """n i.i.d. Rayleigh channel draws, shape (n, nr, nt)."""
    return sample_complex_gaussian(n * cfg.nr * cfg.nt, 1.0, rng).reshape(n, cfg.nr, cfg.nt)


@lru_cache(maxsize=None)
def _corr_sqrt(n: int, rho: float) -> np.ndarray:
    """Symmetric square root of the exponential correlation matrix rho^|i-j|."""
    r = rho ** np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    w, v = np.linalg.eigh(r)
    s = (v * np.sqrt(np.maximum(w, 0.0))) @ v.T
    s.setflags(write=False)
    return s


def sample_correlated(cfg: SystemConfig, rho: float, rng: RngStream) -> np.ndarray:
    """Kronecker-correlated channel R_r^(1/2) W R_t^(1/2), E||H||_F^2 = nt*nr."""
    return sample_correlated_batch(cfg, rho, 1, rng)[0]


def sample_correlated_batch(cfg: SystemConfig, rho: float, n: int, rng: RngStream) -> np.ndarray:
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"correlation coefficient must be in [0, 1), got {rho}")
    w = sample_rayleigh_batch(cfg, n, rng)
    if rho == 0.0:
        return w
    sr = _corr_sqrt(cfg.nr, rho)
    st = _corr_sqrt(cfg.nt, rho)
    return sr @ w @ st


def snr_to_sigma(snr_db: float, cfg: SystemConfig) -> float:
    """Noise std for a target SNR under SNR = nt*nr / sigma_n^2."""
    return float(np.sqrt(cfg.nt * cfg.nr * 10.0 ** (-snr_db / 10.0)))


def sigma_to_snr(sigma_n: float, cfg: SystemConfig) -> float:
    """Inverse of snr_to_sigma."""
    return float(10.0 * np.log10(cfg.nt * cfg.nr / sigma_n**2))


def transmit(h: np.ndarray, x: np.ndarray, sigma_n: float, rng: RngStream) -> ChannelUse:
    """One channel use y = H x + n with noise variance sigma_n**2 per entry."""
    h = np.asarray(h, dtype=np.complex128)
    x = np.asarray(x, dtype=np.complex128)
    if x.shape[0] != h.shape[1]:
        raise ValueError(f"x has {x.shape[0]} entries but H has {h.shape[1]} columns")
    n = sample_complex_gaussian(h.shape[0], sigma_n**2, rng)
    return ChannelUse(y=h @ x + n, h=h, sigma_n=float(sigma_n))


def transmit_batch(h: np.ndarray, x: np.ndarray, sigma_n: float, rng: RngStream) -> np.ndarray:
    """Batched y = H x + n over stacks h (B, nr, nt), x (B, nt); returns (B, nr)."""
    y = np.einsum("bij,bj->bi", h, x)
    noise = sample_complex_gaussian(y.size, sigma_n**2, rng).reshape(y.shape)
    return y + noise


def corrupt_csi(h: np.ndarray, sigma_csi: float, rng: RngStream) -> np.ndarray:
    """Receiver-side CSI estimate H + N with per-entry noise variance sigma_csi**2.

    sigma_csi == 0 returns a copy of h without consuming any random draws,
    so seed-sharing runs with and without CSI corruption stay aligned.
    """
    if sigma_csi < 0:
        raise ValueError(f"sigma_csi must be >= 0, got {sigma_csi}")
    h = np.asarray(h, dtype=np.complex128)
    if sigma_csi == 0.0:
        return h.copy()
    n = sample_complex_gaussian(h.size, sigma_csi**2, rng).reshape(h.shape)
    return h + n
