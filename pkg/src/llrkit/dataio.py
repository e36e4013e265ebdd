"""Binary dataset files of (receiver features, exact LLR) training records.

Format "EQDS" v1, little-endian throughout:
  magic "EQDS" | u32 version | u32 nt | u32 nr | u32 k | u64 count |
  u64 seed | u32 n_snr | f64 snr[n_snr]
followed by count fixed-width float32 records, each laid out as
  y (2*Nr: Re, Im interleaved) | H (2*Nt*Nr, row-major interleaved) |
  sigma_n (1) | natural-domain LLRs (Nt*K).
The feature prefix of a record is byte-identical to the estimation
network's input layout, so records feed training without reshaping.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .channel import SystemConfig

_MAGIC = b"EQDS"
_VERSION = 1


@dataclass(frozen=True)
class Dataset:
    """In-memory view of a dataset file."""

    system: SystemConfig
    features: np.ndarray      # (N, 2Nr + 2NtNr + 1) float32
    llr: np.ndarray           # (N, Nt*K) float32, natural domain
    snr_grid: tuple[float, ...]
    seed: int

    @property
    def count(self) -> int:
        return self.features.shape[0]

    @property
    def sigma_n(self) -> np.ndarray:
        return self.features[:, -1]


def record_width(system: SystemConfig) -> int:
    return 2 * system.nr + 2 * system.nt * system.nr + 1 + system.nt * system.k


def feature_width(system: SystemConfig) -> int:
    return 2 * system.nr + 2 * system.nt * system.nr + 1


def save_dataset(path: str, system: SystemConfig, records: np.ndarray,
                 snr_grid, seed: int) -> None:
    records = np.ascontiguousarray(records, dtype="<f4")
    if records.ndim != 2 or records.shape[1] != record_width(system):
        raise ValueError(
            f"expected records of width {record_width(system)}, got {records.shape}"
        )
    if not np.all(np.isfinite(records)):
        raise ValueError("records contain non-finite values")
    snrs = [float(s) for s in snr_grid]
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<IIIIQQI", _VERSION, system.nt, system.nr, system.k,
                            records.shape[0], seed, len(snrs)))
        f.write(struct.pack(f"<{len(snrs)}d", *snrs))
        f.write(records.tobytes())


def load_dataset(path: str) -> Dataset:
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise ValueError(f"{path} is not a dataset file")
        header = "<IIIIQQI"
        version, nt, nr, k, count, seed, n_snr = struct.unpack(
            header, f.read(struct.calcsize(header)))
        if version != _VERSION:
            raise ValueError(f"unsupported dataset version {version}")
        snrs = struct.unpack(f"<{n_snr}d", f.read(8 * n_snr))
        system = SystemConfig(nt=nt, nr=nr, k=k)
        width = record_width(system)
        data = np.frombuffer(f.read(4 * count * width), dtype="<f4")
    if data.size != count * width:
        raise ValueError(f"{path}: truncated record section")
    data = data.reshape(count, width)
    fw = feature_width(system)
    return Dataset(system=system, features=data[:, :fw].copy(),
                   llr=data[:, fw:].copy(), snr_grid=snrs, seed=seed)
