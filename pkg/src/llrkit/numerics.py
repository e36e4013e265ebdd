"""Complex dense linear algebra and seeded Gaussian sampling.

Complex matrices and vectors are plain ``numpy`` arrays of dtype
``complex128`` (double precision end to end on the detector path).
QR factorizations follow a fixed convention: the diagonal of R is real
and non-negative, with the phase absorbed into the columns of Q.
"""
from __future__ import annotations

import numpy as np

# Absolute tolerance on the R diagonal below which a matrix is treated
# as rank deficient.
RANK_TOL = 1e-12


class SingularMatrixError(ValueError):
    """Matrix is numerically rank deficient."""


class RngStream:
    """Seeded random stream: identical seed, identical sample sequence.

    Thin wrapper over numpy's PCG64 generator.  Parallel Monte-Carlo
    workers each own their own stream, seeded ``base_seed + worker_index``;
    streams are never shared across workers.
    """

    def __init__(self, seed):
        # int or tuple of ints; tuples name derived streams (seed, tag, index).
        # The entropy is length-prefixed because SeedSequence treats trailing
        # zeros as padding, which would alias (s,) with (s, 0).
        self.seed = tuple(int(s) for s in seed) if isinstance(seed, tuple) else int(seed)
        entropy = (len(self.seed), *self.seed) if isinstance(self.seed, tuple) else self.seed
        self.gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    def bits(self, n: int) -> np.ndarray:
        """n uniform bits as uint8."""
        return self.gen.integers(0, 2, size=n, dtype=np.uint8)

    def normal(self, size) -> np.ndarray:
        return self.gen.standard_normal(size)

    def uniform(self, low: float, high: float, size) -> np.ndarray:
        return self.gen.uniform(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self.gen.permutation(n)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed})"


def frobenius_norm_sq(m: np.ndarray) -> float:
    """Sum of squared magnitudes of all entries."""
    m = np.asarray(m)
    return float(np.sum(np.abs(m) ** 2))


def qr_decompose(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduced QR factorization with a real non-negative R diagonal.

    Householder QR followed by a diagonal phase rotation, so that
    Q has orthonormal columns, Q @ R == m, R is upper triangular and
    every diagonal entry of R is real and >= 0.

    Raises:
        SingularMatrixError: if any diagonal magnitude falls below RANK_TOL.
    """
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] < m.shape[1]:
        raise ValueError(f"expected a tall or square matrix, got shape {m.shape}")
    q, r = np.linalg.qr(m)
    return _fix_qr_phase(q, r)


def qr_decompose_batch(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched `qr_decompose` over a stack of matrices (..., rows, cols)."""
    m = np.asarray(m, dtype=np.complex128)
    q, r = np.linalg.qr(m)
    return _fix_qr_phase(q, r)


def _fix_qr_phase(q: np.ndarray, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = np.diagonal(r, axis1=-2, axis2=-1)
    mag = np.abs(d)
    if np.any(mag <= RANK_TOL):
        raise SingularMatrixError(
            f"rank-deficient matrix: smallest R pivot {mag.min():.3e} <= {RANK_TOL:.0e}"
        )
    phase = d / mag
    q = q * phase[..., None, :]
    r = r * np.conj(phase)[..., :, None]
    # The scaled diagonal is real up to rounding; make it exactly real.
    n = r.shape[-1]
    idx = np.arange(n)
    r[..., idx, idx] = mag
    return q, r


def sample_complex_gaussian(n: int, variance: float, rng: RngStream) -> np.ndarray:
    """n i.i.d. circularly-symmetric complex Gaussian samples.

    Real and imaginary parts are independent N(0, variance/2), so the
    total per-entry variance is `variance`.
    """
    if variance < 0:
        raise ValueError(f"variance must be >= 0, got {variance}")
    z = rng.gen.standard_normal((n, 2))
    scale = np.sqrt(variance / 2.0)
    return (z[:, 0] + 1j * z[:, 1]) * scale
