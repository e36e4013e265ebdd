"""Rate-1/2 (324, 648) quasi-cyclic LDPC code: encoder and min-sum decoder.

The code is the IEEE 802.11n n=648 rate-1/2 code (lifting factor Z=27),
the standard code of exactly this size.  Its 12x24 circulant shift table is
embedded below; -1 marks an all-zero block, a value s >= 0 the identity
cyclically shifted by s columns.

LLR sign convention: positive favors bit 1, i.e. log P(b=1)/P(b=0).  Hard
decisions map a posterior of exactly zero to bit 1, so an all-zero input
decodes to the all-ones word, which is not a codeword here (rows of odd
weight exist) and correctly reports non-convergence.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_Z = 27

_BASE_SHIFTS = np.array([
    [ 0, -1, -1, -1,  0,  0, -1, -1,  0, -1, -1,  0,  1,  0, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1],
    [22,  0, -1, -1, 17, -1,  0,  0, 12, -1, -1, -1, -1,  0,  0, -1, -1, -1, -1, -1, -1, -1, -1, -1],
    [ 6, -1,  0, -1, 10, -1, -1, -1, 24, -1,  0, -1, -1, -1,  0,  0, -1, -1, -1, -1, -1, -1, -1, -1],
    [ 2, -1, -1,  0, 20, -1, -1, -1, 25,  0, -1, -1, -1, -1, -1,  0,  0, -1, -1, -1, -1, -1, -1, -1],
    [23, -1, -1, -1,  3, -1, -1, -1,  0, -1,  9, 11, -1, -1, -1, -1,  0,  0, -1, -1, -1, -1, -1, -1],
    [24, -1, 23,  1, 17, -1,  3, -1, 10, -1, -1, -1, -1, -1, -1, -1, -1,  0,  0, -1, -1, -1, -1, -1],
    [25, -1, -1, -1,  8, -1, -1, -1,  7, 18, -1, -1,  0, -1, -1, -1, -1, -1,  0,  0, -1, -1, -1, -1],
    [13, 24, -1, -1,  0, -1,  8, -1,  6, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1,  0,  0, -1, -1, -1],
    [ 7, 20, -1, 16, 22, 10, -1, -1, 23, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1,  0,  0, -1, -1],
    [11, -1, -1, -1, 19, -1, -1, -1, 13, -1,  3, 17, -1, -1, -1, -1, -1, -1, -1, -1, -1,  0,  0, -1],
    [25, -1,  8, -1, 23, 18, -1, 14,  9, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1,  0,  0],
    [ 3, -1, -1, -1, 16, -1, -1,  2, 25,  5, -1, -1,  1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1,  0],
], dtype=np.int64)


@dataclass(frozen=True)
class LdpcCode:
    """Immutable code object with the expanded parity-check matrix and the
    edge tables the batched decoder iterates over."""

    n: int
    k: int
    z: int
    base: np.ndarray | None
    h: np.ndarray                       # (n-k, n) uint8 dense parity-check
    # Derived data, filled by the builders:
    enc: np.ndarray = field(repr=False, default=None)         # (n-k, k) B^-1 A
    edge_check: np.ndarray = field(repr=False, default=None)  # (E,) check index, check-sorted
    edge_var: np.ndarray = field(repr=False, default=None)    # (E,) var index, check-sorted
    check_starts: np.ndarray = field(repr=False, default=None)
    var_perm: np.ndarray = field(repr=False, default=None)    # check-order -> var-order
    var_starts: np.ndarray = field(repr=False, default=None)

    @property
    def num_edges(self) -> int:
        return self.edge_check.shape[0]


@dataclass(frozen=True)
class DecodeResult:
    info_bits: np.ndarray
    converged: bool
    iterations_used: int


def _gf2_inv(m: np.ndarray) -> np.ndarray:
    """Invert a square binary matrix over GF(2); raises if singular."""
    n = m.shape[0]
    a = np.concatenate([m.astype(np.uint8) % 2, np.eye(n, dtype=np.uint8)], axis=1)
    for col in range(n):
        pivots = np.nonzero(a[col:, col])[0]
        if pivots.size == 0:
            raise ValueError("matrix is singular over GF(2)")
        p = col + pivots[0]
        if p != col:
            a[[col, p]] = a[[p, col]]
        rows = np.nonzero(a[:, col])[0]
        rows = rows[rows != col]
        a[rows] ^= a[col]
    return a[:, n:]


def _expand_base(base: np.ndarray, z: int) -> np.ndarray:
    rows, cols = base.shape
    h = np.zeros((rows * z, cols * z), dtype=np.uint8)
    eye = np.eye(z, dtype=np.uint8)
    for i in range(rows):
        for j in range(cols):
            s = base[i, j]
            if s >= 0:
                h[i * z:(i + 1) * z, j * z:(j + 1) * z] = np.roll(eye, -(s % z), axis=0)
    return h


def _finish_code(n: int, k: int, z: int, base: np.ndarray | None, h: np.ndarray) -> LdpcCode:
    """Attach the encoder matrix and the sorted edge tables to a code."""
    a, b = h[:, :k], h[:, k:]
    enc = (_gf2_inv(b) @ a.astype(np.uint64)) % 2
    ci, vi = np.nonzero(h)
    order = np.lexsort((vi, ci))
    ci, vi = ci[order], vi[order]
    check_starts = np.searchsorted(ci, np.arange(n - k))
    var_perm = np.argsort(vi, kind="stable")
    var_starts = np.searchsorted(vi[var_perm], np.arange(n))
    code = LdpcCode(
        n=n, k=k, z=z, base=base, h=h, enc=enc.astype(np.uint8),
        edge_check=ci, edge_var=vi, check_starts=check_starts,
        var_perm=var_perm, var_starts=var_starts,
    )
    for arr in (code.base, code.h, code.enc, code.edge_check, code.edge_var,
                code.check_starts, code.var_perm, code.var_starts):
        if arr is not None:
            arr.setflags(write=False)
    return code


def build_code() -> LdpcCode:
    """The (324, 648) code: 802.11n rate-1/2 base matrix expanded with Z=27."""
    h = _expand_base(_BASE_SHIFTS, _Z)
    return _finish_code(n=648, k=324, z=_Z, base=_BASE_SHIFTS.copy(), h=h)


def load_alist(path: str) -> LdpcCode:
    """Load a parity-check matrix from the conventional alist text format.

    The right square half of H must be invertible over GF(2) for the
    systematic encoder; otherwise this raises.
    """
    with open(path) as f:
        tokens = f.read().split()
    it = iter(tokens)
    n, m = int(next(it)), int(next(it))
    next(it), next(it)                    # max column / row degrees, unused
    col_deg = [int(next(it)) for _ in range(n)]
    [next(it) for _ in range(m)]          # row degrees, unused
    h = np.zeros((m, n), dtype=np.uint8)
    for j in range(n):
        # alist indices are 1-based; zero entries pad fixed-width lists
        for _ in range(col_deg[j]):
            i = int(next(it))
            if i > 0:
                h[i - 1, j] = 1
    return _finish_code(n=n, k=n - m, z=1, base=None, h=h)


def encode(u: np.ndarray, code: LdpcCode) -> np.ndarray:
    """Systematic encoding: codeword = [u | parity], zero syndrome by construction."""
    u = np.asarray(u, dtype=np.uint8)
    if u.shape != (code.k,):
        raise ValueError(f"expected {code.k} info bits, got shape {u.shape}")
    parity = (code.enc @ u.astype(np.uint64)) % 2
    return np.concatenate([u, parity.astype(np.uint8)])


def encode_batch(u: np.ndarray, code: LdpcCode) -> np.ndarray:
    """Batched systematic encoding: u (B, k) -> (B, n)."""
    parity = (u.astype(np.uint64) @ code.enc.T.astype(np.uint64)) % 2
    return np.concatenate([u.astype(np.uint8), parity.astype(np.uint8)], axis=1)


def syndrome(bits: np.ndarray, code: LdpcCode) -> np.ndarray:
    """GF(2) syndrome H*c of one word or a batch (leading axes kept)."""
    return (bits.astype(np.uint64) @ code.h.T.astype(np.uint64)) % 2


def decode(
    llr: np.ndarray, code: LdpcCode, max_iterations: int = 50,
    normalization: float = 0.75,
) -> DecodeResult:
    """Normalized min-sum decoding of a single block; see decode_batch."""
    bits, conv, iters = decode_batch(
        np.asarray(llr, dtype=np.float64)[None, :], code,
        max_iterations=max_iterations, normalization=normalization,
    )
    return DecodeResult(info_bits=bits[0], converged=bool(conv[0]),
                        iterations_used=int(iters[0]))


def decode_batch(
    llr: np.ndarray, code: LdpcCode, max_iterations: int = 50,
    normalization: float = 0.75,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normalized min-sum belief propagation over a batch of blocks.

    llr: (B, n), positive favoring bit 1.  Returns (info_bits (B, k) uint8,
    converged (B,) bool, iterations_used (B,) int).  Each block exits early
    once its hard decision has zero syndrome; converged blocks are dropped
    from the working set so late iterations only touch the stragglers.

    Internally flips to the log P(0)/P(1) convention where the textbook
    check-node rule (sign product, min magnitude) applies unchanged.
    """
    llr = -np.asarray(llr, dtype=np.float64)
    b, n = llr.shape
    if n != code.n:
        raise ValueError(f"expected {code.n} LLRs per block, got {n}")
    nchk = code.n - code.k

    out_bits = np.zeros((b, code.k), dtype=np.uint8)
    out_conv = np.zeros(b, dtype=bool)
    out_iter = np.full(b, max_iterations, dtype=np.int64)

    active = np.arange(b)
    c2v = np.zeros((b, code.num_edges))
    ch = llr
    ev, vp, vs, cs = code.edge_var, code.var_perm, code.var_starts, code.check_starts
    edge_idx = np.arange(code.num_edges)

    for it in range(1, max_iterations + 1):
        # variable to check: total belief minus the edge's own incoming message
        var_sum = np.add.reduceat(c2v[:, vp], vs, axis=1)
        total = ch + var_sum
        v2c = total[:, ev] - c2v

        # check to variable: normalized min-sum with the min/second-min trick
        mag = np.abs(v2c)
        neg = v2c < 0
        min1 = np.minimum.reduceat(mag, cs, axis=1)
        first = np.where(mag == min1[:, code.edge_check], edge_idx, code.num_edges)
        argmin1 = np.minimum.reduceat(first, cs, axis=1)
        mag2 = mag.copy()
        np.put_along_axis(mag2, argmin1, np.inf, axis=1)
        min2 = np.minimum.reduceat(mag2, cs, axis=1)
        par = np.add.reduceat(neg.astype(np.int64), cs, axis=1) & 1
        seg_sign = 1.0 - 2.0 * par
        edge_sign = np.where(neg, -1.0, 1.0)
        out_mag = np.where(
            edge_idx == argmin1[:, code.edge_check],
            min2[:, code.edge_check], min1[:, code.edge_check],
        )
        c2v = normalization * seg_sign[:, code.edge_check] * edge_sign * out_mag

        # posterior, hard decision (0 maps to bit 1), syndrome via edge parity
        post = ch + np.add.reduceat(c2v[:, vp], vs, axis=1)
        hard = (post <= 0).astype(np.uint8)
        syn = np.add.reduceat(hard[:, ev], cs, axis=1) & 1
        ok = ~syn.any(axis=1)
        if ok.any():
            rows = active[ok]
            out_bits[rows] = hard[ok][:, :code.k]
            out_conv[rows] = True
            out_iter[rows] = it
            keep = ~ok
            active, c2v, ch = active[keep], c2v[keep], ch[keep]
            if active.size == 0:
                return out_bits, out_conv, out_iter
    # non-converged blocks report their final hard decision
    post = ch + np.add.reduceat(c2v[:, vp], vs, axis=1)
    out_bits[active] = (post[:, :code.k] <= 0).astype(np.uint8)
    return out_bits, out_conv, out_iter
