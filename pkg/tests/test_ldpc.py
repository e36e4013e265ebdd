"""LDPC code construction, encoding algebra, and min-sum decoding."""
import numpy as np
import pytest

from llrkit.ldpc import (DecodeResult, build_code, decode, decode_batch,
                         encode, encode_batch, load_alist, syndrome)
from llrkit.numerics import RngStream


def test_code_dimensions(code):
    assert (code.n, code.k, code.z) == (648, 324, 27)
    assert code.h.shape == (324, 648)
    assert code.base.shape == (12, 24)
    # every base row has weight 7 or 8 in this rate-1/2 table
    row_w = (code.base >= 0).sum(axis=1)
    assert set(row_w.tolist()) <= {7, 8}
    assert code.num_edges == int((code.base >= 0).sum()) * code.z


def test_parity_matrix_is_sparse_and_binary(code):
    assert set(np.unique(code.h)) == {0, 1}
    # each expanded row's weight equals its base row's weight
    assert np.array_equal(code.h.sum(axis=1)[:: code.z],
                          (code.base >= 0).sum(axis=1))


def test_encode_produces_codewords(code):
    rng = RngStream(1)
    for _ in range(10):
        u = rng.bits(code.k)
        w = encode(u, code)
        assert w.shape == (code.n,)
        assert np.array_equal(w[: code.k], u)  # systematic prefix
        assert syndrome(w, code).sum() == 0


def test_encode_gf2_linearity(code):
    rng = RngStream(2)
    a, b = rng.bits(code.k), rng.bits(code.k)
    assert np.array_equal(encode((a ^ b).astype(np.uint8), code),
                          encode(a, code) ^ encode(b, code))


def test_encode_batch_matches_single(code):
    rng = RngStream(3)
    U = np.vstack([rng.bits(code.k) for _ in range(5)])
    W = encode_batch(U, code)
    for i in range(5):
        assert np.array_equal(W[i], encode(U[i], code))


def test_noiseless_decode_exact(code):
    rng = RngStream(4)
    u = rng.bits(code.k)
    w = encode(u, code)
    llr = np.where(w == 1, 9.0, -9.0)
    res = decode(llr, code)
    assert isinstance(res, DecodeResult)
    assert res.converged and res.iterations_used == 1
    assert np.array_equal(res.info_bits, u)


def test_flip_correction(code):
    rng = RngStream(5)
    u = rng.bits(code.k)
    w = encode(u, code)
    llr = np.where(w == 1, 6.0, -6.0)
    flip = RngStream(6).permutation(code.n)[:5]
    llr[flip] *= -1
    res = decode(llr, code)
    assert res.converged and np.array_equal(res.info_bits, u)


def test_all_zero_llr_does_not_converge(code):
    res = decode(np.zeros(code.n), code)
    assert not res.converged
    assert res.iterations_used == 50


def test_scaling_invariance_pure_min_sum(code):
    # min-sum updates are positively homogeneous, so decisions cannot depend
    # on a positive rescaling of the input when normalization is 1.0
    rng = RngStream(7)
    u = rng.bits(code.k)
    w = encode(u, code)
    noise = RngStream(8).normal(code.n)
    llr = np.where(w == 1, 2.0, -2.0) + noise
    a, ca, _ = decode_batch(llr[None, :], code, normalization=1.0)
    b, cb, _ = decode_batch(7.3 * llr[None, :], code, normalization=1.0)
    assert np.array_equal(a, b) and np.array_equal(ca, cb)


def test_decode_batch_matches_scalar(code):
    rng = RngStream(9)
    noise = RngStream(10)
    L = []
    U = []
    for _ in range(6):
        u = rng.bits(code.k)
        w = encode(u, code)
        L.append(np.where(w == 1, 3.0, -3.0) + 1.5 * noise.normal(code.n))
        U.append(u)
    L = np.array(L)
    info, conv, iters = decode_batch(L, code)
    for i in range(6):
        res = decode(L[i], code)
        assert np.array_equal(info[i], res.info_bits)
        assert conv[i] == res.converged
        assert iters[i] == res.iterations_used


def test_decoder_corrects_moderate_noise(code):
    # around the waterfall most blocks decode; requires soft information
    rng = RngStream(11)
    noise = RngStream(12)
    ok = 0
    for _ in range(20):
        u = rng.bits(code.k)
        w = encode(u, code)
        x = 1.0 - 2.0 * w.astype(float)  # BPSK
        sigma = 0.8
        y = x + sigma * noise.normal(code.n)
        llr = -2.0 * y / sigma**2  # positive favors bit 1
        res = decode(llr, code)
        ok += res.converged and np.array_equal(res.info_bits, u)
    assert ok >= 18


def test_alist_roundtrip(code, tmp_path):
    # write the expanded matrix in alist form and reload it
    path = tmp_path / "code.alist"
    h = code.h
    n, m = code.n, code.n - code.k
    col_deg = h.sum(axis=0)
    row_deg = h.sum(axis=1)
    lines = [f"{n} {m}", f"{col_deg.max()} {row_deg.max()}",
             " ".join(map(str, col_deg)), " ".join(map(str, row_deg))]
    for j in range(n):
        idx = np.flatnonzero(h[:, j]) + 1
        lines.append(" ".join(map(str, idx)))
    for i in range(m):
        idx = np.flatnonzero(h[i]) + 1
        lines.append(" ".join(map(str, idx)))
    path.write_text("\n".join(lines) + "\n")
    loaded = load_alist(str(path))
    assert np.array_equal(loaded.h, code.h)
    assert loaded.n == code.n and loaded.k == code.k
