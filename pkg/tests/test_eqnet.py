"""Two-stage training protocol, codebooks, and the LLR codec surface."""
import json

import numpy as np
import pytest

from llrkit.channel import SystemConfig
from llrkit.detect import LlrVector
from llrkit.eqnet import (Bundle, Codebook, EqNetConfig, TrainConfig,
                          build_models, compute_weights, dequantize_llr,
                          estimate_llr, fit_codebook, from_tanh, from_tanh_domain,
                          load_bundle, make_features, pack_bitword,
                          quantize_latent, quantize_llr, save_bundle, to_tanh,
                          to_tanh_domain, train_joint_baseline, train_stage1,
                          train_stage2, unpack_bitword, write_history)
from llrkit.neural import forward
from llrkit.numerics import RngStream


@pytest.fixture(scope="module")
def ec22():
    return EqNetConfig(system=SystemConfig(nt=2, nr=2, k=4))


def synth_llr(n, width, seed=0):
    # heavy-tailed synthetic LLRs resembling detector output
    rng = np.random.default_rng(seed)
    return (rng.standard_t(3, size=(n, width)) * 4).astype(np.float32)


def test_tanh_domain_transforms():
    lam = np.array([-12.0, -0.5, 0.0, 0.5, 12.0])
    v = to_tanh(lam)
    assert np.all(np.abs(v) < 1.0)
    assert np.allclose(from_tanh(v), lam, atol=1e-9)
    # saturation guard: extreme inputs map back to a finite ceiling
    assert np.isfinite(from_tanh(to_tanh(np.array([1e6]))))[0]


def test_llr_vector_domain_wrappers():
    lam = LlrVector(values=np.array([1.0, -2.0]), domain="natural")
    v = to_tanh_domain(lam)
    assert v.domain == "tanh"
    back = from_tanh_domain(v)
    assert back.domain == "natural"
    assert np.allclose(back.values, lam.values)
    with pytest.raises(RuntimeError):
        to_tanh_domain(v)
    with pytest.raises(RuntimeError):
        from_tanh_domain(lam)


def test_config_derived_widths(ec22):
    assert ec22.llr_width == 8
    assert ec22.fq_width == 32          # 4 * Nt * K
    assert ec22.fe_width == 64          # 8 * Nt * K
    assert ec22.latent_dim == 6         # 3 * Nt
    assert ec22.feature_width == 13     # 2Nr + 2NtNr + 1


def test_build_models_shapes_and_determinism(ec22):
    fq, g, fe = build_models(ec22, seed=5)
    x = np.zeros((3, 8), dtype=np.float32)
    z, _ = forward(fq, x)
    assert z.shape == (3, 6)
    v, _ = forward(g, z)
    assert v.shape == (3, 8) and np.all(np.abs(v) <= 1.0)  # tanh head
    f, _ = forward(fe, np.zeros((3, 13), dtype=np.float32))
    assert f.shape == (3, 6) and np.all(np.abs(f) <= 1.0)
    fq2, g2, fe2 = build_models(ec22, seed=5)
    for a, b in ((fq, fq2), (g, g2), (fe, fe2)):
        assert all(np.array_equal(p, q) for p, q in zip(a.params, b.params))
    # the three models draw from independent streams
    assert not np.array_equal(fq.params[0].ravel()[:4], fe.params[0].ravel()[:4])


def test_latent_dim_override(ec22):
    from dataclasses import replace
    ec4 = replace(ec22, latent_dim=4)
    fq, g, _ = build_models(ec4, seed=0)
    z, _ = forward(fq, np.zeros((2, 8), dtype=np.float32))
    assert z.shape == (2, 4)
    v, _ = forward(g, z)
    assert v.shape == (2, 8)


def test_compute_weights_statistics():
    data = np.array([[0.8, 0.2, 0.8, 0.2], [0.8, 0.2, 0.8, 0.2]], dtype=np.float32)
    w = compute_weights(data, k=2)
    assert w.w.sum() == pytest.approx(2.0)
    assert w.w[0] / w.w[1] == pytest.approx(4.0)


def test_make_features_layout():
    y = np.array([[1 + 2j, 3 + 4j]])
    h = np.array([[[5 + 6j, 7 + 8j], [9 + 10j, 11 + 12j]]])
    f = make_features(y, h, 0.25)
    want = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 0.25]
    assert f.dtype == np.float32
    assert np.allclose(f[0], want)


def test_stage1_overfits_tiny_dataset(ec22):
    data = np.tanh(synth_llr(256, 8, seed=1) / 2)
    tc = TrainConfig(batch=64, epochs=300, seed=0)
    fq, g, hist = train_stage1(data, ec22, tc)
    assert hist[0]["epoch"] == 1 and len(hist) == 300
    first, last = hist[0]["train_loss"], min(h["train_loss"] for h in hist)
    assert last < 0.2 * first
    z, _ = forward(fq, data)
    assert z.shape == (256, 6)


def test_stage2_requires_frozen_encoder(ec22):
    feat = np.zeros((64, 13), dtype=np.float32)
    llr = synth_llr(64, 8)
    fq, _, _ = build_models(ec22, seed=0)
    with pytest.raises(RuntimeError, match="frozen"):
        train_stage2(feat, llr, fq, ec22, TrainConfig(batch=32, epochs=1, seed=0))


def test_stage2_trains_toward_latent_targets(ec22):
    rng = np.random.default_rng(3)
    llr = synth_llr(512, 8, seed=3)
    feat = rng.normal(size=(512, 13)).astype(np.float32)
    fq, _, _ = build_models(ec22, seed=0)
    fq.freeze()
    fe, hist = train_stage2(feat, llr, fq, ec22,
                            TrainConfig(batch=128, epochs=40, seed=0))
    assert min(h["val_loss"] for h in hist) < hist[0]["val_loss"]
    # frozen encoder params untouched by training
    fq2, _, _ = build_models(ec22, seed=0)
    assert all(np.array_equal(a, b) for a, b in zip(fq.params, fq2.params))


def test_joint_baseline_runs_and_uses_doubled_lr(ec22):
    rng = np.random.default_rng(4)
    llr = synth_llr(256, 8, seed=4)
    feat = rng.normal(size=(256, 13)).astype(np.float32)
    tc = TrainConfig(batch=64, epochs=5, lr=1e-3, seed=0)
    fe, g, hist = train_joint_baseline(feat, llr, ec22, tc)
    assert hist[0]["lr"] == pytest.approx(2e-3)


def test_joint_shares_inits_with_two_stage(ec22):
    # the baseline must start from the identical g and fe draws
    fq, g, fe = build_models(ec22, seed=9)
    rng = np.random.default_rng(5)
    llr = synth_llr(128, 8, seed=5)
    feat = rng.normal(size=(128, 13)).astype(np.float32)
    fe_j, g_j, _ = train_joint_baseline(feat, llr, ec22,
                                        TrainConfig(batch=128, epochs=0, seed=9))
    assert all(np.array_equal(a, b) for a, b in zip(g_j.params, g.params))
    assert all(np.array_equal(a, b) for a, b in zip(fe_j.params, fe.params))


def test_training_histories_share_schema(tmp_path, ec22):
    llr = synth_llr(128, 8, seed=6)
    tc = TrainConfig(batch=64, epochs=2, seed=0)
    _, _, hist = train_stage1(np.tanh(llr / 2), ec22, tc)
    path = tmp_path / "h.csv"
    write_history(hist, str(path))
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "epoch,train_loss,val_loss,lr"
    assert len(lines) == 3


def test_codebook_fit_and_properties(ec22):
    data = np.tanh(synth_llr(3000, 8, seed=7) / 2)
    fq, _, _ = build_models(ec22, seed=0)
    cb = fit_codebook(fq, data, nb=3, seed=0)
    assert cb.levels.shape == (6, 8) and cb.nb == 3 and cb.bits == 18
    assert np.all(np.diff(cb.levels, axis=1) > 0)
    cb2 = fit_codebook(fq, data, nb=3, seed=0)
    assert np.array_equal(cb.levels, cb2.levels)
    with pytest.raises(ValueError):
        fit_codebook(fq, data, nb=0, seed=0)


def test_codebook_degenerate_data_rejected(ec22):
    fq, _, _ = build_models(ec22, seed=0)
    data = np.zeros((100, 8), dtype=np.float32)  # constant latents
    with pytest.raises(ValueError, match="distinct"):
        fit_codebook(fq, data, nb=2, seed=0)


def test_quantize_ties_toward_lower_index():
    lv = np.array([[-1.0, 0.0, 1.0, 2.0]])
    cb = Codebook(levels=lv, nb=2)
    z = np.array([[-0.5]])  # exactly between levels 0 and 1
    assert quantize_latent(z, cb)[0, 0] == 0
    assert quantize_latent(np.array([[0.5001]]), cb)[0, 0] == 2
    assert quantize_latent(np.array([[-9.0]]), cb)[0, 0] == 0
    assert quantize_latent(np.array([[9.0]]), cb)[0, 0] == 3


def test_bitword_roundtrip_and_endianness():
    idx = np.array([1, 2, 3], dtype=np.int64)
    word = pack_bitword(idx, nb=2)
    # dimension-major, big-endian within each index: 01 10 11 -> 011011 -> pad
    assert np.array_equal(unpack_bitword(word, nb=2, dims=3), idx)
    bits = np.unpackbits(np.frombuffer(word, dtype=np.uint8))[:6]
    assert np.array_equal(bits, [0, 1, 1, 0, 1, 1])


def test_llr_codec_roundtrip(ec22):
    data = np.tanh(synth_llr(4000, 8, seed=8) / 2)
    fq, g, _ = build_models(ec22, seed=0)
    cb = fit_codebook(fq, data, nb=6, seed=0)
    lam = LlrVector(values=synth_llr(1, 8, seed=9)[0].astype(np.float64),
                    domain="natural")
    word = quantize_llr(lam, fq, cb)
    assert isinstance(word, bytes) and len(word) == (6 * 6 + 7) // 8
    out = dequantize_llr(word, cb, g)
    assert out.domain == "natural" and out.values.shape == (8,)
    assert np.all(np.isfinite(out.values))


def test_estimate_llr_shape(ec22):
    _, g, fe = build_models(ec22, seed=0)
    y = np.array([0.1 + 0.2j, -0.3 + 0.1j])
    h = np.eye(2, dtype=complex)
    lam = estimate_llr(y, h, 0.5, fe, g)
    assert lam.domain == "natural" and lam.values.shape == (8,)


def test_bundle_save_load_roundtrip(tmp_path, ec22):
    fq, g, fe = build_models(ec22, seed=0)
    data = np.tanh(synth_llr(3000, 8, seed=10) / 2)
    cb = fit_codebook(fq, data, nb=2, seed=0)
    path = tmp_path / "bundle"
    save_bundle(str(path), ec22, fq=fq, g=g, fe=fe, codebook=cb,
                meta={"note": "unit"})
    b = load_bundle(str(path))
    assert isinstance(b, Bundle)
    assert b.ec == ec22
    assert b.meta["note"] == "unit"
    for mine, loaded in ((fq, b.fq), (g, b.g), (fe, b.fe)):
        assert all(np.array_equal(p, q) for p, q in zip(mine.params, loaded.params))
    assert np.array_equal(b.codebook.levels, cb.levels)
    cfg = json.loads((path / "config.json").read_text())
    assert cfg["system"]["nt"] == 2
    # partial bundles load with absent parts as None
    path2 = tmp_path / "partial"
    save_bundle(str(path2), ec22, fq=fq, g=g)
    b2 = load_bundle(str(path2))
    assert b2.fe is None and b2.codebook is None
