"""Learned LLR estimation and quantization for coded MIMO links.

The package covers the full experiment path: QAM modems and MIMO channel
models, exact and successive-cancellation soft detectors, an LDPC codec,
a small numpy neural-network engine, the two-stage estimator/quantizer
training protocol, and a deterministic Monte-Carlo evaluation harness.
"""
from .channel import (ChannelUse, SystemConfig, corrupt_csi, sample_correlated,
                      sample_rayleigh, sigma_to_snr, snr_to_sigma, transmit)
from .dataio import Dataset, load_dataset, save_dataset
from .detect import (LLR_CLIP, LlrVector, QrChannel, ZfSicCode, clip_llr,
                     ml_llr, ml_llr_qr, qr_channel, scalar_llr, zf_sic_compress,
                     zf_sic_expand, zf_sic_llr)
from .eqnet import (Bundle, Codebook, EqNetConfig, TrainConfig, TrainingError,
                    dequantize_llr, estimate_llr, fit_codebook, from_tanh,
                    load_bundle, quantize_llr, save_bundle, to_tanh,
                    train_joint_baseline, train_stage1, train_stage2)
from .harness import (ExperimentConfig, SearchError, bench_latency,
                      bottleneck_sweep, find_snr_grid, generate_dataset,
                      load_ldpc, robustness_csi_sweep, robustness_shift_sweep,
                      run_bler_sweep)
from .ldpc import DecodeResult, LdpcCode, build_code, decode, encode, syndrome
from .modem import QamConstellation, bits_to_symbols, build_constellation, symbols_to_bits
from .neural import (LossWeights, NeuralModel, add, backward, concat, dense,
                     forward, l1_loss, load_model, relu, save_model, tanh,
                     wmse_loss)
from .numerics import RngStream, SingularMatrixError

__version__ = "0.1.0"

__all__ = [
    "ChannelUse", "SystemConfig", "corrupt_csi", "sample_correlated",
    "sample_rayleigh", "sigma_to_snr", "snr_to_sigma", "transmit",
    "Dataset", "load_dataset", "save_dataset",
    "LLR_CLIP", "LlrVector", "QrChannel", "ZfSicCode", "clip_llr", "ml_llr",
    "ml_llr_qr", "qr_channel", "scalar_llr", "zf_sic_compress",
    "zf_sic_expand", "zf_sic_llr",
    "Bundle", "Codebook", "EqNetConfig", "TrainConfig", "TrainingError",
    "dequantize_llr", "estimate_llr", "fit_codebook", "from_tanh",
    "load_bundle", "quantize_llr", "save_bundle", "to_tanh",
    "train_joint_baseline", "train_stage1", "train_stage2",
    "ExperimentConfig", "SearchError", "bench_latency", "bottleneck_sweep",
    "find_snr_grid", "generate_dataset", "load_ldpc", "robustness_csi_sweep",
    "robustness_shift_sweep", "run_bler_sweep",
    "DecodeResult", "LdpcCode", "build_code", "decode", "encode", "syndrome",
    "QamConstellation", "bits_to_symbols", "build_constellation", "symbols_to_bits",
    "LossWeights", "NeuralModel", "add", "backward", "concat", "dense",
    "forward", "l1_loss", "load_model", "relu", "save_model", "tanh",
    "wmse_loss",
    "RngStream", "SingularMatrixError",
]
