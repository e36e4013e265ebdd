"""Link-level Monte-Carlo harness: datasets, SNR grids, coded BLER sweeps.

Determinism contract: every Monte-Carlo point is split into fixed-size
chunks of CHUNK_PACKETS packets; chunk i draws from its own derived stream
(seed, point_key, i); partial sums accumulate in chunk order and the
200-block-error early stop is evaluated only at chunk boundaries.  Worker
processes merely prefetch chunks, so any worker count produces the same
output bytes.

Pipelines map (y, H_est, sigma_n) batches to natural-domain LLRs:
  ml                exact marginalization over all candidate vectors
  zfsic             successive interference cancellation
  zfsic-compressed  zfsic via its 3*Nt-real code (compress then expand)
  eqnet-est         learned direct estimation g(f_E(features))
  eqnet-quant       exact LLRs -> f_Q -> codebook levels -> g
  eqnet-ae          exact LLRs -> f_Q -> g (unquantized bottleneck probe)
All LLRs are clipped to +-80 before decoding, matching stored datasets.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import partial

import numpy as np

from .channel import (SystemConfig, corrupt_csi, sample_correlated_batch,
                      sample_rayleigh_batch, snr_to_sigma, transmit_batch)
from .dataio import Dataset, load_dataset, save_dataset
from .detect import (clip_llr, ml_llr_batch, qr_batch, zf_sic_compress_batch,
                     zf_sic_expand_batch, zf_sic_llr_batch)
from .eqnet import (Bundle, EqNetConfig, TrainConfig, from_tanh, make_features,
                    quantize_latent, to_tanh, train_stage1)
from .ldpc import build_code, decode_batch, encode_batch, load_alist
from .modem import bits_to_indices, build_constellation
from .neural import forward
from .numerics import RngStream

CHUNK_PACKETS = 100   # part of the determinism contract; changing it reseeds
_TAG_DATASET = 20000  # dataset chunk streams: (seed, _TAG_DATASET + snr index, chunk)
_TAG_SHUFFLE = 29999
_TAG_BENCH = 30001

PIPELINES = ("ml", "zfsic", "zfsic-compressed", "eqnet-est", "eqnet-quant", "eqnet-ae")

DEFAULT_CSI_SIGMAS = (0.0, 0.05, 0.1, 0.15, 0.2, 0.3)


class ConfigError(ValueError):
    """Experiment configuration references artifacts that are not available."""


class SearchError(RuntimeError):
    """SNR grid search saw non-monotone probes or ran off the allowed span."""


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig
    snr_grid: tuple[float, ...]
    packets: int
    pipeline: str = "ml"
    channel: str = "rayleigh"
    rho: float = 0.0
    code: str = "wifi-648"
    csi_sigma: float = 0.0
    seed: int = 0
    nb: int | None = None
    max_block_errors: int = 200

    def __post_init__(self):
        object.__setattr__(self, "snr_grid", tuple(float(s) for s in self.snr_grid))
        if self.packets < 1:
            raise ConfigError("packets must be >= 1")
        if any(b <= a for a, b in zip(self.snr_grid, self.snr_grid[1:])):
            raise ConfigError("snr_grid must be strictly ascending")
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"unknown pipeline {self.pipeline!r}")
        if self.channel not in ("rayleigh", "correlated"):
            raise ConfigError(f"unknown channel {self.channel!r}")
        if self.csi_sigma < 0:
            raise ConfigError("csi_sigma must be >= 0")


@dataclass(frozen=True)
class BlerPoint:
    snr_db: float
    blocks: int
    block_errors: int
    bler: float
    ber: float


def write_csv(path: str, header: str, rows: list[str]) -> None:
    with open(path, "w", newline="") as f:
        f.write(header + "\n")
        for row in rows:
            f.write(row + "\n")


def _bler_row(p: BlerPoint) -> str:
    return f"{p.snr_db:.4f},{p.blocks},{p.block_errors},{p.bler:.8e},{p.ber:.8e}"


def write_bler_csv(points: list[BlerPoint], path: str) -> None:
    write_csv(path, "snr_db,blocks,block_errors,bler,ber",
              [_bler_row(p) for p in points])


def _snr_key(snr_db: float) -> int:
    return int(round(snr_db * 1000.0)) & 0x7FFFFFFF


def load_ldpc(selector: str):
    if selector == "wifi-648":
        return build_code()
    return load_alist(selector)


# ---------------------------------------------------------------------------
# pipelines (module-level so chunk tasks pickle cleanly for worker processes)

def _pl_ml(y, h, s, kmod):
    return ml_llr_batch(y, h, s, build_constellation(kmod))


def _pl_zfsic(y, h, s, kmod):
    y_hat, r = qr_batch(y, h)
    return zf_sic_llr_batch(y_hat, r, s, build_constellation(kmod))


def _pl_zfsic_compressed(y, h, s, kmod):
    c = build_constellation(kmod)
    y_hat, r = qr_batch(y, h)
    return zf_sic_expand_batch(zf_sic_compress_batch(y_hat, r, s, c), c)


def _pl_eqnet_est(y, h, s, fe, g):
    feats = make_features(y, h, s)
    return from_tanh(forward(g, forward(fe, feats)[0])[0])


def _pl_eqnet_ae(y, h, s, kmod, fq, g):
    llr = ml_llr_batch(y, h, s, build_constellation(kmod))
    v = to_tanh(clip_llr(llr)).astype(np.float32)
    return from_tanh(forward(g, forward(fq, v)[0])[0])


def _pl_eqnet_quant(y, h, s, kmod, fq, g, cb):
    llr = ml_llr_batch(y, h, s, build_constellation(kmod))
    v = to_tanh(clip_llr(llr)).astype(np.float32)
    z = forward(fq, v)[0]
    idx = quantize_latent(z, cb)
    zq = cb.levels[np.arange(cb.levels.shape[0])[None, :], idx].astype(np.float32)
    return from_tanh(forward(g, zq)[0])


def make_pipeline(ec: ExperimentConfig, bundle: Bundle | None):
    """Bind an ExperimentConfig's pipeline name to a picklable callable."""
    kmod = ec.system.k
    if ec.pipeline == "ml":
        return partial(_pl_ml, kmod=kmod)
    if ec.pipeline == "zfsic":
        return partial(_pl_zfsic, kmod=kmod)
    if ec.pipeline == "zfsic-compressed":
        return partial(_pl_zfsic_compressed, kmod=kmod)
    if bundle is None:
        raise ConfigError(f"pipeline {ec.pipeline!r} needs a trained model bundle")
    if ec.pipeline == "eqnet-est":
        if bundle.fe is None or bundle.g is None:
            raise ConfigError("eqnet-est needs fe and g weights in the bundle")
        return partial(_pl_eqnet_est, fe=bundle.fe, g=bundle.g)
    if ec.pipeline == "eqnet-ae":
        if bundle.fq is None or bundle.g is None:
            raise ConfigError("eqnet-ae needs fq and g weights in the bundle")
        return partial(_pl_eqnet_ae, kmod=kmod, fq=bundle.fq, g=bundle.g)
    if bundle.fq is None or bundle.g is None or bundle.codebook is None:
        raise ConfigError("eqnet-quant needs fq, g and a codebook in the bundle")
    if ec.nb is not None and bundle.codebook.nb != ec.nb:
        raise ConfigError(
            f"bundle codebook has Nb={bundle.codebook.nb}, config asks Nb={ec.nb}"
        )
    return partial(_pl_eqnet_quant, kmod=kmod, fq=bundle.fq, g=bundle.g,
                   cb=bundle.codebook)


# ---------------------------------------------------------------------------
# Monte-Carlo core

def _sample_channels(system, channel, rho, n, rng):
    if channel == "correlated":
        return sample_correlated_batch(system, rho, n, rng)
    return sample_rayleigh_batch(system, n, rng)


def _make_uses(system, c, code, npk, sigma_n, channel, rho, rng):
    """npk coded packets worth of channel uses: (info bits, y, H).

    Each packet is one codeword; when Nt*K does not divide the block length
    the last use is padded with zero bits whose LLRs are discarded later.
    """
    bpu = system.nt * c.k
    upp = -(-code.n // bpu)
    pad = upp * bpu - code.n
    u = rng.bits(npk * code.k).reshape(npk, code.k)
    cw = encode_batch(u, code)
    if pad:
        cw = np.concatenate([cw, np.zeros((npk, pad), dtype=np.uint8)], axis=1)
    idx = bits_to_indices(cw.reshape(npk * upp, system.nt, c.k))
    x = c.points[idx]
    h = _sample_channels(system, channel, rho, npk * upp, rng)
    y = transmit_batch(h, x, sigma_n, rng)
    return u, y, h


def _run_chunk(task, system, kmod, code, sigma_n, seed, point_key, pipeline,
               csi_sigma, channel, rho):
    chunk_idx, npk = task
    rng = RngStream((seed, point_key, chunk_idx))
    c = build_constellation(kmod)
    u, y, h = _make_uses(system, c, code, npk, sigma_n, channel, rho, rng)
    h_est = corrupt_csi(h, csi_sigma, rng)
    llr = clip_llr(pipeline(y, h_est, sigma_n))
    bpu = system.nt * kmod
    upp = -(-code.n // bpu)
    block_llr = llr.reshape(npk, upp * bpu)[:, :code.n]
    info, _, _ = decode_batch(block_llr, code)
    err = info != u
    blk = err.any(axis=1)
    return npk, int(blk.sum()), int(err.sum()), npk * code.k


def _chunk_tasks(packets: int) -> list[tuple[int, int]]:
    nchunks = math.ceil(packets / CHUNK_PACKETS)
    tasks = []
    for i in range(nchunks):
        npk = CHUNK_PACKETS if i < nchunks - 1 else packets - CHUNK_PACKETS * (nchunks - 1)
        tasks.append((i, npk))
    return tasks


def _run_point(system, code, snr_db, sigma_n, packets, seed, point_key,
               pipeline, csi_sigma, channel, rho, max_block_errors,
               workers: int = 1) -> BlerPoint:
    fn = partial(_run_chunk, system=system, kmod=system.k, code=code,
                 sigma_n=sigma_n, seed=seed, point_key=point_key,
                 pipeline=pipeline, csi_sigma=csi_sigma, channel=channel,
                 rho=rho)
    tasks = _chunk_tasks(packets)
    blocks = blkerr = biterr = bits = 0

    def consume(results) -> None:
        nonlocal blocks, blkerr, biterr, bits
        for npk, be, bite, nb in results:
            blocks += npk
            blkerr += be
            biterr += bite
            bits += nb
            if blkerr >= max_block_errors:
                return

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            consume(ex.map(fn, tasks))
    else:
        consume(map(fn, tasks))
    return BlerPoint(snr_db=float(snr_db), blocks=blocks, block_errors=blkerr,
                     bler=blkerr / blocks, ber=biterr / bits)


def run_bler_sweep(ec: ExperimentConfig, bundle: Bundle | None = None,
                   out_path: str | None = None, workers: int = 1) -> list[BlerPoint]:
    """Coded BLER across ec.snr_grid; each point stops at min(packets,
    max_block_errors).  CSI corruption (if any) hits only the detector's H."""
    code = load_ldpc(ec.code)
    pipeline = make_pipeline(ec, bundle)
    points = []
    for snr in ec.snr_grid:
        sigma = snr_to_sigma(snr, ec.system)
        points.append(_run_point(
            ec.system, code, snr, sigma, ec.packets, ec.seed, _snr_key(snr),
            pipeline, ec.csi_sigma, ec.channel, ec.rho, ec.max_block_errors,
            workers,
        ))
    if out_path:
        write_bler_csv(points, out_path)
    return points


def snr_at_bler(points: list[BlerPoint], target: float) -> float:
    """SNR (dB) where the measured curve crosses the target BLER, by
    log-linear interpolation; zero-error points count as 0.5/blocks."""
    snrs = [p.snr_db for p in points]
    blers = [max(p.bler, 0.5 / p.blocks) for p in points]
    for i in range(1, len(points)):
        if blers[i] <= target <= blers[i - 1]:
            la, lb = math.log10(blers[i - 1]), math.log10(blers[i])
            if la == lb:
                return snrs[i]
            frac = (math.log10(target) - la) / (lb - la)
            return snrs[i - 1] + frac * (snrs[i] - snrs[i - 1])
    raise ValueError(f"curve does not cross BLER {target}")


def bler_at_snr(points: list[BlerPoint], snr_db: float) -> float:
    """Measured BLER at a grid SNR (exact match required)."""
    for p in points:
        if abs(p.snr_db - snr_db) < 1e-9:
            return p.bler
    raise ValueError(f"no point at {snr_db} dB")


# ---------------------------------------------------------------------------
# SNR grid search

def find_snr_grid(system: SystemConfig, code=None, seed: int = 0,
                  channel: str = "rayleigh", rho: float = 0.0,
                  start_db: float = 6.0, probe_packets: int = 60,
                  lo_threshold: float = 0.93, cert_blocks: int = 20000,
                  cert_budget: int = 14, resolution: float = 0.25,
                  max_span: float = 40.0, workers: int = 1) -> np.ndarray:
    """Six evenly spaced (in dB) SNRs spanning the exact-ML waterfall.

    The lower endpoint is the largest SNR on the 0.25 dB lattice whose
    probe BLER (>= 50 blocks) is at least lo_threshold; probing against
    0.93 rather than the nominal 0.9 leaves margin so re-measurement stays
    in band.  The upper endpoint is the smallest SNR certified at BLER
    <= 1e-3 by observing at most cert_budget errors in cert_blocks blocks
    (14/20000 = 7e-4, again inside the nominal band with margin).
    """
    code = code if code is not None else build_code()
    pipeline = partial(_pl_ml, kmod=system.k)
    probes: dict[float, float] = {}

    def point(snr, packets, stop):
        return _run_point(system, code, snr, snr_to_sigma(snr, system),
                          packets, seed, _snr_key(snr), pipeline, 0.0,
                          channel, rho, stop, workers)

    def probe(snr) -> float:
        snr = round(snr, 4)
        if snr not in probes:
            probes[snr] = point(snr, probe_packets, probe_packets + 1).bler
            seq = sorted(probes.items())
            for (_, b0), (_, b1) in zip(seq, seq[1:]):
                if b1 - b0 > 0.25:
                    raise SearchError(f"non-monotone probe estimates: {seq}")
        return probes[snr]

    # lower endpoint
    s = start_db
    if probe(s) >= lo_threshold:
        while probe(s + 1.0) >= lo_threshold:
            s += 1.0
            if s - start_db > max_span:
                raise SearchError("lower-endpoint search exceeded allowed span")
        a, b = s, s + 1.0
    else:
        while probe(s) < lo_threshold:
            s -= 1.0
            if start_db - s > max_span:
                raise SearchError("lower-endpoint search exceeded allowed span")
        a, b = s, s + 1.0
    while b - a > resolution:
        mid = round((a + b) / 2.0, 4)
        if probe(mid) >= lo_threshold:
            a = mid
        else:
            b = mid
    lo = a

    def certify(snr) -> bool:
        pt = point(round(snr, 4), cert_blocks, cert_budget + 1)
        return pt.block_errors <= cert_budget and pt.blocks >= cert_blocks

    s = lo + 2.0
    while not certify(s):
        s += 2.0
        if s - lo > max_span:
            raise SearchError("upper-endpoint search exceeded allowed span")
    a, b = s - 2.0, s
    while b - a > resolution:
        mid = round((a + b) / 2.0, 4)
        if certify(mid):
            b = mid
        else:
            a = mid
    hi = b
    if hi <= lo:
        raise SearchError(f"degenerate grid endpoints lo={lo}, hi={hi}")
    return np.round(np.linspace(lo, hi, 6), 4)


# ---------------------------------------------------------------------------
# dataset generation

def generate_dataset(system: SystemConfig, snr_grid, packets_per_snr: int,
                     path: str, seed: int = 0, channel: str = "rayleigh",
                     rho: float = 0.0, code=None) -> Dataset:
    """Write a dataset of (features, exact ML LLR) records.

    Records cover packets_per_snr LDPC-coded packets at each grid SNR;
    LLRs are computed with the true H (ideal CSI), clipped to +-80, and
    all records are shuffled with the seed before writing.
    """
    code = code if code is not None else build_code()
    c = build_constellation(system.k)
    parts = []
    for si, snr in enumerate(snr_grid):
        sigma = snr_to_sigma(float(snr), system)
        for ci, npk in _chunk_tasks(packets_per_snr):
            rng = RngStream((seed, _TAG_DATASET + si, ci))
            _, y, h = _make_uses(system, c, code, npk, sigma, channel, rho, rng)
            llr = clip_llr(ml_llr_batch(y, h, sigma, c))
            feats = make_features(y, h, sigma)
            parts.append(np.concatenate([feats, llr.astype(np.float32)], axis=1))
    records = np.concatenate(parts, axis=0)
    perm = RngStream((seed, _TAG_SHUFFLE)).permutation(records.shape[0])
    save_dataset(path, system, records[perm], snr_grid, seed)
    return load_dataset(path)


# ---------------------------------------------------------------------------
# experiment sweeps

def bottleneck_sweep(dims, dataset: Dataset, ec_base: EqNetConfig,
                     tc: TrainConfig, grid, eval_packets: int,
                     train_seeds=(0, 1, 2), eval_seed: int = 123,
                     out_dir: str | None = None, workers: int = 1,
                     max_block_errors: int = 200) -> dict:
    """Train Stage-1 autoencoders per latent dim and evaluate the
    ML -> autoencoder -> decode pipeline, plus ml/zfsic references.

    Returns {"ml": points, "zfsic": points, (dim, seed): points}.
    """
    tanh_llr = to_tanh(dataset.llr).astype(np.float32)
    results: dict = {}
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)

    def out(name):
        return os.path.join(out_dir, f"{name}.csv") if out_dir else None

    for ref in ("ml", "zfsic"):
        ecx = ExperimentConfig(system=dataset.system, snr_grid=tuple(grid),
                               packets=eval_packets, pipeline=ref,
                               seed=eval_seed, max_block_errors=max_block_errors)
        results[ref] = run_bler_sweep(ecx, out_path=out(f"bottleneck_{ref}"),
                                      workers=workers)
    for dim in dims:
        for ts in train_seeds:
            ecd = replace(ec_base, latent_dim=int(dim))
            fq, g, _ = train_stage1(tanh_llr, ecd, replace(tc, seed=int(ts)))
            ecx = ExperimentConfig(system=dataset.system, snr_grid=tuple(grid),
                                   packets=eval_packets, pipeline="eqnet-ae",
                                   seed=eval_seed, max_block_errors=max_block_errors)
            results[(int(dim), int(ts))] = run_bler_sweep(
                ecx, bundle=Bundle(ec=ecd, fq=fq, g=g),
                out_path=out(f"bottleneck_dim{dim}_seed{ts}"), workers=workers,
            )
    return results


def robustness_csi_sweep(ec: ExperimentConfig, bundle: Bundle, snr_db: float,
                         sigmas=DEFAULT_CSI_SIGMAS, out_path: str | None = None,
                         workers: int = 1) -> list[tuple[float, BlerPoint]]:
    """BLER vs CSI-noise std at a fixed SNR.  All points share the same
    derived seeds, so the sigma = 0 row is bit-identical to an ideal-CSI
    run of the same config."""
    rows = []
    for sg in sigmas:
        ecx = replace(ec, snr_grid=(float(snr_db),), csi_sigma=float(sg))
        rows.append((float(sg), run_bler_sweep(ecx, bundle=bundle,
                                               workers=workers)[0]))
    if out_path:
        write_csv(out_path, "sigma_csi,snr_db,blocks,block_errors,bler,ber",
                  [f"{sg:.4f}," + _bler_row(p) for sg, p in rows])
    return rows


def robustness_shift_sweep(system: SystemConfig, grid, bundle_rayleigh: Bundle,
                           bundle_correlated: Bundle, rho: float,
                           eval_packets: int, seed: int = 0,
                           out_path: str | None = None, workers: int = 1,
                           max_block_errors: int = 200) -> dict[str, list[BlerPoint]]:
    """Distribution-shift run: four curves, estimation models evaluated on
    the correlated channel, ZF-SIC references on each channel kind."""
    curves = {
        "est-rayleigh-trained": ("eqnet-est", bundle_rayleigh, "correlated"),
        "est-correlated-trained": ("eqnet-est", bundle_correlated, "correlated"),
        "zfsic-rayleigh": ("zfsic", None, "rayleigh"),
        "zfsic-correlated": ("zfsic", None, "correlated"),
    }
    results = {}
    for name, (pl, bundle, chan) in curves.items():
        ecx = ExperimentConfig(system=system, snr_grid=tuple(grid),
                               packets=eval_packets, pipeline=pl, channel=chan,
                               rho=rho if chan == "correlated" else 0.0,
                               seed=seed, max_block_errors=max_block_errors)
        results[name] = run_bler_sweep(ecx, bundle=bundle, workers=workers)
    if out_path:
        rows = [f"{name}," + _bler_row(p)
                for name in curves for p in results[name]]
        write_csv(out_path, "curve,snr_db,blocks,block_errors,bler,ber", rows)
    return results


# ---------------------------------------------------------------------------
# latency benchmark

def bench_latency(system: SystemConfig, pipelines: dict, snr_db: float = 10.0,
                  batch_sizes=(1, 16, 8192), repetitions: int = 50,
                  warmup: int = 5, seed: int = 0,
                  out_path: str | None = None) -> list[dict]:
    """Wall-clock per-call statistics per pipeline and batch size.

    Absolute numbers are hardware-bound and not asserted anywhere; the
    report exists for relative comparisons (batching amortization)."""
    rng = RngStream((seed, _TAG_BENCH))
    c = build_constellation(system.k)
    nmax = max(batch_sizes)
    h = _sample_channels(system, "rayleigh", 0.0, nmax, rng)
    labels = rng.bits(nmax * system.nt * system.k).reshape(nmax, system.nt, system.k)
    x = c.points[bits_to_indices(labels)]
    sigma = snr_to_sigma(snr_db, system)
    y = transmit_batch(h, x, sigma, rng)
    report = []
    for name, fn in pipelines.items():
        for b in batch_sizes:
            yb, hb = y[:b], h[:b]
            for _ in range(warmup):
                fn(yb, hb, sigma)
            times = []
            for _ in range(repetitions):
                t0 = time.perf_counter()
                fn(yb, hb, sigma)
                times.append(time.perf_counter() - t0)
            mean = float(np.mean(times)) * 1e6
            std = float(np.std(times)) * 1e6
            report.append({"pipeline": name, "batch": b, "mean_us": mean,
                           "std_us": std, "per_use_us": mean / b})
    if out_path:
        write_csv(out_path, "pipeline,batch,mean_us,std_us,per_use_us",
                  [f"{r['pipeline']},{r['batch']},{r['mean_us']:.3f},"
                   f"{r['std_us']:.3f},{r['per_use_us']:.3f}" for r in report])
    return report
