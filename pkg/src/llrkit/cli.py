"""Command-line entry points for dataset generation, training and evaluation.

Every subcommand reads one JSON config document (see docs/config.md for the
schema and README for worked examples); --seed and --out override the
config's seed and output path.  Exit codes: 0 success, 1 usage error,
2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .channel import SystemConfig
from .dataio import load_dataset
from .eqnet import (EqNetConfig, TrainConfig, fit_codebook, load_bundle,
                    save_bundle, to_tanh, train_joint_baseline, train_stage1,
                    train_stage2, write_history)
from .harness import (ExperimentConfig, bench_latency, bottleneck_sweep,
                      find_snr_grid, generate_dataset, load_ldpc, make_pipeline,
                      robustness_csi_sweep, robustness_shift_sweep,
                      run_bler_sweep)
from .neural import save_model


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _load_config(path: str) -> dict:
    with open(path) as f:
        return json.load(f)


def _system(cfg: dict) -> SystemConfig:
    return SystemConfig(**cfg["system"])


def _eqnet_config(cfg: dict) -> EqNetConfig:
    return EqNetConfig(system=_system(cfg), **cfg.get("eqnet", {}))


def _train_config(cfg: dict, seed_override) -> TrainConfig:
    t = dict(cfg.get("train", {}))
    if seed_override is not None:
        t["seed"] = seed_override
    return TrainConfig(**t)


def _experiment(cfg: dict, seed_override) -> ExperimentConfig:
    return ExperimentConfig(
        system=_system(cfg),
        snr_grid=tuple(cfg["snr_grid"]),
        packets=cfg.get("packets", 2000),
        pipeline=cfg.get("pipeline", "ml"),
        channel=cfg.get("channel", "rayleigh"),
        rho=cfg.get("rho", 0.0),
        code=cfg.get("code", "wifi-648"),
        csi_sigma=cfg.get("csi_sigma", 0.0),
        seed=seed_override if seed_override is not None else cfg.get("seed", 0),
        nb=cfg.get("nb"),
        max_block_errors=cfg.get("max_block_errors", 200),
    )


def _out(args, cfg: dict, key: str = "out") -> str:
    path = args.out or cfg.get(key)
    if not path:
        raise _UsageError(f"no output path: pass --out or set {key!r} in the config")
    return path


def _seed(args, cfg: dict) -> int:
    return args.seed if args.seed is not None else cfg.get("seed", 0)


def _cmd_gen_data(args) -> int:
    cfg = _load_config(args.config)
    generate_dataset(
        _system(cfg), cfg["snr_grid"], cfg.get("packets", 2000),
        _out(args, cfg, "dataset"), seed=_seed(args, cfg),
        channel=cfg.get("channel", "rayleigh"), rho=cfg.get("rho", 0.0),
        code=load_ldpc(cfg.get("code", "wifi-648")),
    )
    return 0


def _cmd_find_grid(args) -> int:
    cfg = _load_config(args.config)
    grid = find_snr_grid(
        _system(cfg), code=load_ldpc(cfg.get("code", "wifi-648")),
        seed=_seed(args, cfg), channel=cfg.get("channel", "rayleigh"),
        rho=cfg.get("rho", 0.0), workers=args.workers,
        **cfg.get("grid_search", {}),
    )
    text = json.dumps([float(s) for s in grid])
    if args.out:
        with open(args.out, "w") as f:
            f.write(text + "\n")
    print(text)
    return 0


def _cmd_train_q(args) -> int:
    cfg = _load_config(args.config)
    ds = load_dataset(cfg["dataset"])
    ec = _eqnet_config(cfg)
    tc = _train_config(cfg, args.seed)
    fq, g, history = train_stage1(to_tanh(ds.llr).astype(np.float32), ec, tc)
    out = _out(args, cfg, "bundle")
    save_bundle(out, ec, fq=fq, g=g, meta={"dataset_seed": ds.seed})
    write_history(history, f"{out}/stage1_history.csv")
    print(f"stage-1 best validation loss {min(h['val_loss'] for h in history):.6g}")
    return 0


def _cmd_train_e(args) -> int:
    cfg = _load_config(args.config)
    ds = load_dataset(cfg["dataset"])
    bundle = load_bundle(cfg["bundle"])
    if bundle.fq is None:
        raise ValueError(f"bundle {cfg['bundle']} has no fq weights; run train-q first")
    bundle.fq.freeze()
    tc = _train_config(cfg, args.seed)
    fe, history = train_stage2(ds.features, ds.llr, bundle.fq, bundle.ec, tc)
    out = args.out or cfg["bundle"]
    save_model(fe, f"{out}/fe.weights")
    write_history(history, f"{out}/stage2_history.csv")
    print(f"stage-2 best validation loss {min(h['val_loss'] for h in history):.6g}")
    return 0


def _cmd_train_joint(args) -> int:
    cfg = _load_config(args.config)
    ds = load_dataset(cfg["dataset"])
    ec = _eqnet_config(cfg)
    tc = _train_config(cfg, args.seed)
    fe, g, history = train_joint_baseline(ds.features, ds.llr, ec, tc)
    out = _out(args, cfg, "bundle")
    save_bundle(out, ec, g=g, fe=fe, meta={"protocol": "joint"})
    write_history(history, f"{out}/joint_history.csv")
    print(f"joint best validation loss {min(h['val_loss'] for h in history):.6g}")
    return 0


def _cmd_fit_codebook(args) -> int:
    cfg = _load_config(args.config)
    ds = load_dataset(cfg["dataset"])
    bundle = load_bundle(cfg["bundle"])
    if bundle.fq is None:
        raise ValueError(f"bundle {cfg['bundle']} has no fq weights; run train-q first")
    nb = args.nb if args.nb is not None else cfg["nb"]
    cb = fit_codebook(bundle.fq, to_tanh(ds.llr).astype(np.float32), nb,
                      seed=_seed(args, cfg))
    save_bundle(cfg["bundle"], bundle.ec, fq=bundle.fq, g=bundle.g,
                fe=bundle.fe, codebook=cb, meta=bundle.meta)
    print(f"codebook with {2**nb} levels per dimension written")
    return 0


def _cmd_eval_bler(args) -> int:
    cfg = _load_config(args.config)
    ec = _experiment(cfg, args.seed)
    bundle = load_bundle(cfg["bundle"]) if cfg.get("bundle") else None
    make_pipeline(ec, bundle)  # fail fast on missing artifacts
    points = run_bler_sweep(ec, bundle=bundle, out_path=_out(args, cfg),
                            workers=args.workers)
    for p in points:
        print(f"{p.snr_db:8.3f} dB  bler {p.bler:.5f}  ({p.block_errors}/{p.blocks})")
    return 0


def _cmd_sweep_bottleneck(args) -> int:
    cfg = _load_config(args.config)
    ds = load_dataset(cfg["dataset"])
    bottleneck_sweep(
        cfg["dims"], ds, _eqnet_config(cfg), _train_config(cfg, None),
        cfg["snr_grid"], cfg.get("packets", 2000),
        train_seeds=tuple(cfg.get("train_seeds", (0, 1, 2))),
        eval_seed=_seed(args, cfg), out_dir=_out(args, cfg),
        workers=args.workers,
        max_block_errors=cfg.get("max_block_errors", 200),
    )
    return 0


def _cmd_sweep_robust(args) -> int:
    cfg = _load_config(args.config)
    kind = cfg.get("kind", "csi")
    if kind == "csi":
        ec = _experiment(cfg, args.seed)
        bundle = load_bundle(cfg["bundle"])
        robustness_csi_sweep(
            ec, bundle, cfg["snr_db"],
            sigmas=tuple(cfg.get("sigmas", (0.0, 0.05, 0.1, 0.15, 0.2, 0.3))),
            out_path=_out(args, cfg), workers=args.workers,
        )
    elif kind == "shift":
        robustness_shift_sweep(
            _system(cfg), cfg["snr_grid"], load_bundle(cfg["bundle"]),
            load_bundle(cfg["bundle_b"]), cfg.get("rho", 0.9),
            cfg.get("packets", 2000), seed=_seed(args, cfg),
            out_path=_out(args, cfg), workers=args.workers,
            max_block_errors=cfg.get("max_block_errors", 200),
        )
    else:
        raise _UsageError(f"unknown robustness kind {kind!r}")
    return 0


def _cmd_bench(args) -> int:
    cfg = _load_config(args.config)
    bundle = load_bundle(cfg["bundle"]) if cfg.get("bundle") else None
    system = _system(cfg)
    pipelines = {}
    for name in cfg.get("pipelines", ["ml", "zfsic"]):
        ecx = ExperimentConfig(system=system, snr_grid=(10.0,), packets=1,
                               pipeline=name, nb=cfg.get("nb"))
        pipelines[name] = make_pipeline(ecx, bundle)
    report = bench_latency(
        system, pipelines, batch_sizes=tuple(cfg.get("batch_sizes", (1, 16, 8192))),
        repetitions=cfg.get("repetitions", 50), seed=_seed(args, cfg),
        out_path=args.out or cfg.get("out"),
    )
    for r in report:
        print(f"{r['pipeline']:>18} batch {r['batch']:>5}: "
              f"{r['mean_us']:.1f} +- {r['std_us']:.1f} us/call, "
              f"{r['per_use_us']:.2f} us/use")
    return 0


_COMMANDS = {
    "gen-data": (_cmd_gen_data, "generate a training dataset of (features, LLR) records"),
    "find-grid": (_cmd_find_grid, "locate the 6-point SNR grid from the ML waterfall"),
    "train-q": (_cmd_train_q, "stage 1: train the (f_Q, g) compression autoencoder"),
    "train-e": (_cmd_train_e, "stage 2: train the f_E estimator against frozen f_Q"),
    "train-joint": (_cmd_train_joint, "single-stage end-to-end baseline (f_E, g)"),
    "fit-codebook": (_cmd_fit_codebook, "fit per-dimension k-means++ codebooks"),
    "eval-bler": (_cmd_eval_bler, "coded BLER sweep for one pipeline"),
    "sweep-bottleneck": (_cmd_sweep_bottleneck, "latent-dimension ablation"),
    "sweep-robust": (_cmd_sweep_robust, "CSI-noise or channel-shift robustness run"),
    "bench": (_cmd_bench, "wall-clock latency report per pipeline and batch size"),
}


def build_parser() -> _Parser:
    p = _Parser(prog="llrkit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, (fn, help_text) in _COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--seed", type=int, default=None, help="override config seed")
        sp.add_argument("--out", default=None, help="override output path")
        sp.add_argument("--workers", type=int, default=1,
                        help="worker processes (does not change output bytes)")
        if name == "fit-codebook":
            sp.add_argument("--nb", type=int, default=None, help="bits per dimension")
        sp.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - CLI boundary maps failures to exit 2
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
