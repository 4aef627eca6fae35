"""Command-line entry point: ``uwbnet <train|kfold|attack-sweep|activations|synth-data>``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .attacks import DEFAULT_EPSILONS, KINDS as ATTACK_KINDS, AttackConfig
from .data import ALLOWED_FOLDS, SynthConfig, load_csv, generate_synthetic
from .harness import RunConfig, cmd_activations, cmd_attack_sweep, cmd_kfold, cmd_synth_data, cmd_train
from .models import KINDS as MODEL_KINDS, ModelSpec

log = logging.getLogger("uwbnet")


def _eps_list(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"--eps expects comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("--eps needs at least one value")
    return vals


def _data_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data", type=Path, help="CSV with the 48 feature columns and a label column")
    src.add_argument("--synthetic", action="store_true", help="use the seeded synthetic dataset (default)")
    p.add_argument("--synth-seed", type=int, default=0)
    p.add_argument("--samples-per-class", type=int, default=100)
    p.add_argument("--separation", type=float, default=6.0)
    p.add_argument("--sigma", type=float, default=1.0, help="within-class standard deviation")


def _model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", default="multi_rbf",
                   help=f"one of {', '.join(MODEL_KINDS)}, optionally suffixed _adx and/or _gc")
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=None, help="mini-batch size (default: full batch)")
    p.add_argument("--awgn-sigma", type=float, default=None)
    p.add_argument("--adx-eps", type=float, default=None, help="training epsilon of the adversarial reconstruction loss")
    p.add_argument("--adx", action="store_true", help="train with the adversarial reconstruction loss")
    p.add_argument("--gc", action="store_true", help="centralise gradients before each Adam step")


def _artifact_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--artifact", type=Path, help="model file (default: <out>/<model>.uwbm)")
    p.add_argument("--model", default="multi_rbf", help="model name used to locate the default artifact")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uwbnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", type=Path, default=Path("runs"))
    common.add_argument("-v", "--verbose", action="store_true", help="log progress every 100 epochs")

    p = sub.add_parser("train", parents=[common], help="train one model on the fixed 50/50 split")
    _model_args(p)
    _data_args(p)

    p = sub.add_parser("kfold", parents=[common], help="repeated stratified resplits")
    _model_args(p)
    _data_args(p)
    p.add_argument("--folds", type=int, choices=ALLOWED_FOLDS, default=1)

    p = sub.add_parser("attack-sweep", parents=[common], help="accuracy versus epsilon for a saved model")
    _artifact_args(p)
    _data_args(p)
    p.add_argument("--attack", choices=ATTACK_KINDS, action="append", help="repeatable; default: all three")
    p.add_argument("--eps", type=_eps_list, default=DEFAULT_EPSILONS)

    p = sub.add_parser("activations", parents=[common], help="mean RBF activation maps")
    _artifact_args(p)
    _data_args(p)
    p.add_argument("--attack", choices=ATTACK_KINDS, default=None)
    p.add_argument("--eps", type=_eps_list, default=(0.1,), help="attack budget (first value used)")

    p = sub.add_parser("synth-data", parents=[common], help="write the synthetic dataset as CSV")
    p.add_argument("--samples-per-class", type=int, default=100)
    p.add_argument("--separation", type=float, default=6.0)
    p.add_argument("--sigma", type=float, default=1.0)
    return parser


def _synth(args) -> SynthConfig:
    return SynthConfig(args.samples_per_class, args.separation, args.sigma, args.synth_seed)


def _spec(args) -> ModelSpec:
    spec = ModelSpec.for_kind(args.model)
    if args.awgn_sigma is not None:
        spec = replace(spec, awgn_sigma=args.awgn_sigma)
    flags = spec.train_flags
    if args.adx:
        flags = replace(flags, use_adx_loss=True)
    if args.gc:
        flags = replace(flags, use_gc=True)
    if args.adx_eps is not None:
        flags = replace(flags, adx_epsilon=args.adx_eps)
    return replace(spec, train_flags=flags)


def _run_config(args) -> RunConfig:
    return RunConfig(
        spec=_spec(args),
        data_path=str(args.data) if args.data else None,
        synth=_synth(args),
        epochs=args.epochs,
        lr=args.lr,
        batch_size=args.batch_size,
        folds=getattr(args, "folds", 1),
        seed=args.seed,
        out_dir=args.out,
    )


def _dataset(args):
    return load_csv(args.data) if args.data else generate_synthetic(_synth(args))


def _artifact_path(args) -> Path:
    if args.artifact is not None:
        return args.artifact
    return args.out / f"{ModelSpec.for_kind(args.model).name}.uwbm"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s")
    try:
        if args.command == "train":
            cfg = _run_config(args)
            artifact, log_path, rows = cmd_train(cfg)
            log.info("trained %s: test_acc %.4f, %d bytes -> %s", cfg.spec.name, artifact.meta["test_acc"],
                     artifact.byte_size, log_path)
        elif args.command == "kfold":
            cfg = _run_config(args)
            path, rows = cmd_kfold(cfg)
            log.info("%s %d-fold mean test_acc %.4f -> %s", cfg.spec.name, cfg.folds, rows[-1]["test_acc"], path)
        elif args.command == "attack-sweep":
            paths = cmd_attack_sweep(_artifact_path(args), _dataset(args), tuple(args.attack or ATTACK_KINDS),
                                     args.eps, args.seed, args.out)
            for p in paths:
                log.info("wrote %s", p)
        elif args.command == "activations":
            acfg = AttackConfig.default(args.attack, args.eps[0], args.seed) if args.attack else None
            path = cmd_activations(_artifact_path(args), _dataset(args), acfg, args.out)
            log.info("wrote %s", path)
        elif args.command == "synth-data":
            synth = SynthConfig(args.samples_per_class, args.separation, args.sigma, args.seed)
            path = cmd_synth_data(synth, args.out / "synthetic.csv")
            log.info("wrote %s", path)
    except (OSError, ValueError) as exc:
        print(f"uwbnet: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
