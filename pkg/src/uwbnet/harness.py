"""Experiment commands: train, k-fold evaluation, attack sweeps, activation maps.

Every command writes plot-ready CSVs whose leading ``#`` comment lines record
the tool version, run seed and model spec.  Reruns with identical inputs
produce byte-identical files.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .attacks import DEFAULT_EPSILONS, KINDS as ATTACK_KINDS, AttackConfig, attack, epsilon_sweep
from .data import (
    Dataset,
    SynthConfig,
    fit_apply_standardization,
    generate_synthetic,
    kfold_splits,
    load_csv,
    save_csv,
)
from .models import Model, ModelSpec, accuracy, mean_rbf_activations
from .serialization import ModelArtifact, decode, encode, load_artifact
from .training import LOG_COLUMNS, TrainConfig, derive_seed, train_model

SWEEP_COLUMNS = ("model", "attack", "epsilon", "accuracy", "iters", "step_size", "seed")
KFOLD_COLUMNS = ("fold", "seed", "train_acc", "test_acc")
ACTIVATION_COLUMNS = ("branch", "unit", "clean_mean", "adv_mean")


@dataclass
class RunConfig:
    spec: ModelSpec
    data_path: str | None = None
    synth: SynthConfig = field(default_factory=SynthConfig)
    epochs: int = 1000
    lr: float = 1e-3
    batch_size: int | None = None
    folds: int = 1
    attacks: tuple[str, ...] = ATTACK_KINDS
    epsilons: tuple[float, ...] = DEFAULT_EPSILONS
    seed: int = 0
    out_dir: Path = Path("runs")

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        self.out_dir = Path(self.out_dir)

    @property
    def data_source(self) -> str:
        if self.data_path is not None:
            return f"csv:{Path(self.data_path).name}"
        return "synthetic:" + json.dumps(asdict(self.synth), sort_keys=True)

    def train_config(self, fold: int = 0) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, lr=self.lr, batch_size=self.batch_size,
                           seed=derive_seed(self.seed, fold))

    def fingerprint(self) -> str:
        payload = {
            "spec": self.spec.to_dict(),
            "data": self.data_source,
            "epochs": self.epochs,
            "lr": self.lr,
            "batch_size": self.batch_size,
            "seed": self.seed,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def load_dataset(cfg: RunConfig) -> Dataset:
    if cfg.data_path is not None:
        return load_csv(cfg.data_path)
    return generate_synthetic(cfg.synth)


def split_fold(ds: Dataset, folds: int, seed: int, fold: int = 0) -> tuple[Dataset, Dataset]:
    """Standardised (train, test) for one resplit; statistics come from train only."""
    train_idx, test_idx = kfold_splits(ds, folds, seed)[fold]
    train, (test,) = fit_apply_standardization(ds.subset(train_idx), [ds.subset(test_idx)])
    return train, test


def roundtrip(model: Model) -> Model:
    """The model as it will be read back from disk (float32 parameters)."""
    return decode(encode(model)).to_model()


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def header_lines(seed: int, spec: ModelSpec | None, **extra) -> list[str]:
    lines = [f"tool=uwbnet {__version__}", f"seed={seed}"]
    if spec is not None:
        lines.append("spec=" + json.dumps(spec.to_dict(), sort_keys=True, separators=(",", ":")))
    lines += [f"{k}={v}" for k, v in extra.items()]
    return lines


def write_csv(path: Path, comments: list[str], columns, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])
    return path


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def _artifact_meta(cfg: RunConfig, fold: int, folds: int, test_acc: float) -> dict:
    return {
        "fingerprint": cfg.fingerprint(),
        "data": cfg.data_source,
        "split_seed": cfg.seed,
        "folds": folds,
        "fold": fold,
        "epochs": cfg.epochs,
        "lr": cfg.lr,
        "batch_size": cfg.batch_size,
        "test_acc": test_acc,
        "tool": __version__,
    }


def cmd_train(cfg: RunConfig) -> tuple[ModelArtifact, Path, list[dict]]:
    """Train on the fixed 50/50 split; write ``<name>.uwbm`` and ``<name>_train_log.csv``."""
    ds = load_dataset(cfg)
    train, test = split_fold(ds, 1, cfg.seed)
    model, rows = train_model(cfg.spec, train, test, cfg.train_config(0))
    stored = roundtrip(model)
    test_acc = accuracy(stored, test.features, test.labels)
    name = cfg.spec.name
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    blob = encode(model, _artifact_meta(cfg, 0, 1, test_acc),
                  extra={"data.mean": train.mean, "data.std": train.std})
    model_path = cfg.out_dir / f"{name}.uwbm"
    model_path.write_bytes(blob)
    artifact = decode(blob)
    comments = header_lines(cfg.seed, cfg.spec, data=cfg.data_source, artifact_bytes=len(blob))
    log_path = write_csv(cfg.out_dir / f"{name}_train_log.csv", comments, LOG_COLUMNS, rows)
    return artifact, log_path, rows


def cmd_kfold(cfg: RunConfig) -> tuple[Path, list[dict]]:
    """Train one model per resplit; rows per fold plus a ``mean`` row."""
    ds = load_dataset(cfg)
    rows = []
    for fold in range(cfg.folds):
        train, test = split_fold(ds, cfg.folds, cfg.seed, fold)
        tcfg = cfg.train_config(fold)
        model, _ = train_model(cfg.spec, train, test, tcfg)
        stored = roundtrip(model)
        rows.append({
            "fold": fold,
            "seed": tcfg.seed,
            "train_acc": accuracy(stored, train.features, train.labels),
            "test_acc": accuracy(stored, test.features, test.labels),
        })
    mean = {
        "fold": "mean",
        "seed": cfg.seed,
        "train_acc": float(np.mean([r["train_acc"] for r in rows])),
        "test_acc": float(np.mean([r["test_acc"] for r in rows])),
    }
    comments = header_lines(cfg.seed, cfg.spec, data=cfg.data_source, folds=cfg.folds, epochs=cfg.epochs)
    path = write_csv(cfg.out_dir / f"{cfg.spec.name}_kfold{cfg.folds}.csv", comments, KFOLD_COLUMNS, rows + [mean])
    return path, rows + [mean]


def artifact_test_split(artifact: ModelArtifact, ds: Dataset) -> Dataset:
    meta = artifact.meta
    _, test = split_fold(ds, int(meta.get("folds", 1)), int(meta.get("split_seed", 0)), int(meta.get("fold", 0)))
    return test


def cmd_attack_sweep(artifact_path, ds: Dataset, attacks=ATTACK_KINDS, epsilons=DEFAULT_EPSILONS,
                     seed: int = 0, out_dir=None) -> list[Path]:
    """Accuracy-vs-epsilon CSV per attack kind for the artifact's test split."""
    artifact = load_artifact(artifact_path)
    model = artifact.to_model()
    test = artifact_test_split(artifact, ds)
    out_dir = Path(out_dir) if out_dir is not None else Path(artifact_path).parent
    name = artifact.spec.name
    paths = []
    for kind in attacks:
        sweep = epsilon_sweep(model, test.features, test.labels, kind, epsilons, seed=seed)
        rows = []
        for eps, acc in sweep:
            acfg = AttackConfig.default(kind, eps, seed)
            rows.append({"model": name, "attack": kind, "epsilon": eps, "accuracy": acc,
                         "iters": acfg.iters, "step_size": acfg.step, "seed": seed})
        comments = header_lines(seed, artifact.spec, artifact=Path(artifact_path).name,
                                fingerprint=artifact.fingerprint)
        paths.append(write_csv(out_dir / f"{name}_sweep_{kind}.csv", comments, SWEEP_COLUMNS, rows))
    return paths


def cmd_activations(artifact_path, ds: Dataset, attack_cfg: AttackConfig | None = None, out_dir=None) -> Path:
    """Per-branch mean RBF activations on the test split, clean and (optionally) attacked."""
    artifact = load_artifact(artifact_path)
    model = artifact.to_model()
    test = artifact_test_split(artifact, ds)
    clean = mean_rbf_activations(model, test.features)
    adv = None
    if attack_cfg is not None:
        adv = mean_rbf_activations(model, attack(model, test.features, test.labels, attack_cfg))
    rows = []
    for b in range(clean.shape[0]):
        for u in range(clean.shape[1]):
            rows.append({"branch": b, "unit": u, "clean_mean": clean[b, u],
                         "adv_mean": None if adv is None else adv[b, u]})
    extra = {"artifact": Path(artifact_path).name}
    if attack_cfg is not None:
        extra["attack"] = json.dumps(asdict(attack_cfg), sort_keys=True)
    seed = attack_cfg.seed if attack_cfg is not None else 0
    out_dir = Path(out_dir) if out_dir is not None else Path(artifact_path).parent
    return write_csv(out_dir / f"{artifact.spec.name}_activations.csv",
                     header_lines(seed, artifact.spec, **extra), ACTIVATION_COLUMNS, rows)


def cmd_synth_data(synth: SynthConfig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ds = generate_synthetic(synth)
    save_csv(ds, path, header_lines(synth.seed, None, synth=json.dumps(asdict(synth), sort_keys=True)))
    return path
