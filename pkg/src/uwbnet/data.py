"""The 48-feature UWB dataset: schema, CSV I/O, synthetic generation, splits."""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .diffcore import Tensor

CLASS_NAMES = ("left", "back", "front", "driver_seat", "back_seat", "right")
SENSOR_FEATURES = (
    "area",
    "total_power",
    "fp_sp_amp_ratio",
    "fp_sp_time_diff",
    "spectral_power",
    "fp_width",
    "fp_prominence",
    "distance",
)
N_SENSORS = 6
FEATURE_NAMES = tuple(f"s{s}_{f}" for s in range(1, N_SENSORS + 1) for f in SENSOR_FEATURES)
N_FEATURES = len(FEATURE_NAMES)
N_CLASSES = len(CLASS_NAMES)
ALLOWED_FOLDS = (1, 10, 100)
STD_FLOOR = 1e-8


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    provenance: str = "unknown"

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] == 0:
            raise DataError(f"features must be a non-empty 2-D array, got shape {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise DataError("labels must have one entry per feature row")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= N_CLASSES):
            raise DataError(f"labels must lie in 0..{N_CLASSES - 1}")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def standardized(self) -> bool:
        return self.mean is not None

    def subset(self, idx) -> Dataset:
        return replace(self, features=self.features[idx], labels=self.labels[idx])

    def tensor(self) -> Tensor:
        return Tensor(self.features)

    def unstandardize(self) -> np.ndarray:
        if self.mean is None:
            return self.features.copy()
        return self.features * self.std + self.mean


@dataclass(frozen=True)
class SynthConfig:
    samples_per_class: int = 100
    separation: float = 6.0
    within_class_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.samples_per_class <= 0 or self.separation <= 0 or self.within_class_sigma <= 0:
            raise ValueError("SynthConfig fields must all be positive")


def generate_synthetic(cfg: SynthConfig = SynthConfig()) -> Dataset:
    """Gaussian blobs around six seeded class centres.

    Centres are standard-normal draws rescaled so the closest pair sits
    exactly ``separation`` apart; samples are interleaved by class.
    """
    rng = np.random.default_rng(cfg.seed)
    centres = rng.standard_normal((N_CLASSES, N_FEATURES))
    gaps = np.linalg.norm(centres[:, None] - centres[None], axis=-1)
    closest = gaps[np.triu_indices(N_CLASSES, k=1)].min()
    centres *= cfg.separation / closest
    labels = np.tile(np.arange(N_CLASSES), cfg.samples_per_class)
    noise = rng.standard_normal((labels.size, N_FEATURES)) * cfg.within_class_sigma
    features = centres[labels] + noise
    prov = f"synthetic(seed={cfg.seed},separation={cfg.separation:g},sigma={cfg.within_class_sigma:g},per_class={cfg.samples_per_class})"
    return Dataset(features, labels, provenance=prov)


def load_csv(path) -> Dataset:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        missing = [c for c in (*FEATURE_NAMES, "label") if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        cols = [header.index(c) for c in FEATURE_NAMES]
        label_col = header.index("label")
        feats, labels = [], []
        for rownum, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {rownum} has {len(row)} cells, expected {len(header)}")
            vals = []
            for c in cols:
                try:
                    vals.append(float(row[c]))
                except ValueError:
                    raise DataError(
                        f"{path}: row {rownum}, column {header[c]!r}: non-numeric value {row[c]!r}"
                    ) from None
            name = row[label_col].strip()
            if name not in CLASS_NAMES:
                raise DataError(
                    f"{path}: row {rownum}, column 'label': unknown label {name!r}; "
                    f"valid labels are {', '.join(CLASS_NAMES)}"
                )
            feats.append(vals)
            labels.append(CLASS_NAMES.index(name))
    if not feats:
        raise DataError(f"{path}: no data rows")
    return Dataset(np.array(feats), np.array(labels, dtype=np.int64), provenance=f"csv({path.name})")


def save_csv(dataset: Dataset, path, comments: list[str] | None = None) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        for line in comments or []:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*FEATURE_NAMES, "label"])
        for row, lab in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [CLASS_NAMES[lab]])


def fit_apply_standardization(train: Dataset, others=()) -> tuple[Dataset, list[Dataset]]:
    """Fit column mean/std on ``train`` only and apply them to every dataset."""
    mean = train.features.mean(axis=0, keepdims=True)
    std = np.maximum(train.features.std(axis=0, keepdims=True), STD_FLOOR)
    return apply_standardization(train, mean, std), [apply_standardization(d, mean, std) for d in others]


def apply_standardization(ds: Dataset, mean: np.ndarray, std: np.ndarray) -> Dataset:
    return replace(ds, features=(ds.features - mean) / std, mean=mean, std=std)


_SPLIT_STREAM, _NOISE_STREAM = 0, 1


def _stream(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream, index]))


def stratified_half_split(labels: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    train, test = [], []
    for k, cls in enumerate(np.unique(labels)):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        # odd class sizes alternate which side takes the spare sample
        cut = (idx.size + (k % 2)) // 2
        train.append(idx[:cut])
        test.append(idx[cut:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def kfold_splits(dataset: Dataset, folds: int, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Repeated stratified 50/50 resplits.

    ``folds=1`` is the single fixed split; ``folds=k`` returns k seeded
    resplits, the first of which is that same fixed split.
    """
    if folds not in ALLOWED_FOLDS:
        raise ValueError(f"folds must be one of {ALLOWED_FOLDS}, got {folds}")
    return [stratified_half_split(dataset.labels, _stream(seed, _SPLIT_STREAM, i)) for i in range(folds)]


def add_awgn(x, sigma: float, rng: np.random.Generator) -> Tensor:
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    x = x if isinstance(x, Tensor) else Tensor(x)
    if sigma == 0:
        return x
    return x + Tensor(sigma * rng.standard_normal(x.shape))


def awgn_stream(seed: int, epoch: int, n_samples: int, dim: int = N_FEATURES) -> np.ndarray:
    """Standard-normal noise indexed by (seed, epoch, sample index); row i belongs to sample i."""
    return _stream(seed, _NOISE_STREAM, epoch).standard_normal((n_samples, dim))
