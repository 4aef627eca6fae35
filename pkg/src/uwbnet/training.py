"""Training loop shared by the CLI commands and the experiment scripts."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data import Dataset, awgn_stream
from .diffcore import Tensor, backward
from .losses import classification_total, multihead_total
from .models import Model, ModelSpec, accuracy, build_model
from .optim import Adam, centralize_gradients

log = logging.getLogger(__name__)

LOG_COLUMNS = ("epoch", "train_acc", "test_acc", "ce", "mse", "mse_adx", "total")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    lr: float = 1e-3
    batch_size: int | None = None  # None: full batch
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size is not None and self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (batch normalisation)")


def derive_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _batches(n: int, batch_size: int | None, rng: np.random.Generator):
    if batch_size is None or batch_size >= n:
        yield np.arange(n)
        return
    order = rng.permutation(n)
    for lo in range(0, n, batch_size):
        idx = order[lo:lo + batch_size]
        if idx.size >= 2:
            yield np.sort(idx)


def train_step(model: Model, opt: Adam, x: np.ndarray, y: np.ndarray, noise: np.ndarray | None) -> dict[str, float]:
    spec = model.spec
    flags = spec.train_flags
    model.zero_grad()
    if spec.multi_head:
        loss = multihead_total(model, Tensor(x), y, flags.lambda_recon, flags.adx_epsilon,
                               use_adx=flags.use_adx_loss, mode="train", noise=noise,
                               literal=flags.adx_literal)
    else:
        loss = classification_total(model, Tensor(x), y, mode="train", noise=noise)
    backward(loss.value)
    if flags.use_gc:
        for tensor, axis in model.gc_groups():
            centralize_gradients([tensor], axis=axis)
    opt.step()
    return loss.components


def train_model(spec: ModelSpec, train: Dataset, test: Dataset | None, cfg: TrainConfig,
                callback=None) -> tuple[Model, list[dict]]:
    """Train a fresh model; returns it with one log row per epoch."""
    model = build_model(spec, cfg.seed, init_data=train.features)
    opt = Adam(model.parameters(), lr=cfg.lr)
    n = len(train)
    rows = []
    for epoch in range(1, cfg.epochs + 1):
        noise = awgn_stream(cfg.seed, epoch, n, train.features.shape[1]) if spec.noise_reg else None
        shuffle = np.random.default_rng([cfg.seed, epoch])
        sums: dict[str, float] = {}
        count = 0
        for idx in _batches(n, cfg.batch_size, shuffle):
            comps = train_step(model, opt, train.features[idx], train.labels[idx],
                               None if noise is None else noise[idx])
            for k, v in comps.items():
                sums[k] = sums.get(k, 0.0) + v
            count += 1
        row = {"epoch": epoch,
               "train_acc": accuracy(model, train.features, train.labels),
               "test_acc": accuracy(model, test.features, test.labels) if test is not None else None}
        for k in ("ce", "mse", "mse_adx", "total"):
            row[k] = sums[k] / count if k in sums else None
        rows.append(row)
        if callback is not None:
            callback(row)
        if epoch % 100 == 0 or epoch == cfg.epochs:
            log.debug("epoch %d train_acc %.4f test_acc %s", epoch, row["train_acc"], row["test_acc"])
    return model, rows
