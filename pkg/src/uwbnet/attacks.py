"""White-box L-inf evasion attacks on the classification head."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .diffcore import Tensor, grad
from .losses import cross_entropy
from .models import Model, accuracy, forward

KINDS = ("fgsm", "bim", "pgd")
DEFAULT_EPSILONS = tuple(round(0.02 * i, 2) for i in range(11))


@dataclass(frozen=True)
class AttackConfig:
    kind: str
    epsilon: float
    iters: int = 10
    step_size: float | None = None
    random_start: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown attack {self.kind!r}; choose from {', '.join(KINDS)}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.kind != "fgsm" and self.iters < 1:
            raise ValueError("iterative attacks need iters >= 1")
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError("step_size must be positive")

    @classmethod
    def default(cls, kind: str, epsilon: float, seed: int = 0) -> AttackConfig:
        """Survey-conventional settings: 10 iterations, PGD from a random start."""
        return cls(kind, epsilon, iters=1 if kind == "fgsm" else 10, random_start=kind == "pgd", seed=seed)

    @property
    def step(self) -> float:
        """Explicit ``step_size``, else eps (fgsm), eps/iters (bim), 2.5*eps/iters (pgd)."""
        if self.step_size is not None:
            return self.step_size
        if self.kind == "fgsm":
            return self.epsilon
        scale = 2.5 if self.kind == "pgd" else 1.0
        return scale * self.epsilon / self.iters


def input_gradient(model: Model, x: np.ndarray, labels) -> np.ndarray:
    """d cross_entropy(model(x), labels) / dx in eval mode; parameters untouched."""
    probe = Tensor(x, requires_grad=True)
    (g,) = grad(cross_entropy(forward(model, probe, "eval").logits, labels).value, [probe])
    return g


def _as_array(x) -> np.ndarray:
    return np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64, ndmin=2)


def fgsm(model: Model, x, labels, epsilon: float) -> Tensor:
    x0 = _as_array(x)
    return Tensor(x0 + epsilon * np.sign(input_gradient(model, x0, labels)))


def _iterate(model: Model, x0: np.ndarray, labels, cfg: AttackConfig, start: np.ndarray) -> Tensor:
    eps = cfg.epsilon
    if cfg.step > eps > 0:
        warnings.warn(f"{cfg.kind}: step_size {cfg.step} exceeds epsilon {eps}", stacklevel=3)
    lo, hi = x0 - eps, x0 + eps
    x_adv = start
    for _ in range(cfg.iters):
        x_adv = x_adv + cfg.step * np.sign(input_gradient(model, x_adv, labels))
        x_adv = np.clip(x_adv, lo, hi)
    return Tensor(x_adv)


def bim(model: Model, x, labels, cfg: AttackConfig) -> Tensor:
    x0 = _as_array(x)
    return _iterate(model, x0, labels, cfg, x0)


def pgd(model: Model, x, labels, cfg: AttackConfig) -> Tensor:
    x0 = _as_array(x)
    start = x0
    if cfg.random_start and cfg.epsilon > 0:
        rng = np.random.default_rng(cfg.seed)
        start = x0 + rng.uniform(-cfg.epsilon, cfg.epsilon, size=x0.shape)
    return _iterate(model, x0, labels, cfg, start)


def attack(model: Model, x, labels, cfg: AttackConfig) -> Tensor:
    if cfg.kind == "fgsm":
        return fgsm(model, x, labels, cfg.epsilon)
    if cfg.kind == "bim":
        return bim(model, x, labels, cfg)
    return pgd(model, x, labels, cfg)


def epsilon_sweep(model: Model, features, labels, kind: str, epsilons, seed: int = 0,
                  **overrides) -> list[tuple[float, float]]:
    """Accuracy of ``model`` on attacked inputs for each epsilon."""
    epsilons = list(epsilons)
    if not epsilons:
        raise ValueError("epsilon_sweep needs at least one epsilon")
    if any(b < a for a, b in zip(epsilons, epsilons[1:])):
        raise ValueError("epsilons must be sorted ascending")
    x0 = _as_array(features)
    rows = []
    for eps in epsilons:
        cfg = replace(AttackConfig.default(kind, eps, seed), **overrides)
        x_adv = attack(model, x0, labels, cfg)
        rows.append((float(eps), accuracy(model, x_adv, labels)))
    return rows
