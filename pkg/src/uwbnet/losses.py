"""Cross-entropy, reconstruction MSE and the adversarial reconstruction terms."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffcore import ShapeError, Tensor, grad
from .models import Model, forward

COMPONENTS = ("ce", "mse", "mse_adx", "total")


@dataclass
class LossValue:
    value: Tensor
    components: dict[str, float] = field(default_factory=dict)

    def item(self) -> float:
        return self.value.item()


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits.data if isinstance(logits, Tensor) else logits, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits: Tensor, labels) -> LossValue:
    """Mean negative log-softmax at the true class."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"cross_entropy: {n} logit rows but {labels.size} labels")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        bad = labels[(labels < 0) | (labels >= k)][0]
        raise ValueError(f"cross_entropy: label {bad} outside 0..{k - 1}")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    log_p = z - log_norm
    rows = np.arange(n)
    value = -log_p[rows, labels].mean()
    probs = np.exp(log_p)

    def rule(g):
        d = probs.copy()
        d[rows, labels] -= 1.0
        return (g * d / n,)

    out = Tensor._from_op(np.array([[value]]), (logits,), rule, "cross_entropy")
    return LossValue(out, {"ce": float(value)})


def _mse_tensor(x: Tensor, x_hat: Tensor) -> Tensor:
    if x.shape != x_hat.shape:
        raise ShapeError(f"mse: shapes {x.shape} and {x_hat.shape} differ")
    d = x - x_hat
    return (d * d).mean()


def mse(x, x_hat) -> LossValue:
    x = x if isinstance(x, Tensor) else Tensor(x)
    x_hat = x_hat if isinstance(x_hat, Tensor) else Tensor(x_hat)
    v = _mse_tensor(x, x_hat)
    return LossValue(v, {"mse": v.item()})


def _require_multi_head(model: Model) -> None:
    if model.decoder_head is None:
        raise ValueError(f"model {model.spec.name} has no reconstruction head")


def _reconstruct(model: Model, x: Tensor, mode: str) -> Tensor:
    # extra passes: batch statistics in train mode, but no stat tracking and no input noise
    return forward(model, x, mode, track_stats=False, add_noise=False).reconstruction


def adversarial_example_for_reconstruction(model: Model, x: Tensor, adx_epsilon: float,
                                           mode: str = "eval") -> np.ndarray:
    """``x + eps * sign(d mse(x, recon(x)) / dx)``, as a plain array."""
    _require_multi_head(model)
    probe = Tensor(x.data, requires_grad=True)
    (g,) = grad(_mse_tensor(Tensor(x.data), _reconstruct(model, probe, mode)), [probe])
    return x.data + adx_epsilon * np.sign(g)


def adversarial_mse(model: Model, x, adx_epsilon: float, mode: str = "eval", literal: bool = False) -> LossValue:
    """Reconstruction error of the input-space adversarial sample.

    The perturbed input is a constant: no gradient flows through the attack
    step.  ``literal=True`` instead returns ``mean((x - sign(grad))**2)``.
    """
    _require_multi_head(model)
    if adx_epsilon < 0:
        raise ValueError("adx_epsilon must be >= 0")
    x = x if isinstance(x, Tensor) else Tensor(x)
    target = Tensor(x.data)
    if literal:
        probe = Tensor(x.data, requires_grad=True)
        (g,) = grad(_mse_tensor(target, _reconstruct(model, probe, mode)), [probe])
        v = _mse_tensor(target, Tensor(np.sign(g)))
    elif adx_epsilon == 0:
        v = _mse_tensor(target, _reconstruct(model, Tensor(x.data), mode))
    else:
        x_adv = adversarial_example_for_reconstruction(model, x, adx_epsilon, mode)
        v = _mse_tensor(target, _reconstruct(model, Tensor(x_adv), mode))
    return LossValue(v, {"mse_adx": v.item()})


def total_regression(model: Model, x, adx_epsilon: float, mode: str = "eval", literal: bool = False) -> LossValue:
    _require_multi_head(model)
    x = x if isinstance(x, Tensor) else Tensor(x)
    clean = _mse_tensor(Tensor(x.data), _reconstruct(model, Tensor(x.data), mode))
    adv = adversarial_mse(model, x, adx_epsilon, mode, literal)
    value = clean + adv.value
    return LossValue(value, {"mse": clean.item(), "mse_adx": adv.value.item()})


def multihead_total(model: Model, x, labels, lambda_recon: float = 1.0, adx_epsilon: float = 0.1,
                    use_adx: bool = False, mode: str = "eval", noise=None, literal: bool = False,
                    track_stats: bool = True) -> LossValue:
    """``ce + lambda_recon * (mse [+ mse_adx])``.

    The classification and clean reconstruction terms share one forward
    pass (noisy when the model is noise-regularised and ``mode='train'``);
    the reconstruction target is always the clean input.
    """
    _require_multi_head(model)
    x = x if isinstance(x, Tensor) else Tensor(x)
    out = forward(model, Tensor(x.data), mode, noise=noise, track_stats=track_stats)
    ce = cross_entropy(out.logits, labels)
    rec = _mse_tensor(Tensor(x.data), out.reconstruction)
    comps = {"ce": ce.value.item(), "mse": rec.item()}
    recon_term = rec
    if use_adx:
        adv = adversarial_mse(model, x, adx_epsilon, mode, literal)
        recon_term = rec + adv.value
        comps["mse_adx"] = adv.value.item()
    value = ce.value + recon_term * lambda_recon if lambda_recon != 0 else ce.value
    comps["total"] = value.item()
    return LossValue(value, comps)


def classification_total(model: Model, x, labels, mode: str = "eval", noise=None, track_stats: bool = True) -> LossValue:
    out = forward(model, x, mode, noise=noise, track_stats=track_stats)
    ce = cross_entropy(out.logits, labels)
    return LossValue(ce.value, {"ce": ce.value.item(), "total": ce.value.item()})
