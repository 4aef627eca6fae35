"""Dense, batch-normalisation and radial-basis-function layers.

Every layer exposes ``forward(x, mode)``, ``params()`` (the trainable tensors,
in a fixed order) and ``state()`` (everything that must be serialised).
"""
from __future__ import annotations

import numpy as np

from .diffcore import ShapeError, Tensor, exp, pairwise_p_distance, reduce, relu, softplus

MODES = ("train", "eval")


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def _check_input(name: str, x: Tensor, in_dim: int) -> None:
    if x.cols != in_dim:
        raise ShapeError(f"{name} expects {in_dim} input columns, got shape {x.shape}")


def inverse_softplus(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    return y + np.log(-np.expm1(-y))


class DenseLayer:
    def __init__(self, in_dim: int, out_dim: int, activation: str = "relu", rng: np.random.Generator | None = None):
        if activation not in ("relu", "none"):
            raise ValueError(f"unknown activation {activation!r}")
        rng = rng or np.random.default_rng(0)
        # glorot uniform
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        self.weights = Tensor(rng.uniform(-limit, limit, size=(in_dim, out_dim)), requires_grad=True)
        self.bias = Tensor(np.zeros((1, out_dim)), requires_grad=True)
        self.activation = activation

    @property
    def in_dim(self) -> int:
        return self.weights.rows

    @property
    def out_dim(self) -> int:
        return self.weights.cols

    def forward(self, x: Tensor, mode: str = "eval") -> Tensor:
        _check_input("DenseLayer", x, self.in_dim)
        out = x @ self.weights + self.bias
        return relu(out) if self.activation == "relu" else out

    __call__ = forward

    def params(self) -> list[tuple[str, Tensor]]:
        return [("weights", self.weights), ("bias", self.bias)]

    def state(self) -> list[tuple[str, Tensor]]:
        return self.params()


class BatchNormLayer:
    """Batch normalisation over the batch axis.

    Running statistics follow ``running = momentum * running + (1 - momentum) * batch``
    and use the biased batch variance, the same one used to normalise.
    """

    def __init__(self, dim: int, momentum: float = 0.9, eps: float = 1e-5):
        if not 0.0 < momentum < 1.0:
            raise ValueError("momentum must lie in (0, 1)")
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.gamma_scale = Tensor(np.ones((1, dim)), requires_grad=True)
        self.beta_shift = Tensor(np.zeros((1, dim)), requires_grad=True)
        self.running_mean = Tensor(np.zeros((1, dim)))
        self.running_var = Tensor(np.ones((1, dim)))
        self.momentum = momentum
        self.eps = eps

    @property
    def dim(self) -> int:
        return self.gamma_scale.cols

    def forward(self, x: Tensor, mode: str = "eval", track_stats: bool = True) -> Tensor:
        _check_mode(mode)
        _check_input("BatchNormLayer", x, self.dim)
        if mode == "eval":
            inv = 1.0 / np.sqrt(self.running_var.data + self.eps)
            return (x - Tensor(self.running_mean.data)) * Tensor(inv) * self.gamma_scale + self.beta_shift
        if x.rows < 2:
            raise ValueError("BatchNormLayer in train mode needs a batch of at least 2 rows")
        mu = reduce("mean_cols", x)
        centred = x - mu
        var = reduce("mean_cols", centred * centred)
        out = centred * (var + self.eps) ** -0.5 * self.gamma_scale + self.beta_shift
        if track_stats:
            m = self.momentum
            self.running_mean.data = m * self.running_mean.data + (1 - m) * mu.data
            self.running_var.data = m * self.running_var.data + (1 - m) * var.data
        return out

    __call__ = forward

    def params(self) -> list[tuple[str, Tensor]]:
        return [("gamma_scale", self.gamma_scale), ("beta_shift", self.beta_shift)]

    def state(self) -> list[tuple[str, Tensor]]:
        return self.params() + [("running_mean", self.running_mean), ("running_var", self.running_var)]


class RBFLayer:
    """Cascaded radial basis units ``sum_n exp(-gamma_{n,i} * ||x - c_i||_p)``.

    With one branch this is the plain RBF neuron.  Widths are stored as an
    unconstrained ``gammas`` tensor and mapped through softplus, so the
    effective widths stay positive.  ``squared=True`` swaps the distance for
    its square (Gaussian-style kernel) for ablations.
    """

    def __init__(
        self,
        in_dim: int,
        units: int = 32,
        branches: int = 1,
        norm_order: int = 2,
        init_gammas=None,
        centroids=None,
        squared: bool = False,
        rng: np.random.Generator | None = None,
    ):
        if branches < 1:
            raise ValueError("branches must be >= 1")
        if norm_order not in (2, 4):
            raise ValueError(f"norm_order must be 2 or 4, got {norm_order}")
        rng = rng or np.random.default_rng(0)
        if init_gammas is None:
            init_gammas = [0.1 * (n + 1) for n in range(branches)] if branches > 1 else [0.2]
        init_gammas = np.asarray(init_gammas, dtype=np.float64)
        if init_gammas.shape != (branches,) or np.any(init_gammas <= 0):
            raise ValueError("init_gammas needs one positive value per branch")
        if centroids is None:
            centroids = rng.standard_normal((units, in_dim))
        centroids = np.asarray(centroids, dtype=np.float64)
        if centroids.shape != (units, in_dim):
            raise ShapeError(f"centroids must be {(units, in_dim)}, got {centroids.shape}")
        self.centroids = Tensor(centroids.copy(), requires_grad=True)
        raw = np.repeat(inverse_softplus(init_gammas)[:, None], units, axis=1)
        self.gammas = Tensor(raw, requires_grad=True)
        self.branches = branches
        self.norm_order = norm_order
        self.squared = squared

    @property
    def units(self) -> int:
        return self.centroids.rows

    @property
    def in_dim(self) -> int:
        return self.centroids.cols

    def widths(self) -> np.ndarray:
        """Effective positive widths, branches x units."""
        return np.logaddexp(0.0, self.gammas.data)

    def distances(self, x: Tensor) -> Tensor:
        _check_input("RBFLayer", x, self.in_dim)
        d = pairwise_p_distance(x, self.centroids, self.norm_order)
        return d * d if self.squared else d

    def branch_terms(self, x: Tensor) -> list[Tensor]:
        """The per-branch activations before summation, each batch x units."""
        d = self.distances(x)
        g = softplus(self.gammas)
        return [exp(-(d * g[n:n + 1])) for n in range(self.branches)]

    def forward(self, x: Tensor, mode: str = "eval") -> Tensor:
        terms = self.branch_terms(x)
        out = terms[0]
        for t in terms[1:]:
            out = out + t
        return out

    __call__ = forward

    def params(self) -> list[tuple[str, Tensor]]:
        return [("centroids", self.centroids), ("gammas", self.gammas)]

    def state(self) -> list[tuple[str, Tensor]]:
        return self.params()


def layer_params(layer) -> list[tuple[str, Tensor]]:
    return layer.params()


def count_params(layers) -> int:
    return sum(t.data.size for layer in layers for _, t in layer.params())


__all__ = [
    "BatchNormLayer",
    "DenseLayer",
    "RBFLayer",
    "count_params",
    "inverse_softplus",
    "layer_params",
]
