"""The named architectures: MLP, single/multi RBF and their multi-head variants."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .data import N_CLASSES, N_FEATURES
from .diffcore import Tensor, no_grad
from .layers import BatchNormLayer, DenseLayer, RBFLayer

# kind -> (rbf branches, norm order, multi-head, noise-regularised by default)
KINDS = {
    "mlp": (0, 2, False, False),
    "single_rbf": (1, 2, False, False),
    "single_rbf_mh": (1, 2, True, False),
    "multi_rbf": (3, 2, False, False),
    "multi_rbf_nr_mh": (3, 2, True, True),
    "multi_rbf_l4_nr": (3, 4, False, True),
    "multi_rbf_nr_l4_mh": (3, 4, True, True),
}
HIDDEN = 32


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class TrainFlags:
    use_gc: bool = False
    use_adx_loss: bool = False
    adx_epsilon: float = 0.1
    adx_literal: bool = False
    lambda_recon: float = 1.0


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    noise_reg: bool = False
    awgn_sigma: float = 0.1
    multi_head: bool = False
    rbf_norm_order: int = 2
    train_flags: TrainFlags = field(default_factory=TrainFlags)
    input_dim: int = N_FEATURES
    num_classes: int = N_CLASSES
    units: int = HIDDEN
    squared_distance: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown model kind {self.kind!r}; choose from {', '.join(KINDS)}")
        branches, order, mh, _ = KINDS[self.kind]
        if mh != self.multi_head:
            raise SpecError(f"{self.kind}: multi_head must be {mh}")
        if branches and order != self.rbf_norm_order:
            raise SpecError(f"{self.kind}: rbf_norm_order must be {order}")
        if self.awgn_sigma < 0 or (self.noise_reg and self.awgn_sigma <= 0):
            raise SpecError("awgn_sigma must be > 0 when noise_reg is set")
        if self.train_flags.adx_epsilon < 0:
            raise SpecError("adx_epsilon must be >= 0")
        if self.train_flags.use_adx_loss and not self.multi_head:
            raise SpecError(f"{self.kind}: the adversarial reconstruction loss needs a multi-head model")

    @classmethod
    def for_kind(cls, name: str, **overrides) -> ModelSpec:
        """Spec with the defaults of a kind name.

        ``name`` may carry ``_adx`` and/or ``_gc`` suffixes
        (e.g. ``multi_rbf_nr_l4_mh_adx``) which switch on the matching
        training flags.
        """
        kind = name.lower().replace("-", "_")
        flags = dict(asdict(overrides.pop("train_flags", TrainFlags())))
        for suffix, flag in (("_gc", "use_gc"), ("_adx", "use_adx_loss")):
            while kind.endswith(suffix) and kind not in KINDS:
                kind = kind[: -len(suffix)]
                flags[flag] = True
        if kind not in KINDS:
            raise SpecError(f"unknown model kind {name!r}; choose from {', '.join(KINDS)}")
        _, order, mh, nr = KINDS[kind]
        base = dict(kind=kind, noise_reg=nr, multi_head=mh, rbf_norm_order=order, train_flags=TrainFlags(**flags))
        base.update(overrides)
        return cls(**base)

    @property
    def branches(self) -> int:
        return KINDS[self.kind][0]

    @property
    def name(self) -> str:
        name = self.kind
        if self.train_flags.use_adx_loss:
            name += "_adx"
        if self.train_flags.use_gc:
            name += "_gc"
        return name

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> ModelSpec:
        d = dict(d)
        d["train_flags"] = TrainFlags(**d.get("train_flags", {}))
        return cls(**d)


class ForwardOutput(NamedTuple):
    logits: Tensor
    reconstruction: Tensor | None


class Model:
    def __init__(self, spec: ModelSpec, encoder: list, classifier_head: list, decoder_head: list | None, seed: int = 0):
        self.spec = spec
        self.encoder = encoder
        self.classifier_head = classifier_head
        self.decoder_head = decoder_head
        self.seed = seed
        self._noise_rng = np.random.default_rng(seed)

    def blocks(self):
        yield "encoder", self.encoder
        yield "classifier", self.classifier_head
        if self.decoder_head is not None:
            yield "decoder", self.decoder_head

    def _named(self, attr: str) -> list[tuple[str, Tensor]]:
        return [
            (f"{block}.{i}.{name}", t)
            for block, layers in self.blocks()
            for i, layer in enumerate(layers)
            for name, t in getattr(layer, attr)()
        ]

    def params(self) -> list[tuple[str, Tensor]]:
        return self._named("params")

    def state(self) -> list[tuple[str, Tensor]]:
        return self._named("state")

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.params()]

    def num_params(self) -> int:
        return sum(t.data.size for t in self.parameters())

    def zero_grad(self) -> None:
        for t in self.parameters():
            t.grad = None

    def gc_groups(self) -> list[tuple[Tensor, int]]:
        """Matrices eligible for gradient centralisation, with the axis holding each unit's inputs."""
        groups = []
        for _, layers in self.blocks():
            for layer in layers:
                if isinstance(layer, DenseLayer):
                    groups.append((layer.weights, 0))
                elif isinstance(layer, RBFLayer):
                    groups.append((layer.centroids, 1))
        return groups

    def rbf_layer(self) -> RBFLayer:
        for layer in self.encoder:
            if isinstance(layer, RBFLayer):
                return layer
        raise ValueError(f"model {self.spec.name} has no RBF layer")

    def __call__(self, x, mode: str = "eval", **kw) -> ForwardOutput:
        return forward(self, x, mode, **kw)


def build_model(spec: ModelSpec, seed: int = 0, init_data: np.ndarray | None = None) -> Model:
    """Construct ``spec`` deterministically from ``seed``.

    When ``init_data`` (standardised training rows) is given, RBF centroids
    start at distinct rows of it; otherwise they are standard-normal draws.
    """
    rng = np.random.default_rng(seed)
    d_in, h = spec.input_dim, spec.units
    branches = spec.branches
    if branches == 0:
        encoder = [
            BatchNormLayer(d_in),
            DenseLayer(d_in, h, "relu", rng),
            DenseLayer(h, h, "relu", rng),
            BatchNormLayer(h),
        ]
    else:
        centroids = None
        if init_data is not None:
            init_data = np.asarray(init_data, dtype=np.float64)
            pick = rng.choice(init_data.shape[0], size=h, replace=init_data.shape[0] < h)
            centroids = init_data[pick]
        encoder = [
            BatchNormLayer(d_in),
            RBFLayer(d_in, h, branches, spec.rbf_norm_order, centroids=centroids,
                     squared=spec.squared_distance, rng=rng),
            BatchNormLayer(h),
        ]
    classifier = [DenseLayer(h, spec.num_classes, "none", rng)]
    decoder = [DenseLayer(h, d_in, "none", rng)] if spec.multi_head else None
    return Model(spec, encoder, classifier, decoder, seed=seed)


def _run(layers, x: Tensor, mode: str, track_stats: bool) -> Tensor:
    for layer in layers:
        if isinstance(layer, BatchNormLayer):
            x = layer.forward(x, mode, track_stats=track_stats)
        else:
            x = layer.forward(x, mode)
    return x


def forward(model: Model, x, mode: str = "eval", noise: np.ndarray | None = None,
            track_stats: bool = True, add_noise: bool = True) -> ForwardOutput:
    """Evaluate the encoder and both heads.

    In train mode a noise-regularised model adds ``awgn_sigma * noise`` to the
    input (``noise`` is standard normal, drawn from the model's own stream if
    omitted).  Eval mode is deterministic and leaves BN statistics alone.
    """
    x = x if isinstance(x, Tensor) else Tensor(x)
    spec = model.spec
    if x.cols != spec.input_dim:
        raise ValueError(f"model expects {spec.input_dim} input columns, got shape {x.shape}")
    if mode == "train" and spec.noise_reg and add_noise:
        if noise is None:
            noise = model._noise_rng.standard_normal(x.shape)
        x = x + Tensor(spec.awgn_sigma * np.asarray(noise))
    z = _run(model.encoder, x, mode, track_stats)
    logits = _run(model.classifier_head, z, mode, track_stats)
    recon = _run(model.decoder_head, z, mode, track_stats) if model.decoder_head is not None else None
    return ForwardOutput(logits, recon)


def mean_rbf_activations(model: Model, xs) -> np.ndarray:
    """Batch-mean of each branch's pre-summation RBF activations, shape branches x units."""
    rbf = model.rbf_layer()
    x = xs if isinstance(xs, Tensor) else Tensor(xs)
    with no_grad():
        for layer in model.encoder:
            if layer is rbf:
                break
            x = layer.forward(x, "eval")
        return np.stack([t.data.mean(axis=0) for t in rbf.branch_terms(x)])


def predict(model: Model, x) -> np.ndarray:
    with no_grad():
        return forward(model, x, "eval").logits.data.argmax(axis=1)


def accuracy(model: Model, x, labels) -> float:
    return float(np.mean(predict(model, x) == np.asarray(labels)))


def with_spec(model: Model, **changes) -> Model:
    """Same parameters under a modified spec (shares tensors)."""
    return Model(replace(model.spec, **changes), model.encoder, model.classifier_head, model.decoder_head, model.seed)
