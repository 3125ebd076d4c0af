"""Small fully-convolutional boundary predictor, SGD training, and plain or
test-time-augmented prediction.

The three experiment variants share one code path: ``baseline`` uses plain
3x3 convolutions, ``augmented-baseline`` is the same network trained on random
D4-transformed examples and predicted with an 8-way ensemble, and ``invariant``
swaps the first two 3x3 layers for orbit layers with maxout.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from orbitconv.conv import bce_loss, relu, relu_backward, sigmoid, sigmoid_backward, to_cnhw
from orbitconv.layers import InvariantConvLayer, PlainConvLayer
from orbitconv.orbit import OrbitSpec
from orbitconv.tensor import flip, load_tensor, rot90, save_tensor

log = logging.getLogger(__name__)

VARIANTS = ("baseline", "augmented-baseline", "invariant")
TTA_COMBINES = ("prob-average", "majority-vote")


class TrainingDiverged(RuntimeError):
    def __init__(self, iteration: int, loss: float):
        super().__init__(f"non-finite loss {loss} at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class D4Transform:
    """One symmetry of the square: optional hflip, then CCW quarter turns."""

    quarter_turns: int = 0
    hflip: bool = False

    def apply(self, t):
        if self.hflip:
            t = flip(t, "h")
        return rot90(t, self.quarter_turns)

    def invert(self, t):
        t = rot90(t, -self.quarter_turns)
        return flip(t, "h") if self.hflip else t

    @property
    def name(self) -> str:
        return f"rot{90 * self.quarter_turns}" + (".hflip" if self.hflip else "")


D4 = tuple(D4Transform(k, h) for h in (False, True) for k in range(4))


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # conv | invariant | relu | sigmoid
    channels: int = 0
    kernel: int = 3
    orbit: str = "id"
    combine: str = "maxout"


@dataclass
class ModelSpec:
    layers: list[LayerSpec]
    variant: str = "baseline"
    in_channels: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")


def default_spec(variant: str = "baseline", width: int = 16, orbit_layer1: str = "rot4",
                 orbit_layer2: str = "flip3", combine: str = "maxout") -> ModelSpec:
    """conv-relu-conv-relu-1x1conv-sigmoid; the invariant variant replaces the
    two 3x3 convs by orbit layers (``none`` keeps a plain conv in that slot)."""

    def slot(orbit):
        if variant != "invariant" or orbit == "none":
            return LayerSpec("conv", width, 3)
        return LayerSpec("invariant", width, 3, orbit, combine)

    return ModelSpec(
        [slot(orbit_layer1), LayerSpec("relu"), slot(orbit_layer2), LayerSpec("relu"),
         LayerSpec("conv", 1, 1), LayerSpec("sigmoid")],
        variant,
    )


def _glorot(rng, shape, fan_in, fan_out):
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=shape)


@dataclass
class Model:
    spec: ModelSpec
    layers: list = field(default_factory=list)
    forward_passes: int = 0

    def param_layers(self):
        return [l for l in self.layers if not isinstance(l, str)]

    def params(self) -> list[np.ndarray]:
        return [p for l in self.param_layers() for p in l.params().values()]

    def forward(self, x):
        """Batch forward N x Cin x H x W -> N x H x W probabilities plus caches.
        Does not touch the pass counter."""
        x = to_cnhw(x)
        caches = []
        for layer in self.layers:
            if layer == "relu":
                caches.append(x)
                x = relu(x)
            elif layer == "sigmoid":
                x = sigmoid(x)
                caches.append(x)
            else:
                x, cache = layer.forward_cnhw(x)
                caches.append(cache)
        return x[0], caches

    def backward(self, caches, dprob) -> list[dict[str, np.ndarray]]:
        dy = np.asarray(dprob)[None]
        grads = []
        first = next(i for i, l in enumerate(self.layers) if not isinstance(l, str))
        for i in reversed(range(len(self.layers))):
            layer, cache = self.layers[i], caches[i]
            if layer == "relu":
                dy = relu_backward(cache, dy)
            elif layer == "sigmoid":
                dy = sigmoid_backward(cache, dy)
            else:
                # the input gradient of the first conv is never used
                dy, g = layer.backward_cnhw(cache, dy, need_dx=i != first)
                grads.append(g)
        return grads[::-1]

    def loss_and_grads(self, images, labels):
        prob, caches = self.forward(images)
        loss, dprob = bce_loss(prob, labels)
        return loss, self.backward(caches, dprob)


def build_model(spec: ModelSpec, seed: int) -> Model:
    """Glorot-uniform weights, zero biases, deterministic in ``seed``."""
    rng = np.random.default_rng([seed, 0])
    layers: list = []
    cin = spec.in_channels
    for ls in spec.layers:
        if ls.kind in ("relu", "sigmoid"):
            layers.append(ls.kind)
            continue
        if ls.channels < 1 or ls.kernel < 1:
            raise ValueError(f"bad layer {ls}")
        k = ls.kernel
        w = _glorot(rng, (ls.channels, cin, k, k), cin * k * k, ls.channels * k * k)
        b = np.zeros(ls.channels)
        if ls.kind == "conv":
            layer = PlainConvLayer(w, b)
        elif ls.kind == "invariant":
            layer = InvariantConvLayer(w, b, OrbitSpec(ls.orbit), ls.combine)
        else:
            raise ValueError(f"unknown layer kind {ls.kind!r}")
        layers.append(layer)
        cin = layer.out_channels
    if cin != 1 or not layers or layers[-1] != "sigmoid":
        raise ValueError("model must end in a 1-channel conv followed by sigmoid")
    return Model(spec, layers)


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    iterations: int = 2000
    batch_size: int = 8
    seed: int = 7
    augment: bool = False

    def __post_init__(self):
        if self.learning_rate < 0 or self.iterations < 0 or self.batch_size < 1:
            raise ValueError(f"invalid training config {self}")


def train(model: Model, images, labels, cfg: TrainConfig) -> tuple[Model, list[float]]:
    """Plain minibatch SGD on mean pixelwise BCE. Updates parameters in place.

    Batch indices and augmentation draws come from separate seeded streams, so
    runs that differ only in ``augment`` see the same example indices.
    """
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    n = len(images)
    if n == 0:
        raise ValueError("empty training set")
    batch_rng = np.random.default_rng([cfg.seed, 1])
    aug_rng = np.random.default_rng([cfg.seed, 2])
    params = model.params()
    history = []
    for it in range(cfg.iterations):
        idx = batch_rng.choice(n, size=cfg.batch_size, replace=cfg.batch_size > n)
        xb, yb = images[idx], labels[idx]
        if cfg.augment:
            picks = aug_rng.integers(0, len(D4), size=len(idx))
            xb = np.stack([D4[p].apply(x) for p, x in zip(picks, xb)])
            yb = np.stack([D4[p].apply(y) for p, y in zip(picks, yb)])
        loss, grads = model.loss_and_grads(xb, yb)
        if not np.isfinite(loss):
            raise TrainingDiverged(it, loss)
        history.append(loss)
        flat = [g for layer_grads in grads for g in layer_grads.values()]
        for p, g in zip(params, flat):
            p -= cfg.learning_rate * g
        if it % 200 == 0:
            log.debug("iter %d loss %.5f", it, loss)
    return model, history


def predict(model: Model, image) -> np.ndarray:
    """One forward pass on a C x H x W image; returns the H x W probability map."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[0] != model.spec.in_channels:
        raise ValueError(f"expected a {model.spec.in_channels} x H x W image, got {image.shape}")
    model.forward_passes += 1
    return model.forward(image[None])[0][0]


def predict_augmented(model: Model, image, combine: str = "prob-average") -> np.ndarray:
    """8-way D4 test-time augmentation: predict every transformed copy, map each
    output back, then average probabilities or take a pixelwise vote of the
    0.5-thresholded labels (4-4 ties vote 1)."""
    if combine not in TTA_COMBINES:
        raise ValueError(f"unknown TTA combine {combine!r}")
    maps = np.stack([g.invert(predict(model, g.apply(image))) for g in D4])
    if combine == "prob-average":
        return maps.mean(axis=0)
    votes = (maps >= 0.5).sum(axis=0)
    return (2 * votes >= len(D4)).astype(np.float64)


def predict_variant(model: Model, image, tta_combine: str = "prob-average") -> np.ndarray:
    if model.spec.variant == "augmented-baseline":
        return predict_augmented(model, image, tta_combine)
    return predict(model, image)


MANIFEST = "manifest.txt"


def save_model(model: Model, directory) -> None:
    """Directory of EITF parameter files plus a line-based manifest."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    lines = ["# orbitconv model", f"variant {model.spec.variant}", f"in_channels {model.spec.in_channels}"]
    for i, (ls, layer) in enumerate(zip(model.spec.layers, model.layers)):
        desc = f"layer {i} {ls.kind}"
        if not isinstance(layer, str):
            desc += f" channels={ls.channels} kernel={ls.kernel} orbit={ls.orbit} combine={ls.combine}"
            for name, p in layer.params().items():
                fname = f"layer{i}_{name}.eitf"
                save_tensor(d / fname, p)
                desc += f" {name}={fname}"
        lines.append(desc)
    (d / MANIFEST).write_text("\n".join(lines) + "\n")


def load_model(directory) -> Model:
    d = Path(directory)
    variant, in_channels = "baseline", 1
    specs, files = [], []
    for line in (d / MANIFEST).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        head, *rest = line.split()
        if head == "variant":
            variant = rest[0]
        elif head == "in_channels":
            in_channels = int(rest[0])
        elif head == "layer":
            kind = rest[1]
            kv = dict(item.split("=", 1) for item in rest[2:])
            if kind in ("relu", "sigmoid"):
                specs.append(LayerSpec(kind))
            else:
                specs.append(LayerSpec(kind, int(kv["channels"]), int(kv["kernel"]), kv["orbit"], kv["combine"]))
            files.append(kv)
        else:
            raise ValueError(f"bad manifest line: {line!r}")
    model = build_model(ModelSpec(specs, variant, in_channels), seed=0)
    for layer, kv in zip(model.layers, files):
        if isinstance(layer, str):
            continue
        for name, p in layer.params().items():
            loaded = load_tensor(d / kv[name])
            if loaded.shape != p.shape:
                raise ValueError(f"{kv[name]}: shape {loaded.shape}, expected {p.shape}")
            p[...] = loaded
    return model
