"""Three-way comparison (baseline, augmented baseline, invariant model) and
the equivariance residual table, driven by a RunConfig."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from orbitconv.config import RunConfig
from orbitconv.layers import InvariantConvLayer
from orbitconv.metrics import VariantReport, roc_auc, timing_harness, write_csv, write_report
from orbitconv.orbit import GROUP_ELEMENTS, OrbitSpec, closure_table
from orbitconv.segnet import (
    D4,
    Model,
    TrainConfig,
    build_model,
    default_spec,
    predict_variant,
    save_model,
    train,
)
from orbitconv.synth import SynthConfig, generate, orientation_holdout_split
from orbitconv.tensor import load_tensor, save_tensor

log = logging.getLogger(__name__)

INVARIANCE_ORBITS = ("rot2", "rot4", "rot8", "flip3", "flip4", "d4")
INVARIANCE_TRANSFORMS = ("rot90", "rot180", "hflip", "vflip")


def variant_of(cfg: RunConfig) -> str:
    if cfg.orbit_layer1 != "none" or cfg.orbit_layer2 != "none":
        return "invariant"
    return "augmented-baseline" if cfg.augment else "baseline"


def model_spec(cfg: RunConfig, variant: str):
    return default_spec(variant, orbit_layer1=cfg.orbit_layer1, orbit_layer2=cfg.orbit_layer2,
                        combine=cfg.combine)


def dataset(cfg: RunConfig, directory=None):
    """Load ``images.eitf``/``labels.eitf`` from ``directory`` if present,
    otherwise generate from the config."""
    d = Path(directory or cfg.out_dir)
    if (d / "images.eitf").exists() and (d / "labels.eitf").exists():
        return load_tensor(d / "images.eitf"), load_tensor(d / "labels.eitf").astype(np.uint8)
    return generate(SynthConfig(seed=cfg.seed, count=cfg.train_images, size=cfg.image_size))


def write_dataset(images, labels, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    save_tensor(d / "images.eitf", images, "f64")
    save_tensor(d / "labels.eitf", labels, "u8")


def train_variant(cfg: RunConfig, variant: str, images, labels, augment: bool | None = None):
    if augment is None:
        augment = variant == "augmented-baseline"
    model = build_model(model_spec(cfg, variant), cfg.seed)
    tcfg = TrainConfig(cfg.learning_rate, cfg.iterations, cfg.batch_size, cfg.seed, augment)
    return train(model, images, labels, tcfg)


def evaluate(model: Model, images, labels, tta_combine="prob-average"):
    """Pooled-pixel ROC/AUC plus timed prediction over the test images.

    Returns ``(report, maps)``; ``report.loss_history`` is left empty.
    """
    seconds, passes, maps = timing_harness(lambda im: predict_variant(model, im, tta_combine),
                                           images, model)
    maps = np.stack(maps)
    roc, auc = roc_auc(maps.ravel(), np.asarray(labels).ravel())
    return VariantReport(model.spec.variant, auc, roc, [], passes, seconds), maps


@dataclass
class CompareResult:
    reports: list[VariantReport]
    models: dict[str, Model]
    test_images: np.ndarray
    test_labels: np.ndarray


def run_compare(cfg: RunConfig, out_dir=None, images=None, labels=None) -> CompareResult:
    """Train and evaluate the three variants on one dataset and write the
    combined report (plus model directories) under ``out_dir``."""
    if images is None:
        images, labels = dataset(cfg)
    tr_x, tr_y, te_x, te_y = orientation_holdout_split(images, labels)
    reports, models = [], {}
    for variant in ("baseline", "augmented-baseline", "invariant"):
        model, history = train_variant(cfg, variant, tr_x, tr_y)
        report, _ = evaluate(model, te_x, te_y, cfg.tta_combine)
        report.loss_history = list(enumerate(history))
        log.info("%s: auc %.4f, %d passes, %.2fs", variant, report.auc,
                 report.forward_passes, report.wall_clock_seconds)
        reports.append(report)
        models[variant] = model
    if out_dir is not None:
        write_report(reports, out_dir)
        for variant, model in models.items():
            save_model(model, Path(out_dir) / f"model_{variant}")
    return CompareResult(reports, models, te_x, te_y)


def copy_auc_gap(model: Model, test_images, test_labels, k: int) -> float:
    """AUC over the D4-element-``k`` copies of the test split minus AUC over
    the identity copies (the split stores ``len(D4)`` copies per image, in D4
    order). Zero for a model that is exactly equivariant under ``D4[k]``."""
    x, y = np.asarray(test_images), np.asarray(test_labels)
    step = len(D4)

    def auc_of(j):
        maps = np.stack([model.forward(im[None])[0][0] for im in x[j::step]])
        return roc_auc(maps.ravel(), y[j::step].ravel())[1]

    return auc_of(k) - auc_of(0)


def relative_residual(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), np.finfo(float).tiny))


def invariance_rows(cfg: RunConfig, size: int = 9, channels: int = 3):
    """Equivariance residual ``|layer(g x) - g layer(x)| / |g layer(x)|`` for a
    random orbit layer per (orbit, transform). In concat mode the output
    channel groups are permuted by the closure table before comparing."""
    rng = np.random.default_rng([cfg.seed, 3])
    x = rng.normal(size=(2, channels, size, size))
    rows = []
    for name in INVARIANCE_ORBITS:
        spec = OrbitSpec(name)
        layer = InvariantConvLayer(rng.normal(size=(4, channels, 3, 3)), rng.normal(size=4),
                                   spec, cfg.combine)
        y = layer.forward(x)[0]
        for g in INVARIANCE_TRANSFORMS:
            gf = GROUP_ELEMENTS[g]
            perm = closure_table(spec, g)
            lhs = layer.forward(gf(x))[0]
            rhs = gf(y)
            if cfg.combine == "concat" and perm is not None:
                rhs = permute_groups(rhs, perm, len(spec))
            rows.append((name, g, perm is not None, relative_residual(lhs, rhs)))
    return rows


def permute_groups(y, perm, m):
    """Move orbit-member channel group i to position perm[i]."""
    n, mc, h, w = y.shape
    groups = y.reshape(n, m, mc // m, h, w)
    out = np.empty_like(groups)
    out[:, perm] = groups
    return out.reshape(n, mc, h, w)


def model_residuals(model: Model, image) -> dict[str, float]:
    """Whole-model equivariance residual of ``predict`` for each D4 element."""
    base = model.forward(np.asarray(image)[None])[0][0]
    return {g.name: relative_residual(model.forward(g.apply(image)[None])[0][0], g.apply(base))
            for g in D4}


def write_invariance(rows, path) -> None:
    write_csv(path, ("orbit", "transform", "closed", "residual"),
              [(o, g, str(c).lower(), float(r)) for o, g, c, r in rows])
