"""Command-line entry point.

    orbitconv <command> [--config FILE] [--set key=value ...]

Commands: gen-data, train, predict, eval, invariance-check, compare.
Exit status 1 on configuration errors, 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from orbitconv import experiment as ex
from orbitconv.config import ConfigError, RunConfig, apply_overrides, parse_config
from orbitconv.metrics import read_report, write_csv, write_report
from orbitconv.segnet import load_model, predict_variant, save_model
from orbitconv.synth import SynthConfig, generate, orientation_holdout_split
from orbitconv.tensor import load_tensor, save_tensor

COMMANDS = ("gen-data", "train", "predict", "eval", "invariance-check", "compare")


def _model_dir(cfg: RunConfig, variant: str) -> Path:
    return Path(cfg.out_dir) / f"model_{variant}"


def cmd_gen_data(cfg, args):
    images, labels = generate(SynthConfig(seed=cfg.seed, count=cfg.train_images, size=cfg.image_size))
    ex.write_dataset(images, labels, cfg.out_dir)
    print(f"wrote {len(images)} images to {cfg.out_dir}")


def cmd_train(cfg, args):
    variant = ex.variant_of(cfg)
    images, labels = ex.dataset(cfg)
    tr_x, tr_y, _, _ = orientation_holdout_split(images, labels)
    model, history = ex.train_variant(cfg, variant, tr_x, tr_y, augment=cfg.augment)
    out = Path(cfg.out_dir)
    save_model(model, _model_dir(cfg, variant))
    write_csv(out / f"loss_{variant}.csv", ("iteration", "loss"), list(enumerate(history)))
    print(f"trained {variant}: final loss {history[-1] if history else float('nan'):.6f}")


def cmd_predict(cfg, args):
    variant = ex.variant_of(cfg)
    model = load_model(args.model_dir or _model_dir(cfg, variant))
    if not args.inputs:
        raise ConfigError("predict needs at least one input .eitf file")
    for path in args.inputs:
        batch = load_tensor(path)
        if batch.ndim == 3:
            batch = batch[None]
        maps = np.stack([predict_variant(model, im, cfg.tta_combine) for im in batch])
        dest = Path(cfg.out_dir) / f"pred_{Path(path).stem}.eitf"
        dest.parent.mkdir(parents=True, exist_ok=True)
        save_tensor(dest, maps)
        print(f"{path} -> {dest}")


def cmd_eval(cfg, args):
    variant = ex.variant_of(cfg)
    model = load_model(args.model_dir or _model_dir(cfg, variant))
    images, labels = ex.dataset(cfg)
    _, _, te_x, te_y = orientation_holdout_split(images, labels)
    report, _ = ex.evaluate(model, te_x, te_y, cfg.tta_combine)
    loss_csv = Path(cfg.out_dir) / f"loss_{variant}.csv"
    if loss_csv.exists():
        lines = loss_csv.read_text().splitlines()[1:]
        report.loss_history = [(int(a), float(b)) for a, b in (l.split(",") for l in lines)]
    write_report([report], cfg.out_dir)
    print(f"{variant}: auc {report.auc:.6f}, {report.forward_passes} forward passes")


def cmd_invariance_check(cfg, args):
    rows = ex.invariance_rows(cfg)
    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    ex.write_invariance(rows, Path(cfg.out_dir) / "invariance.csv")
    print(f"{'orbit':<7}{'transform':<10}{'closed':<8}residual ({cfg.combine})")
    for orbit, g, closed, res in rows:
        print(f"{orbit:<7}{g:<10}{str(closed).lower():<8}{res:.3e}")


def cmd_compare(cfg, args):
    result = ex.run_compare(cfg, out_dir=cfg.out_dir)
    for r in read_report(cfg.out_dir):
        print(f"{r.variant:<20} auc {r.auc:.6f}  passes {r.forward_passes:>6}  "
              f"time {r.wall_clock_seconds:.3f}s")
    return result


HANDLERS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "invariance-check": cmd_invariance_check,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="orbitconv", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("inputs", nargs="*", help="input .eitf images (predict only)")
    p.add_argument("--config", type=Path, help="key = value config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--model-dir", type=Path, help="model directory (predict/eval)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {args.config}: {e.strerror}") from None
        cfg = parse_config(text)
    return apply_overrides(cfg, args.overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        HANDLERS[args.command](cfg, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - every runtime failure maps to exit 2
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
