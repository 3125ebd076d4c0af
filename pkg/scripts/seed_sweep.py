"""Run the three-way comparison over several seeds and print AUCs, final
training losses, and the rotated-copy AUC gaps.

    python scripts/seed_sweep.py --seeds 0 1 2 3 4 --set image_size=32 ...
"""

import argparse
import time

import numpy as np

from orbitconv.config import RunConfig, apply_overrides
from orbitconv.experiment import copy_auc_gap, run_compare


def sweep(cfg: RunConfig, seeds):
    rows = []
    for seed in seeds:
        c = apply_overrides(cfg, [f"seed={seed}"])
        t0 = time.perf_counter()
        res = run_compare(c)
        aucs = {r.variant: r.auc for r in res.reports}
        final = {r.variant: r.loss_history[-1][1] for r in res.reports}
        gaps = {v: (copy_auc_gap(res.models[v], res.test_images, res.test_labels, 1),
                    copy_auc_gap(res.models[v], res.test_images, res.test_labels, 2))
                for v in ("baseline", "invariant")}
        rows.append((seed, aucs, final, gaps, time.perf_counter() - t0))
    return rows


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    p.add_argument("--set", dest="overrides", action="append", default=[])
    args = p.parse_args()
    cfg = apply_overrides(RunConfig(orbit_layer2="flip4"), args.overrides)
    rows = sweep(cfg, args.seeds)
    print(f"{'seed':>4} {'auc base':>9} {'auc aug':>9} {'auc inv':>9} {'loss base':>10} "
          f"{'loss inv':>9} {'gap90 b':>9} {'gap180 b':>9} {'gap90 i':>9} {'gap180 i':>9} {'sec':>6}")
    for seed, aucs, final, gaps, sec in rows:
        print(f"{seed:>4} {aucs['baseline']:9.4f} {aucs['augmented-baseline']:9.4f} "
              f"{aucs['invariant']:9.4f} {final['baseline']:10.4f} {final['invariant']:9.4f} "
              f"{gaps['baseline'][0]:9.2e} {gaps['baseline'][1]:9.2e} "
              f"{gaps['invariant'][0]:9.2e} {gaps['invariant'][1]:9.2e} {sec:6.1f}")
    mean = lambda key, v: np.mean([r[key][v] for r in rows])
    print("mean auc: base %.4f aug %.4f inv %.4f | mean final loss: base %.4f inv %.4f" % (
        mean(1, "baseline"), mean(1, "augmented-baseline"), mean(1, "invariant"),
        mean(2, "baseline"), mean(2, "invariant")))


if __name__ == "__main__":
    main()
