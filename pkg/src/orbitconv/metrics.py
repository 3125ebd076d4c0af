"""ROC/AUC, prediction timing, and report serialization."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from scipy.stats import rankdata

REPORT_ORDER = ("baseline", "augmented-baseline", "invariant")


class UndefinedAUC(ValueError):
    pass


def _check_binary(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError(f"{scores.size} scores but {labels.size} labels")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0 or 1")
    pos = labels == 1
    n_pos = int(pos.sum())
    if n_pos == 0 or n_pos == labels.size:
        raise UndefinedAUC("AUC is undefined without both positive and negative labels")
    return scores, pos


def auc_rank(scores, labels) -> float:
    """Mann-Whitney statistic with midranks: P(score_pos > score_neg) + 0.5 P(tie)."""
    scores, pos = _check_binary(scores, labels)
    ranks = rankdata(scores, method="average")
    n_pos = pos.sum()
    n_neg = pos.size - n_pos
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_curve(scores, labels) -> list[tuple[float, float, float]]:
    """(fpr, tpr, threshold) for each distinct score, descending. Starts at
    (0, 0, inf) and ends at (1, 1, min score)."""
    scores, pos = _check_binary(scores, labels)
    order = np.argsort(-scores, kind="stable")
    s, p = scores[order], pos[order]
    tp = np.cumsum(p)
    fp = np.cumsum(~p)
    last = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]  # last index of each tie block
    tpr = tp[last] / tp[-1]
    fpr = fp[last] / fp[-1]
    points = [(0.0, 0.0, float("inf"))]
    points += [(float(f), float(t), float(s[i])) for f, t, i in zip(fpr, tpr, last)]
    return points


def trapezoid_auc(points) -> float:
    fpr = np.array([p[0] for p in points])
    tpr = np.array([p[1] for p in points])
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def roc_auc(scores, labels):
    """Returns ``(roc_points, auc)``; the AUC comes from the rank statistic."""
    return roc_curve(scores, labels), auc_rank(scores, labels)


def timing_harness(predict_fn: Callable, images: Iterable, model) -> tuple[float, int, list]:
    """Time ``predict_fn`` over all images with a monotonic clock.

    Returns ``(seconds, forward_passes, outputs)``; passes are read off the
    model's counter, so only work done through ``segnet.predict`` counts.
    """
    before = model.forward_passes
    t0 = time.perf_counter()
    outputs = [predict_fn(img) for img in images]
    elapsed = time.perf_counter() - t0
    return elapsed, model.forward_passes - before, outputs


@dataclass
class VariantReport:
    variant: str
    auc: float
    roc_points: list[tuple[float, float, float]] = field(default_factory=list)
    loss_history: list[tuple[int, float]] = field(default_factory=list)
    forward_passes: int = 0
    wall_clock_seconds: float = 0.0


def write_report(reports: list[VariantReport], out_dir) -> None:
    """``metrics.jsonl`` (one object per variant, fixed variant order) plus
    ``roc_<variant>.csv`` and ``loss_<variant>.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rank = {v: i for i, v in enumerate(REPORT_ORDER)}
    ordered = sorted(reports, key=lambda r: rank.get(r.variant, len(rank)))
    with open(out / "metrics.jsonl", "w") as fh:
        for r in ordered:
            obj = {"variant": r.variant, "auc": r.auc, "forward_passes": r.forward_passes,
                   "wall_clock_seconds": r.wall_clock_seconds}
            fh.write(json.dumps(obj) + "\n")
    for r in ordered:
        write_csv(out / f"roc_{r.variant}.csv", ("fpr", "tpr", "threshold"), r.roc_points)
        write_csv(out / f"loss_{r.variant}.csv", ("iteration", "loss"), r.loss_history)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_report(out_dir) -> list[VariantReport]:
    out = Path(out_dir)
    reports = []
    for line in (out / "metrics.jsonl").read_text().splitlines():
        obj = json.loads(line)
        v = obj["variant"]
        roc = [(float(a), float(b), float(c)) for a, b, c in _read_rows(out / f"roc_{v}.csv")]
        loss = [(int(a), float(b)) for a, b in _read_rows(out / f"loss_{v}.csv")]
        reports.append(VariantReport(v, obj["auc"], roc, loss, obj["forward_passes"],
                                     obj["wall_clock_seconds"]))
    return reports


def _read_rows(path):
    if not Path(path).exists():
        return []
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[1:]
