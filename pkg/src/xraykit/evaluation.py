"""ROC/AUC machinery, operating-point selection, probability calibration,
bootstrap uncertainty, OOD separation, retention curves, and the
augmentation-robustness matrix.

ROC sweeps use exact counting at midpoint thresholds (no binning), so the
trapezoidal AUC equals the pairwise concordance probability with ties
counted one half.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLabels, InvalidOperatingPoint

OPT_CLAMP = 1e-6


@dataclass
class RocPoint:
    threshold: float
    fpr: float
    tpr: float


@dataclass
class RocCurve:
    points: list[RocPoint]

    def to_dict(self) -> dict:
        return {
            "thresholds": [p.threshold for p in self.points],
            "fpr": [p.fpr for p in self.points],
            "tpr": [p.tpr for p in self.points],
        }


@dataclass
class OperatingPoint:
    opt: float
    j_statistic: float

    def to_dict(self) -> dict:
        return {"opt": self.opt, "j_statistic": self.j_statistic}


@dataclass
class AucEstimate:
    mean: float
    std: float
    n_splits: int
    split_fraction: float

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std": self.std,
            "n_splits": self.n_splits,
            "split_fraction": self.split_fraction,
        }


@dataclass
class RetentionPoint:
    cutoff: float
    retained_fraction: float
    auc_on_retained: float

    def to_dict(self) -> dict:
        return {
            "cutoff": self.cutoff,
            "retained_fraction": self.retained_fraction,
            "auc_on_retained": self.auc_on_retained,
        }


def _check_binary(labels: np.ndarray):
    if not np.isin(labels, (0, 1)).all():
        raise DegenerateLabels(f"labels must be binary 0/1, got {np.unique(labels)}")
    if labels.min() == labels.max():
        raise DegenerateLabels("labels contain a single class")


def _interior_thresholds(scores: np.ndarray) -> np.ndarray:
    """Midpoints between consecutive sorted unique scores; falls back to the
    single unique score when there is nothing to interpolate."""
    uniq = np.unique(scores)
    if uniq.size == 1:
        return uniq
    return (uniq[1:] + uniq[:-1]) / 2.0


def roc_curve(scores, labels) -> RocCurve:
    """Exact ROC sweep: positive iff score >= threshold, thresholds descending
    from +inf to -inf so fpr/tpr are non-decreasing along the curve."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    _check_binary(y)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    points = [RocPoint(math.inf, 0.0, 0.0)]
    for t in np.sort(_interior_thresholds(s))[::-1]:
        pred = s >= t
        tp = int((pred & (y == 1)).sum())
        fp = int((pred & (y == 0)).sum())
        points.append(RocPoint(float(t), fp / n_neg, tp / n_pos))
    points.append(RocPoint(-math.inf, 1.0, 1.0))
    return RocCurve(points)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the sweep; equals pairwise concordance (ties 1/2)."""
    total = 0.0
    for a, b in zip(curve.points[:-1], curve.points[1:]):
        total += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0
    return total


def auc_scores(scores, labels) -> float:
    return auc(roc_curve(scores, labels))


def optimal_operating_point(curve: RocCurve) -> OperatingPoint:
    """Argmax of tpr - fpr over the finite swept thresholds.

    Ties break toward lower fpr, then larger threshold; the returned opt is
    clamped into [1e-6, 1 - 1e-6] so the calibration map stays defined.
    """
    best = None
    for p in curve.points:
        if not math.isfinite(p.threshold):
            continue
        j = p.tpr - p.fpr
        key = (-j, p.fpr, -p.threshold)
        if best is None or key < best[0]:
            best = (key, p)
    if best is None:
        raise DegenerateLabels("curve has no finite thresholds")
    p = best[1]
    opt = min(max(p.threshold, OPT_CLAMP), 1.0 - OPT_CLAMP)
    return OperatingPoint(opt=float(opt), j_statistic=float(p.tpr - p.fpr))


def calibrate(x, opt: float):
    """Piecewise linear calibration anchored at the operating point.

    f(x) = x / (2 opt) for x <= opt, else 1 - (1 - x) / (2 (1 - opt)).
    Continuous, monotone, f(opt) = 0.5; identity when opt = 0.5.
    """
    if not (isinstance(opt, (int, float)) and 0.0 <= opt <= 1.0) or math.isnan(opt):
        raise InvalidOperatingPoint(f"operating point {opt!r} outside [0, 1]")
    opt = min(max(float(opt), OPT_CLAMP), 1.0 - OPT_CLAMP)
    xv = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    out = np.where(xv <= opt, xv / (2.0 * opt), 1.0 - (1.0 - xv) / (2.0 * (1.0 - opt)))
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def bootstrap_auc(
    scores,
    labels,
    n_splits: int = 10,
    split_fraction: float = 0.5,
    seed: int = 0,
    stratify: bool = False,
) -> AucEstimate:
    """AUC mean/std over random half-size splits sampled without replacement.

    Unstratified by default; `stratify` draws the split fraction from each
    class separately so every split is guaranteed both classes."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    _check_binary(y)
    rng = np.random.default_rng(seed)
    n = s.shape[0]
    size = max(2, int(round(n * split_fraction)))
    pos_idx = np.flatnonzero(y == 1)
    neg_idx = np.flatnonzero(y == 0)
    aucs = []
    for _ in range(n_splits):
        if stratify:
            n_pos = max(1, int(round(pos_idx.size * split_fraction)))
            n_neg = max(1, int(round(neg_idx.size * split_fraction)))
            idx = np.concatenate(
                [rng.choice(pos_idx, size=n_pos, replace=False), rng.choice(neg_idx, size=n_neg, replace=False)]
            )
        else:
            for _retry in range(100):
                idx = rng.choice(n, size=size, replace=False)
                if y[idx].min() != y[idx].max():
                    break
            else:
                raise DegenerateLabels("could not draw a split with both classes in 100 retries")
        aucs.append(auc_scores(s[idx], y[idx]))
    arr = np.asarray(aucs)
    return AucEstimate(mean=float(arr.mean()), std=float(arr.std()), n_splits=n_splits, split_fraction=split_fraction)


def separation_auc(in_scores, out_scores, kind: str = "recon_l2") -> float:
    """AUC of the in-distribution vs out-of-distribution binary problem,
    oriented so 1.0 means a perfect gate."""
    from .ood import higher_is_in_distribution

    i = np.asarray(in_scores, dtype=np.float64)
    o = np.asarray(out_scores, dtype=np.float64)
    if i.size == 0 or o.size == 0:
        raise DegenerateLabels("both score sets must be nonempty")
    scores = np.concatenate([i, o])
    if higher_is_in_distribution(kind):
        scores = -scores
    labels = np.concatenate([np.zeros(i.size, dtype=int), np.ones(o.size, dtype=int)])
    return auc_scores(scores, labels)


def retention_curve(ood_scores, task_scores, task_labels, n_cutoffs: int = 20, kind: str = "recon_l2") -> list[RetentionPoint]:
    """Task AUC on the subset admitted at each OOD cutoff, loosest first.

    Cutoffs sweep observed score quantiles; subsets with a single task class
    have no defined AUC and are omitted.
    """
    from .ood import higher_is_in_distribution

    o = np.asarray(ood_scores, dtype=np.float64)
    s = np.asarray(task_scores, dtype=np.float64)
    y = np.asarray(task_labels)
    if not (o.shape == s.shape == y.shape):
        raise DegenerateLabels(f"arrays must align: {o.shape}, {s.shape}, {y.shape}")
    flip = higher_is_in_distribution(kind)
    oriented = -o if flip else o
    points = []
    for i in range(n_cutoffs):
        q = (n_cutoffs - i) / n_cutoffs
        cutoff = float(np.quantile(oriented, q))
        keep = oriented <= cutoff
        if keep.sum() < 2 or y[keep].min() == y[keep].max():
            continue
        points.append(
            RetentionPoint(
                cutoff=-cutoff if flip else cutoff,
                retained_fraction=float(keep.mean()),
                auc_on_retained=auc_scores(s[keep], y[keep]),
            )
        )
    return points


def roc_to_csv(curve: RocCurve) -> str:
    """Plot-ready columnar output: threshold,fpr,tpr."""
    lines = ["threshold,fpr,tpr"]
    lines += [f"{p.threshold},{p.fpr},{p.tpr}" for p in curve.points]
    return "\n".join(lines) + "\n"


def retention_to_csv(points: list[RetentionPoint]) -> str:
    lines = ["cutoff,retained_fraction,auc_on_retained"]
    lines += [f"{p.cutoff},{p.retained_fraction},{p.auc_on_retained}" for p in points]
    return "\n".join(lines) + "\n"


def augmentation_matrix(predictors, test_sets, row_labels=None, col_labels=None) -> dict:
    """matrix[i][j] = mean per-class AUC of predictor i on test set j.

    `predictors` map a list of samples to an (n, num_classes) probability
    array; samples carry boolean labels. Classes with a single label value in
    a test set are skipped in that cell's mean.
    """
    rows = []
    for predict in predictors:
        row = []
        for samples in test_sets:
            probs = np.asarray(predict(samples), dtype=np.float64)
            labels = np.asarray([s.labels for s in samples], dtype=int)
            cell = []
            for c in range(labels.shape[1]):
                if labels[:, c].min() == labels[:, c].max():
                    continue
                cell.append(auc_scores(probs[:, c], labels[:, c]))
            row.append(float(np.mean(cell)) if cell else float("nan"))
        rows.append(row)
    return {
        "rows": list(row_labels) if row_labels else [f"model_{i}" for i in range(len(rows))],
        "cols": list(col_labels) if col_labels else [f"test_{j}" for j in range(len(rows[0]) if rows else 0)],
        "auc": rows,
    }
