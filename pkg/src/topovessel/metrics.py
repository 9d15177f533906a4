"""Overlap, centerline and topology metrics for arteriole/venule segmentations, plus ROC/AUC.

Rates are percentages. Every rate is backed by integer counts so that
per-image records can be pooled by plain addition (micro-average).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .raster import AVGroundTruth, as_mask, as_prob, check_same_shape
from .skeletal import BranchLabeling

REGIONS = ("all", "centerline")


@dataclass(frozen=True)
class ConfusionCounts:
    """Arteriole-positive confusion counts on an evaluation set."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def f1(self) -> float | None:
        den = 2 * self.tp + self.fp + self.fn
        return None if den == 0 else 100.0 * 2 * self.tp / den

    def accuracy(self) -> float | None:
        return None if self.n == 0 else 100.0 * (self.tp + self.tn) / self.n

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))


@dataclass(frozen=True)
class HitCounts:
    hit: int = 0
    total: int = 0

    def rate(self) -> float | None:
        return None if self.total == 0 else 100.0 * self.hit / self.total

    def __add__(self, other: "HitCounts") -> "HitCounts":
        return HitCounts(self.hit + other.hit, self.total + other.total)


@dataclass(frozen=True)
class MetricCounts:
    """Everything a :class:`MetricReport` is computed from; addition pools images."""

    av_all: ConfusionCounts = field(default_factory=ConfusionCounts)
    av_centerline: ConfusionCounts = field(default_factory=ConfusionCounts)
    branches: HitCounts = field(default_factory=HitCounts)
    tree_length: HitCounts = field(default_factory=HitCounts)
    vessel: HitCounts = field(default_factory=HitCounts)

    def __add__(self, other: "MetricCounts") -> "MetricCounts":
        return MetricCounts(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    def report(self) -> "MetricReport":
        return MetricReport(
            f1_all=self.av_all.f1(),
            acc_all=self.av_all.accuracy(),
            f1_centerline=self.av_centerline.f1(),
            acc_centerline=self.av_centerline.accuracy(),
            branch_rate=self.branches.rate(),
            tree_length_rate=self.tree_length.rate(),
            vessel_rate=self.vessel.rate(),
            counts=self,
        )


@dataclass(frozen=True)
class MetricReport:
    f1_all: float | None = None
    acc_all: float | None = None
    f1_centerline: float | None = None
    acc_centerline: float | None = None
    branch_rate: float | None = None
    tree_length_rate: float | None = None
    vessel_rate: float | None = None
    counts: MetricCounts | None = None

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "counts"}
        if self.counts is not None:
            c = self.counts
            out["counts"] = {
                "av_all": vars(c.av_all).copy(),
                "av_centerline": vars(c.av_centerline).copy(),
                "branches": vars(c.branches).copy(),
                "tree_length": vars(c.tree_length).copy(),
                "vessel": vars(c.vessel).copy(),
            }
        return out


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray  # descending, starts at +inf, ends at 0
    tpr: np.ndarray
    fpr: np.ndarray
    auc: float | None
    n_pos: int
    n_neg: int


# --- AV classification ----------------------------------------------------------------


def av_confusion(pred_a, pred_v, gt: AVGroundTruth, region=None, include_crossings: bool = False) -> ConfusionCounts:
    """Confusion counts of the arteriole/venule labelling.

    Evaluated on GT vessel pixels (inside ``region`` when given) that carry
    a single GT class, and that the prediction labels as exactly one of
    arteriole or venule. With ``include_crossings`` GT crossings stay in the
    set and count as arteriole. Uncertain pixels are always left out.
    """
    pa = as_mask(pred_a, "arteriole prediction")
    pv = as_mask(pred_v, "venule prediction")
    check_same_shape(ground_truth=gt.vessel, arteriole_prediction=pa, venule_prediction=pv)
    keep = gt.vessel & ~gt.uncertain
    if not include_crossings:
        keep &= ~gt.crossing
    if region is not None:
        region = as_mask(region, "region")
        check_same_shape(ground_truth=gt.vessel, region=region)
        keep &= region
    keep &= pa ^ pv
    truth = gt.arteriole[keep]
    said = pa[keep]
    tp = int(np.count_nonzero(truth & said))
    fp = int(np.count_nonzero(~truth & said))
    fn = int(np.count_nonzero(truth & ~said))
    tn = int(truth.size - tp - fp - fn)
    return ConfusionCounts(tp, fp, fn, tn)


def av_classification_metrics(
    pred_a, pred_v, gt: AVGroundTruth, region: str = "all", centerline=None, include_crossings: bool = False
) -> tuple[float | None, float | None, int]:
    """F1 and accuracy (percent) of the AV labelling, plus the evaluation-set size.

    ``region="centerline"`` restricts evaluation to ``centerline`` pixels.
    Both metrics are ``None`` when the evaluation set is empty.
    """
    if region not in REGIONS:
        raise ValueError(f"region must be one of {REGIONS}, got {region!r}")
    if region == "centerline":
        if centerline is None:
            raise ValueError("region='centerline' needs a centerline mask")
        counts = av_confusion(pred_a, pred_v, gt, centerline, include_crossings)
    else:
        counts = av_confusion(pred_a, pred_v, gt, None, include_crossings)
    return counts.f1(), counts.accuracy(), counts.n


# --- topology rates -------------------------------------------------------------------


def _coverage(pred, ref, pred_name, ref_name) -> HitCounts:
    pred = as_mask(pred, pred_name)
    ref = as_mask(ref, ref_name)
    check_same_shape(**{pred_name: pred, ref_name: ref})
    return HitCounts(int(np.count_nonzero(pred & ref)), int(np.count_nonzero(ref)))


def vessel_counts(pred_vessel, gt: AVGroundTruth) -> HitCounts:
    return _coverage(pred_vessel, gt.vessel, "prediction", "ground_truth")


def vessel_detection_rate(pred_vessel, gt: AVGroundTruth) -> float | None:
    """Percent of GT vessel pixels predicted as vessel."""
    return vessel_counts(pred_vessel, gt).rate()


def tree_length_counts(pred_vessel, gt_skel) -> HitCounts:
    return _coverage(pred_vessel, gt_skel, "prediction", "skeleton")


def tree_length_rate(pred_vessel, gt_skel) -> float | None:
    """Percent of GT centerline pixels covered by the prediction."""
    return tree_length_counts(pred_vessel, gt_skel).rate()


def branch_counts(pred_vessel, branches: BranchLabeling, tau: float = 0.8) -> HitCounts:
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    pred = as_mask(pred_vessel, "prediction")
    check_same_shape(prediction=pred, branches=branches.labels)
    n = branches.n_branches
    sizes = np.bincount(branches.labels.ravel(), minlength=n + 1)[1:]
    covered = np.bincount(branches.labels[pred], minlength=n + 1)[1:]
    detected = int(np.count_nonzero(covered >= tau * sizes))
    return HitCounts(detected, int(n))


def branch_detection_rate(pred_vessel, branches: BranchLabeling, tau: float = 0.8) -> float | None:
    """Percent of labelled GT branches with at least ``tau`` of their pixels predicted."""
    return branch_counts(pred_vessel, branches, tau).rate()


def metric_counts(
    pred_a,
    pred_v,
    pred_vessel,
    gt: AVGroundTruth,
    centerline,
    branches: BranchLabeling,
    tau: float = 0.8,
    include_crossings: bool = False,
) -> MetricCounts:
    """All count records for one image pair."""
    return MetricCounts(
        av_all=av_confusion(pred_a, pred_v, gt, None, include_crossings),
        av_centerline=av_confusion(pred_a, pred_v, gt, centerline, include_crossings),
        branches=branch_counts(pred_vessel, branches, tau),
        tree_length=tree_length_counts(pred_vessel, centerline),
        vessel=vessel_counts(pred_vessel, gt),
    )


def pool(records) -> MetricCounts:
    total = MetricCounts()
    for r in records:
        total = total + r
    return total


def aggregate_scores(report: MetricReport) -> tuple[float, float] | None:
    """``(overlap, topology)``: mean of all-pixel F1 and accuracy, mean of the three detection rates."""
    parts = (report.f1_all, report.acc_all, report.tree_length_rate, report.branch_rate, report.vessel_rate)
    if any(v is None for v in parts):
        return None
    f1, acc, tree, branch, vessel = parts
    return (f1 + acc) / 2.0, (tree + branch + vessel) / 3.0


# --- ROC ------------------------------------------------------------------------------


def roc(pred_prob, gt_mask, fov=None, n_thresholds: int | None = None) -> RocCurve:
    """ROC over FOV pixels; a pixel is positive at threshold ``t`` when ``p >= t``.

    Thresholds are the distinct predicted values (evenly subsampled to
    ``n_thresholds`` if given) between the sentinels ``+inf`` and ``0``.
    AUC is the trapezoid rule, ``None`` when the FOV holds one class only.
    """
    p = as_prob(pred_prob, "prediction")
    g = as_mask(gt_mask, "ground truth")
    fov = np.ones(p.shape, dtype=bool) if fov is None else as_mask(fov, "fov")
    check_same_shape(prediction=p, ground_truth=g, fov=fov)
    if not fov.any():
        raise ValueError("field of view is empty")
    scores = p[fov]
    labels = g[fov]
    pos = np.sort(scores[labels])
    neg = np.sort(scores[~labels])

    values = np.unique(scores)[::-1]
    if n_thresholds is not None and len(values) > n_thresholds:
        if n_thresholds < 1:
            raise ValueError(f"n_thresholds must be >= 1, got {n_thresholds}")
        pick = np.unique(np.linspace(0, len(values) - 1, n_thresholds).round().astype(int))
        values = values[pick]
    thresholds = np.concatenate(([np.inf], values[values > 0], [0.0]))

    # counts of samples >= t
    tp = len(pos) - np.searchsorted(pos, thresholds, side="left")
    fp = len(neg) - np.searchsorted(neg, thresholds, side="left")
    n_pos, n_neg = len(pos), len(neg)
    tpr = tp / n_pos if n_pos else np.full(len(thresholds), np.nan)
    fpr = fp / n_neg if n_neg else np.full(len(thresholds), np.nan)
    auc = None
    if n_pos and n_neg:
        # twice the trapezoid area in integer units, divided once
        area2 = int(np.sum(np.diff(fp) * (tp[1:] + tp[:-1])))
        auc = area2 / (2.0 * n_pos * n_neg)
    return RocCurve(thresholds, tpr, fpr, auc, n_pos, n_neg)
