"""Segmentation quality metrics: confusion counts and the four derived
indicators (PWC, FNR, FPR, Si) with pooled per-sequence aggregation.

Ground-truth pixels labelled ignore are excluded from every counter. A metric
whose denominator is zero is reported as None (undefined), never as 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .errors import DimensionError
from .frames import GT_BACKGROUND, GT_FOREGROUND, GroundTruthMask

CSV_COLUMNS = ["sequence", "algorithm", "mode", "PWC", "FNR", "FPR", "Si",
               "TP", "TN", "FP", "FN"]


@dataclass
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.tn + other.tn,
            self.fp + other.fp, self.fn + other.fn,
        )

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass
class MetricsReport:
    pwc: Optional[float]
    fnr: Optional[float]
    fpr: Optional[float]
    si: Optional[float]
    counts: ConfusionCounts


def compare_masks(result: np.ndarray, gt: GroundTruthMask) -> ConfusionCounts:
    """Count TP/TN/FP/FN between a result mask (0/255) and a ground truth.

    Ignore-labelled ground-truth pixels contribute to no counter; every other
    pixel increments exactly one.
    """
    labels = gt.labels
    if result.shape != labels.shape:
        raise DimensionError(
            f"mask dimensions {result.shape} do not match ground truth {labels.shape}"
        )
    fg = result > 127
    gt_fg = labels == GT_FOREGROUND
    gt_bg = labels == GT_BACKGROUND
    return ConfusionCounts(
        tp=int(np.count_nonzero(fg & gt_fg)),
        tn=int(np.count_nonzero(~fg & gt_bg)),
        fp=int(np.count_nonzero(fg & gt_bg)),
        fn=int(np.count_nonzero(~fg & gt_fg)),
    )


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den > 0 else None


def compute_metrics(c: ConfusionCounts) -> MetricsReport:
    """Derive the four quality indicators from confusion counts.

    PWC = 100(FN + FP)/(TP + FN + FP + TN), FNR = FN/(TP + FN),
    FPR = FP/(FP + TN), Si = TP/(TP + FP + FN).
    """
    pwc = _ratio(c.fn + c.fp, c.total)
    return MetricsReport(
        pwc=None if pwc is None else 100.0 * pwc,
        fnr=_ratio(c.fn, c.tp + c.fn),
        fpr=_ratio(c.fp, c.fp + c.tn),
        si=_ratio(c.tp, c.tp + c.fp + c.fn),
        counts=c,
    )


def aggregate_sequence(per_frame: Iterable[ConfusionCounts]) -> MetricsReport:
    """Pool counts over all frames, then compute the metrics once."""
    total = ConfusionCounts()
    seen = False
    for c in per_frame:
        total = total + c
        seen = True
    if not seen:
        raise ValueError("aggregate_sequence needs at least one frame")
    return compute_metrics(total)


@dataclass
class ReportRow:
    sequence: str
    algorithm: str
    mode: str
    report: MetricsReport

    def as_record(self) -> dict:
        r = self.report
        c = r.counts

        def fmt(v):
            return float("nan") if v is None else v

        return {
            "sequence": self.sequence, "algorithm": self.algorithm, "mode": self.mode,
            "PWC": fmt(r.pwc), "FNR": fmt(r.fnr), "FPR": fmt(r.fpr), "Si": fmt(r.si),
            "TP": c.tp, "TN": c.tn, "FP": c.fp, "FN": c.fn,
        }


def format_report_table(rows: list[ReportRow]) -> str:
    """Render report rows as a plain-text table."""
    header = CSV_COLUMNS
    table = [header]
    for row in rows:
        rec = row.as_record()
        cells = []
        for col in header:
            v = rec[col]
            if isinstance(v, float):
                cells.append("undefined" if np.isnan(v) else f"{v:.4f}")
            else:
                cells.append(str(v))
        table.append(cells)
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    lines = []
    for i, r in enumerate(table):
        lines.append("  ".join(c.rjust(w) for c, w in zip(r, widths)))
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def write_report_csv(path, rows: list[ReportRow]) -> None:
    """Write report rows as CSV; undefined metrics are written as nan."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row.as_record())
