"""Edge-detection scores for estimated transition matrices and binary graphs."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

CLIP_THRESHOLD = 1e-10


@dataclass(frozen=True)
class BinaryGraph:
    """Directed graph as a boolean adjacency matrix.

    ``adjacency[n, m]`` is True when series m drives series n, matching the
    (n, m) entry of a transition matrix.
    """

    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.array(self.adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {adj.shape}")
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)


@dataclass(frozen=True)
class EdgeReport:
    rmse: float | None
    accuracy: float
    precision: float
    recall: float
    specificity: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def binarize(A_hat, threshold: float = CLIP_THRESHOLD) -> np.ndarray:
    """Edge mask ``|a| >= threshold``.

    With ``threshold = 0`` every entry, zeros included, counts as an edge.
    """
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    return np.abs(np.asarray(A_hat, dtype=float)) >= threshold


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def score(A_hat, A_true, threshold: float = CLIP_THRESHOLD) -> EdgeReport:
    """Compare an estimate against the true transition matrix.

    Every one of the N^2 positions, the diagonal included, is scored.
    ``A_hat`` may be a :class:`BinaryGraph` or boolean array, in which case no
    RMSE is reported.  Rates with an empty denominator are reported as 0.
    """
    A_true = np.asarray(A_true, dtype=float)
    if isinstance(A_hat, BinaryGraph):
        A_hat = A_hat.adjacency
    A_hat = np.asarray(A_hat)
    if A_hat.shape != A_true.shape:
        raise ValueError(f"shape mismatch: estimate {A_hat.shape} vs truth {A_true.shape}")

    truth = A_true != 0
    if A_hat.dtype == bool:
        est, rmse = A_hat, None
    else:
        est = binarize(A_hat, threshold)
        rmse = math.sqrt(float(np.mean((A_hat.astype(float) - A_true) ** 2)))

    tp = int(np.sum(est & truth))
    fp = int(np.sum(est & ~truth))
    tn = int(np.sum(~est & ~truth))
    fn = int(np.sum(~est & truth))
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = _ratio(2 * precision * recall, precision + recall) if precision + recall else 0.0
    return EdgeReport(
        rmse=rmse,
        accuracy=(tp + tn) / truth.size,
        precision=precision,
        recall=recall,
        specificity=_ratio(tn, tn + fp),
        f1=f1,
        tp=tp, fp=fp, tn=tn, fn=fn,
    )


def mean_report(reports) -> dict:
    """Field-wise arithmetic mean of a list of reports (``rmse`` None if absent)."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to average")
    out = {}
    for name in ("rmse", "accuracy", "precision", "recall", "specificity", "f1",
                 "tp", "fp", "tn", "fn"):
        vals = [getattr(r, name) for r in reports]
        out[name] = None if any(v is None for v in vals) else float(np.mean(vals))
    return out
