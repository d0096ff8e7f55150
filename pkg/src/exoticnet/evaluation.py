"""Significance metric, threshold selection, averaging, submissions.

The selection objective is the approximate median significance of a
signal count s over background b with a regularizing constant::

    AMS(s, b) = sqrt( 2 * ( (s + b + b_reg) * ln(1 + s / (b + b_reg)) - s ) )

where s and b are sums of importance weights (not counts) over the
selected true-signal and selected-background events.  Thresholds are
expressed as score percentiles: cutting at percentile p keeps the top
(100 - p) percent of scores as the signal region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ShapeError

DEFAULT_GRID_LO = 80.0
DEFAULT_GRID_HI = 92.0
DEFAULT_GRID_POINTS = 121  # 0.1-percentile steps


def default_grid() -> np.ndarray:
    return np.linspace(DEFAULT_GRID_LO, DEFAULT_GRID_HI, DEFAULT_GRID_POINTS)


@dataclass(frozen=True)
class AmsConfig:
    b_reg: float = 10.0

    def __post_init__(self):
        if self.b_reg < 0.0:
            raise ValueError(f"b_reg must be >= 0, got {self.b_reg}")


def ams(s: float, b: float, cfg: AmsConfig = AmsConfig()) -> float:
    if s < 0.0 or b < 0.0:
        raise ValueError(f"ams needs s >= 0 and b >= 0, got s={s}, b={b}")
    denom = b + cfg.b_reg
    if denom == 0.0:
        return 0.0 if s == 0.0 else math.inf
    radicand = 2.0 * ((s + denom) * math.log1p(s / denom) - s)
    # roundoff can leave a tiny negative when s is near zero
    return math.sqrt(max(radicand, 0.0))


@dataclass
class SelectionStats:
    s: float  # selected true-signal weight
    b: float  # selected background weight
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float


def _check_lengths(scores, weights, labels):
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if not (scores.shape == weights.shape == labels.shape):
        raise ShapeError(
            f"scores/weights/labels lengths differ: "
            f"{scores.shape[0]}/{weights.shape[0]}/{labels.shape[0]}"
        )
    return scores, weights, labels


def select_and_score(scores, weights, labels, threshold: float) -> SelectionStats:
    """Confusion and selected-weight sums for the rule ``score > threshold``."""
    scores, weights, labels = _check_lengths(scores, weights, labels)
    if not math.isfinite(threshold):
        raise ValueError(f"threshold must be finite, got {threshold}")
    selected = scores > threshold
    signal = labels == 1
    tp = int(np.count_nonzero(selected & signal))
    fp = int(np.count_nonzero(selected & ~signal))
    fn = int(np.count_nonzero(~selected & signal))
    tn = int(np.count_nonzero(~selected & ~signal))
    total = scores.shape[0]
    return SelectionStats(
        s=float(weights[selected & signal].sum()),
        b=float(weights[selected & ~signal].sum()),
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        accuracy=(tp + tn) / total if total else 0.0,
    )


def percentile_threshold(scores: np.ndarray, p: float) -> float:
    """p-th percentile by the inverted-CDF convention: the value at rank
    ceil(p/100 * n) (1-based) of the ascending sort."""
    n = scores.shape[0]
    rank = math.ceil(p / 100.0 * n)
    rank = min(max(rank, 1), n)
    return float(np.sort(scores)[rank - 1])


@dataclass
class ThresholdSweepResult:
    percentiles: np.ndarray
    thresholds: np.ndarray
    ams_values: np.ndarray
    best_index: int
    best_percentile: float
    best_ams: float
    best_threshold: float


def sweep_threshold(
    scores,
    weights,
    labels,
    grid: Optional[Sequence[float]] = None,
    cfg: AmsConfig = AmsConfig(),
) -> ThresholdSweepResult:
    """AMS at every grid percentile; argmax with ties going to the
    smaller percentile."""
    scores, weights, labels = _check_lengths(scores, weights, labels)
    grid = default_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("percentile grid must be nonempty")
    if np.any(grid <= 0.0) or np.any(grid >= 100.0):
        raise ValueError("percentiles must lie strictly between 0 and 100")

    sorted_scores = np.sort(scores)
    n = scores.shape[0]
    thresholds = np.empty(grid.size)
    values = np.empty(grid.size)
    for i, p in enumerate(grid):
        rank = min(max(math.ceil(p / 100.0 * n), 1), n)
        thresholds[i] = sorted_scores[rank - 1]
        stats = select_and_score(scores, weights, labels, thresholds[i])
        values[i] = ams(stats.s, stats.b, cfg)
    best = int(np.argmax(values))  # argmax returns the first (smallest) tie
    return ThresholdSweepResult(
        percentiles=grid,
        thresholds=thresholds,
        ams_values=values,
        best_index=best,
        best_percentile=float(grid[best]),
        best_ams=float(values[best]),
        best_threshold=float(thresholds[best]),
    )


def ensemble_average(score_lists: Sequence) -> np.ndarray:
    """Elementwise mean of one or more equal-length score lists."""
    if len(score_lists) == 0:
        raise ValueError("ensemble_average needs at least one score list")
    arrays = [np.asarray(s, dtype=np.float64).reshape(-1) for s in score_lists]
    length = arrays[0].shape[0]
    for i, a in enumerate(arrays):
        if a.shape[0] != length:
            raise ValueError(
                f"score list {i} has length {a.shape[0]}, expected {length}"
            )
    # anchored on the first list: averaging identical lists is an exact no-op
    base = arrays[0]
    if len(arrays) == 1:
        return base.copy()
    acc = np.zeros(length)
    for a in arrays[1:]:
        acc += a - base
    return base + acc / len(arrays)


def write_submission(ids, scores, signal_percentile: float, path) -> int:
    """Challenge-format submission: EventId,RankOrder,Class.

    RankOrder permutes 1..N with the highest score at rank N; ties break
    by ascending EventId.  The top (100 - signal_percentile) percent by
    rank are labeled 's'.  Rows keep the input order.
    """
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if ids.shape != scores.shape:
        raise ShapeError(
            f"ids length {ids.shape[0]} does not match scores length {scores.shape[0]}"
        )
    if not 0.0 < signal_percentile < 100.0:
        raise ValueError(
            f"signal_percentile must lie in (0, 100), got {signal_percentile}"
        )
    n = ids.shape[0]
    order = np.lexsort((ids, scores))  # ascending score, then ascending id
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = np.arange(1, n + 1)
    n_signal = int(round(n * (100.0 - signal_percentile) / 100.0))
    cut = n - n_signal
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("EventId,RankOrder,Class\n")
        for i in range(n):
            cls = "s" if ranks[i] > cut else "b"
            fh.write(f"{ids[i]},{ranks[i]},{cls}\n")
    return n
