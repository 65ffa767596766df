"""
Scoring model predictions against listener tipping-point marks.

A time is *popular* when at least ``threshold`` of the listeners marked a
point inside the symmetric window ``[c - half_window, c + half_window]``.
Candidate centers ``c`` lie on a fixed grid; consecutive qualifying centers
merge into one popular interval. A model *locates* a popular interval when
one of its predictions falls inside the interval widened by the same
half-window on both sides.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .ingest import AnnotationSet

__all__ = [
    "PopularPoint",
    "MatchReport",
    "STATUSES",
    "popular_points",
    "match_predictions",
    "annotation_spread",
    "aggregate_proportions",
    "TooFewMarks",
    "EmptyAnnotations",
]

STATUSES = ("both", "model1_only", "model2_only", "neither")


class EmptyAnnotations(UserWarning):
    pass


class TooFewMarks(UserWarning):
    pass


@dataclass(frozen=True)
class PopularPoint:
    interval_start_s: float
    interval_end_s: float
    peak_fraction: float
    supporter_ids: Tuple[str, ...] = ()

    @property
    def center_s(self) -> float:
        return 0.5 * (self.interval_start_s + self.interval_end_s)


@dataclass
class MatchReport:
    piece_id: str
    popular_points: List[PopularPoint]
    per_point_status: List[str]
    proportions: Dict[str, float]
    spread_s: Optional[float] = None
    warnings: List[str] = field(default_factory=list)


def _coverage_counts(times: np.ndarray, centers: np.ndarray, half_window_s: float) -> np.ndarray:
    lo = np.searchsorted(times, centers - half_window_s, side="left")
    hi = np.searchsorted(times, centers + half_window_s, side="right")
    return hi - lo


def popular_points(
    annotations: AnnotationSet,
    half_window_s: float = 2.0,
    threshold: float = 0.25,
    grid_step_s: float = 0.5,
    span: Optional[Tuple[float, float]] = None,
) -> List[PopularPoint]:
    """Maximal runs of grid centers whose window holds at least ``threshold``
    of the listeners' marks.

    The grid is ``k * grid_step_s`` for integer ``k`` covering ``span``
    (default: the marks' range widened by one half-window).
    """
    if half_window_s <= 0 or grid_step_s <= 0:
        raise ValueError("half_window_s and grid_step_s must be positive")
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    if annotations.n_listeners < 1 or not annotations.marks:
        warnings.warn(
            f"piece {annotations.piece_id!r} has no listener marks", EmptyAnnotations, stacklevel=2
        )
        return []
    marks = sorted(annotations.marks, key=lambda m: (m.time_s, m.listener_id))
    times = np.array([m.time_s for m in marks])
    if span is None:
        span = (times[0] - half_window_s, times[-1] + half_window_s)
    k0 = math.floor(span[0] / grid_step_s)
    k1 = math.ceil(span[1] / grid_step_s)
    centers = np.arange(k0, k1 + 1) * grid_step_s
    counts = _coverage_counts(times, centers, half_window_s)
    frac = counts / annotations.n_listeners
    ok = frac >= threshold - 1e-12

    out = []
    i = 0
    while i < len(centers):
        if not ok[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(centers) and ok[j + 1]:
            j += 1
        start, end = float(centers[i]), float(centers[j])
        supporters = tuple(
            m.listener_id for m in marks if start - half_window_s <= m.time_s <= end + half_window_s
        )
        out.append(PopularPoint(start, end, float(frac[i : j + 1].max()), supporters))
        i = j + 1
    return out


def _located(point: PopularPoint, times: Sequence[float], half_window_s: float) -> bool:
    lo = point.interval_start_s - half_window_s
    hi = point.interval_end_s + half_window_s
    return any(lo <= t <= hi for t in times)


def match_predictions(
    popular: Sequence[PopularPoint],
    m1: Sequence,
    m2: Sequence,
    half_window_s: float = 2.0,
    piece_id: str = "",
    spread_s: Optional[float] = None,
) -> MatchReport:
    """Classify every popular point by which model(s) located it.

    ``m1`` and ``m2`` are any objects with a ``time_s`` attribute.
    """
    t1 = [p.time_s for p in m1]
    t2 = [p.time_s for p in m2]
    status = []
    for p in popular:
        a, b = _located(p, t1, half_window_s), _located(p, t2, half_window_s)
        status.append("both" if a and b else "model1_only" if a else "model2_only" if b else "neither")
    return MatchReport(
        piece_id=piece_id,
        popular_points=list(popular),
        per_point_status=status,
        proportions=_proportions(status),
        spread_s=spread_s,
    )


def _proportions(statuses: Sequence[str]) -> Dict[str, float]:
    n = len(statuses)
    return {s: (statuses.count(s) / n if n else 0.0) for s in STATUSES}


def aggregate_proportions(reports: Sequence[MatchReport]) -> Dict[str, float]:
    """Status proportions pooled over the popular points of every report."""
    return _proportions([s for r in reports for s in r.per_point_status])


def piece_spread(annotations: AnnotationSet) -> Optional[float]:
    """Sample standard deviation of mark times, or None with fewer than 2 marks."""
    if len(annotations.marks) < 2:
        return None
    return float(np.std(annotations.times, ddof=1))


def annotation_spread(annotation_sets: Sequence[AnnotationSet]) -> float:
    """Mean over pieces of the sample standard deviation of mark times."""
    stds = []
    for a in annotation_sets:
        s = piece_spread(a)
        if s is None:
            warnings.warn(
                f"piece {a.piece_id!r} has fewer than 2 marks; skipped", TooFewMarks, stacklevel=2
            )
            continue
        stds.append(s)
    if not stds:
        raise ValueError("no piece has at least 2 marks")
    return float(np.mean(stds))
