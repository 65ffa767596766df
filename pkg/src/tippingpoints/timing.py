"""
Time-based tipping points: beats whose performed duration is an outlier.

A beat ``i`` is flagged when ``d_i > mean(d) + multiplier * std(d)`` with the
sample (n-1) standard deviation taken over every beat of the piece. Beats in
the first and last ``edge_bars`` bars are never flagged, but their durations
still enter the statistics.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .ingest import BeatGrid, TooFewBeats

__all__ = ["BeatDurationSeries", "PredictedPoint", "beat_durations", "model1_predict", "threshold"]


@dataclass(frozen=True)
class BeatDurationSeries:
    durations: np.ndarray
    start_times: np.ndarray
    bar_numbers: np.ndarray
    mean: float
    sample_std: float

    def __len__(self):
        return len(self.durations)


@dataclass(frozen=True)
class PredictedPoint:
    time_s: float
    source: str  # "model1" | "model2"
    score: float
    channel: Optional[str] = None
    bar_number: Optional[int] = None


def beat_durations(beats: BeatGrid) -> BeatDurationSeries:
    if len(beats) < 2:
        raise TooFewBeats(f"need at least 2 beats, got {len(beats)}")
    times = np.asarray(beats.times, dtype=float)
    d = np.diff(times)
    # a single duration has no spread; report 0 rather than nan
    std = float(np.std(d, ddof=1)) if len(d) > 1 else 0.0
    return BeatDurationSeries(
        durations=d,
        start_times=times[:-1],
        bar_numbers=np.asarray(beats.bars[:-1], dtype=int),
        mean=float(np.mean(d)),
        sample_std=std,
    )


def threshold(series: BeatDurationSeries, multiplier: float = 2.5) -> float:
    return series.mean + multiplier * series.sample_std


def model1_predict(
    beats: BeatGrid, multiplier: float = 2.5, edge_bars: int = 3
) -> List[PredictedPoint]:
    """Flag beats longer than ``mean + multiplier * sample_std``.

    Each flagged beat is reported at its start time with score
    ``(d_i - mean) / std``.
    """
    if not multiplier > 0:
        raise ValueError(f"multiplier must be positive, got {multiplier}")
    if edge_bars < 0:
        raise ValueError(f"edge_bars must be >= 0, got {edge_bars}")
    series = beat_durations(beats)
    if series.sample_std == 0.0:
        # identical durations; rounding in the mean must not flag anything
        return []
    limit = threshold(series, multiplier)
    n_bars = beats.n_bars
    keep = (
        (series.durations > limit)
        & (series.bar_numbers > edge_bars)
        & (series.bar_numbers <= n_bars - edge_bars)
    )
    out = []
    for i in np.flatnonzero(keep):
        score = (series.durations[i] - series.mean) / series.sample_std
        out.append(
            PredictedPoint(
                time_s=float(series.start_times[i]),
                source="model1",
                score=float(score),
                bar_number=int(series.bar_numbers[i]),
            )
        )
    return out
