"""Tipping-point detection in expressive music performance.

Two detectors are provided: outlier beat durations (``timing``) and
high-to-low changepoints in spiral-array tonal tension (``tension`` +
``changepoint``). ``evaluate`` scores both against listener marks.
"""

__version__ = "0.1.0"

from .changepoint import (
    Changepoint,
    CostModel,
    Model2Config,
    Penalty,
    Segmentation,
    amoc,
    high_to_low_filter,
    model2_predict,
    optimal_partition,
    pelt,
    segment_cost,
)
from .evaluate import MatchReport, PopularPoint, annotation_spread, match_predictions, popular_points
from .ingest import (
    AnnotationSet,
    BeatEntry,
    BeatGrid,
    ListenerMark,
    NoteEvent,
    PieceBundle,
    parse_annotations,
    parse_beats,
    parse_notes,
    validate_bundle,
)
from .spiral import HelixParams, KeySpec, chord_ce, key_ce, parse_key, pitch_position, spell_pitch, weighted_ce
from .tension import TensionConfig, TensionSeries, build_clouds, tension_series
from .timing import BeatDurationSeries, PredictedPoint, beat_durations, model1_predict

__all__ = [
    "Changepoint",
    "CostModel",
    "Model2Config",
    "Penalty",
    "Segmentation",
    "amoc",
    "high_to_low_filter",
    "model2_predict",
    "optimal_partition",
    "pelt",
    "segment_cost",
    "MatchReport",
    "PopularPoint",
    "annotation_spread",
    "match_predictions",
    "popular_points",
    "AnnotationSet",
    "BeatEntry",
    "BeatGrid",
    "ListenerMark",
    "NoteEvent",
    "PieceBundle",
    "parse_annotations",
    "parse_beats",
    "parse_notes",
    "validate_bundle",
    "HelixParams",
    "KeySpec",
    "chord_ce",
    "key_ce",
    "parse_key",
    "pitch_position",
    "spell_pitch",
    "weighted_ce",
    "TensionConfig",
    "TensionSeries",
    "build_clouds",
    "tension_series",
    "BeatDurationSeries",
    "PredictedPoint",
    "beat_durations",
    "model1_predict",
]
