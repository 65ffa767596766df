"""
Tonal tension signals over beat-aligned windows.

Each window's notes form a "cloud" of helix points weighted by how many
seconds each note sounds inside the window. Three signals follow:

diameter  -- largest distance between two distinct pitches of the cloud
momentum  -- distance between consecutive cloud centers
strain    -- distance from the cloud center to the key center
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .ingest import NoteEvent, PieceBundle
from .spiral import (
    HelixParams,
    KeySpec,
    key_ce,
    pairwise_max_distance,
    pitch_position,
    spell_pitch,
    weighted_ce,
)

__all__ = [
    "CloudWindow",
    "TensionConfig",
    "TensionSeries",
    "NoKeyAndNoNotes",
    "build_clouds",
    "cloud_diameter",
    "cloud_momentum",
    "tensile_strain",
    "tension_series",
    "key_center",
]

FALLBACK_KEY_LABEL = "fallback-global-ce"

# spelling reference for unspelled notes when no key is given
_SPELLING_FALLBACK = KeySpec(0, "major")


class NoKeyAndNoNotes(ValueError):
    pass


@dataclass(frozen=True)
class CloudWindow:
    window_index: int
    start_s: float
    end_s: float
    members: Tuple[Tuple[int, float], ...]
    ce: np.ndarray = field(compare=False)
    carried: bool = False


@dataclass(frozen=True)
class TensionConfig:
    window_beats: int = 1
    params: HelixParams = HelixParams()

    def __post_init__(self):
        if self.window_beats < 1:
            raise ValueError(f"window_beats must be >= 1, got {self.window_beats}")


@dataclass
class TensionSeries:
    piece_id: str
    window_times: np.ndarray
    diameter: np.ndarray
    momentum: np.ndarray
    strain: np.ndarray
    metadata: Dict[str, str] = field(default_factory=dict)

    def __len__(self):
        return len(self.window_times)


def note_fifths(note: NoteEvent, key: Optional[KeySpec]) -> int:
    if note.spelled_fifths is not None:
        return note.spelled_fifths
    return spell_pitch(note.midi_pitch, key or _SPELLING_FALLBACK)


def key_center(bundle: PieceBundle, params: HelixParams = HelixParams()) -> np.ndarray:
    """Center of the supplied key, or the duration-weighted center of every
    note in the piece when no key is given."""
    if bundle.key is not None:
        return key_ce(bundle.key, params)
    if not bundle.notes:
        raise NoKeyAndNoNotes("no key given and no notes to derive a tonal center from")
    pts = [pitch_position(note_fifths(n, None), params) for n in bundle.notes]
    return weighted_ce(pts, [n.duration_s for n in bundle.notes])


def _window_bounds(times, window_beats):
    """Beat-index boundaries for windows of ``window_beats`` beats; the last
    window may be shorter."""
    last = len(times) - 1
    idx = list(range(0, last, window_beats)) + [last]
    return [(times[a], times[b]) for a, b in zip(idx, idx[1:])]


def build_clouds(
    bundle: PieceBundle, window_beats: int = 1, params: HelixParams = HelixParams()
) -> List[CloudWindow]:
    if window_beats < 1:
        raise ValueError(f"window_beats must be >= 1, got {window_beats}")
    if bundle.key is None and not bundle.notes:
        raise NoKeyAndNoNotes("cannot anchor empty windows without a key or notes")
    bounds = _window_bounds(bundle.beats.times, window_beats)
    onsets = np.array([n.onset_s for n in bundle.notes], dtype=float)
    offsets = np.array([n.offset_s for n in bundle.notes], dtype=float)
    ks = np.array([note_fifths(n, bundle.key) for n in bundle.notes], dtype=np.int64)

    clouds = []
    prev_ce = None
    for w, (start, end) in enumerate(bounds):
        overlap = np.minimum(offsets, end) - np.maximum(onsets, start)
        hit = overlap > 0
        members = {}
        for k, ov in zip(ks[hit].tolist(), overlap[hit].tolist()):
            members[k] = members.get(k, 0.0) + ov
        members = tuple(sorted(members.items()))
        if members:
            ce = weighted_ce([pitch_position(k, params) for k, _ in members], [v for _, v in members])
            carried = False
        else:
            ce = prev_ce if prev_ce is not None else key_center(bundle, params)
            carried = True
        clouds.append(CloudWindow(w, start, end, members, ce, carried))
        prev_ce = ce
    return clouds


def cloud_diameter(cloud: CloudWindow, params: HelixParams = HelixParams()) -> float:
    pts = [pitch_position(k, params) for k, wt in cloud.members if wt > 0]
    return pairwise_max_distance(pts)


def cloud_momentum(prev: CloudWindow, cur: CloudWindow) -> float:
    return float(np.linalg.norm(cur.ce - prev.ce))


def tensile_strain(
    cloud: CloudWindow,
    key: Optional[KeySpec] = None,
    params: HelixParams = HelixParams(),
    center: Optional[np.ndarray] = None,
) -> float:
    """Distance from the cloud center to ``key``'s center (or to ``center``)."""
    if center is None:
        if key is None:
            raise ValueError("need a key or an explicit center")
        center = key_ce(key, params)
    return float(np.linalg.norm(cloud.ce - center))


def tension_series(bundle: PieceBundle, config: TensionConfig = TensionConfig()) -> TensionSeries:
    params = config.params
    clouds = build_clouds(bundle, config.window_beats, params)
    center = key_center(bundle, params)
    diameter = np.array([cloud_diameter(c, params) for c in clouds])
    momentum = np.zeros(len(clouds))
    for i in range(1, len(clouds)):
        momentum[i] = cloud_momentum(clouds[i - 1], clouds[i])
    strain = np.array([tensile_strain(c, params=params, center=center) for c in clouds])
    meta = {
        "key": str(bundle.key) if bundle.key is not None else FALLBACK_KEY_LABEL,
        "window_beats": str(config.window_beats),
        "weighting": "performance-time-overlap-seconds",
        "n_windows": str(len(clouds)),
        "n_carried": str(sum(c.carried for c in clouds)),
    }
    return TensionSeries(
        piece_id=bundle.piece_id,
        window_times=np.array([c.start_s for c in clouds]),
        diameter=diameter,
        momentum=momentum,
        strain=strain,
        metadata=meta,
    )
