"""
Spiral-array geometry.

Pitches live on a helix indexed by their position on the line of fifths
(C=0, G=+1, F=-1, ...). Chords and keys are represented by weighted
centroids ("centers of effect") of the pitch positions.

Points are plain ``numpy`` arrays of shape ``(3,)``.
"""

import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np

__all__ = [
    "HelixParams",
    "KeySpec",
    "pitch_position",
    "weighted_ce",
    "chord_ce",
    "key_ce",
    "spell_pitch",
    "parse_key",
    "AllWeightsZero",
]

DEFAULT_H = math.sqrt(2.0 / 15.0)

# Published key weights sum to 0.999; rescaled so the triple is a convex combination.
_KEY_WEIGHTS_RAW = (0.516, 0.315, 0.168)
DEFAULT_KEY_WEIGHTS = tuple(w / sum(_KEY_WEIGHTS_RAW) for w in _KEY_WEIGHTS_RAW)
DEFAULT_CHORD_WEIGHTS = (0.536, 0.274, 0.190)

# exact sin/cos of k*pi/2, indexed by k mod 4
_SIN = (0.0, 1.0, 0.0, -1.0)
_COS = (1.0, 0.0, -1.0, 0.0)

_LETTER_FIFTHS = {"F": -1, "C": 0, "G": 1, "D": 2, "A": 3, "E": 4, "B": 5}


class AllWeightsZero(ValueError):
    pass


def _check_triple(name, triple):
    if len(triple) != 3:
        raise ValueError(f"{name} must have three entries, got {len(triple)}")
    if any(w < 0 or not math.isfinite(w) for w in triple):
        raise ValueError(f"{name} must be non-negative: {triple}")
    if abs(sum(triple) - 1.0) > 1e-9:
        raise ValueError(f"{name} must sum to 1, got {sum(triple)!r}")


@dataclass(frozen=True)
class HelixParams:
    r: float = 1.0
    h: float = DEFAULT_H
    chord_weights: Tuple[float, float, float] = DEFAULT_CHORD_WEIGHTS
    key_weights: Tuple[float, float, float] = DEFAULT_KEY_WEIGHTS
    minor_alpha: float = 0.75
    minor_beta: float = 0.75

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"radius must be positive, got {self.r}")
        if not self.h > 0:
            raise ValueError(f"rise per fifth must be positive, got {self.h}")
        object.__setattr__(self, "chord_weights", tuple(float(w) for w in self.chord_weights))
        object.__setattr__(self, "key_weights", tuple(float(w) for w in self.key_weights))
        _check_triple("chord_weights", self.chord_weights)
        _check_triple("key_weights", self.key_weights)
        for name in ("minor_alpha", "minor_beta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class KeySpec:
    tonic_fifths: int
    mode: str = "major"

    def __post_init__(self):
        if self.mode not in ("major", "minor"):
            raise ValueError(f"mode must be 'major' or 'minor', got {self.mode!r}")
        if abs(self.tonic_fifths) > 15:
            raise ValueError(f"tonic_fifths out of range: {self.tonic_fifths}")

    def transpose(self, shift: int) -> "KeySpec":
        return KeySpec(self.tonic_fifths + shift, self.mode)

    def __str__(self):
        return f"{fifths_name(self.tonic_fifths)}:{'maj' if self.mode == 'major' else 'min'}"


def fifths_name(k: int) -> str:
    """Spelled name of line-of-fifths index ``k`` (e.g. -5 -> 'Db')."""
    letters = "FCGDAEB"
    idx = k + 1
    letter = letters[idx % 7]
    acc = idx // 7
    return letter + ("#" * acc if acc > 0 else "b" * -acc)


def parse_key(text: str) -> KeySpec:
    """Parse strings like ``C:maj``, ``a:min``, ``F#:major`` or ``Bb:minor``."""
    m = re.fullmatch(r"\s*([A-Ga-g])([#b♯♭]*)\s*:\s*(maj|major|min|minor)\s*", text)
    if m is None:
        raise ValueError(f"cannot parse key {text!r}; expected e.g. 'C:maj' or 'a:min'")
    letter, accidentals, mode = m.groups()
    k = _LETTER_FIFTHS[letter.upper()]
    for ch in accidentals:
        k += 7 if ch in "#♯" else -7
    return KeySpec(k, "major" if mode.startswith("maj") else "minor")


def pitch_position(k: int, params: HelixParams = HelixParams()) -> np.ndarray:
    """Position of line-of-fifths index ``k`` on the helix."""
    q = k % 4
    return np.array([params.r * _SIN[q], params.r * _COS[q], k * params.h])


def weighted_ce(points: Iterable[np.ndarray], weights: Iterable[float]) -> np.ndarray:
    pts = np.asarray(list(points), dtype=float).reshape(-1, 3)
    w = np.asarray(list(weights), dtype=float)
    if w.shape[0] != pts.shape[0]:
        raise ValueError("points and weights differ in length")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    total = w.sum()
    if not total > 0:
        raise AllWeightsZero("center of effect needs at least one positive weight")
    return (w[:, None] * pts).sum(axis=0) / total


def chord_ce(root: int, quality: str = "major", params: HelixParams = HelixParams()) -> np.ndarray:
    """Center of effect of a major or minor triad on ``root``."""
    if quality == "major":
        third = root + 4
    elif quality == "minor":
        third = root - 3
    else:
        raise ValueError(f"quality must be 'major' or 'minor', got {quality!r}")
    w1, w2, w3 = params.chord_weights
    return (
        w1 * pitch_position(root, params)
        + w2 * pitch_position(root + 1, params)
        + w3 * pitch_position(third, params)
    )


def key_ce(key: KeySpec, params: HelixParams = HelixParams()) -> np.ndarray:
    """Center of effect of a key, built from its tonic, dominant and subdominant chords."""
    t = key.tonic_fifths
    o1, o2, o3 = params.key_weights
    if key.mode == "major":
        return (
            o1 * chord_ce(t, "major", params)
            + o2 * chord_ce(t + 1, "major", params)
            + o3 * chord_ce(t - 1, "major", params)
        )
    a, b = params.minor_alpha, params.minor_beta
    dominant = a * chord_ce(t + 1, "major", params) + (1 - a) * chord_ce(t + 1, "minor", params)
    subdominant = b * chord_ce(t - 1, "minor", params) + (1 - b) * chord_ce(t - 1, "major", params)
    return o1 * chord_ce(t, "minor", params) + o2 * dominant + o3 * subdominant


def spell_pitch(midi_pitch: int, key: KeySpec) -> int:
    """Line-of-fifths index for ``midi_pitch`` within the twelve-index window
    ``[tonic - 5, tonic + 6]`` of ``key``."""
    if not 0 <= midi_pitch <= 127:
        raise ValueError(f"midi pitch out of range: {midi_pitch}")
    pc = midi_pitch % 12
    lo = key.tonic_fifths - 5
    # 7 is its own inverse mod 12, so k = 7*pc (mod 12)
    return lo + (7 * pc - lo) % 12


def pairwise_max_distance(points: Sequence[np.ndarray]) -> float:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 2:
        return 0.0
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=-1)).max())
