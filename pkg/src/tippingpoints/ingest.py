"""
Readers, writers and validation for the three input CSV formats.

notes:        onset_s,duration_s,midi_pitch,spelled_fifths
beats:        beat_index,time_s,bar_number
annotations:  listener_id,time_s,anticipation_s,tension_rating

Blank lines and lines starting with ``#`` are ignored. Annotation files may
carry a ``# n_listeners=N`` comment. Every parse error reports the 1-based
line number it was raised on.
"""

import csv
import io
import math
import re
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from .spiral import KeySpec

NOTES_HEADER = ("onset_s", "duration_s", "midi_pitch", "spelled_fifths")
BEATS_HEADER = ("beat_index", "time_s", "bar_number")
ANNOTATIONS_HEADER = ("listener_id", "time_s", "anticipation_s", "tension_rating")

SPAN_TOLERANCE_S = 5.0


class IngestError(ValueError):
    """Base class for input errors. ``row`` is the 1-based source line."""

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"line {row}: {message}"
        super().__init__(message)


class MalformedRow(IngestError):
    pass


class PitchOutOfRange(IngestError):
    pass


class NonPositiveDuration(IngestError):
    pass


class SpellingMismatch(IngestError):
    pass


class NonMonotonicTime(IngestError):
    pass


class DecreasingBar(IngestError):
    pass


class TooFewBeats(IngestError):
    pass


class DuplicateListener(IngestError):
    pass


class NegativeTime(IngestError):
    pass


class ValidationError(ValueError):
    """Cross-file consistency failure (as opposed to a malformed file)."""


class NoteOutsideSpan(ValidationError):
    def __init__(self, indices):
        self.indices = list(indices)
        super().__init__(
            f"{len(self.indices)} note onset(s) outside the beat span "
            f"+-{SPAN_TOLERANCE_S:g}s: indices {self.indices}"
        )


@dataclass(frozen=True)
class NoteEvent:
    onset_s: float
    duration_s: float
    midi_pitch: int
    spelled_fifths: Optional[int] = None

    @property
    def offset_s(self) -> float:
        return self.onset_s + self.duration_s


@dataclass(frozen=True)
class BeatEntry:
    beat_index: int
    time_s: float
    bar_number: int


@dataclass(frozen=True)
class BeatGrid:
    entries: Tuple[BeatEntry, ...]

    def __post_init__(self):
        if len(self.entries) < 2:
            raise TooFewBeats(f"need at least 2 beats, got {len(self.entries)}")

    @property
    def n_bars(self) -> int:
        return max(e.bar_number for e in self.entries)

    @property
    def times(self) -> List[float]:
        return [e.time_s for e in self.entries]

    @property
    def bars(self) -> List[int]:
        return [e.bar_number for e in self.entries]

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class ListenerMark:
    listener_id: str
    time_s: float
    anticipation_s: Optional[float] = None
    tension_rating: Optional[float] = None


@dataclass(frozen=True)
class AnnotationSet:
    piece_id: str
    marks: Tuple[ListenerMark, ...]
    n_listeners: int

    def __post_init__(self):
        ids = [m.listener_id for m in self.marks]
        if len(set(ids)) != len(ids):
            raise DuplicateListener("listener ids must be distinct")
        if len(self.marks) > self.n_listeners:
            raise MalformedRow(
                f"{len(self.marks)} marks but n_listeners={self.n_listeners}"
            )

    @property
    def times(self) -> List[float]:
        return [m.time_s for m in self.marks]


@dataclass(frozen=True)
class PieceBundle:
    piece_id: str
    notes: Tuple[NoteEvent, ...]
    beats: BeatGrid
    annotations: Optional[AnnotationSet] = None
    key: Optional[KeySpec] = None


# ---------------------------------------------------------------- parsing


def _data_rows(text, header, allow_headerless=False):
    """Split ``text`` into ``[(line_number, fields), ...]`` data rows and the
    list of comment strings (without the leading ``#``)."""
    comments = []
    rows = []
    header_seen = False
    reader = csv.reader(io.StringIO(text.lstrip("\ufeff")))
    for fields in reader:
        lineno = reader.line_num
        if not fields or all(not f.strip() for f in fields):
            continue
        if fields[0].lstrip().startswith("#"):
            comments.append(",".join(fields).lstrip()[1:].strip())
            continue
        if not header_seen:
            if tuple(fields) != header:
                raise MalformedRow(
                    f"expected header {','.join(header)!r}, got {','.join(fields)!r}", lineno
                )
            header_seen = True
            continue
        if len(fields) != len(header):
            raise MalformedRow(f"expected {len(header)} fields, got {len(fields)}", lineno)
        rows.append((lineno, [f.strip() for f in fields]))
    if not header_seen and not allow_headerless:
        raise MalformedRow(f"missing header {','.join(header)!r}", 1)
    return rows, comments


def _float(value, name, lineno):
    try:
        x = float(value)
    except ValueError:
        raise MalformedRow(f"{name} is not a number: {value!r}", lineno) from None
    if not math.isfinite(x):
        raise MalformedRow(f"{name} must be finite: {value!r}", lineno)
    return x


def _int(value, name, lineno):
    try:
        return int(value)
    except ValueError:
        raise MalformedRow(f"{name} is not an integer: {value!r}", lineno) from None


def parse_notes(text: str) -> List[NoteEvent]:
    rows, _ = _data_rows(text, NOTES_HEADER)
    notes = []
    for lineno, (onset, duration, pitch, spelled) in rows:
        onset = _float(onset, "onset_s", lineno)
        duration = _float(duration, "duration_s", lineno)
        pitch = _int(pitch, "midi_pitch", lineno)
        if onset < 0:
            raise NegativeTime(f"onset_s must be >= 0, got {onset}", lineno)
        if duration <= 0:
            raise NonPositiveDuration(f"duration_s must be > 0, got {duration}", lineno)
        if not 0 <= pitch <= 127:
            raise PitchOutOfRange(f"midi_pitch must be in 0..127, got {pitch}", lineno)
        k = None
        if spelled:
            # accept a unicode minus, common in hand-edited files
            k = _int(spelled.replace("−", "-"), "spelled_fifths", lineno)
            if (7 * k) % 12 != pitch % 12:
                raise SpellingMismatch(
                    f"spelled_fifths={k} names pitch class {(7 * k) % 12}, "
                    f"but midi_pitch {pitch} has pitch class {pitch % 12}",
                    lineno,
                )
        notes.append(NoteEvent(onset, duration, pitch, k))
    notes.sort(key=lambda n: (n.onset_s, n.midi_pitch))
    return notes


def parse_beats(text: str) -> BeatGrid:
    rows, _ = _data_rows(text, BEATS_HEADER)
    parsed = []
    for lineno, (idx, t, bar) in rows:
        idx = _int(idx, "beat_index", lineno)
        t = _float(t, "time_s", lineno)
        bar = _int(bar, "bar_number", lineno)
        if idx < 0:
            raise MalformedRow(f"beat_index must be >= 0, got {idx}", lineno)
        if bar < 1:
            raise MalformedRow(f"bar_number must be >= 1, got {bar}", lineno)
        parsed.append((idx, t, bar, lineno))
    parsed.sort(key=lambda r: r[0])
    for prev, cur in zip(parsed, parsed[1:]):
        if cur[0] == prev[0]:
            raise MalformedRow(f"duplicate beat_index {cur[0]}", cur[3])
        if cur[1] <= prev[1]:
            raise NonMonotonicTime(
                f"time_s {cur[1]} does not increase after {prev[1]}", cur[3]
            )
        if cur[2] < prev[2]:
            raise DecreasingBar(f"bar_number {cur[2]} decreases after {prev[2]}", cur[3])
    if len(parsed) < 2:
        raise TooFewBeats(
            f"need at least 2 beats, got {len(parsed)}", parsed[0][3] if parsed else None
        )
    return BeatGrid(tuple(BeatEntry(i, t, b) for i, t, b, _ in parsed))


_N_LISTENERS = re.compile(r"n_listeners\s*=\s*(\S+)")


def parse_annotations(text: str, piece_id: str = "") -> AnnotationSet:
    # a comment-only file is an empty mark set
    rows, comments = _data_rows(text, ANNOTATIONS_HEADER, allow_headerless=True)
    n_listeners = None
    for c in comments:
        m = _N_LISTENERS.search(c)
        if m:
            try:
                n_listeners = int(m.group(1))
            except ValueError:
                raise MalformedRow(f"bad n_listeners value {m.group(1)!r}") from None
    marks = []
    seen = {}
    for lineno, (lid, t, anticipation, rating) in rows:
        if not lid:
            raise MalformedRow("listener_id is empty", lineno)
        if lid in seen:
            raise DuplicateListener(
                f"listener {lid!r} already marked a point on line {seen[lid]}", lineno
            )
        seen[lid] = lineno
        t = _float(t, "time_s", lineno)
        if t < 0:
            raise NegativeTime(f"time_s must be >= 0, got {t}", lineno)
        a = _float(anticipation, "anticipation_s", lineno) if anticipation else None
        if a is not None and a < 0:
            raise MalformedRow(f"anticipation_s must be >= 0, got {a}", lineno)
        r = _float(rating, "tension_rating", lineno) if rating else None
        marks.append(ListenerMark(lid, t, a, r))
    if n_listeners is None:
        n_listeners = len(marks)
    return AnnotationSet(piece_id, tuple(marks), n_listeners)


def validate_bundle(
    notes: Sequence[NoteEvent],
    beats: BeatGrid,
    annotations: Optional[AnnotationSet] = None,
    key: Optional[KeySpec] = None,
    piece_id: str = "",
) -> PieceBundle:
    lo = beats.entries[0].time_s - SPAN_TOLERANCE_S
    hi = beats.entries[-1].time_s + SPAN_TOLERANCE_S
    bad = [i for i, n in enumerate(notes) if not lo <= n.onset_s <= hi]
    if bad:
        raise NoteOutsideSpan(bad)
    if not piece_id and annotations is not None:
        piece_id = annotations.piece_id
    return PieceBundle(piece_id, tuple(notes), beats, annotations, key)


# ---------------------------------------------------------------- writing


def _num(x):
    return repr(float(x))


def _opt(x):
    return "" if x is None else _num(x)


def format_notes(notes: Sequence[NoteEvent]) -> str:
    lines = [",".join(NOTES_HEADER)]
    for n in notes:
        k = "" if n.spelled_fifths is None else str(n.spelled_fifths)
        lines.append(f"{_num(n.onset_s)},{_num(n.duration_s)},{n.midi_pitch},{k}")
    return "\n".join(lines) + "\n"


def format_beats(beats: BeatGrid) -> str:
    lines = [",".join(BEATS_HEADER)]
    for e in beats.entries:
        lines.append(f"{e.beat_index},{_num(e.time_s)},{e.bar_number}")
    return "\n".join(lines) + "\n"


def format_annotations(annotations: AnnotationSet) -> str:
    lines = [f"# n_listeners={annotations.n_listeners}", ",".join(ANNOTATIONS_HEADER)]
    for m in annotations.marks:
        lines.append(
            f"{m.listener_id},{_num(m.time_s)},{_opt(m.anticipation_s)},{_opt(m.tension_rating)}"
        )
    return "\n".join(lines) + "\n"
