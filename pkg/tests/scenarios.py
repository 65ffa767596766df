"""Synthetic pieces shared by the test modules."""

import numpy as np

from tippingpoints.ingest import (
    AnnotationSet,
    BeatEntry,
    BeatGrid,
    ListenerMark,
    NoteEvent,
    validate_bundle,
)
from tippingpoints.spiral import KeySpec

C_MAJOR_TRIAD = ((60, 0), (64, 4), (67, 1))  # (midi, fifths)
F_SHARP_MAJOR_TRIAD = ((66, 6), (70, 10), (73, 7))


def grid(times, beats_per_bar=3):
    return BeatGrid(tuple(BeatEntry(i, float(t), i // beats_per_bar + 1) for i, t in enumerate(times)))


def chords_on_beats(times, chord_at):
    """One block chord per beat, sounding for the whole beat."""
    notes = []
    for t0, t1 in zip(times, times[1:]):
        for midi, k in chord_at(t0):
            notes.append(NoteEvent(float(t0), float(t1 - t0), midi, k))
    return notes


def op17_beat_times():
    # 0.5 s beats, one 1.5 s beat starting at 39 s, ending at 100 s
    first = np.arange(0, 79) * 0.5
    rest = 40.5 + np.arange(0, 120) * 0.5
    return np.concatenate([first, rest]).tolist()


def op17_marks(n_listeners=35):
    cluster_40 = [38.3, 38.6, 38.9, 39.1, 39.3, 39.5, 39.8, 40.0, 40.2, 40.5, 40.8, 41.1, 41.4, 41.7]
    cluster_77 = [76.2, 76.6, 77.0, 77.4, 77.9, 78.5, 79.1, 79.7]
    others = [5.0, 12.0, 19.0, 26.0, 31.0, 50.0, 55.0, 60.0, 65.0, 88.0, 92.0, 96.0, 99.0]
    times = cluster_40 + cluster_77 + others
    assert len(times) == n_listeners
    return AnnotationSet(
        "op17-analogue",
        tuple(ListenerMark(f"L{i + 1}", t) for i, t in enumerate(times)),
        n_listeners,
    )


def op17_analogue():
    """Beat stretch at 39 s, remote-key harmony until 77 s then the tonic;
    14/35 marks around 40 s and 8/35 between 76 and 80 s."""
    times = op17_beat_times()
    notes = chords_on_beats(times, lambda t: F_SHARP_MAJOR_TRIAD if t < 77.0 else C_MAJOR_TRIAD)
    return validate_bundle(notes, grid(times), op17_marks(), KeySpec(0, "major"), "op17-analogue")


def random_piece(rng, n_beats=None, key=None):
    """Random spelled notes over a slightly irregular beat grid."""
    n_beats = n_beats or int(rng.integers(8, 40))
    times = np.cumsum(np.concatenate([[0.0], rng.uniform(0.3, 0.9, n_beats - 1)]))
    if key is None:
        key = KeySpec(int(rng.integers(-6, 7)), "major" if rng.random() < 0.5 else "minor")
    notes = []
    for _ in range(int(rng.integers(5, 60))):
        onset = float(rng.uniform(0, times[-1]))
        dur = float(rng.uniform(0.05, 2.0))
        k = key.tonic_fifths + int(rng.integers(-6, 7))
        midi = 48 + (7 * k) % 12 + 12 * int(rng.integers(0, 3))
        notes.append(NoteEvent(onset, dur, midi, k))
    notes.sort(key=lambda n: n.onset_s)
    return validate_bundle(notes, grid(times), None, key, "random")


def transpose(bundle, shift):
    notes = []
    for n in bundle.notes:
        k = n.spelled_fifths + shift
        midi = n.midi_pitch - n.midi_pitch % 12 + (7 * k) % 12
        notes.append(NoteEvent(n.onset_s, n.duration_s, midi, k))
    return validate_bundle(notes, bundle.beats, bundle.annotations, bundle.key.transpose(shift), bundle.piece_id)


def scale_time(bundle, c):
    notes = [NoteEvent(n.onset_s * c, n.duration_s * c, n.midi_pitch, n.spelled_fifths) for n in bundle.notes]
    beats = BeatGrid(tuple(BeatEntry(e.beat_index, e.time_s * c, e.bar_number) for e in bundle.beats.entries))
    return validate_bundle(notes, beats, bundle.annotations, bundle.key, bundle.piece_id)


def write_piece(directory, bundle, key_in_manifest=True):
    """Write a bundle as the three CSV inputs; return the paths."""
    from tippingpoints.ingest import format_annotations, format_beats, format_notes

    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "notes": directory / "notes.csv",
        "beats": directory / "beats.csv",
    }
    paths["notes"].write_text(format_notes(bundle.notes))
    paths["beats"].write_text(format_beats(bundle.beats))
    if bundle.annotations is not None:
        paths["annotations"] = directory / "annotations.csv"
        paths["annotations"].write_text(format_annotations(bundle.annotations))
    return paths
