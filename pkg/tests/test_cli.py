import json
import re

import numpy as np
import pytest

from scenarios import C_MAJOR_TRIAD, chords_on_beats, grid, op17_analogue, write_piece
from tippingpoints.cli import EXIT_INPUT, EXIT_VALIDATION, main
from tippingpoints.ingest import NoteEvent, validate_bundle
from tippingpoints.report import read_metadata
from tippingpoints.spiral import KeySpec


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def op17(tmp_path_factory):
    return write_piece(tmp_path_factory.mktemp("op17"), op17_analogue())


def stationary(directory, n_beats=61):
    times = np.arange(n_beats) * 0.5
    b = validate_bundle(chords_on_beats(times, lambda t: C_MAJOR_TRIAD), grid(times), None, KeySpec(0), "flat")
    return write_piece(directory, b)


def rows(path):
    return [ln for ln in path.read_text().splitlines() if ln and not ln.startswith("#")]


def test_tension_outputs(tmp_path):
    paths = stationary(tmp_path / "in")
    assert run("tension", "--notes", paths["notes"], "--beats", paths["beats"], "--key", "C:maj", "--out", tmp_path) == 0
    lines = rows(tmp_path / "tension.csv")
    assert lines[0] == "window_index,start_s,diameter,momentum,strain"
    assert len(lines) == 61
    svg = (tmp_path / "tension.svg").read_text()
    assert svg.startswith("<svg") or svg.startswith("<?xml")
    assert "<metadata>" in svg and "window_beats=1" in svg


def test_window_beats_two(tmp_path):
    paths = stationary(tmp_path / "in")
    base = ["tension", "--notes", paths["notes"], "--beats", paths["beats"], "--key", "C:maj"]
    run(*base, "--out", tmp_path / "a")
    run(*base, "--window-beats", 2, "--out", tmp_path / "b")
    n1 = len(rows(tmp_path / "a" / "tension.csv")) - 1
    n2 = len(rows(tmp_path / "b" / "tension.csv")) - 1
    assert abs(n2 - n1 / 2) <= 1


def test_missing_beats_exit_2(tmp_path, capsys):
    paths = stationary(tmp_path / "in")
    assert run("tension", "--notes", paths["notes"], "--beats", tmp_path / "nope.csv", "--out", tmp_path) == EXIT_INPUT
    assert "beats" in capsys.readouterr().err


def test_parse_error_exit_2(tmp_path, capsys):
    bad = tmp_path / "beats.csv"
    bad.write_text("beat_index,time_s,bar_number\n0,0.0,1\n1,zero,1\n")
    paths = stationary(tmp_path / "in")
    assert run("tension", "--notes", paths["notes"], "--beats", bad, "--out", tmp_path) == EXIT_INPUT
    assert "line 3" in capsys.readouterr().err


def test_validation_error_exit_3(tmp_path):
    paths = stationary(tmp_path / "in")
    far = tmp_path / "far.csv"
    far.write_text("onset_s,duration_s,midi_pitch,spelled_fifths\n500.0,1.0,60,0\n")
    assert run("tension", "--notes", far, "--beats", paths["beats"], "--out", tmp_path) == EXIT_VALIDATION
    assert run("tension", "--notes", paths["notes"], "--beats", paths["beats"], "--window-beats", 0) == EXIT_INPUT


def test_empty_notes_without_key_exit_3(tmp_path):
    paths = stationary(tmp_path / "in")
    empty = tmp_path / "empty.csv"
    empty.write_text("onset_s,duration_s,midi_pitch,spelled_fifths\n")
    assert run("tension", "--notes", empty, "--beats", paths["beats"], "--out", tmp_path) == EXIT_VALIDATION


def test_predict_outputs(tmp_path, op17):
    assert run("predict", "--notes", op17["notes"], "--beats", op17["beats"], "--key", "C:maj", "--out", tmp_path) == 0
    m1 = rows(tmp_path / "model1.csv")
    assert m1[0] == "time_s,score,bar_number" and len(m1) == 2
    assert float(m1[1].split(",")[0]) == 39.0
    m2 = rows(tmp_path / "model2.csv")
    assert len(m2) == 2 and m2[1].startswith("strain,")


def test_stationary_model2_is_header_only(tmp_path):
    paths = stationary(tmp_path / "in")
    assert run("predict", "--notes", paths["notes"], "--beats", paths["beats"], "--key", "C:maj", "--out", tmp_path) == 0
    assert rows(tmp_path / "model2.csv") == ["channel,index,time_s,mean_before,mean_after,direction"]
    assert rows(tmp_path / "model1.csv") == ["time_s,score,bar_number"]


def test_threshold_line_matches_metadata(tmp_path, op17):
    run("predict", "--notes", op17["notes"], "--beats", op17["beats"], "--key", "C:maj", "--out", tmp_path)
    meta = read_metadata((tmp_path / "model1.csv").read_text())
    mean, std = float(meta["beat_mean_s"]), float(meta["beat_sample_std_s"])
    assert float(meta["multiplier"]) == 2.5
    svg = (tmp_path / "predictions.svg").read_text()
    (value,) = re.findall(r'class="threshold" data-value="([^"]+)"', svg)
    assert float(value) == pytest.approx(mean + 2.5 * std, abs=1e-12)
    assert svg.count('class="model1"') == 1


def test_evaluate_requires_annotations(tmp_path, op17, capsys):
    assert run("evaluate", "--notes", op17["notes"], "--beats", op17["beats"], "--out", tmp_path) == EXIT_INPUT
    assert "annotations" in capsys.readouterr().err


def test_evaluate_op17_case(tmp_path, op17):
    common = ["evaluate", "--notes", op17["notes"], "--beats", op17["beats"], "--annotations", op17["annotations"],
              "--key", "C:maj"]
    assert run(*common, "--out", tmp_path / "a") == 0
    assert [r.split(",")[-1] for r in rows(tmp_path / "a" / "summary.csv")[1:]] == ["model1_only"]
    assert run(*common, "--threshold", 0.2, "--out", tmp_path / "b") == 0
    summary = rows(tmp_path / "b" / "summary.csv")
    assert summary[0] == "piece_id,popular_start_s,popular_end_s,peak_fraction,status"
    assert [r.split(",")[-1] for r in summary[1:]] == ["model1_only", "model2_only"]
    assert (tmp_path / "b" / "annotations.svg").exists()
    doc = json.loads((tmp_path / "b" / "report.json").read_text())
    assert doc["metadata"]["threshold"] == "0.2"


def test_manifest_two_pieces(tmp_path, op17):
    flat = stationary(tmp_path / "flat")
    manifest = tmp_path / "manifest.csv"
    manifest.write_text(
        "piece_id,notes,beats,annotations,key\n"
        f"op17,{op17['notes']},{op17['beats']},{op17['annotations']},C:maj\n"
        f"flat,{flat['notes']},{flat['beats']},{op17['annotations']},C:maj\n"
    )
    assert run("pipeline", "--manifest", manifest, "--jobs", 2, "--out", tmp_path / "out") == 0
    doc = json.loads((tmp_path / "out" / "report.json").read_text())
    assert [p["piece_id"] for p in doc["pieces"]] == ["op17", "flat"]
    assert doc["aggregate"]["n_pieces"] == 2
    assert set(doc["aggregate"]["proportions"]) == {"both", "model1_only", "model2_only", "neither"}
    for piece in ("op17", "flat"):
        assert (tmp_path / "out" / piece / "tension.csv").exists()
        assert (tmp_path / "out" / piece / "predictions.svg").exists()


def test_config_file_and_override(tmp_path, op17):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# run settings\nnotes={op17['notes']}\nbeats={op17['beats']}\nkey=C:maj\nmultiplier=100\n")
    assert run("predict", "--config", cfg, "--out", tmp_path / "a") == 0
    assert len(rows(tmp_path / "a" / "model1.csv")) == 1
    assert run("predict", "--config", cfg, "--multiplier", 2.5, "--out", tmp_path / "b") == 0
    assert len(rows(tmp_path / "b" / "model1.csv")) == 2
    cfg.write_text("bogus=1\n")
    assert run("predict", "--config", cfg) == EXIT_INPUT


def test_pipeline_single_piece_deterministic(tmp_path, op17):
    args = ["pipeline", "--notes", op17["notes"], "--beats", op17["beats"], "--annotations", op17["annotations"]]
    for d in ("a", "b"):
        assert run(*args, "--out", tmp_path / d) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert {"tension.csv", "tension.svg", "model1.csv", "model2.csv", "predictions.svg", "report.json",
            "summary.csv", "annotations.svg"} <= set(names)
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_unspelled_notes_with_auto_key(tmp_path):
    notes = tmp_path / "notes.csv"
    notes.write_text("onset_s,duration_s,midi_pitch,spelled_fifths\n0.0,1.0,60,\n1.0,1.0,67,\n")
    beats = tmp_path / "beats.csv"
    beats.write_text("beat_index,time_s,bar_number\n0,0.0,1\n1,1.0,1\n2,2.0,2\n")
    assert run("tension", "--notes", notes, "--beats", beats, "--out", tmp_path / "o") == 0
    assert read_metadata((tmp_path / "o" / "tension.csv").read_text())["key"] == "fallback-global-ce"


def test_note_event_fields_roundtrip_through_cli(tmp_path):
    # single-note piece runs end to end
    times = [0.0, 1.0, 2.0, 3.0]
    b = validate_bundle([NoteEvent(0.0, 3.0, 60, 0)], grid(times), None, KeySpec(0), "one")
    p = write_piece(tmp_path / "in", b)
    assert run("pipeline", "--notes", p["notes"], "--beats", p["beats"], "--key", "C:maj", "--out", tmp_path / "o") == 0
    assert not (tmp_path / "o" / "report.json").exists()
