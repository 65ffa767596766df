"""
Command-line front end.

Subcommands: ``tension``, ``predict``, ``evaluate`` and ``pipeline``. Every
flag can also be set from a ``key=value`` file passed with ``--config``;
flags given on the command line win.

Exit codes: 0 success, 2 input error, 3 validation error, 4 internal error.
"""

import argparse
import csv
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import List, Optional

from . import __version__
from .changepoint import CostModel, Model2Config, Penalty, SeriesTooShort, model2_predict
from .evaluate import (
    MatchReport,
    aggregate_proportions,
    annotation_spread,
    match_predictions,
    piece_spread,
    popular_points,
)
from .ingest import (
    AnnotationSet,
    IngestError,
    PieceBundle,
    ValidationError,
    parse_annotations,
    parse_beats,
    parse_notes,
    validate_bundle,
)
from .report import (
    atomic_write,
    json_text,
    model1_csv,
    model2_csv,
    piece_json,
    summary_csv,
    tension_csv,
)
from .spiral import HelixParams, parse_key
from .svg import COLORS, Panel, render
from .tension import NoKeyAndNoNotes, TensionConfig, TensionSeries, tension_series
from .timing import beat_durations, model1_predict, threshold

EXIT_OK, EXIT_INPUT, EXIT_VALIDATION, EXIT_INTERNAL = 0, 2, 3, 4


class InputError(Exception):
    pass


def _triple(text):
    parts = [float(p) for p in str(text).replace(";", ",").split(",") if p.strip()]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    return tuple(parts)


def _penalty(text):
    try:
        return str(Penalty.parse(str(text)))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


@dataclass(frozen=True)
class RunConfig:
    notes: Optional[str] = None
    beats: Optional[str] = None
    annotations: Optional[str] = None
    manifest: Optional[str] = None
    piece_id: str = ""
    key: str = "auto"
    window_beats: int = 1
    cost_model: str = "MeanVarNormal"
    penalty: str = "BIC"
    method: str = "pelt"
    min_seg_len: int = 2
    min_buildup: int = 4
    multiplier: float = 2.5
    edge_bars: int = 3
    threshold: float = 0.25
    half_window_s: float = 2.0
    grid_step_s: float = 0.5
    helix_r: float = 1.0
    helix_h: float = HelixParams().h
    chord_weights: tuple = HelixParams().chord_weights
    key_weights: tuple = HelixParams().key_weights
    minor_alpha: float = 0.75
    minor_beta: float = 0.75
    out: str = "out"
    jobs: int = 1

    def validate(self):
        checks = [
            (self.window_beats >= 1, "window_beats must be >= 1"),
            (self.multiplier > 0, "multiplier must be > 0"),
            (self.edge_bars >= 0, "edge_bars must be >= 0"),
            (0 < self.threshold <= 1, "threshold must lie in (0, 1]"),
            (self.half_window_s > 0, "half_window_s must be > 0"),
            (self.grid_step_s > 0, "grid_step_s must be > 0"),
            (self.min_seg_len >= 1, "min_seg_len must be >= 1"),
            (self.min_buildup >= 1, "min_buildup must be >= 1"),
            (self.jobs >= 1, "jobs must be >= 1"),
            (self.method in ("pelt", "amoc"), "method must be 'pelt' or 'amoc'"),
        ]
        for ok, msg in checks:
            if not ok:
                raise InputError(msg)
        try:
            CostModel(self.cost_model)
            self.helix()
            self.key_spec()
        except ValueError as exc:
            raise InputError(str(exc)) from None

    def helix(self) -> HelixParams:
        return HelixParams(
            r=self.helix_r,
            h=self.helix_h,
            chord_weights=self.chord_weights,
            key_weights=self.key_weights,
            minor_alpha=self.minor_alpha,
            minor_beta=self.minor_beta,
        )

    def key_spec(self):
        return None if self.key.strip().lower() == "auto" else parse_key(self.key)

    def model2(self) -> Model2Config:
        return Model2Config(
            cost=self.cost_model,
            penalty=Penalty.parse(self.penalty),
            min_seg_len=self.min_seg_len,
            min_buildup=self.min_buildup,
            method=self.method,
        )

    def metadata(self) -> dict:
        skip = {"notes", "beats", "annotations", "manifest", "out", "jobs"}
        meta = {}
        for f in fields(self):
            if f.name in skip:
                continue
            v = getattr(self, f.name)
            meta[f.name] = ",".join(repr(float(x)) for x in v) if isinstance(v, tuple) else str(v)
        meta["version"] = __version__
        return meta


# ------------------------------------------------------------ stages


def _read(path, what):
    if not path:
        raise InputError(f"missing input: --{what} is required")
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InputError(f"missing input: {what} file {path} does not exist") from None
    except OSError as exc:
        raise InputError(f"cannot read {what} file {path}: {exc}") from None


def load_bundle(cfg: RunConfig, need_notes=True, need_annotations=False) -> PieceBundle:
    if not cfg.piece_id and cfg.beats:
        cfg = replace(cfg, piece_id=Path(cfg.beats).stem)
    beats = parse_beats(_read(cfg.beats, "beats"))
    notes = parse_notes(_read(cfg.notes, "notes")) if (cfg.notes or need_notes) else []
    annotations = None
    if cfg.annotations or need_annotations:
        annotations = parse_annotations(_read(cfg.annotations, "annotations"), cfg.piece_id)
    return validate_bundle(notes, beats, annotations, cfg.key_spec(), cfg.piece_id)


@dataclass
class PieceResult:
    piece_id: str
    bundle: PieceBundle
    tension: Optional[TensionSeries] = None
    m1: Optional[list] = None
    m2: Optional[list] = None
    report: Optional[MatchReport] = None


def run_tension(bundle: PieceBundle, cfg: RunConfig) -> TensionSeries:
    return tension_series(bundle, TensionConfig(cfg.window_beats, cfg.helix()))


def run_predict(bundle: PieceBundle, cfg: RunConfig, tension=None):
    m1 = model1_predict(bundle.beats, cfg.multiplier, cfg.edge_bars)
    if tension is None and (bundle.notes or bundle.key is not None):
        tension = run_tension(bundle, cfg)
    m2 = model2_predict(tension, cfg.model2()) if tension is not None else []
    return tension, m1, m2


def run_evaluate(bundle: PieceBundle, cfg: RunConfig, m1, m2) -> MatchReport:
    ann = bundle.annotations
    notes = []
    if ann.marks and ann.n_listeners >= 1:
        popular = popular_points(ann, cfg.half_window_s, cfg.threshold, cfg.grid_step_s)
    else:
        popular = []
        notes.append(f"piece {bundle.piece_id!r} has no listener marks")
    report = match_predictions(
        popular, m1, m2, cfg.half_window_s, piece_id=bundle.piece_id, spread_s=piece_spread(ann)
    )
    report.warnings.extend(notes)
    return report


# ------------------------------------------------------------ writers


def _tension_panels(tension, changepoints=()):
    panels = []
    for ch, label in (("diameter", "cloud diameter"), ("momentum", "cloud momentum"), ("strain", "tensile strain")):
        marks = [("model2", float(c.time_s)) for c in changepoints if c.channel == ch]
        panels.append(
            Panel(label, list(tension.window_times), list(getattr(tension, ch)), color=COLORS[ch], vmarkers=marks)
        )
    return panels


def write_tension(out: Path, tension: TensionSeries, meta: dict):
    meta = {**meta, **tension.metadata}
    atomic_write(out / "tension.csv", tension_csv(tension, meta))
    atomic_write(out / "tension.svg", render(_tension_panels(tension), f"Tonal tension: {tension.piece_id}", meta))


def write_predictions(out: Path, bundle, tension, m1, m2, cfg: RunConfig, meta: dict):
    series = beat_durations(bundle.beats)
    limit = threshold(series, cfg.multiplier)
    m1_meta = {
        **meta,
        "beat_mean_s": repr(series.mean),
        "beat_sample_std_s": repr(series.sample_std),
        "threshold_s": repr(limit),
        "n_beat_durations": str(len(series)),
        "stats_scope": "all-beats-including-edge-bars",
    }
    m2_meta = dict(meta)
    if tension is None:
        m2_meta["model2"] = "skipped-no-notes"
    else:
        m2_meta.update(tension.metadata)
        n = len(tension)
        if n:
            try:
                m2_meta["beta"] = repr(Penalty.parse(cfg.penalty).resolve(n, CostModel(cfg.cost_model)))
            except SeriesTooShort:
                pass
    atomic_write(out / "model1.csv", model1_csv(m1, m1_meta))
    atomic_write(out / "model2.csv", model2_csv(m2, m2_meta))
    duration_at = dict(zip(series.start_times.tolist(), series.durations.tolist()))
    dur = Panel(
        "beat duration",
        list(series.start_times),
        list(series.durations),
        color=COLORS["beat_duration"],
        ylabel="s",
        hline=("threshold", limit),
        points=[("model1", p.time_s, duration_at[p.time_s]) for p in m1],
    )
    panels = [dur] + (_tension_panels(tension, m2) if tension is not None else [])
    svg_meta = {**m1_meta, **m2_meta}
    atomic_write(out / "predictions.svg", render(panels, f"Predicted tipping points: {bundle.piece_id}", svg_meta))


def write_annotations_svg(out: Path, annotations: AnnotationSet, report: MatchReport, meta: dict):
    marks = list(annotations.marks)
    panel = Panel(
        f"listener marks ({len(marks)} of {annotations.n_listeners} listeners)",
        [m.time_s for m in marks],
        [float(i + 1) for i in range(len(marks))],
        kind="scatter",
        ylabel="listener",
        bands=[(p.interval_start_s, p.interval_end_s) for p in report.popular_points],
    )
    atomic_write(out / "annotations.svg", render([panel], f"Perceived tipping points: {annotations.piece_id}", meta))


def write_reports(out: Path, results: List[PieceResult], meta: dict, svg=True):
    scored = [r for r in results if r.report is not None]
    reports = [r.report for r in scored]
    with_marks = [r.bundle.annotations for r in scored if len(r.bundle.annotations.marks) >= 2]
    spread = annotation_spread(with_marks) if with_marks else None
    doc = {
        "metadata": meta,
        "pieces": [piece_json(r.report, r.bundle.annotations, r.m1, r.m2) for r in scored],
        "aggregate": {
            "n_pieces": len(scored),
            "n_popular_points": sum(len(r.popular_points) for r in reports),
            "proportions": aggregate_proportions(reports),
            "annotation_spread_s": spread,
        },
    }
    atomic_write(out / "report.json", json_text(doc))
    atomic_write(out / "summary.csv", summary_csv(reports, meta))
    if svg and len(scored) == 1:
        write_annotations_svg(out, scored[0].bundle.annotations, scored[0].report, meta)


# ------------------------------------------------------------ commands


def cmd_tension(cfg: RunConfig):
    bundle = load_bundle(cfg, need_notes=True)
    write_tension(Path(cfg.out), run_tension(bundle, cfg), cfg.metadata())


def cmd_predict(cfg: RunConfig):
    bundle = load_bundle(cfg, need_notes=False)
    tension, m1, m2 = run_predict(bundle, cfg)
    write_predictions(Path(cfg.out), bundle, tension, m1, m2, cfg, cfg.metadata())


def cmd_evaluate(cfg: RunConfig):
    if not cfg.annotations:
        raise InputError("missing input: --annotations is required for evaluate")
    bundle = load_bundle(cfg, need_notes=False, need_annotations=True)
    _, m1, m2 = run_predict(bundle, cfg)
    report = run_evaluate(bundle, cfg, m1, m2)
    result = PieceResult(bundle.piece_id, bundle, m1=m1, m2=m2, report=report)
    write_reports(Path(cfg.out), [result], cfg.metadata())


def _run_piece(cfg: RunConfig, out: Path) -> PieceResult:
    bundle = load_bundle(cfg, need_notes=False)
    meta = cfg.metadata()
    tension = None
    if bundle.notes:
        tension = run_tension(bundle, cfg)
        write_tension(out, tension, meta)
    tension, m1, m2 = run_predict(bundle, cfg, tension)
    write_predictions(out, bundle, tension, m1, m2, cfg, meta)
    result = PieceResult(bundle.piece_id, bundle, tension, m1, m2)
    if bundle.annotations is not None:
        result.report = run_evaluate(bundle, cfg, m1, m2)
        write_reports(out, [result], meta)
    return result


def read_manifest(path) -> List[dict]:
    """Rows of a manifest CSV with columns ``piece_id,notes,beats,annotations,key``.

    Only ``piece_id`` and ``beats`` are required; relative paths resolve
    against the manifest's directory.
    """
    text = _read(path, "manifest")
    base = Path(path).parent
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or not {"piece_id", "beats"} <= set(reader.fieldnames):
        raise InputError(f"manifest {path} needs a header with at least piece_id,beats")
    pieces = []
    for row in reader:
        entry = {"piece_id": row["piece_id"].strip()}
        for col in ("notes", "beats", "annotations"):
            v = (row.get(col) or "").strip()
            entry[col] = str(base / v) if v else None
        if (row.get("key") or "").strip():
            entry["key"] = row["key"].strip()
        pieces.append(entry)
    ids = [p["piece_id"] for p in pieces]
    if len(set(ids)) != len(ids) or not all(ids):
        raise InputError(f"manifest {path}: piece ids must be non-empty and distinct")
    return pieces


def cmd_pipeline(cfg: RunConfig):
    out = Path(cfg.out)
    if not cfg.manifest:
        _run_piece(cfg, out)
        return
    pieces = [replace(cfg, **p) for p in read_manifest(cfg.manifest)]
    for p in pieces:
        p.validate()
    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        results = list(pool.map(lambda p: _run_piece(p, out / p.piece_id), pieces))
    meta = cfg.metadata()
    meta["pieces"] = ";".join(p.piece_id for p in pieces)
    write_reports(out, results, meta, svg=False)


COMMANDS = {
    "tension": cmd_tension,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "pipeline": cmd_pipeline,
}


# ------------------------------------------------------------ parsing


def _common(p: argparse.ArgumentParser, stage: str):
    d = RunConfig()
    g = p.add_argument_group("inputs")
    g.add_argument("--config", help="key=value file supplying any flag")
    g.add_argument("--notes", help="notes CSV")
    g.add_argument("--beats", help="beats CSV")
    if stage in ("evaluate", "pipeline"):
        g.add_argument("--annotations", help="listener annotations CSV")
    if stage == "pipeline":
        g.add_argument("--manifest", help="CSV listing piece_id,notes,beats,annotations,key")
        g.add_argument("--jobs", type=int, default=d.jobs, help="pieces processed concurrently")
    g.add_argument("--piece-id", default=d.piece_id)
    g.add_argument("--key", default=d.key, help="e.g. C:maj, a:min, or auto (global tonal center)")
    g.add_argument("--out", default=d.out, help="output directory")

    t = p.add_argument_group("tension")
    t.add_argument("--window-beats", type=int, default=d.window_beats)
    t.add_argument("--helix-r", type=float, default=d.helix_r)
    t.add_argument("--helix-h", type=float, default=d.helix_h)
    t.add_argument("--chord-weights", type=_triple, default=d.chord_weights)
    t.add_argument("--key-weights", type=_triple, default=d.key_weights)
    t.add_argument("--minor-alpha", type=float, default=d.minor_alpha)
    t.add_argument("--minor-beta", type=float, default=d.minor_beta)
    if stage == "tension":
        return

    m = p.add_argument_group("models")
    m.add_argument("--multiplier", type=float, default=d.multiplier, help="beat threshold in standard deviations")
    m.add_argument("--edge-bars", type=int, default=d.edge_bars, help="bars excluded at each end")
    m.add_argument("--cost-model", choices=sorted(("MeanNormal", "VarianceNormal", "MeanVarNormal")), default=d.cost_model)
    m.add_argument("--penalty", type=_penalty, default=d.penalty, help="BIC or a positive number")
    m.add_argument("--method", choices=("pelt", "amoc"), default=d.method)
    m.add_argument("--min-seg-len", type=int, default=d.min_seg_len)
    m.add_argument("--min-buildup", type=int, default=d.min_buildup, help="windows of build-up before a drop")
    if stage == "predict":
        return

    e = p.add_argument_group("evaluation")
    e.add_argument("--threshold", type=float, default=d.threshold, help="listener fraction for a popular point")
    e.add_argument("--half-window-s", "--half-window", type=float, default=d.half_window_s)
    e.add_argument("--grid-step-s", "--grid-step", type=float, default=d.grid_step_s)


def build_parser():
    parser = argparse.ArgumentParser(prog="tippingpoints", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}
    for name, helptext in (
        ("tension", "compute the three tension signals"),
        ("predict", "run the beat-duration and tension-changepoint models"),
        ("evaluate", "score predictions against listener marks"),
        ("pipeline", "tension, predict and evaluate for one piece or a manifest"),
    ):
        subs[name] = sub.add_parser(name, help=helptext)
        _common(subs[name], name)
    return parser, subs


def read_config_file(path) -> dict:
    values = {}
    for lineno, line in enumerate(_read(path, "config").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InputError(f"config {path} line {lineno}: expected key=value")
        values[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return values


def parse_config(argv) -> tuple:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        file_values = read_config_file(args.config)
        sp = subs[args.command]
        known = {a.dest for a in sp._actions}
        aliases = {"half_window": "half_window_s", "grid_step": "grid_step_s"}
        file_values = {aliases.get(k, k): v for k, v in file_values.items()}
        unknown = sorted(set(file_values) - known - {"config"})
        if unknown:
            raise InputError(f"config {args.config}: unknown option(s) for {args.command}: {', '.join(unknown)}")
        sp.set_defaults(**file_values)
        args = parser.parse_args(argv)
    values = {f.name: getattr(args, f.name) for f in fields(RunConfig) if hasattr(args, f.name)}
    cfg = RunConfig(**values)
    cfg.validate()
    return args.command, cfg


def main(argv=None) -> int:
    try:
        command, cfg = parse_config(argv)
        COMMANDS[command](cfg)
    except (InputError, IngestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValidationError, NoKeyAndNoNotes, SeriesTooShort) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
