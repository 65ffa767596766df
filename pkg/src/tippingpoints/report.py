"""
Output serialization: CSV files with a leading ``# key=value`` metadata
block, the JSON evaluation report, and atomic file writes.

JSON report layout::

    {
      "metadata":  {parameter: value, ...},
      "pieces": [
        {
          "piece_id": str,
          "n_listeners": int, "n_marks": int,
          "spread_s": float | null,
          "popular_points": [
            {"interval_start_s", "interval_end_s", "peak_fraction",
             "supporters": [listener_id, ...], "status"}
          ],
          "proportions": {"both", "model1_only", "model2_only", "neither"},
          "model1": [{"time_s", "score", "bar_number"}],
          "model2": [{"channel", "index", "time_s", "mean_before",
                      "mean_after", "direction"}],
          "warnings": [str, ...]
        }
      ],
      "aggregate": {
        "n_pieces", "n_popular_points", "proportions",
        "annotation_spread_s": float | null
      }
    }
"""

import json
import os
import tempfile
from pathlib import Path
from typing import Dict, Iterable, Mapping, Sequence

TENSION_HEADER = "window_index,start_s,diameter,momentum,strain"
MODEL1_HEADER = "time_s,score,bar_number"
MODEL2_HEADER = "channel,index,time_s,mean_before,mean_after,direction"
SUMMARY_HEADER = "piece_id,popular_start_s,popular_end_s,peak_fraction,status"


def num(x) -> str:
    return repr(float(x))


def csv_text(header: str, rows: Iterable[Sequence], metadata: Mapping[str, str]) -> str:
    lines = [f"# {k}={metadata[k]}" for k in sorted(metadata)]
    lines.append(header)
    for row in rows:
        lines.append(",".join(num(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def read_metadata(text: str) -> Dict[str, str]:
    """Recover the ``# key=value`` block written by :func:`csv_text`."""
    meta = {}
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        key, _, value = line[1:].strip().partition("=")
        meta[key] = value
    return meta


def tension_csv(series, metadata) -> str:
    rows = (
        (i, float(t), float(d), float(m), float(s))
        for i, (t, d, m, s) in enumerate(
            zip(series.window_times, series.diameter, series.momentum, series.strain)
        )
    )
    return csv_text(TENSION_HEADER, rows, metadata)


def model1_csv(points, metadata) -> str:
    return csv_text(MODEL1_HEADER, ((p.time_s, p.score, p.bar_number) for p in points), metadata)


def model2_csv(changepoints, metadata) -> str:
    rows = (
        (c.channel, c.index, float(c.time_s), c.mean_before, c.mean_after, c.direction)
        for c in changepoints
    )
    return csv_text(MODEL2_HEADER, rows, metadata)


def summary_csv(reports, metadata) -> str:
    rows = []
    for r in reports:
        for p, status in zip(r.popular_points, r.per_point_status):
            rows.append((r.piece_id, p.interval_start_s, p.interval_end_s, p.peak_fraction, status))
    return csv_text(SUMMARY_HEADER, rows, metadata)


def piece_json(report, annotations, m1, m2) -> dict:
    return {
        "piece_id": report.piece_id,
        "n_listeners": annotations.n_listeners,
        "n_marks": len(annotations.marks),
        "spread_s": report.spread_s,
        "popular_points": [
            {
                "interval_start_s": p.interval_start_s,
                "interval_end_s": p.interval_end_s,
                "peak_fraction": p.peak_fraction,
                "supporters": list(p.supporter_ids),
                "status": s,
            }
            for p, s in zip(report.popular_points, report.per_point_status)
        ],
        "proportions": report.proportions,
        "model1": [{"time_s": p.time_s, "score": p.score, "bar_number": p.bar_number} for p in m1],
        "model2": [
            {
                "channel": c.channel,
                "index": c.index,
                "time_s": float(c.time_s),
                "mean_before": c.mean_before,
                "mean_after": c.mean_after,
                "direction": c.direction,
            }
            for c in m2
        ],
        "warnings": list(report.warnings),
    }


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
