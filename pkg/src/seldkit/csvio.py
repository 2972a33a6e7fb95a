"""Prediction/reference CSV files.

One file per clip, one row per active event per frame, columns
``frame,class,source,azimuth,distance,onscreen`` with no header by default.
A path may be a single CSV (clip id = file stem) or a directory of them.
Distances are meters internally; ``distance_scale`` converts on read/write
for sources that use another unit (0.01 for centimeters).
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Mapping

from seldkit.container import atomic_write_bytes
from seldkit.core import ClipPredictions, SeldEvent, ValidationError

COLUMNS = ("frame", "class", "source", "azimuth", "distance", "onscreen")
DEFAULT_NUM_FRAMES = 50


def parse_clip(text: str, clip_id: str, num_frames: int = DEFAULT_NUM_FRAMES,
               distance_scale: float = 1.0, source: str = "") -> ClipPredictions:
    """Parse CSV text. `num_frames` is raised to cover the largest frame index."""
    where = source or clip_id
    frames: dict[int, list[SeldEvent]] = {}
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), 1):
        if not row or all(not f.strip() for f in row):
            continue
        if lineno == 1 and row[0].strip().lower() == "frame":
            continue
        if len(row) != len(COLUMNS):
            raise ValidationError(f"{where}:{lineno}: expected {len(COLUMNS)} columns, got {len(row)}")
        try:
            frame = int(row[0])
            class_id = int(row[1])
            int(row[2])
            azimuth = float(row[3])
            distance = float(row[4]) * distance_scale
            onscreen = int(row[5])
        except ValueError as exc:
            raise ValidationError(f"{where}:{lineno}: malformed row ({exc})") from None
        if frame < 0:
            raise ValidationError(f"{where}:{lineno}: negative frame index")
        if onscreen not in (0, 1):
            raise ValidationError(f"{where}:{lineno}: onscreen must be 0 or 1")
        try:
            ev = SeldEvent(class_id, azimuth, distance, bool(onscreen))
        except ValidationError as exc:
            raise ValidationError(f"{where}:{lineno}: {exc}") from None
        frames.setdefault(frame, []).append(ev)
    n = max([num_frames] + [f + 1 for f in frames])
    return ClipPredictions(clip_id, n, frames)


def format_clip(clip: ClipPredictions, header: bool = False, distance_scale: float = 1.0) -> str:
    """Canonical CSV text: rows sorted, track ids renumbered per frame and class."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    if header:
        w.writerow(COLUMNS)
    for frame, events in clip.frames.items():
        track: dict[int, int] = {}
        for ev in events:
            src = track.get(ev.class_id, 0)
            track[ev.class_id] = src + 1
            w.writerow([frame, ev.class_id, src, f"{ev.azimuth_deg:.1f}",
                        f"{max(ev.distance_m, 0.01) / distance_scale:.2f}", int(ev.onscreen)])
    return out.getvalue()


def read_predictions(path, num_frames: int = DEFAULT_NUM_FRAMES,
                     distance_scale: float = 1.0) -> dict[str, ClipPredictions]:
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.csv"))
        if not files:
            raise ValidationError(f"{path}: no .csv files")
    elif path.is_file():
        files = [path]
    else:
        raise FileNotFoundError(path)
    return {f.stem: parse_clip(f.read_text(), f.stem, num_frames, distance_scale, str(f))
            for f in files}


def write_clip(path, clip: ClipPredictions, header: bool = False, distance_scale: float = 1.0) -> None:
    atomic_write_bytes(path, format_clip(clip, header, distance_scale).encode("ascii"))


def write_predictions(path, clips: Mapping[str, ClipPredictions], header: bool = False,
                      distance_scale: float = 1.0, single_file: bool = False) -> None:
    """Write clips to a directory, or to one file when `single_file` is set."""
    path = Path(path)
    if single_file:
        if len(clips) != 1:
            raise ValidationError(f"cannot write {len(clips)} clips to a single file")
        (clip,) = clips.values()
        write_clip(path, clip, header, distance_scale)
        return
    path.mkdir(parents=True, exist_ok=True)
    for clip_id in sorted(clips):
        write_clip(path / f"{clip_id}.csv", clips[clip_id], header, distance_scale)
