"""Multi-ACCDDOA frames <-> discrete events.

A frame is an array of shape (tracks, classes, 4) whose last axis holds
``(x, y, distance, onscreen_logit)``. The norm of ``(x, y)`` is the activity
and its angle the azimuth (x forward, y left).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit

from seldkit.core import ClipPredictions, SeldEvent, TaskConfig, ValidationError

DISTANCE_FLOOR_M = 0.01
ONSCREEN_LOGIT = 10.0


@dataclass(frozen=True)
class DecodeConfig:
    activity_threshold: float = 0.5
    onscreen_threshold: float = 0.5
    dedupe_angle_deg: float = 20.0

    def __post_init__(self):
        for name in ("activity_threshold", "onscreen_threshold"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValidationError(f"{name} must lie in (0, 1)")
        if not self.dedupe_angle_deg > 0:
            raise ValidationError("dedupe_angle_deg must be positive")


def _check_frame(frame: np.ndarray, task: TaskConfig) -> np.ndarray:
    frame = np.asarray(frame, dtype=np.float64)
    expected = (task.max_tracks, task.num_classes, 4)
    if frame.shape != expected:
        raise ValidationError(f"frame shape {frame.shape}, expected {expected}")
    if np.isnan(frame).any():
        raise ValidationError("NaN in ACCDDOA frame")
    return frame


def dedupe(candidates: Sequence[tuple[float, SeldEvent]], angle_deg: float) -> list[SeldEvent]:
    """Drop same-class events closer than `angle_deg` to a stronger kept event.

    `candidates` are ``(activity, event)`` pairs in track order; ties in
    activity go to the lower track.
    """
    order = sorted(range(len(candidates)), key=lambda i: (-candidates[i][0], i))
    kept: list[SeldEvent] = []
    for i in order:
        ev = candidates[i][1]
        if all(abs(ev.azimuth_deg - k.azimuth_deg) >= angle_deg
               for k in kept if k.class_id == ev.class_id):
            kept.append(ev)
    return kept


def decode_frame(frame: np.ndarray, cfg: DecodeConfig = DecodeConfig(),
                 task: TaskConfig = TaskConfig()) -> list[SeldEvent]:
    frame = _check_frame(frame, task)
    x, y, dist, logit = (frame[..., k] for k in range(4))
    norm = np.hypot(x, y)
    active = norm >= cfg.activity_threshold
    azimuth = np.clip(np.degrees(np.arctan2(y, x)), -90.0, 90.0)
    onscreen = expit(logit) >= cfg.onscreen_threshold
    events: list[SeldEvent] = []
    for c in range(task.num_classes):
        cands = [
            (float(norm[n, c]),
             SeldEvent(c, float(azimuth[n, c]), max(float(dist[n, c]), DISTANCE_FLOOR_M),
                       bool(onscreen[n, c])))
            for n in range(task.max_tracks) if active[n, c]
        ]
        events.extend(dedupe(cands, cfg.dedupe_angle_deg))
    return events


def encode_events(events: Iterable[SeldEvent], task: TaskConfig = TaskConfig()) -> np.ndarray:
    """Place each event in the lowest free track of its class with unit activity."""
    frame = np.zeros((task.max_tracks, task.num_classes, 4))
    used = [0] * task.num_classes
    for ev in events:
        if ev.class_id >= task.num_classes:
            raise ValidationError(f"class {ev.class_id} >= num_classes {task.num_classes}")
        slot = used[ev.class_id]
        if slot >= task.max_tracks:
            raise ValidationError(
                f"more than {task.max_tracks} events of class {ev.class_id} in one frame"
            )
        rad = math.radians(ev.azimuth_deg)
        frame[slot, ev.class_id] = (math.cos(rad), math.sin(rad), ev.distance_m,
                                    ONSCREEN_LOGIT if ev.onscreen else -ONSCREEN_LOGIT)
        used[ev.class_id] += 1
    return frame


def decode_sequence(frames: np.ndarray, clip_id: str, cfg: DecodeConfig = DecodeConfig(),
                    task: TaskConfig = TaskConfig()) -> ClipPredictions:
    """Decode a (T, tracks, classes, 4) array into clip predictions."""
    frames = np.asarray(frames)
    if frames.ndim != 4:
        raise ValidationError(f"expected a (T, N, C, 4) sequence, got shape {frames.shape}")
    decoded = {t: decode_frame(frames[t], cfg, task) for t in range(frames.shape[0])}
    return ClipPredictions(clip_id, frames.shape[0], decoded)


def encode_sequence(clip: ClipPredictions, task: TaskConfig = TaskConfig()) -> np.ndarray:
    return np.stack([encode_events(clip.events(t), task) for t in range(clip.num_frames)]) \
        if clip.num_frames else np.zeros((0, task.max_tracks, task.num_classes, 4))
