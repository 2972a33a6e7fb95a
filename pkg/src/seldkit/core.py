"""Shared domain types and azimuth helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

AZIMUTH_MIN = -90.0
AZIMUTH_MAX = 90.0


class ValidationError(ValueError):
    """Raised when an input violates a domain invariant."""


def _check_azimuth(value: float, name: str = "azimuth") -> float:
    value = float(value)
    if not (AZIMUTH_MIN <= value <= AZIMUTH_MAX):
        raise ValidationError(f"{name} {value!r} outside [-90, 90] degrees")
    return value


@dataclass(frozen=True)
class TaskConfig:
    num_classes: int = 13
    max_tracks: int = 3
    label_fps: int = 10
    angular_threshold_deg: float = 20.0
    rde_threshold: float = 1.0

    def __post_init__(self):
        for name in ("num_classes", "max_tracks", "label_fps"):
            if int(getattr(self, name)) <= 0:
                raise ValidationError(f"{name} must be positive")
        if not 0.0 < self.angular_threshold_deg < 180.0:
            raise ValidationError("angular_threshold_deg must lie in (0, 180)")
        if self.rde_threshold <= 0:
            raise ValidationError("rde_threshold must be positive")


@dataclass(frozen=True, order=True)
class SeldEvent:
    """One sound event at one label frame.

    Ordering follows the field order, which gives the canonical sort used for
    frame contents and CSV output.
    """

    class_id: int
    azimuth_deg: float
    distance_m: float
    onscreen: bool = False

    def __post_init__(self):
        if int(self.class_id) != self.class_id or self.class_id < 0:
            raise ValidationError(f"class_id must be a non-negative integer, got {self.class_id!r}")
        object.__setattr__(self, "class_id", int(self.class_id))
        object.__setattr__(self, "azimuth_deg", _check_azimuth(self.azimuth_deg))
        distance = float(self.distance_m)
        if not distance > 0 or not math.isfinite(distance):
            raise ValidationError(f"distance_m must be positive and finite, got {self.distance_m!r}")
        object.__setattr__(self, "distance_m", distance)
        object.__setattr__(self, "onscreen", bool(self.onscreen))


@dataclass(frozen=True)
class ClipPredictions:
    """Events of one clip keyed by 0-based label-frame index.

    Empty frames are dropped and events within a frame are stored sorted, so
    two instances holding the same events compare equal.
    """

    clip_id: str
    num_frames: int = 50
    frames: Mapping[int, tuple[SeldEvent, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if self.num_frames < 0:
            raise ValidationError("num_frames must be non-negative")
        clean = {}
        for index in sorted(self.frames):
            events = tuple(sorted(self.frames[index]))
            if not events:
                continue
            if not 0 <= index < self.num_frames:
                raise ValidationError(
                    f"clip {self.clip_id!r}: frame {index} outside [0, {self.num_frames})"
                )
            clean[int(index)] = events
        object.__setattr__(self, "frames", MappingProxyType(clean))

    def events(self, frame: int) -> tuple[SeldEvent, ...]:
        return self.frames.get(frame, ())

    def num_events(self) -> int:
        return sum(len(v) for v in self.frames.values())

    def __reduce__(self):
        return (ClipPredictions, (self.clip_id, self.num_frames, dict(self.frames)))

    def check(self, task: TaskConfig, tracks: bool = True) -> None:
        """Validate class range and, if `tracks`, the per-class track limit."""
        for index, events in self.frames.items():
            counts: dict[int, int] = {}
            for ev in events:
                if ev.class_id >= task.num_classes:
                    raise ValidationError(
                        f"clip {self.clip_id!r} frame {index}: class {ev.class_id} "
                        f">= num_classes {task.num_classes}"
                    )
                counts[ev.class_id] = counts.get(ev.class_id, 0) + 1
                if tracks and counts[ev.class_id] > task.max_tracks:
                    raise ValidationError(
                        f"clip {self.clip_id!r} frame {index}: more than "
                        f"{task.max_tracks} events of class {ev.class_id}"
                    )

    def with_num_frames(self, num_frames: int) -> "ClipPredictions":
        return ClipPredictions(self.clip_id, num_frames, dict(self.frames))


def angular_distance(a: float, b: float) -> float:
    """Absolute azimuth difference in degrees.

    The frontal range spans only 180 degrees, so no wraparound is applied.
    """
    return abs(_check_azimuth(a, "a") - _check_azimuth(b, "b"))


def mean_azimuth(values: Sequence[float] | Iterable[float]) -> float:
    """Arithmetic mean of frontal azimuths.

    Uses an exactly rounded sum so the result does not depend on input order.
    """
    values = [_check_azimuth(v) for v in values]
    if not values:
        raise ValidationError("mean_azimuth of an empty list")
    mean = math.fsum(values) / len(values)
    # clip guards against a one-ulp excursion past the extreme input
    return min(max(mean, min(values)), max(values))


def group_by_class(events: Iterable[SeldEvent]) -> dict[int, list[SeldEvent]]:
    groups: dict[int, list[SeldEvent]] = {}
    for ev in events:
        groups.setdefault(ev.class_id, []).append(ev)
    return groups
