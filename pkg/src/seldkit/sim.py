"""Synthetic scenes and noisy specialist predictions for Monte-Carlo studies.

Every random stream is keyed by (seed, specialist, clip), so results do not
depend on iteration order or on how trials are spread over worker processes.
"""

from __future__ import annotations

import itertools
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from seldkit.core import ClipPredictions, SeldEvent, TaskConfig, ValidationError
from seldkit.ensemble import MAJORITY, UNION, EnsembleConfig, SpecialistOutput, fuse_clips
from seldkit.metrics import MetricsConfig, MetricsReport, score

STATIC = "static"
LINEAR = "linear"
METRIC_NAMES = ("f1", "f1_on", "precision", "recall", "doae", "rde", "onscreen_acc")


def _key(text: str) -> int:
    return zlib.crc32(text.encode("utf-8"))


@dataclass(frozen=True)
class NoiseModel:
    doa_noise_std_deg: float = 0.0
    distance_noise_rel_std: float = 0.0
    miss_rate: float = 0.0
    false_positive_rate_per_frame: float = 0.0
    onscreen_flip_rate: float = 0.0
    rng_seed: int = 0
    fp_distance_range: tuple[float, float] = (0.5, 5.0)

    def __post_init__(self):
        for name in ("miss_rate", "onscreen_flip_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1]")
        for name in ("doa_noise_std_deg", "distance_noise_rel_std", "false_positive_rate_per_frame"):
            if not getattr(self, name) >= 0.0:
                raise ValidationError(f"{name} must be non-negative")
        lo, hi = self.fp_distance_range
        if not 0 < lo <= hi:
            raise ValidationError("fp_distance_range must satisfy 0 < lo <= hi")


@dataclass(frozen=True)
class SceneConfig:
    num_clips: int = 100
    clip_frames: int = 50
    num_classes: int = 13
    max_concurrent: int = 3
    max_events_per_clip: int = 6
    trajectory: str = STATIC
    max_drift_deg_per_frame: float = 1.0
    distance_range: tuple[float, float] = (0.5, 5.0)
    azimuth_limit_deg: float = 75.0
    onscreen_half_fov_deg: float = 50.0
    min_duration: int = 3
    min_same_class_separation_deg: float = 40.0
    rng_seed: int = 0

    def check(self, task: TaskConfig = TaskConfig()) -> None:
        if self.max_concurrent > task.max_tracks:
            raise ValidationError(
                f"max_concurrent {self.max_concurrent} exceeds max_tracks {task.max_tracks}"
            )
        if self.num_clips < 0 or self.clip_frames < 1 or self.max_concurrent < 1:
            raise ValidationError("num_clips >= 0, clip_frames >= 1 and max_concurrent >= 1 required")
        if self.min_duration < 1 or self.min_duration > self.clip_frames:
            raise ValidationError("min_duration must lie in [1, clip_frames]")
        if self.trajectory not in (STATIC, LINEAR):
            raise ValidationError(f"trajectory must be 'static' or 'linear', got {self.trajectory!r}")
        if not 0 < self.azimuth_limit_deg <= 90:
            raise ValidationError("azimuth_limit_deg must lie in (0, 90]")
        lo, hi = self.distance_range
        if not 0 < lo <= hi:
            raise ValidationError("distance_range must satisfy 0 < lo <= hi")
        if self.num_classes < 1 or self.num_classes > task.num_classes:
            raise ValidationError(f"num_classes must lie in [1, {task.num_classes}]")


def clip_name(index: int) -> str:
    return f"clip{index:05d}"


def _gen_clip(cfg: SceneConfig, index: int) -> ClipPredictions:
    rng = np.random.default_rng([cfg.rng_seed, index])
    T = cfg.clip_frames
    frames: list[list[SeldEvent]] = [[] for _ in range(T)]
    lim = cfg.azimuth_limit_deg
    n_events = int(rng.integers(1, cfg.max_events_per_clip + 1))
    for _ in range(n_events):
        for _attempt in range(20):
            cls = int(rng.integers(cfg.num_classes))
            dur = int(rng.integers(cfg.min_duration, T + 1))
            onset = int(rng.integers(0, T - dur + 1))
            az0 = float(rng.uniform(-lim, lim))
            drift = float(rng.uniform(-1, 1)) * cfg.max_drift_deg_per_frame
            dist = float(rng.uniform(*cfg.distance_range))
            if cfg.trajectory == STATIC:
                drift = 0.0
            track = [(t, min(max(az0 + drift * (t - onset), -lim), lim))
                     for t in range(onset, onset + dur)]
            ok = all(
                len(frames[t]) < cfg.max_concurrent
                and all(abs(e.azimuth_deg - az) >= cfg.min_same_class_separation_deg
                        for e in frames[t] if e.class_id == cls)
                for t, az in track
            )
            if ok:
                for t, az in track:
                    frames[t].append(SeldEvent(cls, az, dist, abs(az) <= cfg.onscreen_half_fov_deg))
                break
    return ClipPredictions(clip_name(index), T, dict(enumerate(frames)))


def gen_scenes(cfg: SceneConfig, task: TaskConfig = TaskConfig()) -> dict[str, ClipPredictions]:
    """Ground-truth clips with piecewise-constant activity of >= min_duration frames."""
    cfg.check(task)
    return {clip_name(i): _gen_clip(cfg, i) for i in range(cfg.num_clips)}


def _perturb_clip(clip: ClipPredictions, nm: NoiseModel, specialist_id: str,
                  task: TaskConfig) -> ClipPredictions:
    rng = np.random.default_rng([nm.rng_seed, _key(specialist_id), _key(clip.clip_id)])
    frames: dict[int, list[SeldEvent]] = {}
    for t in range(clip.num_frames):
        out = []
        for ev in clip.events(t):
            # draws happen unconditionally so a rate change does not shift later streams
            missed = rng.random() < nm.miss_rate
            az_noise = rng.normal(0.0, nm.doa_noise_std_deg)
            dist_noise = rng.normal(0.0, nm.distance_noise_rel_std)
            flip = rng.random() < nm.onscreen_flip_rate
            if missed:
                continue
            az = min(max(ev.azimuth_deg + az_noise, -90.0), 90.0)
            out.append(SeldEvent(ev.class_id, az, ev.distance_m * math.exp(dist_noise),
                                 ev.onscreen != flip))
        for _ in range(int(rng.poisson(nm.false_positive_rate_per_frame))):
            cls = int(rng.integers(task.num_classes))
            az = float(rng.uniform(-90.0, 90.0))
            dist = float(rng.uniform(*nm.fp_distance_range))
            onscreen = bool(rng.random() < 0.5)
            if sum(e.class_id == cls for e in out) < task.max_tracks:
                out.append(SeldEvent(cls, az, dist, onscreen))
        if out:
            frames[t] = out
    return ClipPredictions(clip.clip_id, clip.num_frames, frames)


def perturb(truth: Mapping[str, ClipPredictions], nm: NoiseModel, specialist_id: str = "S",
            task: TaskConfig = TaskConfig()) -> SpecialistOutput:
    """Simulate one specialist: misses, Gaussian azimuth noise (clamped),
    log-normal distance noise, on-screen flips and uniform false positives."""
    clips = {cid: _perturb_clip(truth[cid], nm, specialist_id, task) for cid in sorted(truth)}
    return SpecialistOutput(specialist_id, clips)


@dataclass(frozen=True)
class StudyReport:
    modes: tuple[str, ...]
    # one dict per (trial, mode) with "trial", "mode" and METRIC_NAMES keys
    rows: tuple[dict, ...]
    num_clips: int
    trials: int

    def values(self, mode: str, metric: str) -> np.ndarray:
        return np.array([r[metric] for r in self.rows if r["mode"] == mode], dtype=float)

    def mean(self, mode: str, metric: str) -> float:
        return float(np.nanmean(self.values(mode, metric)))

    def ci95(self, mode: str, metric: str) -> float:
        v = self.values(mode, metric)
        v = v[~np.isnan(v)]
        if v.size < 2:
            return math.nan
        return float(1.96 * v.std(ddof=1) / math.sqrt(v.size))


def union_name(a: str, b: str) -> str:
    return f"union_{a}_{b}"


def _report_row(trial: int, mode: str, rep: MetricsReport) -> dict:
    row = {"trial": trial, "mode": mode}
    for name in METRIC_NAMES:
        row[name] = float(getattr(rep, name))
    return row


@dataclass(frozen=True)
class _TrialJob:
    truth: Mapping[str, ClipPredictions]
    noise: Mapping[str, NoiseModel]
    ens_cfg: EnsembleConfig
    metrics_cfg: MetricsConfig
    task: TaskConfig
    pairs: bool = True


def run_trial(job: _TrialJob, trial: int) -> tuple[list[dict], dict[str, SpecialistOutput], dict]:
    """Perturb, fuse and score once with per-specialist seed = base + trial."""
    outputs = {sid: perturb(job.truth, replace(nm, rng_seed=nm.rng_seed + trial), sid, job.task)
               for sid, nm in job.noise.items()}
    rows = [_report_row(trial, sid, score(out.clips, job.truth, job.metrics_cfg, job.task))
            for sid, out in outputs.items()]
    fused = {MAJORITY: fuse_clips(list(outputs.values()), job.ens_cfg, MAJORITY)}
    rows.append(_report_row(trial, MAJORITY, score(fused[MAJORITY], job.truth, job.metrics_cfg, job.task)))
    if job.pairs:
        for a, b in itertools.combinations(outputs, 2):
            name = union_name(a, b)
            fused[name] = fuse_clips([outputs[a], outputs[b]], job.ens_cfg, UNION)
            rows.append(_report_row(trial, name, score(fused[name], job.truth, job.metrics_cfg, job.task)))
    return rows, outputs, fused


def _trial_rows(job: _TrialJob, trial: int) -> list[dict]:
    return run_trial(job, trial)[0]


def ensemble_study(truth: Mapping[str, ClipPredictions], noise: Mapping[str, NoiseModel],
                   trials: int = 1, workers: int = 1,
                   ens_cfg: EnsembleConfig = EnsembleConfig(),
                   metrics_cfg: MetricsConfig = MetricsConfig(),
                   task: TaskConfig = TaskConfig()) -> StudyReport:
    """Score each specialist, the majority ensemble and every pairwise union.

    Parameters
    ----------
    truth : mapping of clip id to ClipPredictions
    noise : mapping of specialist id to NoiseModel, at least three entries
    trials : number of independent perturbation rounds
    workers : process count; results are identical for any value
    """
    if len(noise) < 3:
        raise ValidationError(f"ensemble study needs at least 3 specialists, got {len(noise)}")
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    job = _TrialJob(dict(truth), dict(noise), ens_cfg, metrics_cfg, task)
    if workers > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_trial = list(pool.map(_trial_rows, itertools.repeat(job), range(trials)))
    else:
        per_trial = [_trial_rows(job, k) for k in range(trials)]
    rows = tuple(r for rows in per_trial for r in rows)
    modes = tuple(dict.fromkeys(r["mode"] for r in rows))
    return StudyReport(modes, rows, len(truth), trials)


def _fmt(x: float, digits: int = 2) -> str:
    return "nan" if math.isnan(x) else f"{x:.{digits}f}"


def format_study_table(report: StudyReport) -> str:
    cols = ("f1", "f1_on", "precision", "recall", "doae", "rde", "onscreen_acc")
    width = max(len(m) for m in report.modes)
    lines = [f"clips={report.num_clips} trials={report.trials} (mean +- 95% CI half-width)",
             f"{'mode':<{width}} " + " ".join(f"{c:>16}" for c in cols)]
    for m in report.modes:
        cells = []
        for c in cols:
            scale = 100.0 if c == "rde" else 1.0
            cells.append(f"{_fmt(report.mean(m, c) * scale):>8} +- {_fmt(report.ci95(m, c) * scale):<5}")
        lines.append((f"{m:<{width}} " + " ".join(f"{c:>16}" for c in cells)).rstrip())
    return "\n".join(lines) + "\n"


def format_study_kv(report: StudyReport) -> str:
    lines = [f"clips={report.num_clips}", f"trials={report.trials}"]
    for m in report.modes:
        for c in METRIC_NAMES:
            scale = 100.0 if c == "rde" else 1.0
            lines.append(f"{m}.{c}={_fmt(report.mean(m, c) * scale)}")
            lines.append(f"{m}.{c}.ci95={_fmt(report.ci95(m, c) * scale)}")
    return "\n".join(lines) + "\n"


def format_study_csv(report: StudyReport) -> str:
    """Per-trial rows; rde in percent like the other report formats."""
    header = "trial,mode," + ",".join(METRIC_NAMES)
    lines = [header]
    for r in report.rows:
        lines.append(f"{r['trial']},{r['mode']},"
                     + ",".join(_fmt(r[c] * (100.0 if c == "rde" else 1.0), 4) for c in METRIC_NAMES))
    return "\n".join(lines) + "\n"
