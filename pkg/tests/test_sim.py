import math

import numpy as np
import pytest

from seldkit.core import TaskConfig, ValidationError
from seldkit.ensemble import MAJORITY, EnsembleConfig, fuse_clips
from seldkit.metrics import score
from seldkit.sim import (
    LINEAR,
    NoiseModel,
    SceneConfig,
    ensemble_study,
    format_study_csv,
    format_study_kv,
    format_study_table,
    gen_scenes,
    perturb,
    union_name,
)

SMALL = SceneConfig(num_clips=30, trajectory=LINEAR, rng_seed=7)


def all_events(clips):
    return [ev for c in clips.values() for t in c.frames for ev in c.events(t)]


def test_zero_clips():
    assert gen_scenes(SceneConfig(num_clips=0)) == {}


def test_deterministic():
    assert gen_scenes(SMALL) == gen_scenes(SMALL)
    nm = NoiseModel(5.0, 0.1, 0.1, 0.2, 0.05, rng_seed=3)
    truth = gen_scenes(SMALL)
    assert perturb(truth, nm, "SL") == perturb(truth, nm, "SL")
    assert perturb(truth, nm, "SL") != perturb(truth, nm, "ST")


def test_scene_constraints_by_full_scan():
    cfg = SceneConfig(num_clips=200, max_events_per_clip=10, trajectory=LINEAR, rng_seed=1)
    truth = gen_scenes(cfg)
    for clip in truth.values():
        for t in clip.frames:
            evs = clip.events(t)
            assert len(evs) <= 3
            for ev in evs:
                assert abs(ev.azimuth_deg) <= 75
                assert ev.onscreen == (abs(ev.azimuth_deg) <= 50)
        # every activity run (class, distance identifies a source) lasts >= 3 frames
        runs = {}
        for t in range(clip.num_frames):
            for ev in clip.events(t):
                runs.setdefault((ev.class_id, ev.distance_m), []).append(t)
        for frames in runs.values():
            starts = [f for i, f in enumerate(frames) if i == 0 or frames[i - 1] != f - 1]
            for s in starts:
                length = 0
                while s + length in frames:
                    length += 1
                assert length >= 3


def test_infeasible_config():
    with pytest.raises(ValidationError):
        gen_scenes(SceneConfig(max_concurrent=4))
    with pytest.raises(ValidationError):
        NoiseModel(miss_rate=1.5)


def test_identity_noise_and_total_miss():
    truth = gen_scenes(SMALL)
    assert perturb(truth, NoiseModel()).clips == truth
    missed = perturb(truth, NoiseModel(miss_rate=1.0))
    assert all_events(missed.clips) == []


def test_doa_noise_std_is_calibrated():
    truth = gen_scenes(SceneConfig(num_clips=150, rng_seed=11))
    noisy = perturb(truth, NoiseModel(doa_noise_std_deg=5.0, rng_seed=5))
    errs = []
    for cid, clip in truth.items():
        for t in clip.frames:
            # events are sorted by class then azimuth; with 40 degrees of same-class
            # separation a 5 degree noise essentially never swaps their order
            errs += [b.azimuth_deg - a.azimuth_deg
                     for a, b in zip(clip.events(t), noisy.clips[cid].events(t))]
    assert len(errs) >= 10_000
    assert abs(np.std(errs) - 5.0) / 5.0 < 0.05


def test_zero_noise_majority_is_perfect():
    truth = gen_scenes(SMALL)
    rep = ensemble_study(truth, {s: NoiseModel() for s in ("SL", "ST", "TL")})
    assert rep.mean(MAJORITY, "f1") == 100
    assert rep.modes == ("SL", "ST", "TL", MAJORITY, union_name("SL", "ST"),
                         union_name("SL", "TL"), union_name("ST", "TL"))


def test_independent_fps_are_suppressed():
    truth = gen_scenes(SceneConfig(num_clips=10, rng_seed=2))
    task = TaskConfig()
    wins = 0
    trials = 100
    for k in range(trials):
        outs = [perturb(truth, NoiseModel(false_positive_rate_per_frame=0.2, rng_seed=k), s, task)
                for s in ("SL", "ST", "TL")]
        fused = fuse_clips(outs, EnsembleConfig(), MAJORITY)
        fused_fp = score(fused, truth).counts.fp
        wins += all(fused_fp < score(o.clips, truth).counts.fp for o in outs)
    assert wins >= 0.99 * trials


def test_averaging_three_reduces_doae_by_sqrt3():
    truth = gen_scenes(SceneConfig(num_clips=300, rng_seed=4))
    noise = {s: NoiseModel(doa_noise_std_deg=5.0, rng_seed=9) for s in ("SL", "ST", "TL")}
    rep = ensemble_study(truth, noise)
    single = np.mean([rep.mean(s, "doae") for s in noise])
    assert single == pytest.approx(5.0 * math.sqrt(2 / math.pi), rel=0.05)
    assert rep.mean(MAJORITY, "doae") == pytest.approx(single / math.sqrt(3), rel=0.10)


def test_worker_count_does_not_change_results():
    truth = gen_scenes(SceneConfig(num_clips=8, rng_seed=3))
    noise = {s: NoiseModel(5.0, 0.1, 0.1, 0.2, 0.05, rng_seed=1) for s in ("SL", "ST", "TL")}
    a = ensemble_study(truth, noise, trials=3, workers=1)
    b = ensemble_study(truth, noise, trials=3, workers=2)
    assert format_study_csv(a) == format_study_csv(b)
    assert format_study_kv(a) == format_study_kv(b)
    assert format_study_table(a) == format_study_table(b)


def test_study_needs_three_specialists():
    with pytest.raises(ValidationError):
        ensemble_study({}, {"SL": NoiseModel(), "ST": NoiseModel()})
