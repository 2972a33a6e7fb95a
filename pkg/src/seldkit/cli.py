"""Command-line entry point: ``seldkit {features,fuse,eval,simulate,trace}``.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from seldkit import csvio, features, metrics, plotting, shapes, sim
from seldkit.container import atomic_write_bytes, write_features
from seldkit.core import ClipPredictions, TaskConfig, ValidationError
from seldkit.ensemble import (
    ANY_CONTRIBUTING,
    ANY_SPECIALIST,
    MAJORITY,
    UNION,
    EnsembleConfig,
    SpecialistOutput,
    fuse_clips,
)

log = logging.getLogger("seldkit")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2

DISTANCE_UNITS = {"m": 1.0, "cm": 0.01}


def _write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# ---------------------------------------------------------------- features

def cmd_features(args) -> int:
    src = Path(args.input)
    if src.is_dir():
        wavs = sorted(src.glob("*.wav"))
        if not wavs:
            raise ValidationError(f"{src}: no .wav files")
    elif src.is_file():
        wavs = [src]
    else:
        raise FileNotFoundError(src)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)

    stacks = {}
    for wav in wavs:
        stereo = features.read_stereo_wav(wav)
        stacks[wav.stem] = features.build_features(stereo, with_ild=not args.no_ild)
        log.info("%s: %s", wav.name, stacks[wav.stem].shape)

    if args.stats == "fit":
        stats = features.fit_stats(stacks.values())
    else:
        stats = features.NormStats.load(args.stats)

    written: list[Path] = []
    try:
        for stem, stack in stacks.items():
            norm = features.normalize(stack, stats)
            path = out / f"{stem}.tosf"
            write_features(path, norm.planes)
            written.append(path)
            if args.figures:
                fig_path = out / f"{stem}.png"
                plotting.plot_features(norm, fig_path)
                written.append(fig_path)
        stats_path = out / "stats.txt"
        _write_text(stats_path, stats.to_text())
        written.append(stats_path)
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    print(f"wrote {len(stacks)} feature file(s) to {out} "
          f"(planes={len(stats.labels)}, frames x mels = "
          f"{'/'.join(f'{s.shape[1]}x{s.shape[2]}' for s in list(stacks.values())[:1])})")
    return EXIT_OK


# ---------------------------------------------------------------- fuse / eval

def _read(path, args) -> dict:
    return csvio.read_predictions(path, args.num_frames, DISTANCE_UNITS[args.distance_unit])


def _align_frames(groups: list[dict]) -> list[dict]:
    """Give every clip the largest frame count seen for it across inputs."""
    counts: dict[str, int] = {}
    for clips in groups:
        for cid, clip in clips.items():
            counts[cid] = max(counts.get(cid, 0), clip.num_frames)
    return [{cid: clip.with_num_frames(counts[cid]) for cid, clip in clips.items()} for clips in groups]


def cmd_fuse(args) -> int:
    n = len(args.inputs)
    if n not in (2, 3):
        raise ValidationError(f"fuse takes 2 or 3 inputs, got {n}")
    mode = args.mode or (MAJORITY if n == 3 else UNION)
    if mode == UNION and n != 2:
        raise ValidationError("union fusion is pairwise; pass exactly 2 inputs")
    cfg = EnsembleConfig(angular_threshold_deg=args.threshold_deg, onscreen_rule=args.onscreen_rule)
    task = TaskConfig(num_classes=args.num_classes)
    groups = [_read(p, args) for p in args.inputs]
    single = all(Path(p).is_file() for p in args.inputs)
    if single:
        # single files describe the same clip whatever their names
        cid = Path(args.output).stem
        groups = [{cid: ClipPredictions(cid, c.num_frames, dict(c.frames))
                   for c in clips.values()} for clips in groups]
    groups = _align_frames(groups)
    outputs = []
    for path, clips in zip(args.inputs, groups):
        for clip in clips.values():
            clip.check(task)
        outputs.append(SpecialistOutput(str(path), clips))
    fused = fuse_clips(outputs, cfg, mode)
    csvio.write_predictions(args.output, fused, args.header, DISTANCE_UNITS[args.distance_unit],
                            single_file=single)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = metrics.MetricsConfig(
        angular_threshold_deg=args.threshold_deg,
        rde_threshold=args.rde_threshold,
        require_onscreen_match=args.onscreen,
        class_averaging=args.averaging,
    )
    task = TaskConfig(num_classes=args.num_classes)
    preds, refs = _read(args.pred, args), _read(args.ref, args)
    if len(preds) == 1 and len(refs) == 1 and Path(args.pred).is_file() and Path(args.ref).is_file():
        # two single files are compared directly whatever their names
        (p,), (r,) = preds.values(), refs.values()
        preds = {r.clip_id: ClipPredictions(r.clip_id, p.num_frames, dict(p.frames))}
    preds, refs = _align_frames([preds, refs])
    report = metrics.score(preds, refs, cfg, task)
    if args.format == "kv":
        sys.stdout.write(metrics.format_kv(report))
    else:
        print(metrics.format_summary(report, args.onscreen))
        if args.per_class:
            sys.stdout.write(metrics.format_table(report))
    if args.figure:
        plotting.plot_per_class(report, args.figure)
    return EXIT_OK


# ---------------------------------------------------------------- simulate

NOISE_FIELDS = {
    "doa_noise_std_deg": float,
    "distance_noise_rel_std": float,
    "miss_rate": float,
    "false_positive_rate_per_frame": float,
    "onscreen_flip_rate": float,
    "seed": int,
}


@dataclass
class SimConfig:
    scene: sim.SceneConfig = field(default_factory=sim.SceneConfig)
    specialists: tuple[str, ...] = ("SL", "ST", "TL")
    noise: dict = field(default_factory=dict)
    trials: int = 5
    workers: int = 1
    threshold_deg: float = 20.0
    rde_threshold: float = 1.0
    onscreen_rule: str = ANY_CONTRIBUTING
    averaging: str = metrics.MACRO


DEFAULT_SIM_CONFIG = """\
# scene
seed = 2025
num_clips = 200
clip_frames = 50
num_classes = 13
max_concurrent = 3
trajectory = linear
# study
trials = 5
specialists = SL,ST,TL
# noise applied to every specialist; override with e.g. SL.miss_rate = 0.05
noise.doa_noise_std_deg = 5
noise.distance_noise_rel_std = 0.1
noise.miss_rate = 0.1
noise.false_positive_rate_per_frame = 0.2
noise.onscreen_flip_rate = 0.05
"""

_SCENE_KEYS = {f.name: f.type for f in fields(sim.SceneConfig)}


def parse_sim_config(text: str) -> SimConfig:
    """Parse ``key = value`` lines; '#' starts a comment."""
    scene: dict = {}
    study: dict = {}
    shared: dict = {}
    per_spec: dict[str, dict] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key == "seed":
                scene["rng_seed"] = int(value)
            elif key in ("distance_min", "distance_max"):
                scene[key] = float(value)
            elif key in _SCENE_KEYS and key not in ("rng_seed", "distance_range"):
                kind = _SCENE_KEYS[key]
                scene[key] = value if kind in ("str", str) else (
                    int(value) if kind in ("int", int) else float(value))
            elif key in ("trials", "workers"):
                study[key] = int(value)
            elif key in ("threshold_deg", "rde_threshold"):
                study[key] = float(value)
            elif key in ("onscreen_rule", "averaging"):
                study[key] = value
            elif key == "specialists":
                study[key] = tuple(s.strip() for s in value.split(",") if s.strip())
            elif "." in key:
                owner, name = key.split(".", 1)
                if name not in NOISE_FIELDS:
                    raise ValidationError(f"config line {lineno}: unknown noise key {key!r}")
                target = shared if owner == "noise" else per_spec.setdefault(owner, {})
                target[name] = NOISE_FIELDS[name](value)
            else:
                raise ValidationError(f"config line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"config line {lineno}: bad value for {key!r}: {value!r}") from None

    lo = scene.pop("distance_min", sim.SceneConfig.distance_range[0])
    hi = scene.pop("distance_max", sim.SceneConfig.distance_range[1])
    cfg = SimConfig(scene=sim.SceneConfig(distance_range=(lo, hi), **scene), **study)
    unknown = sorted(set(per_spec) - set(cfg.specialists))
    if unknown:
        raise ValidationError(f"noise overrides for unlisted specialist(s): {', '.join(unknown)}")
    if len(cfg.specialists) < 3:
        raise ValidationError("simulate needs at least 3 specialists")
    for sid in cfg.specialists:
        params = {**shared, **per_spec.get(sid, {})}
        seed = params.pop("seed", cfg.scene.rng_seed)
        cfg.noise[sid] = sim.NoiseModel(rng_seed=seed, fp_distance_range=(lo, hi), **params)
    if cfg.onscreen_rule not in (ANY_CONTRIBUTING, ANY_SPECIALIST):
        raise ValidationError(f"unknown onscreen_rule {cfg.onscreen_rule!r}")
    return cfg


def cmd_simulate(args) -> int:
    if args.config == "default":
        text = DEFAULT_SIM_CONFIG
    else:
        text = Path(args.config).read_text()
    cfg = parse_sim_config(text)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    task = TaskConfig(num_classes=max(cfg.scene.num_classes, 1))
    ens_cfg = EnsembleConfig(angular_threshold_deg=cfg.threshold_deg, onscreen_rule=cfg.onscreen_rule)
    met_cfg = metrics.MetricsConfig(angular_threshold_deg=cfg.threshold_deg,
                                    rde_threshold=cfg.rde_threshold, class_averaging=cfg.averaging)
    truth = sim.gen_scenes(cfg.scene, task)
    report = sim.ensemble_study(truth, cfg.noise, cfg.trials, cfg.workers, ens_cfg, met_cfg, task)

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    csvio.write_predictions(out / "truth", truth)
    job = sim._TrialJob(truth, cfg.noise, ens_cfg, met_cfg, task, pairs=False)
    _, outputs, fused = sim.run_trial(job, 0)
    for sid, output in outputs.items():
        csvio.write_predictions(out / sid, output.clips)
    csvio.write_predictions(out / MAJORITY, fused[MAJORITY])
    table = sim.format_study_table(report)
    _write_text(out / "study_report.txt", table)
    _write_text(out / "study_report.kv", sim.format_study_kv(report))
    _write_text(out / "study_trials.csv", sim.format_study_csv(report))
    plotting.plot_study(report, out / "study.png")
    sys.stdout.write(table)
    return EXIT_OK


# ---------------------------------------------------------------- trace

def cmd_trace(args) -> int:
    shape = (args.planes, args.frames, args.mels)
    sys.stdout.write(shapes.format_trace(shapes.seld_encoder_trace(shape)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seldkit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="stereo WAV -> TOSF feature files")
    p.add_argument("input", help="WAV file or directory of WAVs")
    p.add_argument("output", help="output directory")
    p.add_argument("--no-ild", action="store_true", help="log-mel planes only (2-plane set)")
    p.add_argument("--stats", default="fit", help="stats sidecar to apply, or 'fit' (default)")
    p.add_argument("--figures", action="store_true", help="also render a PNG per clip")
    p.set_defaults(func=cmd_features)

    def csv_opts(q):
        q.add_argument("--num-frames", type=int, default=csvio.DEFAULT_NUM_FRAMES)
        q.add_argument("--num-classes", type=int, default=13)
        q.add_argument("--distance-unit", choices=sorted(DISTANCE_UNITS), default="m")
        q.add_argument("--threshold-deg", type=float, default=20.0)

    p = sub.add_parser("fuse", help="fuse 2 or 3 specialist prediction CSVs")
    p.add_argument("inputs", nargs="+", help="prediction CSV files or directories")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--mode", choices=(MAJORITY, UNION))
    p.add_argument("--onscreen-rule", choices=(ANY_CONTRIBUTING, ANY_SPECIALIST), default=ANY_CONTRIBUTING)
    p.add_argument("--header", action="store_true")
    csv_opts(p)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", help="score predictions against references")
    p.add_argument("pred")
    p.add_argument("ref")
    p.add_argument("--onscreen", action="store_true", help="also report F1o")
    p.add_argument("--averaging", choices=(metrics.MACRO, metrics.MICRO), default=metrics.MACRO)
    p.add_argument("--format", choices=("text", "kv"), default="text")
    p.add_argument("--per-class", action="store_true")
    p.add_argument("--rde-threshold", type=float, default=1.0)
    p.add_argument("--figure", help="write a per-class F1 bar chart (PNG)")
    csv_opts(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="Monte-Carlo ensemble study")
    p.add_argument("config", help="key=value config file, or 'default'")
    p.add_argument("output", help="output directory")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("trace", help="print the SELD encoder pooling trace")
    p.add_argument("--planes", type=int, default=3)
    p.add_argument("--frames", type=int, default=800)
    p.add_argument("--mels", type=int, default=64)
    p.set_defaults(func=cmd_trace)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
