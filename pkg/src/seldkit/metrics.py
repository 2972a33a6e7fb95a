"""Frame-level, location- and distance-thresholded SELD scoring.

Per frame and class, predictions and references are paired by a
minimum-total-angular-distance assignment. A pair is a true positive when the
angular error is within the threshold and the relative distance error within
``rde_threshold`` (plus matching on-screen flags for the on-screen variant).
DOA error, relative distance error and on-screen accuracy are averaged over
all class-matched pairs, independent of the thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from seldkit.core import ClipPredictions, SeldEvent, TaskConfig, ValidationError, group_by_class

MACRO = "macro"
MICRO = "micro"


@dataclass(frozen=True)
class MetricsConfig:
    angular_threshold_deg: float = 20.0
    rde_threshold: float = 1.0
    # selects which F1 variant is the headline number
    require_onscreen_match: bool = False
    class_averaging: str = MACRO

    def __post_init__(self):
        if not self.angular_threshold_deg > 0 or not self.rde_threshold > 0:
            raise ValidationError("thresholds must be positive")
        if self.class_averaging not in (MACRO, MICRO):
            raise ValidationError(f"class_averaging must be 'macro' or 'micro', got {self.class_averaging!r}")


@dataclass
class ClassCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tp_on: int = 0
    fp_on: int = 0
    fn_on: int = 0
    pairs: int = 0
    doa_sum: float = 0.0
    rde_sum: float = 0.0
    onscreen_hits: int = 0

    def add(self, other: "ClassCounts") -> None:
        for name in self.__dataclass_fields__:
            setattr(self, name, getattr(self, name) + getattr(other, name))

    @property
    def num_refs(self) -> int:
        return self.tp + self.fn


def _f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 100.0 * 2 * tp / denom if denom else 0.0


def _ratio(num: float, den: int, scale: float = 1.0) -> float:
    return scale * num / den if den else math.nan


@dataclass(frozen=True)
class ClassMetrics:
    f1: float
    f1_on: float
    doae: float
    rde: float
    onscreen_acc: float
    counts: ClassCounts


@dataclass(frozen=True)
class MetricsReport:
    """Scores in challenge units.

    ``f1``, ``f1_on``, ``onscreen_acc``, ``precision`` and ``recall`` are
    percentages, ``doae`` is degrees and ``rde`` is a plain ratio (shown
    multiplied by 100 when formatted). Quantities averaged over matched
    pairs are NaN when nothing was matched.
    """

    f1: float
    f1_on: float
    doae: float
    rde: float
    onscreen_acc: float
    precision: float
    recall: float
    per_class: Mapping[int, ClassMetrics]
    counts: ClassCounts
    config: MetricsConfig = field(default_factory=MetricsConfig)

    @property
    def headline_f1(self) -> float:
        return self.f1_on if self.config.require_onscreen_match else self.f1


def match_frame(preds: Sequence[SeldEvent], refs: Sequence[SeldEvent]):
    """Minimum total angular distance one-to-one pairing.

    Returns
    -------
    pairs : list of (pred, ref)
    unmatched_preds, unmatched_refs : list of SeldEvent
    """
    preds, refs = list(preds), list(refs)
    if not preds or not refs:
        return [], preds, refs
    if len(preds) == 1 and len(refs) == 1:
        return [(preds[0], refs[0])], [], []
    cost = np.abs(np.array([p.azimuth_deg for p in preds])[:, None]
                  - np.array([r.azimuth_deg for r in refs])[None, :])
    rows, cols = linear_sum_assignment(cost)
    pairs = [(preds[i], refs[j]) for i, j in zip(rows, cols)]
    rows, cols = set(rows.tolist()), set(cols.tolist())
    return (pairs, [p for i, p in enumerate(preds) if i not in rows],
            [r for j, r in enumerate(refs) if j not in cols])


def frame_counts(preds: Sequence[SeldEvent], refs: Sequence[SeldEvent],
                 cfg: MetricsConfig, out: dict[int, ClassCounts] | None = None) -> dict[int, ClassCounts]:
    """Per-class counts for one frame, added into `out` when given."""
    if out is None:
        out = {}
    pg, rg = group_by_class(preds), group_by_class(refs)
    for c in set(pg) | set(rg):
        cc = out.setdefault(c, ClassCounts())
        pairs, up, ur = match_frame(pg.get(c, []), rg.get(c, []))
        cc.fp += len(up)
        cc.fp_on += len(up)
        cc.fn += len(ur)
        cc.fn_on += len(ur)
        for p, r in pairs:
            doa = abs(p.azimuth_deg - r.azimuth_deg)
            rel = abs(p.distance_m - r.distance_m) / r.distance_m
            same_screen = p.onscreen == r.onscreen
            cc.pairs += 1
            cc.doa_sum += doa
            cc.rde_sum += rel
            cc.onscreen_hits += same_screen
            hit = doa <= cfg.angular_threshold_deg and rel <= cfg.rde_threshold
            if hit:
                cc.tp += 1
            else:
                cc.fp += 1
                cc.fn += 1
            if hit and same_screen:
                cc.tp_on += 1
            else:
                cc.fp_on += 1
                cc.fn_on += 1
    return out


def _check_clip_ids(preds: Mapping[str, ClipPredictions], refs: Mapping[str, ClipPredictions]):
    if set(preds) != set(refs):
        diff = sorted(set(preds).symmetric_difference(refs))
        raise ValidationError(f"prediction and reference clip ids differ: {diff}")


def accumulate(preds: Mapping[str, ClipPredictions], refs: Mapping[str, ClipPredictions],
               cfg: MetricsConfig = MetricsConfig()) -> dict[int, ClassCounts]:
    """Per-class counts summed over all clips and frames."""
    _check_clip_ids(preds, refs)
    totals: dict[int, ClassCounts] = {}
    for clip_id in sorted(refs):
        p, r = preds[clip_id], refs[clip_id]
        for t in set(p.frames) | set(r.frames):
            frame_counts(p.events(t), r.events(t), cfg, totals)
    return totals


def report_from_counts(totals: Mapping[int, ClassCounts],
                       cfg: MetricsConfig = MetricsConfig()) -> MetricsReport:
    all_counts = ClassCounts()
    for cc in totals.values():
        all_counts.add(cc)
    if all_counts.num_refs == 0:
        raise ValidationError("reference set has no events; recall is undefined")
    per_class = {
        c: ClassMetrics(
            f1=_f1(cc.tp, cc.fp, cc.fn),
            f1_on=_f1(cc.tp_on, cc.fp_on, cc.fn_on),
            doae=_ratio(cc.doa_sum, cc.pairs),
            rde=_ratio(cc.rde_sum, cc.pairs),
            onscreen_acc=_ratio(cc.onscreen_hits, cc.pairs, 100.0),
            counts=cc,
        )
        for c, cc in sorted(totals.items())
    }
    if cfg.class_averaging == MACRO:
        scored = [m for c, m in per_class.items() if totals[c].num_refs > 0]
        f1 = math.fsum(m.f1 for m in scored) / len(scored)
        f1_on = math.fsum(m.f1_on for m in scored) / len(scored)
    else:
        f1 = _f1(all_counts.tp, all_counts.fp, all_counts.fn)
        f1_on = _f1(all_counts.tp_on, all_counts.fp_on, all_counts.fn_on)
    a = all_counts
    return MetricsReport(
        f1=f1,
        f1_on=f1_on,
        doae=_ratio(a.doa_sum, a.pairs),
        rde=_ratio(a.rde_sum, a.pairs),
        onscreen_acc=_ratio(a.onscreen_hits, a.pairs, 100.0),
        precision=_ratio(a.tp, a.tp + a.fp, 100.0),
        recall=_ratio(a.tp, a.tp + a.fn, 100.0),
        per_class=per_class,
        counts=a,
        config=cfg,
    )


def score(preds: Mapping[str, ClipPredictions], refs: Mapping[str, ClipPredictions],
          cfg: MetricsConfig = MetricsConfig(), task: TaskConfig = TaskConfig()) -> MetricsReport:
    """Score predictions against references, both keyed by clip id."""
    # fused union output may legitimately exceed the per-class track limit
    for clip in preds.values():
        clip.check(task, tracks=False)
    for clip in refs.values():
        clip.check(task)
    return report_from_counts(accumulate(preds, refs, cfg), cfg)


def _fmt(value: float) -> str:
    return "nan" if math.isnan(value) else f"{value:.1f}"


def format_summary(report: MetricsReport, onscreen: bool = False) -> str:
    """One line in the column order F1 [F1o] DOAE RDE Acc, one decimal."""
    parts = [("F1", report.f1)]
    if onscreen:
        parts.append(("F1o", report.f1_on))
    parts += [("DOAE", report.doae), ("RDE", report.rde * 100.0), ("Acc", report.onscreen_acc)]
    return " ".join(f"{k} {_fmt(v)}" for k, v in parts)


def format_kv(report: MetricsReport) -> str:
    c = report.counts
    rows = [
        ("f1", _fmt(report.f1)),
        ("f1_on", _fmt(report.f1_on)),
        ("doae", _fmt(report.doae)),
        ("rde", _fmt(report.rde * 100.0)),
        ("acc", _fmt(report.onscreen_acc)),
        ("precision", _fmt(report.precision)),
        ("recall", _fmt(report.recall)),
        ("tp", str(c.tp)),
        ("fp", str(c.fp)),
        ("fn", str(c.fn)),
        ("averaging", report.config.class_averaging),
    ]
    return "".join(f"{k}={v}\n" for k, v in rows)


def format_table(report: MetricsReport) -> str:
    header = f"{'class':>5} {'F1':>6} {'F1o':>6} {'DOAE':>6} {'RDE':>6} {'Acc':>6} {'TP':>6} {'FP':>6} {'FN':>6}"
    lines = [header]
    for c, m in report.per_class.items():
        k = m.counts
        lines.append(
            f"{c:>5} {_fmt(m.f1):>6} {_fmt(m.f1_on):>6} {_fmt(m.doae):>6} "
            f"{_fmt(m.rde * 100.0):>6} {_fmt(m.onscreen_acc):>6} {k.tp:>6} {k.fp:>6} {k.fn:>6}"
        )
    return "\n".join(lines) + "\n"
