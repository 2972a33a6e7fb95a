"""Specialist-ensemble fusion.

Majority mode keeps an event only when at least ``min_votes`` specialists
report the same class with mutually close azimuths; union mode (two
specialists) merges close pairs and keeps everything else.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from seldkit.core import (
    ClipPredictions,
    SeldEvent,
    ValidationError,
    group_by_class,
    mean_azimuth,
)

MAJORITY = "majority"
UNION = "union"
ANY_CONTRIBUTING = "any_contributing"
ANY_SPECIALIST = "any_specialist"


@dataclass(frozen=True)
class EnsembleConfig:
    angular_threshold_deg: float = 20.0
    min_votes: int = 2
    onscreen_rule: str = ANY_CONTRIBUTING

    def __post_init__(self):
        if self.min_votes < 2:
            raise ValidationError("min_votes must be at least 2")
        if not self.angular_threshold_deg > 0:
            raise ValidationError("angular_threshold_deg must be positive")
        if self.onscreen_rule not in (ANY_CONTRIBUTING, ANY_SPECIALIST):
            raise ValidationError(f"unknown onscreen_rule {self.onscreen_rule!r}")


@dataclass(frozen=True)
class SpecialistOutput:
    specialist_id: str
    clips: Mapping[str, ClipPredictions] = field(default_factory=dict)


@dataclass(frozen=True)
class Cluster:
    members: tuple[tuple[str, SeldEvent], ...]
    fused: SeldEvent


# (specialist index, track index) pairs, sorted
_Slots = tuple[tuple[int, int], ...]


def _candidate_clusters(lists: Sequence[Sequence[SeldEvent]], threshold: float,
                        min_size: int) -> list[_Slots]:
    options = [[None] + list(range(len(lst))) for lst in lists]
    out = []
    for pick in itertools.product(*options):
        slots = tuple((s, t) for s, t in enumerate(pick) if t is not None)
        if len(slots) < min_size:
            continue
        az = [lists[s][t].azimuth_deg for s, t in slots]
        if max(az) - min(az) <= threshold:
            out.append(slots)
    return out


def _pairwise_sum(lists, slots: _Slots) -> list[float]:
    az = [lists[s][t].azimuth_deg for s, t in slots]
    return [abs(a - b) for a, b in itertools.combinations(az, 2)]


def _content_key(lists, clusters) -> tuple:
    return tuple(sorted(tuple(sorted(lists[s][t] for s, t in c)) for c in clusters))


def best_clustering(lists: Sequence[Sequence[SeldEvent]], threshold: float,
                    min_size: int = 2) -> list[_Slots]:
    """Optimal set of disjoint clique clusters.

    Maximises the number of clustered events, then minimises the summed
    pairwise angular distance, then picks the lexicographically smallest
    member events (so the result does not depend on specialist order), and
    only then the smallest slot tuple. Exhaustive: each packing is visited
    exactly once by deciding the lowest undecided event at every step.
    """
    candidates = _candidate_clusters(lists, threshold, min_size)
    covered = [slot for cand in candidates for slot in cand]
    if len(covered) == len(set(covered)):
        # disjoint candidates: taking all of them is the unique maximum
        return sorted(candidates)
    events = [(s, t) for s, lst in enumerate(lists) for t in range(len(lst))]
    largest = max(candidates, key=len)
    if len(largest) == len(events) < 2 * min_size:
        # one clique holds every event and no split into two clusters exists
        return [largest]
    by_event: dict[tuple[int, int], list[_Slots]] = {e: [] for e in events}
    for cand in candidates:
        by_event[cand[0]].append(cand)

    best_key = None
    best_tie = None
    best: list[_Slots] = []

    def tie_key(chosen):
        return _content_key(lists, chosen), tuple(sorted(chosen))

    def visit(i: int, used: frozenset, chosen: list[_Slots], dists: list[float]):
        nonlocal best_key, best_tie, best
        while i < len(events) and events[i] in used:
            i += 1
        if i == len(events):
            key = (-sum(len(c) for c in chosen), math.fsum(dists))
            # the order-independent tie-break is only computed on exact ties
            if best_key is None or key < best_key:
                best_key, best_tie, best = key, None, list(chosen)
            elif key == best_key:
                if best_tie is None:
                    best_tie = tie_key(best)
                tie = tie_key(chosen)
                if tie < best_tie:
                    best_tie, best = tie, list(chosen)
            return
        # candidates are indexed by their first slot, so clusters starting at
        # events[i] cover every packing where events[i] is the lowest member
        for cand in by_event[events[i]]:
            if used.isdisjoint(cand):
                chosen.append(cand)
                visit(i + 1, used | set(cand), chosen, dists + _pairwise_sum(lists, cand))
                chosen.pop()
        visit(i + 1, used | {events[i]}, chosen, dists)

    visit(0, frozenset(), [], [])
    return sorted(best)


def _fuse_members(members: Sequence[SeldEvent], onscreen: bool) -> SeldEvent:
    dists = [m.distance_m for m in members]
    distance = min(max(math.fsum(dists) / len(dists), min(dists)), max(dists))
    return SeldEvent(members[0].class_id, mean_azimuth(m.azimuth_deg for m in members),
                     distance, onscreen)


def _check_same_class(lists: Sequence[Sequence[SeldEvent]]) -> None:
    classes = {ev.class_id for lst in lists for ev in lst}
    if len(classes) > 1:
        raise ValidationError(f"events of several classes in one fusion call: {sorted(classes)}")


def _onscreen(members, all_events, fused_az, cfg: EnsembleConfig) -> bool:
    flag = any(m.onscreen for m in members)
    if cfg.onscreen_rule == ANY_SPECIALIST:
        flag = flag or any(ev.onscreen and abs(ev.azimuth_deg - fused_az) <= cfg.angular_threshold_deg
                           for ev in all_events)
    return flag


def fuse_frame_majority(per_specialist: Sequence[Sequence[SeldEvent]],
                        cfg: EnsembleConfig = EnsembleConfig(),
                        specialist_ids: Sequence[str] | None = None) -> list[Cluster]:
    """Majority-vote fusion of one class at one frame.

    Parameters
    ----------
    per_specialist
        One event list per specialist, all events of the same class.
    cfg
        Threshold, vote count and on-screen rule.
    specialist_ids
        Labels stored in the returned clusters; defaults to list positions.

    Returns
    -------
    list of Cluster
        Disjoint clusters, each with at least ``cfg.min_votes`` members from
        distinct specialists whose azimuths are pairwise within the threshold.
    """
    if len(per_specialist) < cfg.min_votes:
        raise ValidationError(
            f"{len(per_specialist)} specialists supplied, need at least {cfg.min_votes}"
        )
    _check_same_class(per_specialist)
    ids = list(specialist_ids) if specialist_ids is not None else [str(i) for i in range(len(per_specialist))]
    if len(ids) != len(per_specialist):
        raise ValidationError("specialist_ids length does not match inputs")
    lists = [list(lst) for lst in per_specialist]
    all_events = [ev for lst in lists for ev in lst]
    clusters = []
    for slots in best_clustering(lists, cfg.angular_threshold_deg, cfg.min_votes):
        members = [lists[s][t] for s, t in slots]
        az = mean_azimuth(m.azimuth_deg for m in members)
        fused = _fuse_members(members, _onscreen(members, all_events, az, cfg))
        clusters.append(Cluster(tuple((ids[s], lists[s][t]) for s, t in slots), fused))
    return clusters


def fuse_frame_union(a: Sequence[SeldEvent], b: Sequence[SeldEvent],
                     cfg: EnsembleConfig = EnsembleConfig()) -> list[SeldEvent]:
    """Pairwise fusion: merge optimally matched close events, keep the rest."""
    _check_same_class([a, b])
    if not a or not b:
        return list(a) + list(b)
    lists = [list(a), list(b)]
    all_events = lists[0] + lists[1]
    used = set()
    out = []
    for slots in best_clustering(lists, cfg.angular_threshold_deg, 2):
        members = [lists[s][t] for s, t in slots]
        used.update(slots)
        az = mean_azimuth(m.azimuth_deg for m in members)
        out.append(_fuse_members(members, _onscreen(members, all_events, az, cfg)))
    for s, lst in enumerate(lists):
        out.extend(ev for t, ev in enumerate(lst) if (s, t) not in used)
    return out


def fuse_events(per_specialist: Sequence[Sequence[SeldEvent]], cfg: EnsembleConfig,
                mode: str) -> list[SeldEvent]:
    """Fuse mixed-class event lists of one frame, class by class."""
    groups = [group_by_class(lst) for lst in per_specialist]
    classes = sorted(set().union(*groups)) if groups else []
    out: list[SeldEvent] = []
    for c in classes:
        lists = [g.get(c, []) for g in groups]
        if mode == MAJORITY:
            if sum(1 for lst in lists if lst) < cfg.min_votes:
                continue
            out.extend(cl.fused for cl in fuse_frame_majority(lists, cfg))
        elif mode == UNION:
            out.extend(fuse_frame_union(lists[0], lists[1], cfg))
        else:
            raise ValidationError(f"unknown fusion mode {mode!r}")
    return out


def fuse_clips(outputs: Sequence[SpecialistOutput], cfg: EnsembleConfig = EnsembleConfig(),
               mode: str = MAJORITY) -> dict[str, ClipPredictions]:
    """Frame-aligned fusion of whole specialist outputs."""
    if mode == UNION and len(outputs) != 2:
        raise ValidationError(f"union fusion is pairwise, got {len(outputs)} inputs")
    if mode == MAJORITY and len(outputs) < cfg.min_votes:
        raise ValidationError(f"majority fusion needs at least {cfg.min_votes} inputs")
    if mode not in (MAJORITY, UNION):
        raise ValidationError(f"unknown fusion mode {mode!r}")
    ref_ids = set(outputs[0].clips)
    for out in outputs[1:]:
        ids = set(out.clips)
        if ids != ref_ids:
            diff = sorted(ids.symmetric_difference(ref_ids))
            raise ValidationError(
                f"clip ids of {out.specialist_id!r} differ from {outputs[0].specialist_id!r}: {diff}"
            )
    fused = {}
    for clip_id in sorted(ref_ids):
        clips = [out.clips[clip_id] for out in outputs]
        num_frames = {c.num_frames for c in clips}
        if len(num_frames) != 1:
            raise ValidationError(f"clip {clip_id!r}: frame counts differ {sorted(num_frames)}")
        frames = {}
        for t in sorted(set().union(*(c.frames for c in clips))):
            events = fuse_events([c.events(t) for c in clips], cfg, mode)
            if events:
                frames[t] = events
        fused[clip_id] = ClipPredictions(clip_id, clips[0].num_frames, frames)
    return fused
