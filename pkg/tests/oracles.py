"""Brute-force reference implementations used only by the tests.

These deliberately take different routes from the library code: set-partition
enumeration instead of cluster packing, explicit permutations instead of the
Hungarian solver, DFT sums instead of FFTs.
"""

import itertools
import math

import numpy as np

from seldkit.core import SeldEvent


def dft_frame(x, center, n_fft):
    """DFT-by-definition of one periodic-Hann frame centred on `center`."""
    n = np.arange(n_fft)
    win = 0.5 - 0.5 * np.cos(2 * np.pi * n / n_fft)
    seg = x[center - n_fft // 2: center - n_fft // 2 + n_fft] * win
    k = np.arange(n_fft // 2 + 1)[:, None]
    return (seg[None, :] * np.exp(-2j * np.pi * k * n[None, :] / n_fft)).sum(axis=1)


def set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def _cluster_key(lists, clusters):
    dists = []
    for block in clusters:
        az = [lists[s][t].azimuth_deg for s, t in block]
        dists += [abs(a - b) for a, b in itertools.combinations(az, 2)]
    content = tuple(sorted(tuple(sorted(lists[s][t] for s, t in b)) for b in clusters))
    return (-sum(len(b) for b in clusters), math.fsum(dists), content,
            tuple(sorted(tuple(sorted(b)) for b in clusters)))


def majority_oracle(lists, threshold, min_size=2):
    """Best clustering over every set partition of the event pool."""
    events = [(s, t) for s, lst in enumerate(lists) for t in range(len(lst))]
    best_key, best = None, []
    for part in set_partitions(events):
        clusters = []
        ok = True
        for block in part:
            if len(block) == 1:
                continue
            specs = [s for s, _ in block]
            az = [lists[s][t].azimuth_deg for s, t in block]
            if (len(block) < min_size or len(set(specs)) != len(specs)
                    or any(abs(a - b) > threshold for a, b in itertools.combinations(az, 2))):
                ok = False
                break
            clusters.append(block)
        if not ok:
            continue
        key = _cluster_key(lists, clusters)
        if best_key is None or key < best_key:
            best_key, best = key, clusters
    return sorted(tuple(sorted(b)) for b in best)


def fused_from_clusters(lists, clusters):
    out = []
    for block in clusters:
        members = [lists[s][t] for s, t in block]
        out.append(SeldEvent(
            members[0].class_id,
            sum(m.azimuth_deg for m in members) / len(members),
            sum(m.distance_m for m in members) / len(members),
            any(m.onscreen for m in members),
        ))
    return out


def union_oracle(a, b, threshold):
    """Enumerate every partial one-to-one matching between `a` and `b`."""
    lists = [list(a), list(b)]
    best_key, best = None, []
    slots_b = list(range(len(b))) + [None] * len(a)
    for perm in set(itertools.permutations(slots_b, len(a))):
        pairs = [((0, i), (1, j)) for i, j in enumerate(perm) if j is not None]
        if any(abs(a[i].azimuth_deg - b[j].azimuth_deg) > threshold for (_, i), (_, j) in pairs):
            continue
        key = _cluster_key(lists, pairs)
        if best_key is None or key < best_key:
            best_key, best = key, pairs
    merged = fused_from_clusters(lists, best)
    used_a = {i for (_, i), _ in best}
    used_b = {j for _, (_, j) in best}
    return (merged + [e for i, e in enumerate(a) if i not in used_a]
            + [e for j, e in enumerate(b) if j not in used_b])


def min_assignment_cost(preds, refs):
    """Smallest total angular distance over all maximal one-to-one pairings."""
    if not preds or not refs:
        return 0.0
    small, large = (preds, refs) if len(preds) <= len(refs) else (refs, preds)
    return min(sum(abs(s.azimuth_deg - large[j].azimuth_deg) for s, j in zip(small, perm))
               for perm in itertools.permutations(range(len(large)), len(small)))


def dedupe_oracle(candidates, angle):
    """The unique kept set K such that an event is in K iff no stronger
    kept event of its class lies closer than `angle`; found by enumeration."""
    n = len(candidates)
    rank = sorted(range(n), key=lambda i: (-candidates[i][0], i))
    stronger = {i: set(rank[:rank.index(i)]) for i in range(n)}
    found = []
    for mask in range(1 << n):
        keep = {i for i in range(n) if mask >> i & 1}
        ok = all(
            (i in keep) == (not any(
                j in keep and candidates[j][1].class_id == candidates[i][1].class_id
                and abs(candidates[j][1].azimuth_deg - candidates[i][1].azimuth_deg) < angle
                for j in stronger[i]))
            for i in range(n)
        )
        if ok:
            found.append(keep)
    assert len(found) == 1, found
    return sorted(candidates[i][1] for i in found[0])
