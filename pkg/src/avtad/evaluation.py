"""Detection metrics (tIoU, AP, mAP tables) and diagnostic profiles.

This module is deliberately free of package imports besides the error
types: it consumes plain sequences and duck-typed records so a second,
independent implementation can be diffed against it easily.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError

TIOU_THRESHOLDS = (0.1, 0.2, 0.3, 0.4, 0.5)
TASKS = ("verb", "noun", "action")

# duration groups, seconds: (label, low, high]
DURATION_GROUPS = (("XS", 0.0, 2.0), ("S", 2.0, 4.0), ("M", 4.0, 6.0),
                   ("L", 6.0, 8.0), ("XL", 8.0, math.inf))


def tiou(a, b):
    """Intersection-over-union of two (start, end) intervals on the line."""
    s1, e1 = a
    s2, e2 = b
    if not (s1 < e1 and s2 < e2):
        raise ContractError(f"degenerate segment: {a} vs {b}")
    inter = max(0.0, min(e1, e2) - max(s1, s2))
    union = (e1 - s1) + (e2 - s2) - inter
    return inter / union


def duration_group(duration):
    for label, lo, hi in DURATION_GROUPS:
        if lo < duration <= hi:
            return label
    raise ContractError(f"duration must be positive, got {duration}")


def average_precision(detections, gts, threshold):
    """All-points AP for one class at one tIoU threshold.

    `detections`: (video_id, start, end, score) sorted by score descending
    (re-sorted defensively here). `gts`: (video_id, start, end). Greedy
    matching in score order; each ground truth matches at most once, a
    detection preferring the highest-tIoU unmatched one.
    """
    npos = len(gts)
    if npos == 0:
        raise ContractError("AP undefined with zero ground truths")
    if not detections:
        return 0.0
    order = sorted(range(len(detections)),
                   key=lambda i: (-detections[i][3], detections[i][1], i))
    gt_by_video = {}
    for gi, (vid, s, e) in enumerate(gts):
        gt_by_video.setdefault(vid, []).append((gi, s, e))
    matched = set()
    tp = np.zeros(len(detections))
    for rank, di in enumerate(order):
        vid, ds, de, _ = detections[di]
        best_gi, best_t = None, 0.0
        for gi, gs, ge in gt_by_video.get(vid, ()):
            if gi in matched:
                continue
            t = tiou((ds, de), (gs, ge))
            if t >= threshold and t > best_t:
                best_gi, best_t = gi, t
        if best_gi is not None:
            matched.add(best_gi)
            tp[rank] = 1.0
    cum_tp = np.cumsum(tp)
    precision = cum_tp / (np.arange(len(detections)) + 1.0)
    # all-points method: sum precision at each true-positive rank
    return float(precision[tp > 0].sum() / npos)


@dataclass
class MeanApTable:
    """mAP per (task, threshold) plus per-task averages over thresholds."""

    entries: dict = field(default_factory=dict)   # (task, threshold) -> mAP
    skipped_classes: dict = field(default_factory=dict)  # task -> zero-GT count

    def average(self, task):
        vals = [v for (t, _), v in self.entries.items() if t == task]
        if not vals:
            raise ContractError(f"no entries for task {task!r}")
        return float(np.mean(vals))

    def rows(self):
        """(task, threshold, mAP) rows in deterministic order."""
        out = []
        for task in TASKS:
            for thr in sorted({thr for (t, thr) in self.entries if t == task}):
                out.append((task, thr, self.entries[(task, thr)]))
        return out


def _class_key(task, verb, noun):
    if task == "verb":
        return verb
    if task == "noun":
        return noun
    if task == "action":
        return (verb, noun)
    raise ContractError(f"unknown task {task!r}")


def mean_ap(results_by_task, gts, thresholds=TIOU_THRESHOLDS, tasks=TASKS):
    """Build the task x threshold mAP table.

    `results_by_task[task]` is a list of (video_id, start, end, verb, noun,
    score) detections suppressed under that task's class key; `gts` is a
    list of (video_id, start, end, verb, noun). Classes with no ground
    truth are excluded from the mean and counted.
    """
    thresholds = tuple(thresholds)
    if not all(0.0 < a < b <= 1.0 for a, b in zip(thresholds, thresholds[1:])) \
            or not thresholds or not (0.0 < thresholds[0] <= 1.0):
        raise ContractError(f"thresholds must be strictly increasing in (0,1]: {thresholds}")
    table = MeanApTable()
    for task in tasks:
        dets = results_by_task[task]
        gt_classes = {}
        for vid, s, e, verb, noun in gts:
            gt_classes.setdefault(_class_key(task, verb, noun), []).append((vid, s, e))
        det_classes = {}
        for vid, s, e, verb, noun, score in dets:
            det_classes.setdefault(_class_key(task, verb, noun), []).append(
                (vid, s, e, score))
        table.skipped_classes[task] = len(set(det_classes) - set(gt_classes))
        for thr in thresholds:
            aps = [average_precision(det_classes.get(cls, []), cls_gts, thr)
                   for cls, cls_gts in sorted(gt_classes.items())]
            table.entries[(task, thr)] = float(np.mean(aps))
    return table


@dataclass
class BinStat:
    low: float
    high: float
    duration_group: str
    mean_tiou: float
    mean_conf_with: float
    mean_conf_without: float
    count: int


def centre_distance_profile(records, bin_edges, relative=True):
    """Aggregate proposal quality by distance of the source timestep from
    its matched ground-truth centre.

    `records`: (centre_distance_seconds, relative_distance, duration,
    tiou, conf_with_centricity, conf_without) tuples, one per proposal
    already attributed to a ground truth. Bins with no members are
    omitted. Returns a list of BinStat, grouped XS..XL plus an "all"
    group, ordered by (group, bin).
    """
    edges = list(bin_edges)
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ContractError(f"bin edges must be strictly increasing: {edges}")
    groups = [label for label, _, _ in DURATION_GROUPS] + ["all"]
    buckets = {}
    for dist_s, dist_rel, duration, t, cw, cwo in records:
        d = dist_rel if relative else dist_s
        if d < edges[0] or d > edges[-1]:
            continue
        # right-closed bins, first bin closed on both sides
        bi = 0 if d <= edges[1] else next(
            i for i in range(len(edges) - 1) if edges[i] < d <= edges[i + 1])
        for grp in (duration_group(duration), "all"):
            buckets.setdefault((grp, bi), []).append((t, cw, cwo))
    out = []
    for grp in groups:
        for bi in range(len(edges) - 1):
            members = buckets.get((grp, bi))
            if not members:
                continue
            arr = np.asarray(members)
            out.append(BinStat(low=edges[bi], high=edges[bi + 1],
                               duration_group=grp,
                               mean_tiou=float(arr[:, 0].mean()),
                               mean_conf_with=float(arr[:, 1].mean()),
                               mean_conf_without=float(arr[:, 2].mean()),
                               count=len(members)))
    return out


def centricity_vs_actionness_profile(samples, num_bins=10):
    """Average centricity, action-ness, and proposal tIoU by normalized
    position inside a ground-truth segment.

    `samples`: (position, centricity, actionness, tiou) with position in
    [0, 1] — 0 the segment start, 1 its end. Returns per-bin means with
    bin centres; empty bins are omitted.
    """
    if num_bins < 1:
        raise ContractError("need at least one position bin")
    rows = {}
    for pos, cent, act, t in samples:
        if not 0.0 <= pos <= 1.0:
            raise ContractError(f"normalized position {pos} outside [0, 1]")
        bi = min(int(pos * num_bins), num_bins - 1)
        rows.setdefault(bi, []).append((cent, act, t))
    out = []
    for bi in sorted(rows):
        arr = np.asarray(rows[bi])
        out.append({"position": (bi + 0.5) / num_bins,
                    "mean_centricity": float(arr[:, 0].mean()),
                    "mean_actionness": float(arr[:, 1].mean()),
                    "mean_tiou": float(arr[:, 2].mean()),
                    "count": len(rows[bi])})
    return out
