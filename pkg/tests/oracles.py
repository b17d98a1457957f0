"""Independent reference implementations used to cross-check the package.

Everything here is written the slow, obvious way — single queue loops and
longhand precision/recall bookkeeping — on purpose.
"""

import math

from avtad.postprocess import Detection


def _interval_iou(s1, e1, s2, e2):
    inter = max(0.0, min(e1, e2) - max(s1, s2))
    return inter / ((e1 - s1) + (e2 - s2) - inter)


def _key(task):
    return {"verb": lambda d: d.verb, "noun": lambda d: d.noun,
            "pair": lambda d: (d.verb, d.noun),
            "action": lambda d: (d.verb, d.noun)}[task]


def reference_soft_nms(candidates, sigma_nms, score_floor, max_out, task="pair"):
    """Textbook Gaussian Soft-NMS: one global queue, pop max, decay
    same-class survivors, stop at max_out or when the best score sinks
    below the floor."""
    key_of = _key(task)
    pool = [[d, d.score] for d in candidates]
    kept = []
    while pool and len(kept) < max_out:
        bi = min(range(len(pool)),
                 key=lambda i: (-pool[i][1], pool[i][0].start,
                                pool[i][0].verb, pool[i][0].noun))
        d, s = pool.pop(bi)
        if s < score_floor:
            break
        kept.append(Detection(d.start, d.end, d.verb, d.noun, float(s)))
        for entry in pool:
            if key_of(entry[0]) == key_of(d):
                t = _interval_iou(d.start, d.end, entry[0].start, entry[0].end)
                if t > 0.0:
                    entry[1] *= math.exp(-(t * t) / sigma_nms)
    return kept


def reference_average_precision(detections, gts, threshold):
    """Longhand PR-curve AP: greedy score-order matching, then the
    recall-increment sum Sum_k (R_k - R_{k-1}) * P_k."""
    npos = len(gts)
    order = sorted(range(len(detections)),
                   key=lambda i: (-detections[i][3], detections[i][1], i))
    used = [False] * npos
    flags = []
    for di in order:
        vid, ds, de, _ = detections[di]
        best, best_t = None, threshold
        for gi, (gvid, gs, ge) in enumerate(gts):
            if used[gi] or gvid != vid:
                continue
            t = _interval_iou(ds, de, gs, ge)
            if t >= best_t and (best is None or t > best_t):
                best, best_t = gi, t
        if best is not None:
            used[best] = True
            flags.append(1)
        else:
            flags.append(0)
    ap, tp_so_far, prev_recall = 0.0, 0, 0.0
    for k, flag in enumerate(flags, start=1):
        tp_so_far += flag
        recall = tp_so_far / npos
        precision = tp_so_far / k
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return ap
