"""Dataset-level glue: predictions, scoring tables, diagnostics.

The evaluation tasks use differently-keyed suppression: verb and noun
scores are suppressed per single label, action scores per (verb, noun)
pair, and each feeds its own average-precision table row.
"""

import numpy as np

from .errors import ConfigurationError
from .evaluation import (centre_distance_profile,
                         centricity_vs_actionness_profile, mean_ap, tiou)
from .postprocess import confidence_score

# evaluation task -> suppression keying
TASK_TO_SUPPRESSION = {"verb": "verb", "noun": "noun", "action": "pair"}

RELATIVE_BIN_EDGES = (0.0, 0.5, 0.75, 1.0, 1.5, 2.5)
SECONDS_BIN_EDGES = (0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0)


def ground_truth_rows(videos):
    return [(v.video_id, s.start, s.end, s.verb, s.noun)
            for v in videos for s in v.segments]


def check_class_counts(cfg, videos):
    """Annotations must fit inside the configured label spaces."""
    max_v = max((s.verb for v in videos for s in v.segments), default=-1)
    max_n = max((s.noun for v in videos for s in v.segments), default=-1)
    if max_v >= cfg.model_c_verb or max_n >= cfg.model_c_noun:
        raise ConfigurationError(
            f"dataset labels exceed configured class counts: max verb id "
            f"{max_v} vs {cfg.model_c_verb} classes, max noun id {max_n} "
            f"vs {cfg.model_c_noun} classes")


def predict_videos(model, videos, suppressions=("verb", "noun", "pair")):
    """video_id -> {suppression task -> DetectionResult}."""
    return {v.video_id: model.detect(v, tasks=suppressions) for v in videos}


def detection_rows(per_video, suppression):
    rows = []
    for vid in sorted(per_video):
        for d in per_video[vid][suppression].detections:
            rows.append((vid, d.start, d.end, d.verb, d.noun, d.score))
    return rows


def evaluate_model(model, videos, thresholds):
    """(mean-AP table, per-video detection results)."""
    per_video = predict_videos(model, videos)
    results_by_task = {task: detection_rows(per_video, sup)
                       for task, sup in TASK_TO_SUPPRESSION.items()}
    table = mean_ap(results_by_task, ground_truth_rows(videos),
                    thresholds=tuple(thresholds))
    return table, per_video


def gt_injected_results(videos):
    """Perfect-oracle detections: one score-1.0 hit per annotation."""
    rows = [(v.video_id, s.start, s.end, s.verb, s.noun, 1.0)
            for v in videos for s in v.segments]
    return {task: list(rows) for task in TASK_TO_SUPPRESSION}


# -- diagnostics ---------------------------------------------------------


def diagnostic_samples(model, videos):
    """Per-proposal views of prediction quality along two axes.

    Returns (distance_records, position_samples):

    - distance_records: every decoded proposal is attributed to the
      ground truth it matches best — highest tIoU, ties broken towards
      the nearest centre then the earlier segment. Proposals overlapping
      no ground truth at all are left out. Each record is (distance
      seconds, distance / half-length, segment duration, tIoU against
      that segment, confidence with the centricity term, confidence with
      it removed); an anchor outside its matched segment has relative
      distance > 1.
    - position_samples: (position in [0,1] along the segment, predicted
      centricity, classification actionness, tIoU) for the records whose
      anchor lies inside the matched segment.
    """
    pcfg = model.post_config()
    distance_records = []
    position_samples = []
    for video in videos:
        seq = video.visual_seq if video.visual_seq is not None else video.audio_seq
        base = seq.stride_seconds
        prop_set = model.proposals(video)
        for p in prop_set.proposals:
            x = p.timestep * base * (2 ** p.level)
            best = None
            for g in video.segments:
                ov = tiou((p.start, p.end), (g.start, g.end))
                if ov <= 0.0:
                    continue
                key = (-ov, abs(x - g.centre), g.start, g.end)
                if best is None or key < best[0]:
                    best = (key, g, ov)
            if best is None:
                continue
            _, g, overlap = best
            d_sec = abs(x - g.centre)
            half = g.duration / 2.0
            p_v = float(np.max(p.verb_scores) + np.max(p.noun_scores))
            if p.audio_verb_scores is not None:
                p_a = float(np.max(p.audio_verb_scores)
                            + np.max(p.audio_noun_scores))
            else:
                p_a = 0.0
            conf_with = confidence_score(
                p_v, p_a, p.centricity, p.start_conf, p.end_conf,
                tau=pcfg.tau, beta=pcfg.beta, gamma=pcfg.gamma)
            conf_without = confidence_score(
                p_v, p_a, p.centricity, p.start_conf, p.end_conf,
                tau=pcfg.tau, beta=0.0, gamma=pcfg.gamma)
            distance_records.append((d_sec, d_sec / half, g.duration,
                                     overlap, conf_with, conf_without))
            if g.start <= x <= g.end:
                pos = min(1.0, max(0.0, (x - g.start) / g.duration))
                actionness = float((np.max(p.verb_scores)
                                    + np.max(p.noun_scores)) / 2.0)
                position_samples.append((pos, p.centricity, actionness,
                                         overlap))
    return distance_records, position_samples


def distance_profiles(distance_records):
    """(relative-distance bins, absolute-seconds bins) for the records.

    Both edge sets grow a final catch-all bin when a record lies beyond
    them, so bin counts always sum to the record count.
    """
    rel_edges = list(RELATIVE_BIN_EDGES)
    sec_edges = list(SECONDS_BIN_EDGES)
    if distance_records:
        top_rel = max(r[1] for r in distance_records)
        if top_rel > rel_edges[-1]:
            rel_edges.append(float(np.ceil(top_rel)))
        top_sec = max(r[0] for r in distance_records)
        if top_sec > sec_edges[-1]:
            sec_edges.append(float(np.ceil(top_sec)))
    rel = centre_distance_profile(distance_records, tuple(rel_edges),
                                  relative=True)
    sec = centre_distance_profile(distance_records, tuple(sec_edges),
                                  relative=False)
    return rel, sec


def position_profile(position_samples, num_bins=10):
    return centricity_vs_actionness_profile(position_samples,
                                            num_bins=num_bins)
