"""From per-timestep head outputs to ranked detections.

Pipeline: decode timestep offsets into candidate segments, expand each into
verb-noun action pairs, score pairs with the weighted confidence sum,
then suppress near-duplicates per class with Gaussian-decay Soft-NMS.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .evaluation import tiou

TAU_AUDIO = 0.2
BETA_CENTRICITY = 1.0
GAMMA_BOUNDARY = 0.7

MIN_SEGMENT_LEN = 1e-3


@dataclass
class PostConfig:
    tau: float = TAU_AUDIO
    beta: float = BETA_CENTRICITY
    gamma: float = GAMMA_BOUNDARY
    k_verb: int = 11
    k_noun: int = 33
    sigma_nms: float = 0.5
    score_floor: float = 1e-4
    max_out: int = 200
    pre_nms_topk: int = 2000

    def __post_init__(self):
        if min(self.tau, self.beta, self.gamma) < 0:
            raise ContractError("confidence weights must be non-negative")
        if self.sigma_nms <= 0:
            raise ContractError(f"sigma_nms must be positive, got {self.sigma_nms}")
        if self.k_verb < 1 or self.k_noun < 1 or self.max_out < 1:
            raise ContractError("k_verb, k_noun and max_out must be >= 1")


@dataclass
class LevelOutputs:
    """Plain-array head outputs for one pyramid level of one video."""

    stride: float
    verb_scores: np.ndarray          # [T, C_verb]
    noun_scores: np.ndarray          # [T, C_noun]
    offsets: np.ndarray              # [T, 2], level-stride units
    centricity: np.ndarray           # [T]
    start_conf: np.ndarray           # [T]
    end_conf: np.ndarray             # [T]
    audio_verb_scores: np.ndarray = None
    audio_noun_scores: np.ndarray = None


@dataclass
class Proposal:
    """One undecided candidate segment, spawned by a single timestep."""

    video_id: str
    start: float
    end: float
    verb_scores: np.ndarray
    noun_scores: np.ndarray
    centricity: float
    start_conf: float
    end_conf: float
    level: int
    timestep: int
    audio_verb_scores: np.ndarray = None
    audio_noun_scores: np.ndarray = None


@dataclass
class ProposalSet:
    video_id: str
    proposals: list = field(default_factory=list)

    def __len__(self):
        return len(self.proposals)


@dataclass(frozen=True)
class Detection:
    start: float
    end: float
    verb: int
    noun: int
    score: float


@dataclass
class DetectionResult:
    video_id: str
    detections: list = field(default_factory=list)  # descending score

    def __len__(self):
        return len(self.detections)


def decode_proposals(levels, duration, video_id, min_len=MIN_SEGMENT_LEN):
    """Turn per-level head outputs into one proposal per timestep.

    Timestep t of a level with stride q sits at x = t*q seconds and spans
    [x - o_s*q, x + o_e*q], clamped to [0, duration]; segments shorter
    than `min_len` seconds are dropped.
    """
    if duration <= 0:
        raise ContractError(f"duration must be positive, got {duration}")
    out = ProposalSet(video_id=video_id)
    for li, lv in enumerate(levels):
        t_count = lv.offsets.shape[0]
        if np.any(lv.offsets < 0):
            raise ContractError("decoded offsets must be non-negative")
        for t in range(t_count):
            x = t * lv.stride
            s = max(0.0, x - lv.offsets[t, 0] * lv.stride)
            e = min(duration, x + lv.offsets[t, 1] * lv.stride)
            if e - s < min_len:
                continue
            out.proposals.append(Proposal(
                video_id=video_id, start=s, end=e,
                verb_scores=lv.verb_scores[t], noun_scores=lv.noun_scores[t],
                centricity=float(lv.centricity[t]),
                start_conf=float(lv.start_conf[t]),
                end_conf=float(lv.end_conf[t]),
                level=li, timestep=t,
                audio_verb_scores=None if lv.audio_verb_scores is None
                else lv.audio_verb_scores[t],
                audio_noun_scores=None if lv.audio_noun_scores is None
                else lv.audio_noun_scores[t],
            ))
    return out


def confidence_score(p_v, p_a, p_c, p_s, p_e, tau=TAU_AUDIO,
                     beta=BETA_CENTRICITY, gamma=GAMMA_BOUNDARY):
    """S = p_v + tau*p_a + beta*p_c + gamma*(p_s + p_e)."""
    if min(tau, beta, gamma) < 0:
        raise ContractError("confidence weights must be non-negative")
    vals = (p_v, p_a, p_c, p_s, p_e)
    if not all(np.isfinite(v) for v in vals):
        raise ContractError(f"confidence inputs must be finite, got {vals}")
    return p_v + tau * p_a + beta * p_c + gamma * (p_s + p_e)


def top_k_ids(scores, k):
    """Indices of the k largest scores, ties resolved toward lower ids."""
    scores = np.asarray(scores)
    k = min(k, scores.shape[0])
    order = np.lexsort((np.arange(scores.shape[0]), -scores))
    return order[:k]


def combine_verb_noun(proposal, k_verb, k_noun):
    """Cartesian top-k_verb x top-k_noun expansion of one proposal.

    Yields (verb, noun, pair_score, audio_pair_score); the pair score is
    the verb + noun score sum, audio analogously (0 without an audio
    stream).
    """
    verbs = top_k_ids(proposal.verb_scores, k_verb)
    nouns = top_k_ids(proposal.noun_scores, k_noun)
    has_audio = proposal.audio_verb_scores is not None
    out = []
    for v in verbs:
        for n in nouns:
            p_v = float(proposal.verb_scores[v] + proposal.noun_scores[n])
            p_a = float(proposal.audio_verb_scores[v] +
                        proposal.audio_noun_scores[n]) if has_audio else 0.0
            out.append((int(v), int(n), p_v, p_a))
    return out


def _rank_key(det):
    return (-det.score, det.start, det.verb, det.noun)


def score_candidates(prop_set, cfg):
    """Expand proposals into scored (verb, noun) detections, best first."""
    cands = []
    for p in prop_set.proposals:
        for v, n, p_v, p_a in combine_verb_noun(p, cfg.k_verb, cfg.k_noun):
            s = confidence_score(p_v, p_a, p.centricity, p.start_conf,
                                 p.end_conf, cfg.tau, cfg.beta, cfg.gamma)
            cands.append(Detection(start=p.start, end=p.end, verb=v, noun=n,
                                   score=float(s)))
    cands.sort(key=_rank_key)
    if cfg.pre_nms_topk and len(cands) > cfg.pre_nms_topk:
        cands = cands[:cfg.pre_nms_topk]
    return cands


def _task_key(task):
    if task == "verb":
        return lambda d: d.verb
    if task == "noun":
        return lambda d: d.noun
    if task in ("action", "pair"):
        return lambda d: (d.verb, d.noun)
    raise ContractError(f"unknown suppression task {task!r}")


def soft_nms(candidates, sigma_nms=0.5, score_floor=1e-4, max_out=200,
             task="pair"):
    """Gaussian Soft-NMS: repeatedly emit the best-scoring candidate and
    decay every same-class survivor by exp(-tIoU^2 / sigma_nms).

    Equivalent to the textbook single-queue loop, but runs each class's
    decay chain independently: decay never crosses class keys, and the
    emitted order is simply all survivors sorted by final score.
    """
    if sigma_nms <= 0:
        raise ContractError(f"sigma_nms must be positive, got {sigma_nms}")
    key_of = _task_key(task)
    by_class = {}
    for d in candidates:
        by_class.setdefault(key_of(d), []).append(d)
    kept = []
    for members in by_class.values():
        alive = [[d, d.score] for d in members]
        while alive:
            best = min(range(len(alive)),
                       key=lambda i: (-alive[i][1], alive[i][0].start,
                                      alive[i][0].verb, alive[i][0].noun))
            d, s = alive.pop(best)
            if s < score_floor:
                break
            kept.append(Detection(d.start, d.end, d.verb, d.noun, float(s)))
            for entry in alive:
                t = tiou((d.start, d.end), (entry[0].start, entry[0].end))
                if t > 0.0:
                    entry[1] *= np.exp(-(t * t) / sigma_nms)
    kept.sort(key=_rank_key)
    return kept[:max_out]


def run_postprocess(levels, duration, video_id, cfg=None, task="pair"):
    """decode -> combine -> score -> sort -> soft_nms -> truncate."""
    cfg = cfg or PostConfig()
    props = decode_proposals(levels, duration, video_id)
    cands = score_candidates(props, cfg)
    dets = soft_nms(cands, sigma_nms=cfg.sigma_nms, score_floor=cfg.score_floor,
                    max_out=cfg.max_out, task=task)
    return DetectionResult(video_id=video_id, detections=dets)
