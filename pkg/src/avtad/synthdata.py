"""Deterministic synthetic benchmark: dense, overlapping action videos
with paired visual/audio feature tracks.

The generator is built so that fusing audio genuinely helps, while audio
alone stays clearly weaker than visual alone. Verbs come in pairs whose
*visual* prototypes are identical, and only the audio prototypes
distinguish them; audio noun prototypes are deliberately faint (you can
hear *what is being done* far better than *to what*). Audio carries an
onset-weighted envelope — loudest right after an action starts — and its
overall usefulness is controlled by `audio_informativeness` (0 means pure
noise).
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoder import FeatureSequence
from .errors import ContractError, DataFormatError
from .targets import Segment

BLOB_MAGIC = b"AVF1"
_PROTO_STREAM = 999983  # fixed sub-stream key for the prototype bank
AUDIO_NOUN_FAINTNESS = 0.05  # audio barely hints at the object
AUDIO_VERB_GAIN = 1.8        # ...but rings loud and clear about the motion

# (label, low, high, sampling cap) for drawn durations; XL is open-ended in
# the grouping rule but sampled within a practical cap here
DURATION_RANGES = (("XS", 0.5, 2.0), ("S", 2.0, 4.0), ("M", 4.0, 6.0),
                   ("L", 6.0, 8.0), ("XL", 8.0, 12.0))


@dataclass
class SynthConfig:
    n_videos: int = 25
    duration_seconds: float = 48.0
    base_stride_seconds: float = 0.25
    c_verb: int = 6
    c_noun: int = 8
    density_per_minute: float = 12.0
    duration_mixture: tuple = (0.1, 0.2, 0.25, 0.25, 0.2)  # XS..XL weights
    audio_informativeness: float = 0.7
    audio_onset_bias: float = 0.6
    noise_level: float = 0.3
    visual_dim: int = 20
    audio_dim: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.density_per_minute <= 0:
            raise ContractError("density must be positive")
        if len(self.duration_mixture) != len(DURATION_RANGES):
            raise ContractError(
                f"mixture needs {len(DURATION_RANGES)} weights, got "
                f"{len(self.duration_mixture)}")
        w = np.asarray(self.duration_mixture, dtype=float)
        if np.any(w < 0) or not np.isclose(w.sum(), 1.0):
            raise ContractError(f"mixture weights must be >= 0 and sum to 1: {w}")
        if not 0.0 <= self.audio_informativeness <= 1.0:
            raise ContractError("audio_informativeness must lie in [0, 1]")
        if not 0.0 <= self.audio_onset_bias <= 1.0:
            raise ContractError("audio_onset_bias must lie in [0, 1]")
        n_visual = (self.c_verb + 1) // 2 + self.c_noun
        n_audio = self.c_verb + self.c_noun
        if self.visual_dim < n_visual or self.audio_dim < n_audio:
            raise ContractError(
                f"need visual_dim >= {n_visual} and audio_dim >= {n_audio} "
                f"for orthogonal prototypes")

    @property
    def timesteps(self):
        return int(round(self.duration_seconds / self.base_stride_seconds))


@dataclass
class SyntheticVideo:
    video_id: str
    duration: float
    segments: list
    visual_seq: FeatureSequence
    audio_seq: FeatureSequence


def _orthonormal_bank(rng, dim, count, scale):
    q, _ = np.linalg.qr(rng.normal(size=(dim, count)))
    return (q[:, :count] * scale).T  # [count, dim] rows


@dataclass
class PrototypeBank:
    visual_verb: np.ndarray   # [C_verb, visual_dim]; pairs share rows
    visual_noun: np.ndarray   # [C_noun, visual_dim]
    audio_verb: np.ndarray    # [C_verb, audio_dim]; all distinct
    audio_noun: np.ndarray    # [C_noun, audio_dim]


def make_prototypes(cfg):
    """Build the class prototype bank shared by every video of a dataset."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _PROTO_STREAM]))
    n_shared = (cfg.c_verb + 1) // 2
    vis = _orthonormal_bank(rng, cfg.visual_dim, n_shared + cfg.c_noun, scale=1.5)
    aud = _orthonormal_bank(rng, cfg.audio_dim, cfg.c_verb + cfg.c_noun, scale=1.5)
    # verbs 2k and 2k+1 look identical; only audio tells them apart
    visual_verb = vis[:n_shared][np.arange(cfg.c_verb) // 2]
    return PrototypeBank(
        visual_verb=visual_verb,
        visual_noun=vis[n_shared:n_shared + cfg.c_noun],
        audio_verb=aud[:cfg.c_verb] * AUDIO_VERB_GAIN,
        audio_noun=aud[cfg.c_verb:] * AUDIO_NOUN_FAINTNESS,
    )


def _draw_segments(cfg, rng):
    lam = cfg.density_per_minute * cfg.duration_seconds / 60.0
    count = int(rng.poisson(lam))
    weights = np.asarray(cfg.duration_mixture, dtype=float)
    segments = []
    for _ in range(count):
        gi = int(rng.choice(len(DURATION_RANGES), p=weights))
        _, lo, hi = DURATION_RANGES[gi]
        dur = float(rng.uniform(lo, hi))
        dur = min(dur, cfg.duration_seconds * 0.9)
        start = float(rng.uniform(0.0, cfg.duration_seconds - dur))
        segments.append(Segment(start=start, end=start + dur,
                                verb=int(rng.integers(cfg.c_verb)),
                                noun=int(rng.integers(cfg.c_noun))))
    segments.sort(key=lambda g: (g.start, g.end))
    return segments


def _onset_envelope(x, seg, bias):
    """1 near the action start, fading to (1 - bias) deeper inside."""
    width = max(0.5, 0.25 * seg.duration)
    rel = (x - seg.start) / width
    return (1.0 - bias) + bias * np.exp(-rel * rel)


def generate_video(cfg, index, protos=None):
    protos = protos or make_prototypes(cfg)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, index]))
    segments = _draw_segments(cfg, rng)
    t_count = cfg.timesteps
    xs = np.arange(t_count) * cfg.base_stride_seconds
    visual = rng.normal(scale=cfg.noise_level, size=(t_count, cfg.visual_dim))
    audio = rng.normal(scale=cfg.noise_level, size=(t_count, cfg.audio_dim))
    for seg in segments:
        inside = (xs >= seg.start) & (xs <= seg.end)
        if not inside.any():
            continue
        v_proto = protos.visual_verb[seg.verb] + protos.visual_noun[seg.noun]
        visual[inside] += v_proto
        a_proto = protos.audio_verb[seg.verb] + protos.audio_noun[seg.noun]
        env = _onset_envelope(xs[inside], seg, cfg.audio_onset_bias)
        audio[inside] += cfg.audio_informativeness * env[:, None] * a_proto
    # quantize to what the on-disk format stores, so round-trips are exact
    visual = visual.astype(np.float32).astype(np.float64)
    audio = audio.astype(np.float32).astype(np.float64)
    vid = f"video_{index:03d}"
    return SyntheticVideo(
        video_id=vid, duration=cfg.duration_seconds, segments=segments,
        visual_seq=FeatureSequence("visual", cfg.base_stride_seconds, visual),
        audio_seq=FeatureSequence("audio", cfg.base_stride_seconds, audio),
    )


def generate_dataset(cfg):
    protos = make_prototypes(cfg)
    return [generate_video(cfg, i, protos) for i in range(cfg.n_videos)]


# -- on-disk format ------------------------------------------------------


def _write_blob(path, seq):
    header = BLOB_MAGIC + struct.pack("<IId", seq.length, seq.dim,
                                      seq.stride_seconds)
    payload = seq.features.astype("<f4").tobytes()
    path.write_bytes(header + payload)


def _read_blob(path):
    raw = path.read_bytes()
    head_len = len(BLOB_MAGIC) + struct.calcsize("<IId")
    if len(raw) < head_len:
        raise DataFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    if raw[:4] != BLOB_MAGIC:
        raise DataFormatError(f"{path}: bad magic {raw[:4]!r}")
    t, d, stride = struct.unpack_from("<IId", raw, 4)
    want = head_len + 4 * t * d
    if len(raw) != want:
        raise DataFormatError(
            f"{path}: expected {want} bytes for {t}x{d} features, got {len(raw)}")
    feats = np.frombuffer(raw, dtype="<f4", offset=head_len).reshape(t, d)
    return feats.astype(np.float64), stride


def write_dataset(videos, path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    doc = {"videos": []}
    for v in videos:
        doc["videos"].append({
            "video_id": v.video_id,
            "duration_seconds": v.duration,
            "segments": [{"start_seconds": g.start, "end_seconds": g.end,
                          "verb_id": g.verb, "noun_id": g.noun}
                         for g in v.segments],
        })
        _write_blob(path / f"{v.video_id}.visual.f32", v.visual_seq)
        _write_blob(path / f"{v.video_id}.audio.f32", v.audio_seq)
    (path / "annotations.json").write_text(
        json.dumps(doc, indent=1, sort_keys=True) + "\n")


def read_dataset(path):
    path = Path(path)
    ann = path / "annotations.json"
    if not ann.exists():
        raise DataFormatError(f"no annotations.json under {path}")
    try:
        doc = json.loads(ann.read_text())
    except json.JSONDecodeError as e:
        raise DataFormatError(
            f"{ann}: parse error at line {e.lineno} column {e.colno}") from e
    if not isinstance(doc, dict) or "videos" not in doc:
        raise DataFormatError(f"{ann}: missing top-level 'videos' list")
    videos = []
    for rec in doc["videos"]:
        try:
            vid = rec["video_id"]
            duration = float(rec["duration_seconds"])
            segments = [Segment(start=float(s["start_seconds"]),
                                end=float(s["end_seconds"]),
                                verb=int(s["verb_id"]), noun=int(s["noun_id"]))
                        for s in rec["segments"]]
        except (KeyError, TypeError) as e:
            raise DataFormatError(f"{ann}: malformed video record: {e}") from e
        v_feat, v_stride = _read_blob(path / f"{vid}.visual.f32")
        a_feat, a_stride = _read_blob(path / f"{vid}.audio.f32")
        if v_feat.shape[0] != a_feat.shape[0] or v_stride != a_stride:
            raise DataFormatError(
                f"{vid}: modality streams disagree "
                f"({v_feat.shape[0]}@{v_stride} vs {a_feat.shape[0]}@{a_stride})")
        videos.append(SyntheticVideo(
            video_id=vid, duration=duration, segments=segments,
            visual_seq=FeatureSequence("visual", v_stride, v_feat),
            audio_seq=FeatureSequence("audio", a_stride, a_feat)))
    return videos
