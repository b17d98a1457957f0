"""Per-modality encoders: input projection plus an N-level feature pyramid.

Each level applies the same self-attention block (weights shared across
levels); moving up a level halves the temporal resolution with a stride-2
max-pool and doubles the effective stride in seconds.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as tz
from .errors import ConfigurationError, ContractError, DataFormatError
from .tensor import Tensor

MODALITIES = ("visual", "audio")


@dataclass
class FeatureSequence:
    """One video's raw features for one modality, at a fixed stride."""

    modality: str
    stride_seconds: float
    features: np.ndarray  # [T, D_in] float

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise ContractError(f"unknown modality {self.modality!r}")
        if self.stride_seconds <= 0:
            raise ContractError(f"stride must be positive, got {self.stride_seconds}")
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise DataFormatError(
                f"features must be [T>=1, D], got shape {self.features.shape}")

    @property
    def length(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]


@dataclass
class FeaturePyramid:
    """N feature maps, finest first, with per-level strides in seconds."""

    levels: list             # list of Tensor, level l shaped [ceil(T/2^l), d]
    level_strides: list      # floats, doubling per level

    def __post_init__(self):
        if len(self.levels) != len(self.level_strides):
            raise ContractError("one stride per level required")
        for a, b in zip(self.level_strides, self.level_strides[1:]):
            if not math.isclose(b, 2.0 * a):
                raise ContractError(f"strides must double per level, got {a} -> {b}")

    @property
    def num_levels(self):
        return len(self.levels)

    def level_specs(self):
        """(timestep_count, stride_seconds) pairs, finest level first."""
        return [(lv.shape[0], s) for lv, s in zip(self.levels, self.level_strides)]


@dataclass
class EncoderConfig:
    d: int = 32
    levels: int = 6
    attention_blocks_per_level: int = 1
    max_input_t: int = 256

    def __post_init__(self):
        if self.d < 1 or self.levels < 1 or self.attention_blocks_per_level < 1:
            raise ConfigurationError(
                f"encoder dims must be positive: d={self.d}, levels={self.levels}, "
                f"blocks={self.attention_blocks_per_level}")
        if self.max_input_t % (1 << (self.levels - 1)) != 0:
            raise ConfigurationError(
                f"max_input_t={self.max_input_t} must be a multiple of "
                f"2^(levels-1)={1 << (self.levels - 1)}")


def scaled_attention(q_rows, kv_rows, w_q, w_k, w_v):
    """softmax(Q K^T / sqrt(d)) V with per-row maps q_t = W_Q x_t etc."""
    d = w_q.shape[0]
    q = tz.matmul(q_rows, w_q.transpose())
    k = tz.matmul(kv_rows, w_k.transpose())
    v = tz.matmul(kv_rows, w_v.transpose())
    scores = tz.matmul(q, k.transpose()) * (1.0 / math.sqrt(d))
    return tz.matmul(tz.softmax_rows(scores), v)


class Encoder:
    """Projection + shared self-attention block, applied per pyramid level."""

    def __init__(self, cfg, store, prefix, d_in):
        if d_in < 1:
            raise ConfigurationError(f"input dimension must be >= 1, got {d_in}")
        self.cfg = cfg
        self.d_in = d_in
        d = cfg.d
        self.w_proj = store.uniform(f"{prefix}.project.w", (d_in, d), fan_in=d_in)
        self.blocks = []
        for b in range(cfg.attention_blocks_per_level):
            base = f"{prefix}.block{b}"
            self.blocks.append({
                "wq": store.uniform(f"{base}.wq", (d, d), fan_in=d),
                "wk": store.uniform(f"{base}.wk", (d, d), fan_in=d),
                "wv": store.uniform(f"{base}.wv", (d, d), fan_in=d),
                "ln_gain": store.ones(f"{base}.ln.gain", (d,)),
                "ln_bias": store.zeros(f"{base}.ln.bias", (d,)),
            })

    def project(self, seq):
        """Bias-free linear embedding D_in -> d followed by ReLU."""
        if seq.length > self.cfg.max_input_t:
            raise ContractError(
                f"sequence length {seq.length} exceeds max_input_t "
                f"{self.cfg.max_input_t}; crop before encoding")
        if seq.dim != self.d_in:
            raise DataFormatError(
                f"sequence dim {seq.dim} != encoder input dim {self.d_in}")
        return tz.relu(tz.matmul(Tensor(seq.features), self.w_proj))

    def _block(self, x):
        for p in self.blocks:
            attn = scaled_attention(x, x, p["wq"], p["wk"], p["wv"])
            x = tz.layer_norm(x + attn, p["ln_gain"], p["ln_bias"])
        return x

    def build_pyramid(self, x, base_stride):
        """Stack of ceil-halving levels over an already-projected [T, d] map."""
        t = x.shape[0]
        need = 1 << (self.cfg.levels - 1)
        if t < need:
            raise ConfigurationError(
                f"need T >= 2^(levels-1) = {need} timesteps for "
                f"{self.cfg.levels} levels, got {t}")
        levels, strides = [], []
        cur = self._block(x)
        for lv in range(self.cfg.levels):
            levels.append(cur)
            strides.append(base_stride * (1 << lv))
            if lv + 1 < self.cfg.levels:
                cur = self._block(tz.max_pool_halve(cur))
        return FeaturePyramid(levels=levels, level_strides=strides)

    def encode(self, seq):
        return self.build_pyramid(self.project(seq), seq.stride_seconds)
