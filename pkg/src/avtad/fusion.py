"""Audio-visual fusion strategies.

Three families: fuse the feature pyramids (cross-attention or channel
concatenation), fuse per-class scores after separate heads (add or
multiply), or run two full detection streams and pool their proposals.
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as tz
from .encoder import FeaturePyramid, scaled_attention
from .errors import ContractError, DataFormatError

STRATEGIES = ("proposal_fusion", "score_fusion_add", "score_fusion_mul",
              "feature_fusion_concat", "feature_fusion_xattn")
FEATURE_STRATEGIES = ("feature_fusion_concat", "feature_fusion_xattn")


def check_strategy(name):
    if name not in STRATEGIES:
        raise ContractError(
            f"unknown fusion strategy {name!r}; expected one of {STRATEGIES}")
    return name


@dataclass
class CrossAttentionParams:
    """The three learned square maps driving visual-queries-audio attention."""

    w_q: object
    w_k: object
    w_v: object

    @classmethod
    def create(cls, store, prefix, d):
        # The value map starts ~20x smaller than the query/key maps, so a
        # fresh fused model behaves almost like its visual-only twin and the
        # audio pathway only grows once training finds it useful.
        return cls(
            w_q=store.uniform(f"{prefix}.wq", (d, d), fan_in=d),
            w_k=store.uniform(f"{prefix}.wk", (d, d), fan_in=d),
            w_v=store.uniform(f"{prefix}.wv", (d, d), fan_in=d * 400),
        )


def cross_attention(fv_level, fa_level, params):
    """Visual rows attend over audio rows: softmax(QK^T/sqrt(d))V with
    Q from the visual map and K, V from the audio map."""
    if fv_level.shape[0] != fa_level.shape[0]:
        raise DataFormatError(
            f"modality streams misaligned: visual has {fv_level.shape[0]} "
            f"timesteps, audio {fa_level.shape[0]}")
    d = params.w_q.shape[0]
    if fv_level.shape[1] != d or fa_level.shape[1] != d:
        raise ContractError(
            f"feature dim mismatch: inputs {fv_level.shape[1]}/{fa_level.shape[1]}, "
            f"attention expects {d}")
    return scaled_attention(fv_level, fa_level, params.w_q, params.w_k, params.w_v)


def fuse_pyramids(fv, fa, strategy, xattn_params=None, concat_w=None,
                  residual=True):
    """Level-by-level feature fusion of two aligned pyramids."""
    check_strategy(strategy)
    if strategy not in FEATURE_STRATEGIES:
        raise ContractError(
            f"fuse_pyramids only handles feature fusion, got {strategy!r}")
    if fv.num_levels != fa.num_levels:
        raise DataFormatError(
            f"pyramids misaligned: {fv.num_levels} vs {fa.num_levels} levels")
    fused = []
    for v, a in zip(fv.levels, fa.levels):
        if strategy == "feature_fusion_xattn":
            if xattn_params is None:
                raise ContractError("feature_fusion_xattn needs attention params")
            out = cross_attention(v, a, xattn_params)
            if residual:
                out = v + out
        else:
            if concat_w is None:
                raise ContractError("feature_fusion_concat needs a projection matrix")
            out = tz.matmul(tz.concat_cols(v, a), concat_w)
        fused.append(out)
    return FeaturePyramid(levels=fused, level_strides=list(fv.level_strides))


def fuse_classification_scores(pv, pa, mode):
    """Combine per-class score vectors from two modalities.

    `add` keeps raw sums (range [0, 2]; downstream only ranks), `mul`
    gates each class by agreement.
    """
    pv, pa = np.asarray(pv, dtype=np.float64), np.asarray(pa, dtype=np.float64)
    if pv.shape != pa.shape:
        raise ContractError(f"score shapes differ: {pv.shape} vs {pa.shape}")
    for name, arr in (("visual", pv), ("audio", pa)):
        if arr.size and (arr.min() < -1e-9 or arr.max() > 1.0 + 1e-9):
            raise ContractError(f"{name} scores must lie in [0, 1]")
    if mode == "add":
        return pv + pa
    if mode == "mul":
        return pv * pa
    raise ContractError(f"score fusion mode must be add or mul, got {mode!r}")


def fuse_proposal_sets(phi_v, phi_a):
    """Plain union of two candidate sets from the same video; duplicates
    survive until suppression."""
    from .postprocess import ProposalSet

    if phi_v.video_id != phi_a.video_id:
        raise ContractError(
            f"cannot pool proposals across videos "
            f"({phi_v.video_id!r} vs {phi_a.video_id!r})")
    return ProposalSet(video_id=phi_v.video_id,
                       proposals=list(phi_v.proposals) + list(phi_a.proposals))
