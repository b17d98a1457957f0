"""Fusion strategies: attention identities, score mixing, proposal pooling."""

import math

import numpy as np
import pytest

from avtad import fusion
from avtad.encoder import FeaturePyramid
from avtad.errors import ContractError, DataFormatError
from avtad.fusion import CrossAttentionParams, cross_attention
from avtad.gradcheck import finite_diff_check
from avtad.params import ParamStore
from avtad.postprocess import Proposal, ProposalSet
from avtad.tensor import Tensor


def make_params(d, seed=0):
    return CrossAttentionParams.create(ParamStore(seed=seed), "xattn", d)


class TestCrossAttention:
    def test_singleton_returns_value_map_of_audio(self):
        p = make_params(3)
        fv = Tensor(np.random.default_rng(0).normal(size=(1, 3)))
        fa_row = np.random.default_rng(1).normal(size=(1, 3))
        out = cross_attention(fv, Tensor(fa_row), p)
        np.testing.assert_allclose(out.data, fa_row @ p.w_v.data.T, atol=1e-12)

    def test_identical_audio_rows_ignore_queries(self):
        p = make_params(3)
        row = np.array([0.3, -1.2, 0.7])
        fa = Tensor(np.tile(row, (4, 1)))
        for seed in (0, 1):
            fv = Tensor(np.random.default_rng(seed).normal(size=(4, 3)))
            out = cross_attention(fv, fa, p)
            np.testing.assert_allclose(
                out.data, np.tile(p.w_v.data @ row, (4, 1)), atol=1e-12)

    def test_two_by_two_hand_computation(self):
        d = 2
        p = make_params(d, seed=4)
        rng = np.random.default_rng(5)
        fv, fa = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
        out = cross_attention(Tensor(fv), Tensor(fa), p).data
        q = fv @ p.w_q.data.T
        k = fa @ p.w_k.data.T
        v = fa @ p.w_v.data.T
        expect = np.zeros((2, 2))
        for i in range(2):
            logits = np.array([q[i] @ k[0], q[i] @ k[1]]) / math.sqrt(d)
            w = np.exp(logits - logits.max())
            w /= w.sum()
            expect[i] = w[0] * v[0] + w[1] * v[1]
        np.testing.assert_allclose(out, expect, atol=1e-12)

    def test_attention_rows_sum_to_one(self):
        # with W_V = I and one-hot audio rows, outputs ARE the weight rows
        store = ParamStore(seed=6)
        p = CrossAttentionParams.create(store, "x", 3)
        p.w_v.data = np.eye(3)
        fv = Tensor(np.random.default_rng(7).normal(size=(3, 3)))
        out = cross_attention(fv, Tensor(np.eye(3)), p)
        np.testing.assert_allclose(out.data.sum(axis=1), np.ones(3), atol=1e-9)
        assert np.all(out.data >= 0.0)

    def test_audio_permutation_invariance(self):
        p = make_params(4, seed=8)
        rng = np.random.default_rng(9)
        fv, fa = rng.normal(size=(5, 4)), rng.normal(size=(5, 4))
        perm = rng.permutation(5)
        a = cross_attention(Tensor(fv), Tensor(fa), p).data
        b = cross_attention(Tensor(fv), Tensor(fa[perm]), p).data
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_misaligned_lengths(self):
        p = make_params(3)
        with pytest.raises(DataFormatError):
            cross_attention(Tensor(np.zeros((4, 3))), Tensor(np.zeros((5, 3))), p)

    def test_wrong_dim(self):
        p = make_params(3)
        with pytest.raises(ContractError):
            cross_attention(Tensor(np.zeros((4, 2))), Tensor(np.zeros((4, 2))), p)

    def test_gradients(self):
        store = ParamStore(seed=10)
        p = CrossAttentionParams.create(store, "x", 4)
        rng = np.random.default_rng(11)
        fv = Tensor(rng.normal(size=(6, 4)), requires_grad=True)
        fa = Tensor(rng.normal(size=(6, 4)), requires_grad=True)
        tensors = [fv, fa, p.w_q, p.w_k, p.w_v]
        err = finite_diff_check(lambda: cross_attention(fv, fa, p).sum(), tensors)
        assert err < 1e-5


def make_pyramid(shapes, base_stride=1.0, seed=0):
    rng = np.random.default_rng(seed)
    return FeaturePyramid(
        levels=[Tensor(rng.normal(size=s)) for s in shapes],
        level_strides=[base_stride * 2 ** i for i in range(len(shapes))])


class TestFusePyramids:
    def test_xattn_matches_per_level_calls(self):
        p = make_params(3, seed=12)
        fv = make_pyramid([(8, 3), (4, 3)], seed=13)
        fa = make_pyramid([(8, 3), (4, 3)], seed=14)
        fused = fusion.fuse_pyramids(fv, fa, "feature_fusion_xattn", xattn_params=p)
        for v, a, out in zip(fv.levels, fa.levels, fused.levels):
            expect = v.data + cross_attention(v, a, p).data
            np.testing.assert_allclose(out.data, expect, atol=1e-12)

    def test_xattn_without_residual(self):
        p = make_params(3, seed=15)
        fv = make_pyramid([(4, 3)], seed=16)
        fa = make_pyramid([(4, 3)], seed=17)
        fused = fusion.fuse_pyramids(fv, fa, "feature_fusion_xattn",
                                     xattn_params=p, residual=False)
        np.testing.assert_allclose(
            fused.levels[0].data,
            cross_attention(fv.levels[0], fa.levels[0], p).data, atol=1e-12)

    def test_concat_with_zero_audio(self):
        store = ParamStore(seed=18)
        w = store.uniform("proj", (6, 3), fan_in=6)
        fv = make_pyramid([(5, 3)], seed=19)
        fa = FeaturePyramid(levels=[Tensor(np.zeros((5, 3)))], level_strides=[1.0])
        fused = fusion.fuse_pyramids(fv, fa, "feature_fusion_concat", concat_w=w)
        padded = np.concatenate([fv.levels[0].data, np.zeros((5, 3))], axis=1)
        np.testing.assert_allclose(fused.levels[0].data, padded @ w.data, atol=1e-12)

    def test_strides_preserved(self):
        p = make_params(3, seed=20)
        fv = make_pyramid([(8, 3), (4, 3)], base_stride=0.25, seed=21)
        fa = make_pyramid([(8, 3), (4, 3)], base_stride=0.25, seed=22)
        fused = fusion.fuse_pyramids(fv, fa, "feature_fusion_xattn", xattn_params=p)
        assert fused.level_strides == [0.25, 0.5]

    def test_non_feature_strategy_rejected(self):
        fv = make_pyramid([(4, 3)])
        with pytest.raises(ContractError):
            fusion.fuse_pyramids(fv, fv, "score_fusion_add")

    def test_unknown_strategy_rejected(self):
        fv = make_pyramid([(4, 3)])
        with pytest.raises(ContractError):
            fusion.fuse_pyramids(fv, fv, "late_fusion")


class TestScoreFusion:
    def test_add_identity(self):
        pv = np.array([0.2, 0.8])
        np.testing.assert_array_equal(
            fusion.fuse_classification_scores(pv, np.zeros(2), "add"), pv)

    def test_mul_identity(self):
        pv = np.array([0.2, 0.8])
        np.testing.assert_array_equal(
            fusion.fuse_classification_scores(pv, np.ones(2), "mul"), pv)

    def test_add_hand_value(self):
        out = fusion.fuse_classification_scores(
            np.array([0.2, 0.8]), np.array([0.5, 0.1]), "add")
        np.testing.assert_allclose(out, [0.7, 0.9], atol=1e-15)

    def test_uniform_audio_preserves_argmax(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            pv = rng.uniform(size=6)
            pa = np.full(6, float(rng.uniform()))
            fused = fusion.fuse_classification_scores(pv, pa, "add")
            assert fused.argmax() == pv.argmax()

    def test_length_mismatch(self):
        with pytest.raises(ContractError):
            fusion.fuse_classification_scores(np.zeros(2), np.zeros(3), "add")

    def test_out_of_range_scores(self):
        with pytest.raises(ContractError):
            fusion.fuse_classification_scores(np.array([1.5]), np.array([0.5]), "add")

    def test_bad_mode(self):
        with pytest.raises(ContractError):
            fusion.fuse_classification_scores(np.zeros(2), np.zeros(2), "avg")


def make_proposal(video_id="v0", start=0.0, end=1.0):
    return Proposal(video_id=video_id, start=start, end=end,
                    verb_scores=np.array([0.5]), noun_scores=np.array([0.5]),
                    centricity=0.5, start_conf=0.0, end_conf=0.0,
                    level=0, timestep=0)


class TestProposalPooling:
    def test_sizes_add(self):
        a = ProposalSet("v0", [make_proposal() for _ in range(3)])
        b = ProposalSet("v0", [make_proposal() for _ in range(2)])
        assert len(fusion.fuse_proposal_sets(a, b)) == 5

    def test_empty_audio_is_identity(self):
        a = ProposalSet("v0", [make_proposal()])
        out = fusion.fuse_proposal_sets(a, ProposalSet("v0", []))
        assert out.proposals == a.proposals

    def test_video_mismatch(self):
        with pytest.raises(ContractError):
            fusion.fuse_proposal_sets(ProposalSet("v0", []), ProposalSet("v1", []))

    def test_duplicates_survive_pooling(self):
        a = ProposalSet("v0", [make_proposal(start=1.0, end=2.0)])
        b = ProposalSet("v0", [make_proposal(start=1.0, end=2.0)])
        assert len(fusion.fuse_proposal_sets(a, b)) == 2
