"""End-to-end detector assembled from encoders, fusion, and heads.

One `Detector` owns every parameter of a run (inside a shared
`ParamStore`) and knows three things: how to turn a video into per-level
head outputs, how to score those outputs against assigned targets, and
how to decode them into ranked detections.

Stream wiring depends on the fusion strategy:

- `feature_fusion_*`: heads read the fused pyramid; a small auxiliary
  classification head reads the audio pyramid so decoded proposals carry
  an audio score term.
- `score_fusion_*`: heads read the visual pyramid; the audio
  classification head's sigmoid scores are merged with the visual ones
  (add or mul) at decode time.
- `proposal_fusion`: two complete head sets, one per modality; their
  proposal sets are pooled before suppression.
- single-modality runs use one encoder and one head set.
"""

import numpy as np

from . import tensor as tz
from .encoder import Encoder, EncoderConfig
from .errors import NumericError
from .fusion import (CrossAttentionParams, fuse_classification_scores,
                     fuse_proposal_sets, fuse_pyramids)
from .heads import (ClassificationHead, DisabledHead, HeadConfig,
                    RegressionHead, boundary_confidence_head, centricity_head)
from .losses import (focal_classification_loss, iou_regression_loss,
                     soft_label_mse, total_loss)
from .postprocess import (DetectionResult, LevelOutputs, PostConfig,
                          decode_proposals, score_candidates, soft_nms)
from .targets import assign_positives, one_hot


class HeadGroup:
    """All prediction heads reading one feature pyramid."""

    def __init__(self, store, prefix, cfg, head_cfg):
        d = cfg.model_d
        self.cls = ClassificationHead(store, f"{prefix}.cls", d, head_cfg)
        self.reg = RegressionHead(store, f"{prefix}.reg", d, head_cfg)
        self.cent = (centricity_head(store, f"{prefix}.cent", d, head_cfg)
                     if cfg.centricity_enabled else DisabledHead("centricity"))
        self.bnd = (boundary_confidence_head(store, f"{prefix}.bnd", d, head_cfg)
                    if cfg.boundary_enabled
                    else DisabledHead("boundary_confidence"))

    def forward(self, pyramid):
        """Per-level dicts of head outputs (tracked tensors)."""
        outs = []
        for x in pyramid.levels:
            verb, noun = self.cls.forward_level(x)
            entry = {"verb": verb, "noun": noun,
                     "offsets": self.reg.forward_level(x),
                     "cent": (self.cent.forward_level(x)
                              if self.cent.enabled else None),
                     "bnd": (self.bnd.forward_level(x)
                             if self.bnd.enabled else None)}
            outs.append(entry)
        return outs


class Detector:
    """Complete audio-visual temporal action detection model."""

    def __init__(self, cfg, store):
        self.cfg = cfg
        self.store = store
        enc_cfg = EncoderConfig(
            d=cfg.model_d, levels=cfg.model_levels,
            attention_blocks_per_level=cfg.model_blocks,
            max_input_t=cfg.model_max_input_t)
        head_cfg = HeadConfig(
            c_verb=cfg.model_c_verb, c_noun=cfg.model_c_noun,
            hidden_channels=cfg.model_hidden, kernel_width=cfg.model_kernel,
            layers_per_head=cfg.model_head_layers)
        self.head_cfg = head_cfg

        modality = cfg.model_modality
        self.encoder_visual = (
            Encoder(enc_cfg, store, "encoder.visual", cfg.data_visual_dim)
            if modality in ("av", "visual") else None)
        self.encoder_audio = (
            Encoder(enc_cfg, store, "encoder.audio", cfg.data_audio_dim)
            if modality in ("av", "audio") else None)

        strategy = cfg.fusion_strategy
        self.xattn = None
        self.concat_w = None
        if modality == "av" and strategy == "feature_fusion_xattn":
            self.xattn = CrossAttentionParams.create(
                store, "fusion.xattn", cfg.model_d)
        if modality == "av" and strategy == "feature_fusion_concat":
            self.concat_w = store.uniform(
                "fusion.concat.w", (2 * cfg.model_d, cfg.model_d),
                fan_in=2 * cfg.model_d)

        if modality == "av" and strategy == "proposal_fusion":
            self.groups = {
                "visual": HeadGroup(store, "heads.visual", cfg, head_cfg),
                "audio": HeadGroup(store, "heads.audio", cfg, head_cfg),
            }
            self.audio_cls = None
        else:
            self.groups = {"main": HeadGroup(store, "heads.main", cfg, head_cfg)}
            # extra audio-only classifier: feeds either the score-fusion
            # merge or the audio term of the confidence sum
            self.audio_cls = (
                ClassificationHead(store, "heads.audioaux.cls",
                                   cfg.model_d, head_cfg)
                if modality == "av" and strategy != "proposal_fusion"
                else None)

    # -- forward ---------------------------------------------------------

    def pyramids(self, video):
        """Map stream name -> feature pyramid its heads should read."""
        cfg = self.cfg
        pv = (self.encoder_visual.encode(video.visual_seq)
              if self.encoder_visual else None)
        pa = (self.encoder_audio.encode(video.audio_seq)
              if self.encoder_audio else None)
        if cfg.model_modality == "visual":
            return {"main": pv}, None
        if cfg.model_modality == "audio":
            return {"main": pa}, None
        strategy = cfg.fusion_strategy
        if strategy == "proposal_fusion":
            return {"visual": pv, "audio": pa}, None
        if strategy.startswith("feature_fusion"):
            fused = fuse_pyramids(pv, pa, strategy, xattn_params=self.xattn,
                                  concat_w=self.concat_w,
                                  residual=cfg.fusion_residual)
            return {"main": fused}, pa
        # score fusion: visual features drive the heads
        return {"main": pv}, pa

    def forward(self, video):
        """(stream outputs, audio-aux outputs, level specs) for one video."""
        streams, aux_pyr = self.pyramids(video)
        outs = {name: self.groups[name].forward(pyr)
                for name, pyr in streams.items()}
        aux = None
        if self.audio_cls is not None and aux_pyr is not None:
            aux = [self.audio_cls.forward_level(x) for x in aux_pyr.levels]
        specs = next(iter(streams.values())).level_specs()
        return outs, aux, specs

    # -- training loss ---------------------------------------------------

    def _stream_losses(self, level_outs, targets):
        cfg = self.cfg
        verb = tz.concat_rows([o["verb"] for o in level_outs])
        noun = tz.concat_rows([o["noun"] for o in level_outs])
        offs = tz.concat_rows([o["offsets"] for o in level_outs])
        verb_t = one_hot(targets.concat("verb"), cfg.model_c_verb)
        noun_t = one_hot(targets.concat("noun"), cfg.model_c_noun)
        cls = focal_classification_loss(verb, noun, verb_t, noun_t,
                                        alpha=cfg.loss_focal_alpha,
                                        gamma=cfg.loss_focal_gamma)

        pos = np.flatnonzero(targets.concat("is_positive"))
        if pos.size:
            reg = iou_regression_loss(tz.take_rows(offs, pos),
                                      targets.concat("offsets")[pos])
        else:
            reg = tz.Tensor(0.0)

        cent = tz.Tensor(0.0)
        if level_outs[0]["cent"] is not None:
            pred = tz.concat_rows([o["cent"] for o in level_outs])
            cent = soft_label_mse(pred, targets.concat("centricity")[:, None])

        bnd = tz.Tensor(0.0)
        if level_outs[0]["bnd"] is not None:
            pred = tz.concat_rows([o["bnd"] for o in level_outs])
            labels = np.stack([targets.concat("start_conf"),
                               targets.concat("end_conf")], axis=1)
            bnd = soft_label_mse(pred, labels)
        return reg, cls, bnd, cent

    def loss_components(self, video):
        """(total tensor, component floats) for one annotated video."""
        cfg = self.cfg
        outs, aux, specs = self.forward(video)
        targets = assign_positives(video.segments, specs, sigma=cfg.loss_sigma)

        parts = [self._stream_losses(stream, targets)
                 for stream in outs.values()]
        scale = 1.0 / len(parts)
        reg, cls, bnd, cent = parts[0]
        for extra in parts[1:]:
            reg, cls, bnd, cent = (reg + extra[0], cls + extra[1],
                                   bnd + extra[2], cent + extra[3])
        if scale != 1.0:
            reg, cls, bnd, cent = (reg * scale, cls * scale,
                                   bnd * scale, cent * scale)

        if aux is not None:
            verb = tz.concat_rows([v for v, _ in aux])
            noun = tz.concat_rows([n for _, n in aux])
            verb_t = one_hot(targets.concat("verb"), cfg.model_c_verb)
            noun_t = one_hot(targets.concat("noun"), cfg.model_c_noun)
            cls = cls + focal_classification_loss(
                verb, noun, verb_t, noun_t,
                alpha=cfg.loss_focal_alpha, gamma=cfg.loss_focal_gamma)

        comps = {"regression": reg.item(), "classification": cls.item(),
                 "boundary": bnd.item(), "centricity": cent.item()}
        bad = {k: v for k, v in comps.items() if not np.isfinite(v)}
        if bad:
            detail = " ".join(f"{k}={v!r}" for k, v in sorted(comps.items()))
            raise NumericError(f"non-finite loss component(s): {detail}")
        total = total_loss(reg, cls, bnd, cent,
                           lambda_cls=cfg.loss_lambda1,
                           lambda_boundary=cfg.effective_lambda2,
                           lambda_centricity=cfg.effective_lambda3)
        comps["total"] = total.item()
        return total, comps

    # -- inference -------------------------------------------------------

    def post_config(self):
        cfg = self.cfg
        return PostConfig(tau=cfg.effective_tau, beta=cfg.effective_beta,
                          gamma=cfg.effective_gamma,
                          k_verb=cfg.post_k_verb, k_noun=cfg.post_k_noun,
                          sigma_nms=cfg.post_sigma_nms,
                          score_floor=cfg.post_score_floor,
                          max_out=cfg.post_max_out,
                          pre_nms_topk=cfg.post_pre_nms_topk)

    def _level_outputs(self, level_outs, specs, aux=None, fuse_mode=None):
        """Freeze tracked head outputs into plain per-level arrays."""
        levels = []
        for i, (t_len, stride) in enumerate(specs):
            o = level_outs[i]
            verb = o["verb"].data.copy()
            noun = o["noun"].data.copy()
            audio_verb = audio_noun = None
            if aux is not None:
                av, an = aux[i][0].data.copy(), aux[i][1].data.copy()
                if fuse_mode is not None:
                    verb = fuse_classification_scores(verb, av, fuse_mode)
                    noun = fuse_classification_scores(noun, an, fuse_mode)
                else:
                    audio_verb, audio_noun = av, an
            cent = (o["cent"].data[:, 0].copy() if o["cent"] is not None
                    else np.zeros(t_len))
            if o["bnd"] is not None:
                start_conf = o["bnd"].data[:, 0].copy()
                end_conf = o["bnd"].data[:, 1].copy()
            else:
                start_conf = np.zeros(t_len)
                end_conf = np.zeros(t_len)
            levels.append(LevelOutputs(
                stride=stride, verb_scores=verb, noun_scores=noun,
                offsets=o["offsets"].data.copy(), centricity=cent,
                start_conf=start_conf, end_conf=end_conf,
                audio_verb_scores=audio_verb, audio_noun_scores=audio_noun))
        return levels

    def proposals(self, video):
        """Decode one video into a pooled, unsuppressed proposal set."""
        cfg = self.cfg
        with tz.no_grad():
            outs, aux, specs = self.forward(video)
            if "visual" in outs:  # proposal fusion: decode each stream
                sets = []
                for name in ("visual", "audio"):
                    levels = self._level_outputs(outs[name], specs)
                    sets.append(decode_proposals(levels, video.duration,
                                                 video.video_id))
                return fuse_proposal_sets(sets[0], sets[1])
            fuse_mode = None
            if cfg.fusion_strategy == "score_fusion_add" and aux is not None:
                fuse_mode = "add"
            elif cfg.fusion_strategy == "score_fusion_mul" and aux is not None:
                fuse_mode = "mul"
            levels = self._level_outputs(outs["main"], specs, aux=aux,
                                         fuse_mode=fuse_mode)
            return decode_proposals(levels, video.duration, video.video_id)

    def detect(self, video, tasks=("pair",)):
        """Suppressed detections for each requested task keying."""
        pcfg = self.post_config()
        cands = score_candidates(self.proposals(video), pcfg)
        out = {}
        for task in tasks:
            dets = soft_nms(cands, sigma_nms=pcfg.sigma_nms,
                            score_floor=pcfg.score_floor,
                            max_out=pcfg.max_out, task=task)
            out[task] = DetectionResult(video_id=video.video_id,
                                        detections=dets)
        return out


def num_parameters(store):
    """Total scalar parameter count in a store."""
    return int(sum(t.data.size for t in store.tensors()))
