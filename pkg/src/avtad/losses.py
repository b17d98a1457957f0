"""Loss terms for the detector: focal classification, tIoU regression,
soft-label MSE, and their weighted combination."""

import warnings

import numpy as np

from . import tensor as tz
from .errors import ContractError
from .tensor import Tensor

FOCAL_ALPHA = 0.25
FOCAL_GAMMA = 2.0
SCORE_EPS = 1e-7

LAMBDA_CLS = 1.0
LAMBDA_BOUNDARY = 0.5
LAMBDA_CENTRICITY = 1.7

VERB_WEIGHT = 2.0 / 5.0
NOUN_WEIGHT = 3.0 / 5.0


def focal_binary(scores, targets, alpha=FOCAL_ALPHA, gamma=FOCAL_GAMMA):
    """Focal loss over a [T, C] sigmoid score map with 0/1 targets.

    Summed over classes, averaged over timesteps. Scores are clamped away
    from {0, 1} so the logs stay finite.
    """
    targets = np.asarray(targets, dtype=np.float64)
    if scores.shape != targets.shape:
        raise ContractError(
            f"scores shape {scores.shape} != targets shape {targets.shape}")
    t_count = scores.shape[0]
    pos = Tensor(targets)
    neg = Tensor(1.0 - targets)
    p = tz.clamp(scores, SCORE_EPS, 1.0 - SCORE_EPS)
    one_minus_p = 1.0 - p
    pos_term = tz.mul(pos, tz.mul(tz.pow_const(one_minus_p, gamma), tz.log(p))) * (-alpha)
    neg_term = tz.mul(neg, tz.mul(tz.pow_const(p, gamma), tz.log(one_minus_p))) * (-(1.0 - alpha))
    return (pos_term + neg_term).sum() * (1.0 / t_count)


def focal_classification_loss(verb_scores, noun_scores, verb_targets, noun_targets,
                              alpha=FOCAL_ALPHA, gamma=FOCAL_GAMMA):
    """Verb and noun focal losses blended 2:3."""
    lv = focal_binary(verb_scores, verb_targets, alpha, gamma)
    ln = focal_binary(noun_scores, noun_targets, alpha, gamma)
    return lv * VERB_WEIGHT + ln * NOUN_WEIGHT


def iou_regression_loss(pred_offsets, target_offsets):
    """Mean (1 - tIoU) between predicted and target segments sharing an
    anchor timestep; offsets are (dist-to-start, dist-to-end) pairs.

    Zero-length targets cannot define an overlap and are dropped with a
    warning. With no usable rows the loss is a constant zero.
    """
    target_offsets = np.asarray(target_offsets, dtype=np.float64)
    if pred_offsets.shape != target_offsets.shape:
        raise ContractError(
            f"pred shape {pred_offsets.shape} != target shape {target_offsets.shape}")
    if target_offsets.ndim != 2 or target_offsets.shape[1] != 2:
        raise ContractError(f"offsets must be [P, 2], got {target_offsets.shape}")
    keep = target_offsets.sum(axis=1) > 0.0
    dropped = int((~keep).sum())
    if dropped:
        warnings.warn(f"excluded {dropped} zero-length regression targets")
    if not keep.any():
        return Tensor(0.0)
    idx = np.nonzero(keep)[0]
    pred = tz.take_rows(pred_offsets, idx)
    tgt = Tensor(target_offsets[idx])
    inter = tz.sum_cols(tz.minimum(pred, tgt))
    union = tz.sum_cols(tz.maximum(pred, tgt))
    tiou = tz.div(inter, union)
    return (1.0 - tiou).mean()


def soft_label_mse(pred, labels):
    """Mean squared error between a [T'] score vector and soft labels."""
    labels = np.asarray(labels, dtype=np.float64)
    if pred.shape != labels.shape:
        raise ContractError(
            f"pred shape {pred.shape} != labels shape {labels.shape}")
    diff = pred - Tensor(labels)
    return tz.pow_const(diff, 2.0).mean()


# the centricity loss is exactly the soft-label MSE over all pyramid
# timesteps; the alias keeps call sites self-describing
centricity_mse_loss = soft_label_mse


def total_loss(reg_loss, cls_loss, boundary_loss, centricity_loss,
               lambda_cls=LAMBDA_CLS, lambda_boundary=LAMBDA_BOUNDARY,
               lambda_centricity=LAMBDA_CENTRICITY):
    """reg + l1*cls + l2*boundary + l3*centricity, components all >= 0."""
    parts = {"regression": reg_loss, "classification": cls_loss,
             "boundary": boundary_loss, "centricity": centricity_loss}
    for name, part in parts.items():
        value = part.item() if isinstance(part, Tensor) else float(part)
        if not np.isfinite(value):
            raise ContractError(f"{name} loss is not finite: {value}")
        if value < 0.0:
            raise ContractError(f"{name} loss is negative: {value}")
    terms = [reg_loss, cls_loss * lambda_cls, boundary_loss * lambda_boundary,
             centricity_loss * lambda_centricity]
    out = terms[0]
    for term in terms[1:]:
        out = out + term
    return out
