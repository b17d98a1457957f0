"""Training-target assignment for anchor-free detection.

Each pyramid timestep either matches one ground-truth segment (becoming a
positive with offset / class / centricity / boundary-confidence labels) or
is a negative with all-zero soft labels. Matching is purely geometric:
a timestep is eligible for a segment when it lies inside it and the larger
of its two boundary distances falls in the level's designated range.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError

SIGMA_DEFAULT = 1.7


@dataclass(frozen=True)
class Segment:
    """A ground-truth action instance in seconds, with verb and noun ids."""

    start: float
    end: float
    verb: int
    noun: int

    def __post_init__(self):
        if not (0.0 <= self.start < self.end):
            raise ContractError(
                f"segment must satisfy 0 <= start < end, got [{self.start}, {self.end}]")
        if self.verb < 0 or self.noun < 0:
            raise ContractError("verb and noun ids must be non-negative")

    @property
    def duration(self):
        return self.end - self.start

    @property
    def centre(self):
        return 0.5 * (self.start + self.end)


def default_ranges(levels):
    """Max-offset ladder in base-stride units, one (lo, hi] pair per level.

    Six levels give [0,4], [4,8], [8,16], [16,32], [32,64], [64, inf);
    consecutive ranges share endpoints so no offset magnitude is orphaned.
    """
    if levels < 1:
        raise ContractError(f"need at least one level, got {levels}")
    bounds = [0.0] + [4.0 * 2.0 ** i for i in range(levels - 1)] + [math.inf]
    return [(bounds[i], bounds[i + 1]) for i in range(levels)]


def _check_ranges(ranges):
    prev_hi = None
    for lo, hi in ranges:
        if not lo < hi:
            raise ContractError(f"range ({lo}, {hi}) is not increasing")
        if prev_hi is not None and lo < prev_hi:
            raise ContractError("per-level ranges must be non-decreasing")
        prev_hi = hi


def gaussian_label(distance_seconds, half_length, sigma):
    """exp(-d^2 / (2 sigma^2)) with d = distance / half_length."""
    d = distance_seconds / half_length
    return math.exp(-(d * d) / (2.0 * sigma * sigma))


def centricity_label(t_seconds, segment, sigma=SIGMA_DEFAULT):
    """Soft actionness label: 1 at the segment centre, decaying toward the
    boundaries, exp(-1/(2 sigma^2)) exactly at them."""
    if sigma <= 0:
        raise ContractError(f"sigma must be positive, got {sigma}")
    if not (segment.start <= t_seconds <= segment.end):
        raise ContractError(
            f"t={t_seconds} lies outside segment [{segment.start}, {segment.end}]")
    half = 0.5 * segment.duration
    return gaussian_label(abs(t_seconds - segment.centre), half, sigma)


def boundary_labels(t_seconds, segment, sigma=SIGMA_DEFAULT):
    """(start, end) confidence labels: the centricity Gaussian recentred on
    each ground-truth boundary, same sigma and half-length normalizer."""
    if not (segment.start <= t_seconds <= segment.end):
        raise ContractError(
            f"t={t_seconds} lies outside segment [{segment.start}, {segment.end}]")
    half = 0.5 * segment.duration
    return (gaussian_label(abs(t_seconds - segment.start), half, sigma),
            gaussian_label(abs(t_seconds - segment.end), half, sigma))


def regression_targets(t_seconds, segment, level_stride):
    """Distances from t to the two boundaries, in level-stride units."""
    if level_stride <= 0:
        raise ContractError(f"level stride must be positive, got {level_stride}")
    return ((t_seconds - segment.start) / level_stride,
            (segment.end - t_seconds) / level_stride)


@dataclass
class LevelTargets:
    """Per-timestep labels for one pyramid level."""

    stride: float
    is_positive: np.ndarray        # bool [T]
    matched: np.ndarray            # int  [T], -1 for negatives
    centricity: np.ndarray         # float [T], 0 for negatives
    offsets: np.ndarray            # float [T, 2], 0 for negatives
    verb: np.ndarray               # int [T], -1 for negatives
    noun: np.ndarray               # int [T], -1 for negatives
    start_conf: np.ndarray         # float [T], 0 for negatives
    end_conf: np.ndarray           # float [T], 0 for negatives

    @property
    def length(self):
        return self.is_positive.shape[0]


@dataclass
class TrainingTargets:
    """Labels for every timestep of every level of one video."""

    levels: list = field(default_factory=list)

    @property
    def total_timesteps(self):
        return sum(lv.length for lv in self.levels)

    @property
    def num_positives(self):
        return int(sum(lv.is_positive.sum() for lv in self.levels))

    def concat(self, name):
        """One flat array of the named per-timestep field across levels."""
        return np.concatenate([getattr(lv, name) for lv in self.levels], axis=0)


def assign_positives(segments, level_specs, ranges=None, sigma=SIGMA_DEFAULT):
    """Match pyramid timesteps to ground-truth segments.

    `level_specs` is a list of (timestep_count, stride_seconds) pairs, finest
    level first. Timestep t of level l sits at t * stride_l seconds. It
    becomes positive for the shortest covering segment whose max boundary
    offset, measured in base-stride units, falls inside the level's range;
    equal-duration ties go to the earlier-starting segment.
    """
    if not level_specs:
        raise ContractError("need at least one level spec")
    if ranges is None:
        ranges = default_ranges(len(level_specs))
    if len(ranges) != len(level_specs):
        raise ContractError(
            f"{len(level_specs)} levels but {len(ranges)} regression ranges")
    _check_ranges(ranges)
    base_stride = level_specs[0][1]
    if base_stride <= 0:
        raise ContractError("base stride must be positive")

    out = TrainingTargets()
    for (length, stride), (lo, hi) in zip(level_specs, ranges):
        lv = LevelTargets(
            stride=stride,
            is_positive=np.zeros(length, dtype=bool),
            matched=np.full(length, -1, dtype=np.int64),
            centricity=np.zeros(length),
            offsets=np.zeros((length, 2)),
            verb=np.full(length, -1, dtype=np.int64),
            noun=np.full(length, -1, dtype=np.int64),
            start_conf=np.zeros(length),
            end_conf=np.zeros(length),
        )
        for t in range(length):
            x = t * stride
            best = None
            for gi, g in enumerate(segments):
                if not (g.start <= x <= g.end):
                    continue
                max_off = max(x - g.start, g.end - x) / base_stride
                if not (lo <= max_off <= hi):
                    continue
                key = (g.duration, g.start, gi)
                if best is None or key < best[0]:
                    best = (key, gi, g)
            if best is None:
                continue
            _, gi, g = best
            lv.is_positive[t] = True
            lv.matched[t] = gi
            lv.centricity[t] = centricity_label(x, g, sigma)
            lv.offsets[t] = regression_targets(x, g, stride)
            lv.verb[t] = g.verb
            lv.noun[t] = g.noun
            lv.start_conf[t], lv.end_conf[t] = boundary_labels(x, g, sigma)
        out.levels.append(lv)
    return out


def one_hot(ids, num_classes):
    """[T] integer ids (negatives meaning "no class") -> [T, C] 0/1 floats."""
    ids = np.asarray(ids)
    if ids.size and ids.max() >= num_classes:
        raise ContractError(
            f"class id {ids.max()} out of range for {num_classes} classes")
    out = np.zeros((ids.shape[0], num_classes))
    mask = ids >= 0
    out[np.nonzero(mask)[0], ids[mask]] = 1.0
    return out
