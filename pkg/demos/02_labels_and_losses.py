"""How timesteps become training targets, and what each loss term sees.

Walks one ground-truth segment through label assignment, sketches the
soft centre-weighted label curve, then shows the loss values reacting to
good and bad predictions.
"""

import numpy as np

from avtad import tensor as tz
from avtad.losses import (focal_binary, iou_regression_loss, soft_label_mse,
                          total_loss)
from avtad.targets import (Segment, assign_positives, boundary_labels,
                           centricity_label)

seg = Segment(start=2.0, end=6.0, verb=1, noun=3)
print(f"segment [{seg.start}, {seg.end}]s, centre {seg.centre}s\n")

# The soft "how central is this timestep" label: 1.0 at the centre,
# decaying toward both boundaries.
print("t(s)   centricity  start_conf  end_conf")
for t in np.linspace(seg.start, seg.end, 9):
    c = centricity_label(t, seg)
    s, e = boundary_labels(t, seg)
    bar = "#" * int(round(c * 30))
    print(f"{t:4.1f}   {c:.4f}      {s:.4f}      {e:.4f}  {bar}")

# Dense assignment over a two-level pyramid (16 steps @0.5s, 8 @1.0s).
# Each timestep matches the shortest covering segment whose boundary
# offsets suit that level's regression range.
segments = [seg, Segment(start=3.0, end=3.8, verb=0, noun=2)]
targets = assign_positives(segments, [(16, 0.5), (8, 1.0)])
for li, lv in enumerate(targets.levels):
    marks = "".join("." if m < 0 else str(m) for m in lv.matched)
    print(f"\nlevel {li} (stride {lv.stride}s): matched -> {marks}")
print(f"positives: {targets.num_positives} of {targets.total_timesteps}")

# Loss terms: each punishes a different failure mode. Classification
# scores are per-class probabilities (already through the sigmoid).
good = tz.Tensor(np.array([[0.98, 0.02], [0.02, 0.98]]))
bad = tz.Tensor(np.array([[0.02, 0.98], [0.98, 0.02]]))
onehot = np.eye(2)
print(f"\nfocal loss, confident & right: {focal_binary(good, onehot).item():.5f}")
print(f"focal loss, confident & wrong: {focal_binary(bad, onehot).item():.5f}")

pred = tz.Tensor(np.array([[2.0, 2.0]]))
print(f"overlap loss, exact offsets:   "
      f"{iou_regression_loss(pred, np.array([[2.0, 2.0]])).item():.5f}")
print(f"overlap loss, half-length:     "
      f"{iou_regression_loss(pred, np.array([[2.0, 6.0]])).item():.5f}")

cent = tz.Tensor(np.array([[0.9], [0.1]]))
print(f"soft-label mse:                "
      f"{soft_label_mse(cent, np.array([[1.0], [0.0]])).item():.5f}")

# The composite objective is a weighted sum; the weights come straight
# from the run configuration.
parts = dict(reg_loss=iou_regression_loss(pred, np.array([[2.0, 6.0]])),
             cls_loss=focal_binary(bad, onehot),
             boundary_loss=soft_label_mse(cent, np.array([[1.0], [0.0]])),
             centricity_loss=soft_label_mse(cent, np.array([[0.8], [0.3]])))
total = total_loss(**parts, lambda_cls=1.0, lambda_boundary=0.5,
                   lambda_centricity=1.7)
print(f"\nweighted total: {total.item():.5f}")
