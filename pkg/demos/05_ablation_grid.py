"""Sweep an ablation grid and read the summary table.

Four cells — audio on/off crossed with the centricity head on/off — each
trained and evaluated exactly as a standalone run would be, in two
worker processes.
"""

import tempfile
from pathlib import Path

from avtad.cli import main
from avtad.synthdata import SynthConfig, generate_dataset, write_dataset

root = Path(tempfile.mkdtemp(prefix="avtad_ablate_"))
videos = generate_dataset(SynthConfig(n_videos=6, duration_seconds=24.0,
                                      density_per_minute=8.0, seed=5))
write_dataset(videos[:5], root / "train_data")
write_dataset(videos[5:], root / "eval_data")

tiny = []
for kv in ("model.d=12", "model.hidden=12", "model.head_layers=1",
           "model.levels=5", "model.max_input_t=96",
           "optimizer.iterations=60", "optimizer.batch=2"):
    tiny += ["--set", kv]

rc = main(["ablate", "--dataset", str(root / "train_data"),
           "--eval-dataset", str(root / "eval_data"),
           "--grid", "audio=on,off;centricity=on,off",
           "--workers", "2", "--seed", "1",
           "--out", str(root / "grid"), *tiny])
print(f"ablate exit code {rc}\n")

print("ablation_summary.csv (action rows):")
for line in (root / "grid" / "ablation_summary.csv").read_text().splitlines():
    if line.endswith("action") or "action" in line.split(","):
        print("  " + line)

print("\nper-cell artifacts:")
for cell in sorted(p for p in (root / "grid" / "cells").iterdir()):
    names = sorted(x.name for x in cell.iterdir())
    print(f"  {cell.name}: {names}")
