"""Drive the command-line pipeline: dataset on disk -> train -> eval ->
diagnose, then peek at every artifact it wrote.

The CLI is the same code path the shell entry point uses; calling
`main(argv)` in-process just makes the demo self-contained.
"""

import json
import tempfile
from pathlib import Path

from avtad.cli import main
from avtad.synthdata import SynthConfig, generate_dataset, write_dataset

root = Path(tempfile.mkdtemp(prefix="avtad_demo_"))
data_cfg = SynthConfig(n_videos=6, duration_seconds=24.0,
                       density_per_minute=8.0, seed=5)
videos = generate_dataset(data_cfg)
write_dataset(videos[:5], root / "train_data")
write_dataset(videos[5:], root / "eval_data")
print(f"wrote {len(videos)} videos under {root}")

# a small model profile, overridden on the command line
tiny = []
for kv in ("model.d=12", "model.hidden=12", "model.head_layers=1",
           "model.levels=5", "model.max_input_t=96",
           "optimizer.iterations=60", "optimizer.batch=2"):
    tiny += ["--set", kv]

rc = main(["train", "--dataset", str(root / "train_data"),
           "--out", str(root / "run"), "--seed", "1", *tiny])
print(f"\ntrain exit code {rc}; artifacts:",
      sorted(p.name for p in (root / "run").iterdir()))

rc = main(["eval", "--dataset", str(root / "eval_data"),
           "--checkpoint", str(root / "run" / "checkpoint.bin"),
           "--out", str(root / "evaluation")])
print(f"\neval exit code {rc}")
table = (root / "evaluation" / "map_table.csv").read_text().splitlines()
print("map_table.csv:")
for line in table[:3] + ["..."] + table[-3:]:
    print("  " + line)

rc = main(["diagnose", "--dataset", str(root / "eval_data"),
           "--checkpoint", str(root / "run" / "checkpoint.bin"),
           "--out", str(root / "diagnosis")])
print(f"\ndiagnose exit code {rc}")
rel = (root / "diagnosis" / "centre_distance_relative.csv").read_text()
print("centre_distance_relative.csv, first rows:")
for line in rel.splitlines()[:5]:
    print("  " + line)

manifest = json.loads((root / "evaluation" / "manifest.json").read_text())
print("\neval manifest:", json.dumps(manifest, indent=2))

# mistakes in the configuration come back as exit code 2, bad data as 3
rc = main(["train", "--dataset", str(root / "train_data"),
           "--out", str(root / "bad"), "--set", "model.d=not_a_number"])
print(f"\nbad override exit code: {rc}")
