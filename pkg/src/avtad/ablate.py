"""Ablation grids: axis parsing, cell configs, and parallel execution.

A grid string looks like `audio=on,off;lambda3=0,1.7`: semicolon-separated
axes, comma-separated values, expanded to the Cartesian product. Each
cell trains a fresh model from the same base config (and same seed) with
only that cell's settings changed, then evaluates it — identical, by
construction, to running the train and eval commands by hand with those
settings.
"""

import itertools
from concurrent.futures import ProcessPoolExecutor

from .config import config_from_mapping, parse_config_text
from .errors import ConfigurationError

# axis name -> value -> config-key overrides
_SWITCH_AXES = {
    "audio": {"on": {"model.modality": "av"},
              "off": {"model.modality": "visual"},
              "only": {"model.modality": "audio"}},
    "centricity": {"on": {"centricity.enabled": "true"},
                   "off": {"centricity.enabled": "false"}},
}

# axis name -> config key receiving the raw value
_VALUE_AXES = {
    "fusion.strategy": "fusion.strategy",
    "lambda1": "loss.lambda1",
    "lambda3": "loss.lambda3",
    "beta": "confidence.beta",
}

GRID_AXES = tuple(sorted(_SWITCH_AXES)) + tuple(sorted(_VALUE_AXES))


def parse_grid(spec):
    """Grid string -> list of (axis, [values]); empty grids are refused."""
    axes = []
    for part in (spec or "").split(";"):
        part = part.strip()
        if not part:
            continue
        name, sep, raw = part.partition("=")
        name = name.strip()
        values = [v.strip() for v in raw.split(",") if v.strip()]
        if not sep or not values:
            raise ConfigurationError(
                f"grid axis must look like name=v1,v2,... got {part!r}")
        if name not in _SWITCH_AXES and name not in _VALUE_AXES:
            raise ConfigurationError(
                f"unknown grid axis {name!r}; choose from {GRID_AXES}")
        if name in _SWITCH_AXES:
            bad = [v for v in values if v not in _SWITCH_AXES[name]]
            if bad:
                raise ConfigurationError(
                    f"axis {name!r} does not accept {bad}; allowed: "
                    f"{sorted(_SWITCH_AXES[name])}")
        axes.append((name, values))
    if not axes:
        raise ConfigurationError("ablation grid is empty")
    seen = [a for a, _ in axes]
    if len(seen) != len(set(seen)):
        raise ConfigurationError(f"duplicate grid axes in {spec!r}")
    return axes


def _cell_name(assignment):
    parts = []
    for axis, value in assignment:
        short = axis.split(".")[-1]
        parts.append(f"{short}-{value}".replace("/", "_"))
    return "_".join(parts)


def expand_cells(axes):
    """[(cell name, {config key -> value})] in deterministic order."""
    cells = []
    for combo in itertools.product(*(vals for _, vals in axes)):
        assignment = list(zip((a for a, _ in axes), combo))
        overrides = {}
        for axis, value in assignment:
            if axis in _SWITCH_AXES:
                overrides.update(_SWITCH_AXES[axis][value])
            else:
                overrides[_VALUE_AXES[axis]] = value
        cells.append((_cell_name(assignment), overrides))
    names = [n for n, _ in cells]
    if len(names) != len(set(names)):
        raise ConfigurationError("grid produced duplicate cell names")
    return cells


def cell_config(base_mapping, overrides):
    """RunConfig for one cell: base key/value mapping + cell overrides."""
    merged = dict(base_mapping)
    merged.update(overrides)
    return config_from_mapping(merged, source="<ablation cell>")


def _run_cell_entry(payload):
    # runs inside a worker process; import here keeps pickling light
    from .cli import run_cell
    name, base_text, overrides, train_path, eval_path, out_dir, seed = payload
    base = parse_config_text(base_text, source="<ablation base>")
    if seed is not None:
        base["seed"] = str(seed)
    cfg = cell_config(base, overrides)
    return name, run_cell(cfg, train_path, eval_path, out_dir)


def run_grid(base_text, cells, train_path, eval_path, out_root, seed,
             workers=1):
    """Execute every cell; returns [(name, summary dict)] sorted by name."""
    payloads = [(name, base_text, overrides, train_path, eval_path,
                 str(out_root / "cells" / name), seed)
                for name, overrides in cells]
    if workers <= 1 or len(payloads) == 1:
        results = [_run_cell_entry(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell_entry, payloads))
    return sorted(results, key=lambda r: r[0])
