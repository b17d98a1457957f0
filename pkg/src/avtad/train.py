"""Training loop and checkpoint serialization.

Plain SGD over per-video losses: gradients accumulate across the videos
of a mini-batch (each scaled by 1/B), the global gradient norm is
clipped, and one step is taken per iteration. Everything — batch order,
parameter init, log lines, checkpoint bytes — is a pure function of the
config, so repeated runs are bit-identical.

Checkpoints are a small self-describing binary format: a magic tag, a
length-prefixed JSON header (version, full config text and hash, the
parameter manifest), then the raw little-endian float64 arrays in
sorted-name order. Writing the same trained model twice yields the same
bytes, which file-hash comparisons in reproducibility checks rely on.
"""

import json
import math
import struct

import numpy as np
from numpy.random import SeedSequence, default_rng

from . import tensor as tz
from .config import canonical_text, config_from_mapping, config_hash, \
    parse_config_text
from .errors import (ConfigurationError, ContractError, DataFormatError,
                     NumericError)
from .model import Detector
from .params import ParamStore

CKPT_MAGIC = b"AVCK1\n"

LOG_FIELDS = ("total", "regression", "classification", "boundary",
              "centricity")


def global_grad_norm(store):
    """L2 norm over all parameter gradients (missing grads count as 0)."""
    total = 0.0
    for t in store.tensors():
        if t.grad is not None:
            total += float(np.sum(t.grad * t.grad))
    return math.sqrt(total)


def clip_gradients(store, max_norm):
    """Scale all gradients down to `max_norm` if they exceed it."""
    norm = global_grad_norm(store)
    if max_norm > 0.0 and norm > max_norm:
        scale = max_norm / norm
        for t in store.tensors():
            if t.grad is not None:
                t.grad *= scale
    return norm


def sgd_step(store, lr):
    for t in store.tensors():
        if t.grad is not None:
            t.data = t.data - lr * t.grad


class _BatchSchedule:
    """Deterministic shuffled epochs, replenished as consumed."""

    def __init__(self, n_videos, seed):
        self._n = n_videos
        self._rng = default_rng(SeedSequence([seed, 271828]))
        self._queue = []

    def take(self, k):
        while len(self._queue) < k:
            self._queue.extend(int(i) for i in self._rng.permutation(self._n))
        out, self._queue = self._queue[:k], self._queue[k:]
        return out


def train(cfg, videos, log_fn=None):
    """Train a fresh detector on `videos`; returns (model, store, log lines).

    Raises NumericError naming the failing iteration if any loss
    component goes non-finite.
    """
    if not videos:
        raise DataFormatError("training requires at least one video")
    store = ParamStore(cfg.seed)
    model = Detector(cfg, store)
    batch_size = max(1, min(cfg.optimizer_batch, len(videos)))
    schedule = _BatchSchedule(len(videos), cfg.seed)
    lines = []
    for it in range(cfg.optimizer_iterations):
        store.zero_grads()
        sums = dict.fromkeys(LOG_FIELDS, 0.0)
        for idx in schedule.take(batch_size):
            try:
                total, comps = model.loss_components(videos[idx])
            except NumericError as e:
                raise NumericError(f"iteration {it}: {e}") from e
            tz.backward(total * (1.0 / batch_size))
            for key in LOG_FIELDS:
                sums[key] += comps[key] / batch_size
        norm = clip_gradients(store, cfg.optimizer_clip)
        sgd_step(store, cfg.optimizer_lr)
        line = (f"iter {it:04d} "
                + " ".join(f"{k} {sums[k]:.6f}" for k in LOG_FIELDS)
                + f" gnorm {norm:.6f}")
        lines.append(line)
        if log_fn is not None:
            log_fn(line)
    return model, store, lines


# -- checkpoints ---------------------------------------------------------


def save_checkpoint(path, cfg, store):
    """Write config + parameters as deterministic bytes."""
    from . import __version__
    manifest = [{"name": name, "shape": list(t.data.shape)}
                for name, t in store.items()]
    header = {
        "version": __version__,
        "config": canonical_text(cfg),
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "params": manifest,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, t in store.items():
            fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())


def load_checkpoint(path, overrides=None):
    """Rebuild (cfg, store, model) from checkpoint bytes.

    `overrides` is an optional key -> value string mapping layered onto
    the stored config; changing keys that alter parameter shapes fails
    when the stored arrays no longer fit the rebuilt model.
    """
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as e:
        raise DataFormatError(f"cannot read checkpoint {path}: {e}") from e
    if len(raw) < len(CKPT_MAGIC) + 4 or not raw.startswith(CKPT_MAGIC):
        raise DataFormatError(f"{path}: not a checkpoint file")
    off = len(CKPT_MAGIC)
    (hlen,) = struct.unpack_from("<I", raw, off)
    off += 4
    if off + hlen > len(raw):
        raise DataFormatError(f"{path}: truncated checkpoint header")
    try:
        header = json.loads(raw[off:off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataFormatError(f"{path}: bad checkpoint header: {e}") from e
    off += hlen
    mapping = parse_config_text(header["config"], source=f"{path}#config")
    mapping.update(overrides or {})
    cfg = config_from_mapping(mapping, source=f"{path}#config")
    state = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * 8
        if off + nbytes > len(raw):
            raise DataFormatError(
                f"{path}: truncated parameter data for {entry['name']!r} "
                f"(need {nbytes} bytes at offset {off}, have {len(raw) - off})")
        arr = np.frombuffer(raw[off:off + nbytes], dtype="<f8").reshape(shape)
        state[entry["name"]] = arr.astype(np.float64)
        off += nbytes
    if off != len(raw):
        raise DataFormatError(
            f"{path}: {len(raw) - off} unexpected trailing bytes")
    store = ParamStore(cfg.seed)
    model = Detector(cfg, store)
    try:
        store.load_state_dict(state)
    except ContractError as e:
        # stored arrays no longer fit the (possibly overridden) config
        raise ConfigurationError(
            f"checkpoint incompatible with config: {e}") from e
    return cfg, store, model
