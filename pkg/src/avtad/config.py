"""Run configuration: flat dotted-key text documents -> typed settings.

A config file is lines of `section.key = value` with `#` comments. Every
key has a default; unknown keys are rejected rather than ignored so typos
fail fast. `baseline_mode` rewrites the boundary-confidence weights before
anything trains (only the `rab_like` mode keeps them).
"""

import hashlib
from dataclasses import dataclass, fields

from .errors import ConfigurationError

BASELINE_MODES = ("rab_like", "actionformer_like", "tridet_like")
MODALITIES = ("av", "visual", "audio")


def _to_bool(s):
    low = s.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _to_floats(s):
    return tuple(float(x) for x in s.split(",") if x.strip())


@dataclass
class RunConfig:
    # data
    data_visual_dim: int = 20
    data_audio_dim: int = 16
    # model
    model_modality: str = "av"
    model_d: int = 24
    model_levels: int = 6
    model_blocks: int = 1
    model_max_input_t: int = 256
    model_hidden: int = 24
    model_kernel: int = 3
    model_head_layers: int = 3
    model_c_verb: int = 6
    model_c_noun: int = 8
    # fusion
    fusion_strategy: str = "feature_fusion_xattn"
    fusion_residual: bool = True
    # switches
    centricity_enabled: bool = True
    baseline_mode: str = "rab_like"
    # losses
    loss_sigma: float = 1.7
    loss_lambda1: float = 1.0
    loss_lambda2: float = 0.5
    loss_lambda3: float = 1.7
    loss_focal_alpha: float = 0.25
    loss_focal_gamma: float = 2.0
    # confidence weights
    confidence_tau: float = 0.2
    confidence_beta: float = 1.0
    confidence_gamma: float = 0.7
    # postprocess
    post_k_verb: int = 11
    post_k_noun: int = 33
    post_sigma_nms: float = 0.5
    post_score_floor: float = 1e-4
    post_max_out: int = 200
    post_pre_nms_topk: int = 2000
    # optimizer
    optimizer_lr: float = 0.2
    optimizer_iterations: int = 120
    optimizer_batch: int = 4
    optimizer_clip: float = 5.0
    # evaluation
    eval_thresholds: tuple = (0.1, 0.2, 0.3, 0.4, 0.5)
    # seeding
    seed: int = 0

    def __post_init__(self):
        if self.baseline_mode not in BASELINE_MODES:
            raise ConfigurationError(
                f"baseline_mode must be one of {BASELINE_MODES}, "
                f"got {self.baseline_mode!r}")
        if self.model_modality not in MODALITIES:
            raise ConfigurationError(
                f"model.modality must be one of {MODALITIES}, "
                f"got {self.model_modality!r}")
        from .fusion import STRATEGIES
        if self.fusion_strategy not in STRATEGIES:
            raise ConfigurationError(
                f"fusion.strategy must be one of {STRATEGIES}, "
                f"got {self.fusion_strategy!r}")
        for name in ("loss_sigma", "loss_lambda1", "loss_lambda2", "loss_lambda3",
                     "confidence_tau", "confidence_beta", "confidence_gamma",
                     "optimizer_lr", "optimizer_clip"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative")
        if self.loss_sigma == 0:
            raise ConfigurationError("loss.sigma must be positive")
        t = self.eval_thresholds
        if not t or not all(0 < a <= 1 for a in t) or list(t) != sorted(set(t)):
            raise ConfigurationError(
                f"eval.thresholds must be strictly increasing in (0,1]: {t}")

    # -- derived switches ------------------------------------------------

    @property
    def boundary_enabled(self):
        """Boundary-confidence head exists only in the rab_like mode."""
        return self.baseline_mode == "rab_like"

    @property
    def audio_used(self):
        return self.model_modality == "av"

    @property
    def effective_lambda2(self):
        return self.loss_lambda2 if self.boundary_enabled else 0.0

    @property
    def effective_lambda3(self):
        return self.loss_lambda3 if self.centricity_enabled else 0.0

    @property
    def effective_gamma(self):
        return self.confidence_gamma if self.boundary_enabled else 0.0

    @property
    def effective_beta(self):
        return self.confidence_beta if self.centricity_enabled else 0.0

    @property
    def effective_tau(self):
        # the audio term of the confidence sum needs a dedicated audio
        # classification head; score-fusion folds audio into p_v instead
        if not self.audio_used or self.fusion_strategy.startswith("score_fusion"):
            return 0.0
        if self.fusion_strategy == "proposal_fusion":
            return 0.0
        return self.confidence_tau


_FLAT_KEYS = ("baseline_mode", "seed")

_KEY_TABLE = {}
for f in fields(RunConfig):
    if f.name in _FLAT_KEYS:
        key = f.name
    else:
        key = f.name.replace("_", ".", 1)
    _KEY_TABLE[key] = f.name

_CONVERTERS = {
    int: int,
    float: float,
    str: str,
    bool: _to_bool,
    tuple: _to_floats,
}


def parse_config_text(text, source="<config>"):
    """Parse `key = value` lines into a string-to-string mapping."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(
                f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigurationError(
                f"{source}:{lineno}: empty key or value in {raw!r}")
        if key in out:
            raise ConfigurationError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def config_from_mapping(mapping, source="<config>"):
    """Typed RunConfig from a dotted-key string mapping."""
    kwargs = {}
    for key, value in mapping.items():
        attr = _KEY_TABLE.get(key)
        if attr is None:
            raise ConfigurationError(f"{source}: unknown config key {key!r}")
        ftype = RunConfig.__dataclass_fields__[attr].type
        if isinstance(ftype, str):
            ftype = {"int": int, "float": float, "str": str, "bool": bool,
                     "tuple": tuple}[ftype]
        try:
            kwargs[attr] = _CONVERTERS[ftype](value)
        except ValueError as e:
            raise ConfigurationError(
                f"{source}: bad value for {key!r}: {e}") from e
    return RunConfig(**kwargs)


def load_config(path=None, overrides=None):
    """Read a config file (optional) and apply `key=value` overrides."""
    mapping = {}
    source = "<defaults>"
    if path is not None:
        source = str(path)
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as e:
            raise ConfigurationError(f"cannot read config {path}: {e}") from e
        mapping = parse_config_text(text, source=source)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigurationError(
                f"override must look like key=value, got {item!r}")
        key, value = (part.strip() for part in item.split("=", 1))
        mapping[key] = value
    return config_from_mapping(mapping, source=source)


def canonical_text(cfg):
    """Sorted key=value serialization covering every setting."""
    lines = []
    for key in sorted(_KEY_TABLE):
        val = getattr(cfg, _KEY_TABLE[key])
        if isinstance(val, tuple):
            val = ",".join(repr(v) for v in val)
        elif isinstance(val, bool):
            val = "true" if val else "false"
        elif isinstance(val, float):
            val = repr(val)
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


def config_hash(cfg):
    return hashlib.sha256(canonical_text(cfg).encode("utf-8")).hexdigest()[:16]
