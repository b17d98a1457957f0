"""Per-timestep prediction heads applied to every pyramid level.

All heads share a recipe — a stack of conv/layer-norm/ReLU layers feeding a
pointwise output — and share their weights across levels, so a feature map
gets the same treatment wherever it sits in the pyramid.
"""

from dataclasses import dataclass

from . import tensor as tz
from .errors import ConfigurationError, ContractError

# sigmoid(-2) ~ 0.12: start classification scores low so the focal loss is
# not swamped by the all-negative background early in training
CLS_BIAS_INIT = -2.0


@dataclass
class HeadConfig:
    c_verb: int
    c_noun: int
    hidden_channels: int = 32
    kernel_width: int = 3
    layers_per_head: int = 3

    def __post_init__(self):
        if self.c_verb < 1 or self.c_noun < 1:
            raise ConfigurationError(
                f"class counts must be >= 1, got verb={self.c_verb}, noun={self.c_noun}")
        if self.layers_per_head < 1:
            raise ConfigurationError(
                f"layers_per_head must be >= 1, got {self.layers_per_head}")
        if self.hidden_channels < 1:
            raise ConfigurationError(
                f"hidden_channels must be >= 1, got {self.hidden_channels}")
        if self.kernel_width % 2 == 0 or self.kernel_width < 1:
            raise ConfigurationError(
                f"kernel_width must be odd and positive, got {self.kernel_width}")


class ConvTrunk:
    """conv1d -> layer_norm -> ReLU, stacked; the common head backbone."""

    def __init__(self, store, prefix, d_in, cfg):
        self.layers = []
        k, h = cfg.kernel_width, cfg.hidden_channels
        c_in = d_in
        for i in range(cfg.layers_per_head):
            base = f"{prefix}.conv{i}"
            self.layers.append({
                "w": store.uniform(f"{base}.w", (k, c_in, h), fan_in=k * c_in),
                "gain": store.ones(f"{base}.ln.gain", (h,)),
                "bias": store.zeros(f"{base}.ln.bias", (h,)),
            })
            c_in = h

    def __call__(self, x):
        for layer in self.layers:
            x = tz.relu(tz.layer_norm(tz.conv1d(x, layer["w"]), layer["gain"],
                                      layer["bias"]))
        return x


class OutputBranch:
    """Pointwise linear map from trunk features to raw per-class values."""

    def __init__(self, store, prefix, hidden, c_out, bias_init=0.0):
        self.w = store.uniform(f"{prefix}.w", (hidden, c_out), fan_in=hidden)
        self.b = store.constant(f"{prefix}.b", (c_out,), bias_init)

    def __call__(self, h):
        return tz.add(tz.matmul(h, self.w), self.b)


class ClassificationHead:
    """Shared trunk, two independent sigmoid branches (verb and noun)."""

    def __init__(self, store, prefix, d_in, cfg):
        self.trunk = ConvTrunk(store, prefix, d_in, cfg)
        h = cfg.hidden_channels
        self.verb = OutputBranch(store, f"{prefix}.verb", h, cfg.c_verb, CLS_BIAS_INIT)
        self.noun = OutputBranch(store, f"{prefix}.noun", h, cfg.c_noun, CLS_BIAS_INIT)

    def forward_level(self, x):
        h = self.trunk(x)
        return tz.sigmoid(self.verb(h)), tz.sigmoid(self.noun(h))

    def forward(self, pyramid):
        """Per level: ([T_l, C_verb], [T_l, C_noun]) score maps."""
        return [self.forward_level(lv) for lv in pyramid.levels]


class RegressionHead:
    """Two softplus outputs per timestep: distances to start and end, in
    level-stride units."""

    def __init__(self, store, prefix, d_in, cfg):
        self.trunk = ConvTrunk(store, prefix, d_in, cfg)
        self.out = OutputBranch(store, f"{prefix}.out", cfg.hidden_channels, 2)

    def forward_level(self, x):
        return tz.softplus(self.out(self.trunk(x)))

    def forward(self, pyramid):
        return [self.forward_level(lv) for lv in pyramid.levels]


class ScalarHead:
    """Trunk + n sigmoid outputs; covers centricity (1) and boundary
    confidence (2) heads."""

    enabled = True

    def __init__(self, store, prefix, d_in, cfg, n_out):
        self.trunk = ConvTrunk(store, prefix, d_in, cfg)
        self.out = OutputBranch(store, f"{prefix}.out", cfg.hidden_channels, n_out)

    def forward_level(self, x):
        return tz.sigmoid(self.out(self.trunk(x)))

    def forward(self, pyramid):
        return [self.forward_level(lv) for lv in pyramid.levels]


class DisabledHead:
    """Stand-in for a head the run configuration leaves out.

    Holding a stand-in (rather than nothing) turns accidental queries
    into a loud contract violation instead of an attribute error."""

    enabled = False

    def __init__(self, kind):
        self.kind = kind

    def forward_level(self, x):
        raise ContractError(f"{self.kind} head is disabled in this run")

    def forward(self, pyramid):
        raise ContractError(f"{self.kind} head is disabled in this run")


def centricity_head(store, prefix, d_in, cfg):
    return ScalarHead(store, prefix, d_in, cfg, n_out=1)


def boundary_confidence_head(store, prefix, d_in, cfg):
    return ScalarHead(store, prefix, d_in, cfg, n_out=2)
