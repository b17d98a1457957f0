"""Named parameter storage with order-independent deterministic init.

Every parameter draws from its own RNG stream keyed by (seed, name hash),
so creating parameters in a different order — or skipping some — never
changes the values of the others. That property is what makes checkpoints
and ablation grids bit-reproducible.
"""

import hashlib

import numpy as np

from .errors import ContractError
from .tensor import Tensor


def _name_key(name):
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class ParamStore:
    """Registry of trainable tensors, keyed by dotted names."""

    def __init__(self, seed):
        self.seed = int(seed)
        self._params = {}

    def _rng(self, name):
        return np.random.default_rng(np.random.SeedSequence([self.seed, _name_key(name)]))

    def _register(self, name, data):
        if name in self._params:
            raise ContractError(f"parameter {name!r} already exists")
        t = Tensor(data, requires_grad=True)
        self._params[name] = t
        return t

    def uniform(self, name, shape, fan_in):
        """Weight init: uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)]."""
        if fan_in <= 0:
            raise ContractError(f"fan_in must be positive, got {fan_in}")
        bound = 1.0 / np.sqrt(float(fan_in))
        data = self._rng(name).uniform(-bound, bound, size=shape)
        return self._register(name, data)

    def zeros(self, name, shape):
        return self._register(name, np.zeros(shape))

    def ones(self, name, shape):
        return self._register(name, np.ones(shape))

    def constant(self, name, shape, value):
        return self._register(name, np.full(shape, float(value)))

    def get(self, name):
        try:
            return self._params[name]
        except KeyError:
            raise ContractError(f"unknown parameter {name!r}") from None

    def __contains__(self, name):
        return name in self._params

    def __len__(self):
        return len(self._params)

    def names(self):
        """Parameter names in sorted order (stable across runs)."""
        return sorted(self._params)

    def items(self):
        for name in self.names():
            yield name, self._params[name]

    def tensors(self):
        return [self._params[name] for name in self.names()]

    def zero_grads(self):
        for t in self._params.values():
            t.zero_grad()

    def state_dict(self):
        """name -> float64 array copy, in sorted-name order."""
        return {name: t.data.copy() for name, t in self.items()}

    def load_state_dict(self, state):
        """Overwrite parameter values in place from a name -> array map."""
        missing = sorted(set(self._params) - set(state))
        extra = sorted(set(state) - set(self._params))
        if missing or extra:
            raise ContractError(
                f"state dict mismatch: missing {missing[:3]}, unexpected {extra[:3]}")
        for name, arr in state.items():
            t = self._params[name]
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ContractError(
                    f"parameter {name!r}: stored shape {arr.shape} != model shape {t.data.shape}")
            t.data = arr.copy()
