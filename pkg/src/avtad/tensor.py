"""Dense float64 tensors with tape-based reverse-mode gradients.

Everything is numpy under the hood; each operation records a backward
closure so that `backward(loss)` can accumulate d(loss)/d(param) into the
`.grad` buffer of every tracked tensor. Scalars are 0-d arrays.
"""

import numpy as np

from .errors import ConfigurationError, ContractError, ShapeMismatchError

_GRAD_ENABLED = True


class no_grad:
    """Context manager disabling tape recording (inference mode)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._saved = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._saved
        return False


class Tensor:
    """A dense float64 array plus an optional same-shape gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        """Copy of the underlying values."""
        return self.data.copy()

    def item(self):
        if self.data.size != 1:
            raise ContractError(f"item() needs a scalar tensor, got shape {self.data.shape}")
        return float(self.data.reshape(()))

    def ensure_grad(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        return self.grad

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)

    def transpose(self):
        if self.data.ndim != 2:
            raise ContractError(f"transpose expects a 2-d tensor, got shape {self.shape}")
        out = _result(self.data.T.copy(), (self,))
        if out.requires_grad:
            def bwd(g):
                _accum(self, g.T)
            out._backward = bwd
        return out

    def sum(self):
        out = _result(np.asarray(self.data.sum()), (self,))
        if out.requires_grad:
            def bwd(g):
                _accum(self, np.broadcast_to(g, self.data.shape))
            out._backward = bwd
        return out

    def mean(self):
        n = self.data.size
        out = _result(np.asarray(self.data.mean()), (self,))
        if out.requires_grad:
            def bwd(g):
                _accum(self, np.broadcast_to(g / n, self.data.shape))
            out._backward = bwd
        return out

    # -- operators -------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -float(other))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __neg__(self):
        return mul(self, -1.0)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return div(self, other)
        return mul(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, k):
        return pow_const(self, k)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _result(data, parents):
    req = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=req)
    if req:
        out._parents = tuple(parents)
    return out


def _accum(t, g):
    if t.requires_grad:
        t.ensure_grad()
        t.grad += g


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


# -- arithmetic ----------------------------------------------------------


def add(a, b):
    """Elementwise sum; also supports tensor + scalar and [T,C] + [C] bias."""
    a = _as_tensor(a)
    if not isinstance(b, Tensor):
        c = float(b)
        out = _result(a.data + c, (a,))
        if out.requires_grad:
            def bwd(g):
                _accum(a, g)
            out._backward = bwd
        return out
    if a.shape == b.shape:
        out = _result(a.data + b.data, (a, b))
        if out.requires_grad:
            def bwd(g):
                _accum(a, g)
                _accum(b, g)
            out._backward = bwd
        return out
    # row-broadcast bias: (T, C) + (C,)
    if a.data.ndim == 2 and b.data.ndim == 1 and a.shape[1] == b.shape[0]:
        out = _result(a.data + b.data[None, :], (a, b))
        if out.requires_grad:
            def bwd(g):
                _accum(a, g)
                _accum(b, g.sum(axis=0))
            out._backward = bwd
        return out
    raise ShapeMismatchError(f"add: incompatible shapes {a.shape} and {b.shape}")


def mul(a, b):
    """Elementwise product, or tensor * scalar."""
    a = _as_tensor(a)
    if not isinstance(b, Tensor):
        c = float(b)
        out = _result(a.data * c, (a,))
        if out.requires_grad:
            def bwd(g):
                _accum(a, g * c)
            out._backward = bwd
        return out
    if a.shape != b.shape:
        raise ShapeMismatchError(f"mul: incompatible shapes {a.shape} and {b.shape}")
    out = _result(a.data * b.data, (a, b))
    if out.requires_grad:
        ad, bd = a.data, b.data
        def bwd(g):
            _accum(a, g * bd)
            _accum(b, g * ad)
        out._backward = bwd
    return out


def div(a, b):
    """Elementwise quotient of same-shape tensors."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"div: incompatible shapes {a.shape} and {b.shape}")
    out = _result(a.data / b.data, (a, b))
    if out.requires_grad:
        ad, bd = a.data, b.data
        def bwd(g):
            _accum(a, g / bd)
            _accum(b, -g * ad / (bd * bd))
        out._backward = bwd
    return out


def matmul(a, b):
    """2-d matrix product with gradients for both operands."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeMismatchError(f"matmul expects 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(f"matmul: inner dimensions disagree, {a.shape} vs {b.shape}")
    out = _result(a.data @ b.data, (a, b))
    if out.requires_grad:
        ad, bd = a.data, b.data
        def bwd(g):
            _accum(a, g @ bd.T)
            _accum(b, ad.T @ g)
        out._backward = bwd
    return out


def minimum(a, b):
    """Elementwise min; ties route the gradient to the first operand."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"minimum: incompatible shapes {a.shape} and {b.shape}")
    take_a = a.data <= b.data
    out = _result(np.where(take_a, a.data, b.data), (a, b))
    if out.requires_grad:
        def bwd(g):
            _accum(a, g * take_a)
            _accum(b, g * ~take_a)
        out._backward = bwd
    return out


def maximum(a, b):
    """Elementwise max; ties route the gradient to the first operand."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"maximum: incompatible shapes {a.shape} and {b.shape}")
    take_a = a.data >= b.data
    out = _result(np.where(take_a, a.data, b.data), (a, b))
    if out.requires_grad:
        def bwd(g):
            _accum(a, g * take_a)
            _accum(b, g * ~take_a)
        out._backward = bwd
    return out


def clamp(x, lo, hi):
    """Clip to [lo, hi]; gradient passes through wherever x is in range."""
    x = _as_tensor(x)
    out = _result(np.clip(x.data, lo, hi), (x,))
    if out.requires_grad:
        mask = (x.data >= lo) & (x.data <= hi)
        def bwd(g):
            _accum(x, g * mask)
        out._backward = bwd
    return out


# -- pointwise nonlinearities -------------------------------------------


def relu(x):
    x = _as_tensor(x)
    out = _result(np.maximum(x.data, 0.0), (x,))
    if out.requires_grad:
        mask = x.data > 0.0
        def bwd(g):
            _accum(x, g * mask)
        out._backward = bwd
    return out


def _sigmoid(z):
    # stable in both tails
    pos = z >= 0
    out = np.empty_like(z)
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid(x):
    x = _as_tensor(x)
    s = _sigmoid(x.data)
    out = _result(s, (x,))
    if out.requires_grad:
        def bwd(g):
            _accum(x, g * s * (1.0 - s))
        out._backward = bwd
    return out


def softplus(x):
    """log(1 + e^x), the positive mapping used for boundary offsets."""
    x = _as_tensor(x)
    out = _result(np.logaddexp(0.0, x.data), (x,))
    if out.requires_grad:
        s = _sigmoid(x.data)
        def bwd(g):
            _accum(x, g * s)
        out._backward = bwd
    return out


def exp(x):
    x = _as_tensor(x)
    e = np.exp(x.data)
    out = _result(e, (x,))
    if out.requires_grad:
        def bwd(g):
            _accum(x, g * e)
        out._backward = bwd
    return out


def log(x):
    """Natural log; the caller guarantees strictly positive input."""
    x = _as_tensor(x)
    out = _result(np.log(x.data), (x,))
    if out.requires_grad:
        xd = x.data
        def bwd(g):
            _accum(x, g / xd)
        out._backward = bwd
    return out


def pow_const(x, k):
    """x**k for a constant exponent; x must be positive unless k is a
    non-negative integer."""
    x = _as_tensor(x)
    k = float(k)
    out = _result(np.power(x.data, k), (x,))
    if out.requires_grad:
        xd = x.data
        def bwd(g):
            _accum(x, g * k * np.power(xd, k - 1.0))
        out._backward = bwd
    return out


# -- structured operations ----------------------------------------------


def softmax_rows(x):
    """Row-wise softmax of a 2-d tensor, stabilized by row-max subtraction."""
    x = _as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeMismatchError(f"softmax_rows expects a 2-d tensor, got shape {x.shape}")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    out = _result(y, (x,))
    if out.requires_grad:
        def bwd(g):
            dot = (g * y).sum(axis=1, keepdims=True)
            _accum(x, y * (g - dot))
        out._backward = bwd
    return out


def conv1d(x, kernel):
    """Temporal cross-correlation with same-length zero padding.

    x: [T, C_in], kernel: [k, C_in, C_out] with odd k. Output [T, C_out].
    """
    x, kernel = _as_tensor(x), _as_tensor(kernel)
    if x.data.ndim != 2 or kernel.data.ndim != 3:
        raise ShapeMismatchError(
            f"conv1d expects x [T,C_in] and kernel [k,C_in,C_out], got {x.shape} and {kernel.shape}")
    k, c_in, c_out = kernel.shape
    if k % 2 == 0:
        raise ConfigurationError(f"conv1d kernel width must be odd, got {k}")
    if x.shape[1] != c_in:
        raise ShapeMismatchError(f"conv1d: input has {x.shape[1]} channels, kernel expects {c_in}")
    t = x.shape[0]
    pad = k // 2
    xp = np.zeros((t + 2 * pad, c_in))
    xp[pad:pad + t] = x.data
    y = np.zeros((t, c_out))
    for j in range(k):
        y += xp[j:j + t] @ kernel.data[j]
    out = _result(y, (x, kernel))
    if out.requires_grad:
        kd = kernel.data
        def bwd(g):
            if x.requires_grad:
                dxp = np.zeros_like(xp)
                for j in range(k):
                    dxp[j:j + t] += g @ kd[j].T
                _accum(x, dxp[pad:pad + t])
            if kernel.requires_grad:
                dk = np.empty_like(kd)
                for j in range(k):
                    dk[j] = xp[j:j + t].T @ g
                _accum(kernel, dk)
        out._backward = bwd
    return out


def layer_norm(x, gain, bias, eps=1e-5):
    """Per-row normalization of [T, C] to zero mean / unit variance, then
    an affine map by gain and bias (both [C])."""
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    if x.data.ndim != 2:
        raise ShapeMismatchError(f"layer_norm expects a 2-d tensor, got shape {x.shape}")
    c = x.shape[1]
    if gain.shape != (c,) or bias.shape != (c,):
        raise ShapeMismatchError(
            f"layer_norm: gain/bias must have shape ({c},), got {gain.shape} and {bias.shape}")
    if eps <= 0:
        raise ContractError("layer_norm eps must be positive")
    mu = x.data.mean(axis=1, keepdims=True)
    var = x.data.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = _result(xhat * gain.data[None, :], (x, gain, bias))
    out.data += bias.data[None, :]
    if out.requires_grad:
        gd = gain.data
        def bwd(g):
            if gain.requires_grad:
                _accum(gain, (g * xhat).sum(axis=0))
            if bias.requires_grad:
                _accum(bias, g.sum(axis=0))
            if x.requires_grad:
                dxhat = g * gd[None, :]
                m1 = dxhat.mean(axis=1, keepdims=True)
                m2 = (dxhat * xhat).mean(axis=1, keepdims=True)
                _accum(x, inv * (dxhat - m1 - xhat * m2))
        out._backward = bwd
    return out


def max_pool_halve(x):
    """Stride-2 max pool over time of [T, C]; odd T keeps a last singleton
    window. Ties route the gradient to the earlier timestep."""
    x = _as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeMismatchError(f"max_pool_halve expects a 2-d tensor, got shape {x.shape}")
    t, c = x.shape
    t_out = (t + 1) // 2
    even = x.data[0:2 * (t // 2):2]
    odd = x.data[1:2 * (t // 2):2]
    take_even = even >= odd
    y = np.empty((t_out, c))
    y[:t // 2] = np.where(take_even, even, odd)
    if t % 2 == 1:
        y[-1] = x.data[-1]
    out = _result(y, (x,))
    if out.requires_grad:
        def bwd(g):
            dx = np.zeros_like(x.data)
            dx[0:2 * (t // 2):2] = g[:t // 2] * take_even
            dx[1:2 * (t // 2):2] = g[:t // 2] * ~take_even
            if t % 2 == 1:
                dx[-1] += g[-1]
            _accum(x, dx)
        out._backward = bwd
    return out


def concat_cols(a, b):
    """Concatenate two [T, *] tensors along the channel axis."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ShapeMismatchError(f"concat_cols: incompatible shapes {a.shape} and {b.shape}")
    ca = a.shape[1]
    out = _result(np.concatenate([a.data, b.data], axis=1), (a, b))
    if out.requires_grad:
        def bwd(g):
            _accum(a, g[:, :ca])
            _accum(b, g[:, ca:])
        out._backward = bwd
    return out


def concat_rows(parts):
    """Stack a list of tensors along axis 0; all must share trailing shape."""
    parts = [_as_tensor(p) for p in parts]
    if not parts:
        raise ContractError("concat_rows needs at least one tensor")
    tail = parts[0].data.shape[1:]
    if any(p.data.shape[1:] != tail for p in parts):
        raise ShapeMismatchError(
            f"concat_rows: trailing shapes differ: {[p.shape for p in parts]}")
    out = _result(np.concatenate([p.data for p in parts], axis=0), parts)
    if out.requires_grad:
        sizes = [p.data.shape[0] for p in parts]
        def bwd(g):
            offset = 0
            for p, n in zip(parts, sizes):
                _accum(p, g[offset:offset + n])
                offset += n
        out._backward = bwd
    return out


def take_rows(x, idx):
    """Gather rows of a 2-d tensor; duplicate indices accumulate gradient."""
    x = _as_tensor(x)
    idx = np.asarray(idx, dtype=np.intp)
    out = _result(x.data[idx], (x,))
    if out.requires_grad:
        def bwd(g):
            dx = np.zeros_like(x.data)
            np.add.at(dx, idx, g)
            _accum(x, dx)
        out._backward = bwd
    return out


def sum_cols(x):
    """Row sums of a 2-d tensor, shape [T, C] -> [T]."""
    x = _as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeMismatchError(f"sum_cols expects a 2-d tensor, got shape {x.shape}")
    out = _result(x.data.sum(axis=1), (x,))
    if out.requires_grad:
        c = x.shape[1]
        def bwd(g):
            _accum(x, np.repeat(g[:, None], c, axis=1))
        out._backward = bwd
    return out


# -- reverse pass --------------------------------------------------------


def backward(loss):
    """Accumulate d(loss)/d(t) into .grad of every tracked tensor reachable
    from the scalar loss. Repeated calls accumulate additively."""
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    topo = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    # interior nodes get fresh buffers each pass; leaves keep accumulating
    for node in topo:
        if node._parents:
            node.grad = np.zeros_like(node.data)
    loss.ensure_grad()
    loss.grad += 1.0
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)
