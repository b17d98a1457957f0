"""A quick tour of the float64 autodiff core.

Build a tiny computation, run the backward pass, and cross-check one
gradient against central finite differences.
"""

import numpy as np

from avtad import tensor as tz
from avtad.gradcheck import finite_diff_check

# forward: y = mean(relu(x @ w + b))
rng = np.random.default_rng(0)
x = tz.Tensor(rng.normal(size=(5, 3)), requires_grad=True)
w = tz.Tensor(rng.normal(size=(3, 4)), requires_grad=True)
b = tz.Tensor(np.zeros(4), requires_grad=True)

y = tz.relu(tz.add(tz.matmul(x, w), b)).mean()
print(f"forward value: {y.item():.6f}")

tz.backward(y)
print(f"dy/dw row 0:  {np.round(w.grad[0], 4)}")
print(f"dy/db:        {np.round(b.grad, 4)}")

# the same graph, checked against finite differences
err = finite_diff_check(
    lambda: tz.relu(tz.add(tz.matmul(x, w), b)).mean(), [x, w, b])
print(f"max relative gradient error vs finite differences: {err:.2e}")

# gradients accumulate across backward calls on leaves
w.grad = None
loss_a = tz.matmul(x, w).sum()
loss_b = tz.matmul(x, w).sum()
tz.backward(loss_a)
once = w.grad.copy()
tz.backward(loss_b)
print(f"second backward doubled the leaf grad: "
      f"{np.allclose(w.grad, 2 * once)}")

# no_grad suspends taping entirely
with tz.no_grad():
    silent = tz.matmul(x, w).sum()
print(f"under no_grad the result has no parents: "
      f"{silent._parents == ()}")
