"""Backward-pass verification: hand derivatives and finite differences."""

import numpy as np
import pytest

from avtad import tensor as tz
from avtad.errors import ContractError
from avtad.gradcheck import finite_diff_check
from avtad.params import ParamStore
from avtad.tensor import Tensor, backward

TOL = 1e-5


class TestHandDerivatives:
    def test_mul_sum(self):
        a = Tensor(np.array([2.0, 3.0]), requires_grad=True)
        b = Tensor(np.array([5.0, 7.0]), requires_grad=True)
        backward((a * b).sum())
        np.testing.assert_array_equal(a.grad, [5.0, 7.0])
        np.testing.assert_array_equal(b.grad, [2.0, 3.0])

    def test_matmul(self):
        a = Tensor(np.array([[1.0, 2.0]]), requires_grad=True)
        b = Tensor(np.array([[3.0], [4.0]]), requires_grad=True)
        backward(tz.matmul(a, b).sum())
        np.testing.assert_array_equal(a.grad, [[3.0, 4.0]])
        np.testing.assert_array_equal(b.grad, [[1.0], [2.0]])

    def test_grad_accumulates_across_uses(self):
        x = Tensor(np.array([3.0]), requires_grad=True)
        y = (x * 2.0 + x * 5.0).sum()  # d/dx = 7
        backward(y)
        np.testing.assert_array_equal(x.grad, [7.0])

    def test_grad_accumulates_across_backward_calls(self):
        x = Tensor(np.array([1.0]), requires_grad=True)
        backward((x * 3.0).sum())
        backward((x * 3.0).sum())
        np.testing.assert_array_equal(x.grad, [6.0])

    def test_diamond_graph(self):
        # y = (x + x) * x  => dy/dx = 4x
        x = Tensor(np.array([5.0]), requires_grad=True)
        backward(((x + x) * x).sum())
        np.testing.assert_array_equal(x.grad, [20.0])

    def test_sigmoid_at_zero(self):
        x = Tensor(np.array([0.0]), requires_grad=True)
        backward(tz.sigmoid(x).sum())
        np.testing.assert_allclose(x.grad, [0.25], atol=1e-15)

    def test_take_rows_duplicate_index_accumulates(self):
        x = Tensor(np.arange(6.0).reshape(3, 2), requires_grad=True)
        backward(tz.take_rows(x, [1, 1, 2]).sum())
        np.testing.assert_array_equal(x.grad, [[0, 0], [2, 2], [1, 1]])

    def test_min_max_tie_goes_to_first_operand(self):
        a = Tensor(np.array([1.0]), requires_grad=True)
        b = Tensor(np.array([1.0]), requires_grad=True)
        backward(tz.minimum(a, b).sum())
        np.testing.assert_array_equal(a.grad, [1.0])
        np.testing.assert_array_equal(b.grad, [0.0])
        a.grad, b.grad = None, None
        backward(tz.maximum(a, b).sum())
        np.testing.assert_array_equal(a.grad, [1.0])
        np.testing.assert_array_equal(b.grad, [0.0])

    def test_pool_tie_goes_to_earlier_step(self):
        x = Tensor(np.array([[2.0], [2.0]]), requires_grad=True)
        backward(tz.max_pool_halve(x).sum())
        np.testing.assert_array_equal(x.grad, [[1.0], [0.0]])

    def test_sum_gives_ones(self):
        x = Tensor(np.arange(4.0), requires_grad=True)
        backward(x.sum())
        np.testing.assert_array_equal(x.grad, np.ones(4))

    def test_elementwise_square(self):
        x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        backward((x * x).sum())
        np.testing.assert_array_equal(x.grad, [2.0, 4.0])

    def test_disconnected_parameter_untouched(self):
        x = Tensor(np.ones(2), requires_grad=True)
        other = Tensor(np.ones(2), requires_grad=True)
        backward((x * 2.0).sum())
        assert other.grad is None


def _fd_cases():
    """(name, builder) pairs; builder returns (fn, tensors) for the checker."""
    rng = np.random.default_rng(20240811)

    def leaf(shape, scale=1.0, shift=0.0):
        return Tensor(rng.normal(size=shape) * scale + shift, requires_grad=True)

    cases = []

    def case(name):
        def deco(f):
            cases.append((name, f))
            return f
        return deco

    @case("add_bias")
    def _():
        x, b = leaf((4, 3)), leaf((3,))
        return (lambda: ((x + b) * 1.7).sum()), [x, b]

    @case("mul_div")
    def _():
        a, b = leaf((3, 3)), leaf((3, 3), shift=4.0)
        return (lambda: tz.div(a * a, b).sum()), [a, b]

    @case("matmul_chain")
    def _():
        a, b, c = leaf((2, 4)), leaf((4, 3)), leaf((3, 2))
        return (lambda: tz.matmul(tz.matmul(a, b), c).mean()), [a, b, c]

    @case("relu")
    def _():
        x = leaf((5, 4), shift=0.3)  # keep coordinates away from the kink
        return (lambda: (tz.relu(x) * 2.0).sum()), [x]

    @case("sigmoid")
    def _():
        x = leaf((6,), scale=2.0)
        return (lambda: tz.sigmoid(x).sum()), [x]

    @case("softplus")
    def _():
        x = leaf((6,), scale=3.0)
        return (lambda: tz.softplus(x).mean()), [x]

    @case("exp_log")
    def _():
        x = leaf((5,), shift=3.0)
        return (lambda: tz.log(tz.exp(x) + 1.0).sum()), [x]

    @case("pow_const")
    def _():
        x = leaf((4,), shift=5.0)
        return (lambda: tz.pow_const(x, 2.5).sum()), [x]

    @case("softmax_rows")
    def _():
        x, w = leaf((3, 5)), leaf((5,))
        return (lambda: (tz.softmax_rows(x) * tz.add(Tensor(np.zeros((3, 5))), w)).sum()), [x, w]

    @case("conv1d")
    def _():
        x, k = leaf((6, 3)), leaf((3, 3, 2))
        return (lambda: tz.conv1d(x, k).sum()), [x, k]

    @case("layer_norm")
    def _():
        x, g, b = leaf((4, 6)), leaf((6,), shift=1.0), leaf((6,))
        return (lambda: (tz.layer_norm(x, g, b) * 0.5).sum()), [x, g, b]

    @case("max_pool")
    def _():
        x = leaf((7, 3))
        return (lambda: tz.max_pool_halve(x).sum()), [x]

    @case("concat_take")
    def _():
        a, b = leaf((4, 2)), leaf((4, 3))
        return (lambda: tz.take_rows(tz.concat_cols(a, b), [0, 2, 2]).sum()), [a, b]

    @case("concat_rows")
    def _():
        a, b = leaf((2, 3)), leaf((3, 3))
        return (lambda: (tz.concat_rows([a, b]) * 2.0).mean()), [a, b]

    @case("attention_block")
    def _():
        q, k, v = leaf((3, 4)), leaf((3, 4)), leaf((3, 4))
        def fn():
            scores = tz.matmul(q, k.transpose()) * (1.0 / 2.0)
            return tz.matmul(tz.softmax_rows(scores), v).sum()
        return fn, [q, k, v]

    @case("clamp_minmax")
    def _():
        a, b = leaf((5,)), leaf((5,), shift=0.01)
        return (lambda: (tz.clamp(tz.minimum(a, b), -0.8, 0.8) * 3.0).sum()), [a, b]

    @case("sum_cols_mean")
    def _():
        x = leaf((4, 3))
        return (lambda: tz.sum_cols(x * x).mean()), [x]

    return cases


@pytest.mark.parametrize("name,builder", _fd_cases(), ids=[n for n, _ in _fd_cases()])
def test_finite_difference(name, builder):
    fn, tensors = builder()
    assert finite_diff_check(fn, tensors) < TOL


class TestCheckerContract:
    def test_quadratic_is_near_exact(self):
        # central differences make no O(h^2) error on quadratics
        x = Tensor(np.array([1.5, -2.0, 0.5]), requires_grad=True)
        assert finite_diff_check(lambda: (x * x).sum(), [x]) < 1e-8

    def test_constant_fn_both_sides_zero(self):
        x = Tensor(np.ones(3), requires_grad=True)
        c = Tensor(np.array(5.0))
        assert finite_diff_check(lambda: c + 0.0, [x]) == 0.0

    def test_rejects_bad_step(self):
        x = Tensor(np.ones(2), requires_grad=True)
        with pytest.raises(ContractError):
            finite_diff_check(lambda: x.sum(), [x], h=1e-2)

    def test_rejects_nondeterministic_fn(self):
        x = Tensor(np.ones(1), requires_grad=True)
        state = {"n": 0.0}

        def fn():
            state["n"] += 1.0
            return (x * state["n"]).sum()

        with pytest.raises(ContractError):
            finite_diff_check(fn, [x])

    def test_flags_wrong_gradient(self):
        x = Tensor(np.array([2.0]), requires_grad=True)

        def fn():
            out = x * x
            # sabotage: claim d(x^2)/dx = 1
            orig = out._backward
            def bad(g):
                x.ensure_grad()
                x.grad += g
            out._backward = bad if orig else orig
            return out.sum()

        assert finite_diff_check(fn, [x]) > 1e-2


class TestParamStore:
    def test_init_is_order_independent(self):
        s1 = ParamStore(seed=7)
        a1 = s1.uniform("enc.w", (4, 4), fan_in=4)
        b1 = s1.uniform("head.w", (4, 2), fan_in=4)
        s2 = ParamStore(seed=7)
        b2 = s2.uniform("head.w", (4, 2), fan_in=4)
        a2 = s2.uniform("enc.w", (4, 4), fan_in=4)
        np.testing.assert_array_equal(a1.data, a2.data)
        np.testing.assert_array_equal(b1.data, b2.data)

    def test_different_seeds_differ(self):
        a = ParamStore(seed=1).uniform("w", (8, 8), fan_in=8)
        b = ParamStore(seed=2).uniform("w", (8, 8), fan_in=8)
        assert not np.array_equal(a.data, b.data)

    def test_uniform_bound(self):
        w = ParamStore(seed=3).uniform("w", (200,), fan_in=16)
        assert np.all(np.abs(w.data) <= 0.25)

    def test_special_inits(self):
        s = ParamStore(seed=0)
        np.testing.assert_array_equal(s.ones("g", (3,)).data, np.ones(3))
        np.testing.assert_array_equal(s.zeros("b", (3,)).data, np.zeros(3))
        np.testing.assert_array_equal(s.constant("c", (2,), -2.0).data, [-2.0, -2.0])

    def test_duplicate_name_rejected(self):
        s = ParamStore(seed=0)
        s.zeros("w", (1,))
        with pytest.raises(ContractError):
            s.zeros("w", (1,))

    def test_state_dict_roundtrip(self):
        s = ParamStore(seed=5)
        s.uniform("a", (3, 3), fan_in=3)
        s.uniform("b", (3,), fan_in=3)
        state = s.state_dict()
        s2 = ParamStore(seed=999)
        s2.uniform("a", (3, 3), fan_in=3)
        s2.uniform("b", (3,), fan_in=3)
        s2.load_state_dict(state)
        for name, t in s.items():
            np.testing.assert_array_equal(t.data, s2.get(name).data)

    def test_load_rejects_mismatched_names(self):
        s = ParamStore(seed=0)
        s.zeros("a", (2,))
        with pytest.raises(ContractError):
            s.load_state_dict({"b": np.zeros(2)})
