"""Reverse-mode tape: per-primitive gradients and the checker itself."""

import numpy as np
import pytest

from legs.autodiff import Tape, backward, finite_diff_check
from legs.checks import gradcheck_primitives
from legs.errors import DimensionMismatchError, NonScalarLossError


class TestBackwardBasics:
    def test_quadratic_gradient_is_theta(self):
        theta0 = np.random.default_rng(0).standard_normal(7)
        tape = Tape()
        theta = tape.parameter("theta", theta0)
        loss = tape.scale_shift(tape.sum(tape.powi(theta, 2)), 0.5, 0.0)
        grads = backward(tape, loss)
        np.testing.assert_allclose(grads["theta"], theta0, rtol=1e-12)

    def test_softmax_gradient_matches_jacobian_oracle(self):
        rng = np.random.default_rng(3)
        theta0 = rng.standard_normal((1, 5))
        c = rng.standard_normal(5)
        tape = Tape()
        theta = tape.parameter("theta", theta0)
        y = tape.softmax(theta, axis=-1)
        loss = tape.sum(tape.scale_shift(y, c, 0.0))
        grads = backward(tape, loss)
        yv = y.value[0]
        jacobian = np.diag(yv) - np.outer(yv, yv)
        np.testing.assert_allclose(grads["theta"][0], jacobian @ c, rtol=1e-10, atol=1e-14)

    def test_disconnected_parameter_gets_zeros_and_flag(self):
        tape = Tape()
        used = tape.parameter("used", np.ones(3))
        unused = tape.parameter("unused", np.ones(4))
        loss = tape.sum(tape.powi(used, 2))
        grads = backward(tape, loss)
        assert grads.disconnected == ("unused",)
        assert np.all(grads["unused"] == 0.0)
        assert grads["unused"].shape == (4,)

    def test_non_scalar_loss_rejected(self):
        tape = Tape()
        theta = tape.parameter("theta", np.ones(3))
        out = tape.powi(theta, 2)
        with pytest.raises(NonScalarLossError):
            backward(tape, out)

    def test_shared_node_accumulates_both_branches(self):
        # diamond: two consumers of the same node must sum their adjoints
        x0 = np.array([0.7, -1.3, 2.1])
        tape = Tape()
        x = tape.parameter("x", x0)
        y = tape.powi(x, 2)
        loss = tape.sum(tape.concat([y, tape.scale_shift(y, 3.0, 0.0)]))
        grads = backward(tape, loss)
        np.testing.assert_allclose(grads["x"], 2 * x0 + 3 * 2 * x0, rtol=1e-12)

    def test_abs_subgradient_zero_at_zero(self):
        tape = Tape()
        x = tape.parameter("x", np.array([0.0, -2.0, 3.0]))
        loss = tape.sum(tape.abs(x))
        grads = backward(tape, loss)
        np.testing.assert_array_equal(grads["x"], [0.0, -1.0, 1.0])

    def test_gradients_reproducible_bit_identical(self):
        def run():
            rng = np.random.default_rng(42)
            tape = Tape()
            x = tape.parameter("x", rng.standard_normal((4, 3)))
            w = tape.parameter("w", rng.standard_normal((3, 2)))
            out = tape.relu(tape.affine(x, w, tape.constant(np.zeros(2))))
            loss = tape.sum(tape.powi(out, 2))
            return backward(tape, loss)

        a, b = run(), run()
        assert np.array_equal(a["x"], b["x"]) and np.array_equal(a["w"], b["w"])

    def test_duplicate_parameter_name_rejected(self):
        tape = Tape()
        tape.parameter("x", np.ones(2))
        with pytest.raises(ValueError):
            tape.parameter("x", np.ones(2))

    def test_shape_mismatches_raise(self):
        tape = Tape()
        with pytest.raises(DimensionMismatchError):
            tape.affine(tape.constant(np.ones((2, 3))), tape.constant(np.ones((4, 2))),
                        tape.constant(np.zeros(2)))
        with pytest.raises(DimensionMismatchError):
            tape.mse(tape.constant(np.ones(3)), np.ones(4))


class TestFiniteDiffCheck:
    def test_linear_function_near_exact(self):
        c = np.arange(1.0, 6.0)

        def fn(params, want_grad):
            value = float(c @ params["x"])
            return value, ({"x": c} if want_grad else None)

        err = finite_diff_check(fn, {"x": np.ones(5)}, eps=1e-5)
        assert err < 1e-10

    def test_abs_kink_coordinate_excluded(self):
        # |.| at exactly 0: one-sided slopes disagree, coordinate is skipped
        def fn(params, want_grad):
            x = params["x"]
            return float(np.sum(np.abs(x))), ({"x": np.sign(x)} if want_grad else None)

        err = finite_diff_check(fn, {"x": np.array([0.0, 1.5, -2.0])}, eps=1e-5)
        assert err < 1e-9  # the kinked coordinate did not pollute the report

    def test_wrong_gradient_is_caught(self):
        def fn(params, want_grad):
            x = params["x"]
            return float(np.sum(x**2)), ({"x": 3.0 * x} if want_grad else None)  # wrong

        err = finite_diff_check(fn, {"x": np.array([1.0, -2.0])}, eps=1e-5)
        assert err > 0.1

    def test_eps_validated(self):
        with pytest.raises(ValueError):
            finite_diff_check(lambda p, w: (0.0, {}), {"x": np.ones(1)}, eps=1e-2)

    def test_projection_mode_for_large_parameters(self):
        rng = np.random.default_rng(0)
        w = rng.standard_normal(400)

        def fn(params, want_grad):
            x = params["x"]
            return float(np.sum(w * x**2)), ({"x": 2 * w * x} if want_grad else None)

        err = finite_diff_check(fn, {"x": rng.standard_normal(400)}, eps=1e-6,
                                max_coords=64, n_projections=6)
        assert err < 1e-7


@pytest.mark.parametrize("seed", [0, 7, 123])
def test_every_primitive_matches_central_differences(seed):
    result = gradcheck_primitives(seed=seed)
    assert result.passed, result.detail


def test_full_pipeline_at_coarser_eps():
    # the classifier pipeline also validates at eps = 1e-5
    from legs.checks import gradcheck_pipeline

    result = gradcheck_pipeline(seed=2, points=2, eps=1e-5)
    assert result.passed, result.detail


def test_backward_touches_each_node_at_most_once(monkeypatch):
    import legs.autodiff as ad

    counts = {}
    original = dict(ad._BACKWARD)

    def wrap(op, fn):
        def counted(node, g):
            counts[node.idx] = counts.get(node.idx, 0) + 1
            return fn(node, g)

        return counted

    monkeypatch.setattr(ad, "_BACKWARD", {op: wrap(op, fn) for op, fn in original.items()})
    rng = np.random.default_rng(1)
    tape = Tape()
    x = tape.parameter("x", rng.standard_normal((5, 3)))
    y = tape.relu(x)
    z = tape.concat([tape.powi(y, 2), y], axis=0)  # y consumed twice
    loss = tape.sum(z)
    backward(tape, loss)
    assert counts and all(v == 1 for v in counts.values())
