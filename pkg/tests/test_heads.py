"""Task heads: radial-basis layer, batch normalisation contract, losses."""

import numpy as np
import pytest

from legs.autodiff import BatchNormState, Tape
from legs.errors import NotEnoughSamplesError
from legs.heads import RBFHead, init_fcn, init_rbf, loss, rbf_activations, rbf_forward


@pytest.fixture
def features():
    rng = np.random.default_rng(5)
    return rng.standard_normal((12, 4)) * np.array([1.0, 10.0, 0.1, 3.0]) + 2.0


class TestInitRBF:
    def test_all_rows_as_anchors_is_a_permutation(self, features):
        head = init_rbf(features, n_anchors=len(features), out_dim=2, seed=1)
        state = head.bn_state
        normed = (features - state.running_mean) / np.sqrt(state.running_var + state.eps)
        got = {tuple(np.round(row, 12)) for row in head.anchors}
        expected = {tuple(np.round(row, 12)) for row in normed}
        assert got == expected

    def test_anchors_inside_normalised_range(self, features):
        head = init_rbf(features, n_anchors=5, out_dim=2, seed=3)
        state = head.bn_state
        normed = (features - state.running_mean) / np.sqrt(state.running_var + state.eps)
        assert np.all(head.anchors >= normed.min(axis=0) - 1e-12)
        assert np.all(head.anchors <= normed.max(axis=0) + 1e-12)

    def test_zero_anchors_rejected(self, features):
        with pytest.raises(NotEnoughSamplesError):
            init_rbf(features, n_anchors=0, out_dim=2)

    def test_more_anchors_than_rows_rejected(self, features):
        with pytest.raises(NotEnoughSamplesError):
            init_rbf(features, n_anchors=13, out_dim=2)


def _identity_bn_head(anchors):
    """Head whose batch norm is the identity map in eval mode."""
    dim = anchors.shape[1]
    state = BatchNormState(running_mean=np.zeros(dim), running_var=np.ones(dim) - 1e-5)
    return RBFHead(
        gamma=np.ones(dim),
        beta=np.zeros(dim),
        bn_state=state,
        anchors=anchors,
        w=np.eye(anchors.shape[0]),
        b=np.zeros(anchors.shape[0]),
    )


class TestRBFForward:
    def test_activation_is_one_at_anchor(self, features):
        head = init_rbf(features, n_anchors=len(features), out_dim=2, seed=0)
        acts = rbf_activations(head, features, training=False)
        assert acts.max(axis=1) == pytest.approx(np.ones(len(features)), abs=1e-10)

    def test_unit_distance_activation(self):
        head = _identity_bn_head(np.zeros((1, 3)))
        x = np.array([[1.0, 0.0, 0.0]])
        acts = rbf_activations(head, x, training=False)
        assert acts[0, 0] == pytest.approx(np.exp(-1.0), abs=1e-12)
        assert acts[0, 0] == pytest.approx(0.3679, abs=1e-4)

    def test_activations_in_unit_interval(self, features):
        head = init_rbf(features, n_anchors=4, out_dim=2, seed=2)
        acts = rbf_activations(head, features, training=False)
        assert np.all(acts > 0.0) and np.all(acts <= 1.0)

    def test_forward_applies_final_affine(self):
        head = _identity_bn_head(np.zeros((2, 2)))
        head.w = np.array([[1.0, 0.0], [0.0, 2.0]])
        head.b = np.array([0.5, 0.0])
        out = rbf_forward(head, np.zeros((1, 2)), training=False)
        np.testing.assert_allclose(out, [[1.5, 2.0]])

    def test_train_eval_agree_when_running_stats_match_batch(self, features):
        head = init_rbf(features, n_anchors=6, out_dim=2, seed=0)
        # running stats were initialised from exactly this batch
        train_out = rbf_forward(head, features, training=True)
        eval_out = rbf_forward(head, features, training=False)
        np.testing.assert_allclose(train_out, eval_out, atol=1e-12)

    def test_batchnorm_running_stats_update_only_when_asked(self, features):
        head = init_rbf(features, n_anchors=3, out_dim=2, seed=0)
        before = head.bn_state.running_mean.copy()
        tape = Tape()
        tape.batchnorm(tape.constant(features + 5.0), tape.constant(head.gamma),
                       tape.constant(head.beta), head.bn_state, training=True,
                       update_stats=True)
        after = head.bn_state.running_mean
        assert not np.allclose(before, after)
        np.testing.assert_allclose(after, 0.9 * before + 0.1 * (features + 5.0).mean(axis=0))


class TestLoss:
    def test_two_class_uniform_logits(self):
        assert loss(np.zeros((4, 2)), np.array([0, 1, 1, 0]), "classify") == pytest.approx(
            np.log(2.0), abs=1e-12
        )

    def test_regression_perfect_fit(self):
        y = np.arange(5.0)
        assert loss(y, y, "regress") == 0.0

    def test_margin_monotone(self):
        values = []
        for margin in (1.0, 2.0, 4.0):
            logits = np.array([[margin, 0.0]])
            values.append(loss(logits, np.array([0]), "classify"))
        assert values[0] > values[1] > values[2]

    def test_unknown_task(self):
        with pytest.raises(ValueError):
            loss(np.zeros((1, 2)), np.zeros(1), "rank")


def test_fcn_shapes_and_determinism():
    a = init_fcn(10, 3, hidden=7, seed=9)
    b = init_fcn(10, 3, hidden=7, seed=9)
    assert a.w1.shape == (10, 7) and a.w2.shape == (7, 3)
    assert np.array_equal(a.w1, b.w1) and np.array_equal(a.w2, b.w2)
