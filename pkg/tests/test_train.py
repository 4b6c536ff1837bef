"""Training loop, folds, whitening, and the cross-validation protocol."""

import numpy as np
import pytest

from legs.autodiff import Tape, backward
from legs.data import synth_scales_dataset
from legs.errors import DivergenceError, TooFewSamplesError
from legs.heads import init_fcn, init_rbf
from legs.train import (
    TrainConfig,
    Standardizer,
    crossval,
    fit_head,
    plain_folds,
    stratified_folds,
    train,
    whiten_stats,
)


def _separable_features(n_per_class=30, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n_per_class, dim)) + 4.0
    b = rng.standard_normal((n_per_class, dim)) - 4.0
    feats = np.vstack([a, b])
    labels = np.array([0] * n_per_class + [1] * n_per_class)
    return feats, labels


class TestFitHead:
    def test_separable_features_reach_full_training_accuracy(self):
        feats, labels = _separable_features()
        cfg = TrainConfig(lr=0.05, epochs=120, folds=2, head="fcn")
        head, standardizer, history = fit_head(feats, labels, cfg, out_dim=2)
        tape = Tape()
        out = head.forward(tape, tape.constant(standardizer.transform(feats)),
                           {k: tape.constant(v) for k, v in head.param_arrays().items()})
        acc = np.mean(np.argmax(out.value, axis=1) == labels)
        assert acc == 1.0
        assert history[-1]["train_loss"] < history[0]["train_loss"]

    def test_rbf_head_also_separates(self):
        feats, labels = _separable_features(seed=3)
        cfg = TrainConfig(lr=0.05, epochs=150, folds=2, head="rbf", anchors=8)
        head, standardizer, _ = fit_head(feats, labels, cfg, out_dim=2)
        tape = Tape()
        out = head.forward(tape, tape.constant(standardizer.transform(feats)),
                           {k: tape.constant(v) for k, v in head.param_arrays().items()},
                           training=False, update_stats=False)
        acc = np.mean(np.argmax(out.value, axis=1) == labels)
        assert acc >= 0.95


class TestGradientStepSanity:
    @pytest.mark.parametrize("lr", [1e-4, 1e-5])
    def test_small_step_does_not_increase_batch_loss(self, lr):
        rng = np.random.default_rng(0)
        for fixture in range(20):
            dim = int(rng.integers(3, 9))
            rows = int(rng.integers(6, 16))
            feats = rng.standard_normal((rows, dim))
            labels = rng.integers(0, 2, size=rows)
            if fixture % 2 == 0:
                head = init_fcn(dim, 2, hidden=5, seed=fixture)
            else:
                head = init_rbf(feats, 3, 2, seed=fixture)

            def batch_loss(arrays, train_mode):
                tape = Tape()
                nodes = {k: tape.parameter(k, v) for k, v in arrays.items()}
                if hasattr(head, "bn_state"):
                    out = head.forward(tape, tape.constant(feats), nodes,
                                       training=train_mode, update_stats=False)
                else:
                    out = head.forward(tape, tape.constant(feats), nodes)
                loss_node = tape.cross_entropy(out, labels)
                return tape, loss_node

            arrays = {k: v.copy() for k, v in head.param_arrays().items()}
            tape, loss_node = batch_loss(arrays, True)
            before = float(loss_node.value)
            grads = backward(tape, loss_node)
            norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.by_name.values()))
            if norm < 1e-10:
                continue
            stepped = {k: v - lr * grads[k] for k, v in arrays.items()}
            _, after_node = batch_loss(stepped, True)
            assert float(after_node.value) <= before + 1e-12


class TestFolds:
    def test_stratified_counts_deviate_at_most_one(self):
        rng = np.random.default_rng(1)
        labels = rng.integers(0, 3, size=83)
        folds = stratified_folds(labels, 10, seed=4)
        for cls in np.unique(labels):
            counts = [int(np.sum(labels[f] == cls)) for f in folds]
            assert max(counts) - min(counts) <= 1

    def test_partition(self):
        labels = np.random.default_rng(2).integers(0, 2, size=37)
        folds = stratified_folds(labels, 5, seed=0)
        joined = np.sort(np.concatenate(folds))
        np.testing.assert_array_equal(joined, np.arange(37))

    def test_plain_folds_partition(self):
        folds = plain_folds(23, 4, seed=1)
        np.testing.assert_array_equal(np.sort(np.concatenate(folds)), np.arange(23))

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamplesError):
            stratified_folds(np.array([0, 1, 0]), 4)


class TestWhitening:
    def test_whitened_targets_are_standard(self):
        y = np.random.default_rng(3).uniform(5.0, 50.0, size=200)
        mean, std = whiten_stats(y)
        w = (y - mean) / std
        assert abs(w.mean()) < 1e-9
        assert abs(w.var() - 1.0) < 1e-9

    def test_constant_targets_guarded(self):
        mean, std = whiten_stats(np.full(5, 3.0))
        assert mean == 3.0 and std == 1.0


class TestStandardizer:
    def test_transform_is_zero_mean_unit_variance(self):
        feats = np.random.default_rng(0).uniform(-3, 9, size=(50, 6)) * np.arange(1, 7)
        z = Standardizer.fit(feats).transform(feats)
        np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(z.std(axis=0), 1.0, atol=1e-12)

    def test_constant_feature_guarded(self):
        feats = np.ones((10, 2))
        z = Standardizer.fit(feats).transform(feats)
        assert np.all(np.isfinite(z))


class TestTrain:
    def test_zero_learning_rate_keeps_parameters(self):
        bundle = synth_scales_dataset(12, seed=1)
        cfg = TrainConfig(lr=0.0, epochs=4, folds=2, mode="learn", head="fcn", seed=0)
        model = train(bundle, cfg)
        reference = train(bundle, cfg)
        init = np.asarray([1, 2, 4, 8, 16])
        theta = model.selection.theta
        assert np.array_equal(theta, reference.selection.theta)
        peaks = np.argmax(theta, axis=1) + 1
        np.testing.assert_array_equal(peaks, init)
        assert np.array_equal(theta[theta > 0], np.full(5, 2.0))  # untouched soft init

    def test_same_seed_bit_identical(self):
        bundle = synth_scales_dataset(16, seed=2)
        cfg = TrainConfig(lr=0.02, epochs=6, folds=2, mode="learn", head="rbf",
                          anchors=4, seed=11)
        a = train(bundle, cfg)
        b = train(bundle, cfg)
        assert np.array_equal(a.selection.theta, b.selection.theta)
        for k, v in a.head.param_arrays().items():
            assert np.array_equal(v, b.head.param_arrays()[k]), k
        assert a.history == b.history

    def test_divergence_detected(self):
        bundle = synth_scales_dataset(12, seed=0)
        with np.errstate(all="ignore"):
            with pytest.raises(DivergenceError):
                train(bundle, TrainConfig(epochs=50, folds=2, head="fcn", lr=1e12, seed=0))

    def test_history_records_val_loss(self):
        bundle = synth_scales_dataset(20, seed=3)
        model = train(bundle, TrainConfig(epochs=5, folds=2, head="fcn", seed=0))
        assert all("val_loss" in rec for rec in model.history)

    def test_minibatch_mode_trains_deterministically(self):
        bundle = synth_scales_dataset(16, seed=7)
        cfg = TrainConfig(epochs=6, folds=2, head="fcn", batch_size=4, seed=5)
        a = train(bundle, cfg)
        b = train(bundle, cfg)
        assert a.history == b.history
        assert a.history[-1]["train_loss"] < a.history[0]["train_loss"]


class TestCrossval:
    def test_single_class_dataset_scores_one(self):
        base = synth_scales_dataset(12, seed=4)
        ones = base.subset(np.flatnonzero(base.labels == 1))
        cfg = TrainConfig(epochs=3, folds=2, head="fcn", seed=0)
        result = crossval(ones, cfg)
        assert result.metric == "accuracy"
        assert result.mean == 1.0 and result.std == 0.0

    def test_fold_metrics_shape_and_partition(self):
        bundle = synth_scales_dataset(14, seed=5)
        cfg = TrainConfig(epochs=3, folds=3, head="fcn", seed=0)
        result = crossval(bundle, cfg)
        assert len(result.per_fold) == 3
        assert sum(r["size"] for r in result.per_fold) == 14
        assert result.mean == pytest.approx(
            np.mean([r["metric"] for r in result.per_fold])
        )

    def test_regression_task_reports_mse(self):
        bundle = synth_scales_dataset(12, seed=6)
        targets = bundle.labels.astype(float) * 3.0 + 5.0
        noisy = type(bundle)(name=bundle.name, graphs=bundle.graphs, labels=targets,
                             node_features=bundle.node_features)
        cfg = TrainConfig(epochs=10, folds=2, head="fcn", task="regress", seed=0)
        result = crossval(noisy, cfg)
        assert result.metric == "mse"
        assert all(np.isfinite(r["metric"]) for r in result.per_fold)
