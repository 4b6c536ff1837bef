"""Task heads on top of scattering features, and the two training losses.

Two configurations cover the experiments: a small two-layer fully connected
head, and an anchor-based radial head.  The radial head first batch
normalises its input to pin down the feature scale, then responds to a set
of anchor points through ``exp(-||z - c_k||^2)`` and finishes with an affine
layer.  Anchors are drawn (without replacement) from the batch-normalised
features of the first pass through the data, so they always start inside
the data range; they remain trainable afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import BatchNormState, Node, Tape
from .errors import DimensionMismatchError, NotEnoughSamplesError

__all__ = ["FCNHead", "RBFHead", "init_fcn", "init_rbf", "rbf_forward", "rbf_activations", "loss"]


@dataclass
class FCNHead:
    """Affine -> rectifier -> affine."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def param_arrays(self) -> dict:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def set_params(self, arrays: dict) -> None:
        self.w1, self.b1 = arrays["w1"], arrays["b1"]
        self.w2, self.b2 = arrays["w2"], arrays["b2"]

    def forward(self, tape: Tape, x, params: dict, training: bool = False) -> Node:
        hidden = tape.relu(tape.affine(x, params["w1"], params["b1"]))
        return tape.affine(hidden, params["w2"], params["b2"])


@dataclass
class RBFHead:
    """Batch normalisation, squared-exponential anchor responses, affine output."""

    gamma: np.ndarray
    beta: np.ndarray
    bn_state: BatchNormState
    anchors: np.ndarray
    w: np.ndarray
    b: np.ndarray
    train_anchors: bool = True

    def param_arrays(self) -> dict:
        arrays = {"gamma": self.gamma, "beta": self.beta, "w": self.w, "b": self.b}
        if self.train_anchors:
            arrays["anchors"] = self.anchors
        return arrays

    def set_params(self, arrays: dict) -> None:
        self.gamma, self.beta = arrays["gamma"], arrays["beta"]
        self.w, self.b = arrays["w"], arrays["b"]
        if self.train_anchors:
            self.anchors = arrays["anchors"]

    def forward(self, tape: Tape, x, params: dict, training: bool = False,
                update_stats: bool = True) -> Node:
        normed = tape.batchnorm(x, params["gamma"], params["beta"], self.bn_state,
                                training=training, update_stats=update_stats)
        anchors = params["anchors"] if self.train_anchors else tape.constant(self.anchors)
        acts = tape.rbf(normed, anchors)
        return tape.affine(acts, params["w"], params["b"])


def init_fcn(in_dim: int, out_dim: int, hidden: int = 64, seed: int = 0) -> FCNHead:
    """He-scaled first layer, smaller second layer, zero biases."""
    rng = np.random.default_rng(seed)
    return FCNHead(
        w1=rng.standard_normal((in_dim, hidden)) * np.sqrt(2.0 / in_dim),
        b1=np.zeros(hidden),
        w2=rng.standard_normal((hidden, out_dim)) * np.sqrt(1.0 / hidden),
        b2=np.zeros(out_dim),
    )


def init_rbf(first_pass_features: np.ndarray, n_anchors: int, out_dim: int,
             seed: int = 0, eps: float = 1e-5, momentum: float = 0.1) -> RBFHead:
    """Build the radial head from the first pass over the training features.

    The batch-norm running statistics start at the first-pass statistics and
    the anchors are sampled uniformly without replacement from the
    batch-normalised rows, so each anchor coordinate lies inside the
    empirical range of the normalised data.
    """
    feats = np.asarray(first_pass_features, dtype=float)
    if feats.ndim != 2:
        raise DimensionMismatchError(f"expected a (rows, dim) feature matrix, got {feats.shape}")
    if n_anchors < 1:
        raise NotEnoughSamplesError(f"need at least one anchor, got {n_anchors}")
    if n_anchors > feats.shape[0]:
        raise NotEnoughSamplesError(
            f"cannot draw {n_anchors} anchors from {feats.shape[0]} feature rows"
        )
    state = BatchNormState.from_batch(feats, eps=eps, momentum=momentum)
    normed = (feats - state.running_mean) / np.sqrt(state.running_var + eps)
    rng = np.random.default_rng(seed)
    pick = rng.choice(feats.shape[0], size=n_anchors, replace=False)
    return RBFHead(
        gamma=np.ones(feats.shape[1]),
        beta=np.zeros(feats.shape[1]),
        bn_state=state,
        anchors=normed[pick].copy(),
        w=rng.standard_normal((n_anchors, out_dim)) * np.sqrt(1.0 / n_anchors),
        b=np.zeros(out_dim),
    )


def _bind_constants(tape: Tape, head) -> dict:
    return {name: tape.constant(value) for name, value in head.param_arrays().items()}


def rbf_activations(head: RBFHead, x: np.ndarray, training: bool = False) -> np.ndarray:
    """Anchor responses ``exp(-||BatchNorm(x) - c_k||^2)``, always in (0, 1]."""
    tape = Tape()
    normed = tape.batchnorm(tape.constant(x), tape.constant(head.gamma),
                            tape.constant(head.beta), head.bn_state,
                            training=training, update_stats=False)
    return tape.rbf(normed, tape.constant(head.anchors)).value


def rbf_forward(head: RBFHead, x: np.ndarray, training: bool = False) -> np.ndarray:
    """Task output of the radial head (anchor responses through the affine layer)."""
    tape = Tape()
    out = head.forward(tape, tape.constant(x), _bind_constants(tape, head),
                       training=training, update_stats=False)
    return out.value


def loss(predictions: np.ndarray, targets: np.ndarray, task: str) -> float:
    """Mean softmax cross-entropy for classification, mean squared error for
    regression (targets are expected pre-whitened by the caller)."""
    tape = Tape()
    pred = tape.constant(predictions)
    if task == "classify":
        return float(tape.cross_entropy(pred, targets).value)
    if task == "regress":
        return float(tape.mse(pred, np.asarray(targets, dtype=float)).value)
    raise ValueError(f"unknown task {task!r}")
