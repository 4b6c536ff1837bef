"""Gradient-descent training of the scattering selection and task heads,
plus the stratified k-fold evaluation protocol.

Training is deterministic under a fixed seed: plain gradient descent with
optional momentum, full-batch by default, early stopping on a small
validation split carved out of the training fold (best-validation
parameters are restored).  Scattering features are z-scored with
training-fold statistics before entering either head; in learnable mode the
standardiser is fitted to the features at initialisation and then held
fixed, so the gradient treats it as a constant map.

Cross-validation uses stratified folds for classification (per-fold class
counts deviate from proportional by at most one) and contiguous shuffled
folds for regression; regression targets are whitened with training-fold
statistics and errors are reported in whitened units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import Tape, backward
from .errors import DivergenceError, TooFewSamplesError
from .graph import lazy_diffusion
from .heads import RBFHead, init_fcn, init_rbf
from .learnable import SelectionParams, init_selection, input_stack, legs_forward_node
from .scattering import ScatterConfig

__all__ = [
    "TrainConfig",
    "TrainedModel",
    "CrossvalResult",
    "Standardizer",
    "train",
    "crossval",
    "fit_head",
    "stratified_folds",
    "whiten_stats",
    "predict",
    "extract_features",
]


@dataclass(frozen=True)
class TrainConfig:
    """Knobs of one training run; defaults follow the experimental protocol."""

    lr: float = 0.01
    epochs: int = 200
    batch_size: int | None = None  # None = full batch
    seed: int = 0
    head: str = "fcn"  # fcn | rbf
    task: str = "classify"  # classify | regress
    folds: int = 10
    mode: str = "fixed"  # fixed | learn
    momentum: float = 0.9
    patience: int = 20
    val_fraction: float = 0.1
    hidden: int = 64
    anchors: int = 32
    m_steps: int = 16
    scatter: ScatterConfig = field(default_factory=ScatterConfig)

    def __post_init__(self):
        if self.lr < 0 or self.epochs < 1:
            raise ValueError("learning rate must be >= 0 and epochs >= 1")
        if self.folds < 2:
            raise ValueError(f"fold count must be >= 2, got {self.folds}")
        if self.head not in ("fcn", "rbf"):
            raise ValueError(f"unknown head {self.head!r}")
        if self.task not in ("classify", "regress"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.mode not in ("fixed", "learn"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class Standardizer:
    """Per-feature z-scoring with frozen statistics."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> "Standardizer":
        mean = features.mean(axis=0)
        scale = features.std(axis=0)
        scale = np.where(scale < 1e-12, 1.0, scale)
        return cls(mean=mean, scale=scale)

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) / self.scale

    def apply(self, tape: Tape, x):
        return tape.scale_shift(x, 1.0 / self.scale, -self.mean / self.scale)


@dataclass
class TrainedModel:
    """Final parameters of one run plus the per-epoch loss history."""

    selection: SelectionParams
    head: object
    standardizer: Standardizer
    task: str
    out_dim: int
    scatter: ScatterConfig
    history: tuple
    target_stats: tuple | None = None  # (mean, std) for regression targets


@dataclass(frozen=True)
class CrossvalResult:
    metric: str  # "accuracy" | "mse"
    per_fold: tuple
    mean: float
    std: float


def whiten_stats(y: np.ndarray) -> tuple:
    """Mean and (guarded) standard deviation for target whitening."""
    y = np.asarray(y, dtype=float)
    std = y.std()
    return float(y.mean()), float(std if std > 1e-12 else 1.0)


def stratified_folds(labels, k: int, seed: int = 0) -> list:
    """Partition indices into ``k`` folds preserving class proportions.

    Each class is shuffled and dealt round-robin with a class-rotated
    starting fold, so per-fold class counts deviate from proportional by at
    most one sample.
    """
    labels = np.asarray(labels)
    if k > len(labels):
        raise TooFewSamplesError(f"{k} folds from {len(labels)} samples")
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    for offset, cls in enumerate(np.unique(labels)):
        members = np.flatnonzero(labels == cls)
        rng.shuffle(members)
        for i, idx in enumerate(members):
            folds[(i + offset) % k].append(int(idx))
    return [np.sort(np.asarray(f, dtype=int)) for f in folds]


def plain_folds(n: int, k: int, seed: int = 0) -> list:
    if k > n:
        raise TooFewSamplesError(f"{k} folds from {n} samples")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    return [np.sort(part) for part in np.array_split(order, k)]


def _prepare_graphs(graphs, channels, m_steps):
    """Per-graph constants reused across epochs: operator, channel matrix,
    selection-independent diffusion stack."""
    prepared = []
    for g, x in zip(graphs, channels):
        x = np.asarray(x, dtype=float)
        x = x[:, None] if x.ndim == 1 else x
        op = lazy_diffusion(g)
        prepared.append({"graph": g, "x": x, "op": op, "base": input_stack(op, x, m_steps)})
    return prepared


def extract_features(graphs, channels, selection: SelectionParams, cfg: ScatterConfig,
                     prepared=None) -> np.ndarray:
    """Feature matrix (one row per graph) at fixed selection logits."""
    if prepared is None:
        prepared = _prepare_graphs(graphs, channels, selection.m)
    rows = []
    for item in prepared:
        tape = Tape()
        theta = tape.constant(selection.theta)
        node, _ = legs_forward_node(tape, item["graph"], item["x"], theta, cfg,
                                    base=item["base"], operator=item["op"])
        rows.append(node.value)
    return np.asarray(rows)


def _forward_batch(tape, prepared, idx, theta_node, cfg, standardizer, head, head_nodes,
                   training, update_stats=True):
    rows = []
    for i in idx:
        item = prepared[i]
        node, _ = legs_forward_node(tape, item["graph"], item["x"], theta_node, cfg,
                                    base=item["base"], operator=item["op"])
        rows.append(tape.reshape(node, (1, -1)))
    feats = tape.concat(rows, axis=0)
    zs = standardizer.apply(tape, feats)
    if isinstance(head, RBFHead):
        return head.forward(tape, zs, head_nodes, training=training, update_stats=update_stats)
    return head.forward(tape, zs, head_nodes, training=training)


def _loss_node(tape, out, targets, task):
    if task == "classify":
        return tape.cross_entropy(out, targets)
    return tape.mse(out, targets.reshape(out.value.shape))


def _val_split(labels, task, val_fraction, rng):
    """Indices (fit, val); per-class rounding never empties a class."""
    n = len(labels)
    if val_fraction <= 0 or n < 2:
        return np.arange(n), np.array([], dtype=int)
    val = []
    if task == "classify":
        for cls in np.unique(labels):
            members = np.flatnonzero(labels == cls)
            rng.shuffle(members)
            take = min(int(round(val_fraction * len(members))), len(members) - 1)
            val.extend(members[:take])
    else:
        order = rng.permutation(n)
        val = order[: min(int(round(val_fraction * n)), n - 1)].tolist()
    val = np.sort(np.asarray(val, dtype=int))
    fit = np.setdiff1d(np.arange(n), val)
    return fit, val


def train(bundle, cfg: TrainConfig, channels=None) -> TrainedModel:
    """Fit the selection logits (in learnable mode) and a head on a dataset.

    ``bundle`` provides graphs and labels; ``channels`` optionally overrides
    the per-graph node-signal matrices (default: structural features).
    Returns the trained model and its loss history.
    """
    from .data import default_channels

    graphs = bundle.graphs
    if len(graphs) == 0:
        raise TooFewSamplesError("empty dataset")
    if channels is None:
        channels = default_channels(bundle)
    labels = np.asarray(bundle.labels)

    rng = np.random.default_rng(cfg.seed)
    selection = init_selection(cfg.m_steps, cfg.scatter.J, mode=cfg.mode)
    theta = selection.theta.copy()
    prepared = _prepare_graphs(graphs, channels, cfg.m_steps)

    if cfg.task == "classify":
        targets = labels.astype(int)
        out_dim = int(targets.max()) + 1
        target_stats = None
    else:
        mean, std = whiten_stats(labels)
        targets = (labels.astype(float) - mean) / std
        out_dim = 1
        target_stats = (mean, std)

    init_features = extract_features(graphs, channels, selection, cfg.scatter, prepared)
    standardizer = Standardizer.fit(init_features)
    zs0 = standardizer.transform(init_features)
    if cfg.head == "fcn":
        head = init_fcn(init_features.shape[1], out_dim, hidden=cfg.hidden, seed=cfg.seed)
    else:
        head = init_rbf(zs0, min(cfg.anchors, len(graphs)), out_dim, seed=cfg.seed)

    learn_scales = cfg.mode == "learn"
    arrays = dict(head.param_arrays())
    if learn_scales:
        arrays["theta"] = theta
    arrays = {k: v.copy() for k, v in arrays.items()}
    velocity = {k: np.zeros_like(v) for k, v in arrays.items()}

    fit_idx, val_idx = _val_split(targets if cfg.task == "classify" else labels,
                                  cfg.task, cfg.val_fraction, rng)
    fixed_features = None if learn_scales else standardizer.transform(init_features)

    def run_batch(idx, train_mode):
        tape = Tape()
        head_nodes = {}
        for name, value in arrays.items():
            if name == "theta":
                continue
            head_nodes[name] = tape.parameter(name, value) if train_mode else tape.constant(value)
        if learn_scales:
            theta_node = (tape.parameter("theta", arrays["theta"]) if train_mode
                          else tape.constant(arrays["theta"]))
            out = _forward_batch(tape, prepared, idx, theta_node, cfg.scatter, standardizer,
                                 head, head_nodes, training=train_mode,
                                 update_stats=train_mode)
            loss_node = _loss_node(tape, out, targets[idx], cfg.task)
        else:
            zs = tape.constant(fixed_features[idx])
            if isinstance(head, RBFHead):
                out = head.forward(tape, zs, head_nodes, training=train_mode,
                                   update_stats=train_mode)
            else:
                out = head.forward(tape, zs, head_nodes, training=train_mode)
            loss_node = _loss_node(tape, out, targets[idx], cfg.task)
        return tape, loss_node

    def snapshot():
        return ({k: v.copy() for k, v in arrays.items()},
                head.bn_state.copy() if isinstance(head, RBFHead) else None)

    best = snapshot()
    best_val = math.inf
    stale = 0
    history = []
    for _ in range(cfg.epochs):
        if cfg.batch_size is None or cfg.batch_size >= len(fit_idx):
            batches = [fit_idx]
        else:
            order = rng.permutation(len(fit_idx))
            batches = [fit_idx[order[i:i + cfg.batch_size]]
                       for i in range(0, len(order), cfg.batch_size)]
        epoch_losses = []
        for batch in batches:
            tape, loss_node = run_batch(batch, train_mode=True)
            value = float(loss_node.value)
            if not np.isfinite(value):
                raise DivergenceError(f"training loss became {value}")
            grads = backward(tape, loss_node)
            for name in arrays:
                velocity[name] = cfg.momentum * velocity[name] - cfg.lr * grads[name]
                arrays[name] = arrays[name] + velocity[name]
            head.set_params({k: v for k, v in arrays.items() if k != "theta"})
            epoch_losses.append(value)
        record = {"train_loss": float(np.mean(epoch_losses))}
        if len(val_idx):
            _, val_loss_node = run_batch(val_idx, train_mode=False)
            record["val_loss"] = float(val_loss_node.value)
            if record["val_loss"] < best_val - 1e-12:
                best_val = record["val_loss"]
                best = snapshot()
                stale = 0
            else:
                stale += 1
        history.append(record)
        if len(val_idx) and stale > cfg.patience:
            break

    if len(val_idx):
        arrays, bn_state = best
        head.set_params({k: v for k, v in arrays.items() if k != "theta"})
        if bn_state is not None:
            head.bn_state = bn_state
    final_theta = arrays["theta"] if learn_scales else theta
    return TrainedModel(
        selection=SelectionParams(final_theta, trainable=learn_scales),
        head=head,
        standardizer=standardizer,
        task=cfg.task,
        out_dim=out_dim,
        scatter=cfg.scatter,
        history=tuple(history),
        target_stats=target_stats,
    )


def predict(model: TrainedModel, graphs, channels) -> np.ndarray:
    """Head outputs for a list of graphs (eval mode, frozen statistics)."""
    feats = extract_features(graphs, channels, model.selection, model.scatter)
    zs = model.standardizer.transform(feats)
    tape = Tape()
    nodes = {name: tape.constant(value) for name, value in model.head.param_arrays().items()}
    if isinstance(model.head, RBFHead):
        out = model.head.forward(tape, tape.constant(zs), nodes, training=False,
                                 update_stats=False)
    else:
        out = model.head.forward(tape, tape.constant(zs), nodes, training=False)
    return out.value


def fit_head(features: np.ndarray, targets: np.ndarray, cfg: TrainConfig, out_dim: int):
    """Train only a head on a fixed feature matrix (no scattering in the loop).

    Convenience for experiments on precomputed features; shares the update
    rule with ``train``.
    """
    features = np.asarray(features, dtype=float)
    standardizer = Standardizer.fit(features)
    zs = standardizer.transform(features)
    if cfg.head == "fcn":
        head = init_fcn(features.shape[1], out_dim, hidden=cfg.hidden, seed=cfg.seed)
    else:
        head = init_rbf(zs, min(cfg.anchors, len(zs)), out_dim, seed=cfg.seed)
    arrays = {k: v.copy() for k, v in head.param_arrays().items()}
    velocity = {k: np.zeros_like(v) for k, v in arrays.items()}
    history = []
    for _ in range(cfg.epochs):
        tape = Tape()
        nodes = {name: tape.parameter(name, value) for name, value in arrays.items()}
        if isinstance(head, RBFHead):
            out = head.forward(tape, tape.constant(zs), nodes, training=True)
        else:
            out = head.forward(tape, tape.constant(zs), nodes, training=True)
        loss_node = _loss_node(tape, out, np.asarray(targets), cfg.task)
        value = float(loss_node.value)
        if not np.isfinite(value):
            raise DivergenceError(f"training loss became {value}")
        grads = backward(tape, loss_node)
        for name in arrays:
            velocity[name] = cfg.momentum * velocity[name] - cfg.lr * grads[name]
            arrays[name] = arrays[name] + velocity[name]
        head.set_params(arrays)
        history.append({"train_loss": value})
    return head, standardizer, tuple(history)


def crossval(bundle, cfg: TrainConfig, channels=None) -> CrossvalResult:
    """K-fold evaluation: stratified folds for classification, shuffled
    contiguous folds for regression.  Fold ``f`` trains with seed
    ``cfg.seed + f`` on the remaining folds and is scored on fold ``f``."""
    from .data import default_channels

    labels = np.asarray(bundle.labels)
    if channels is None:
        channels = default_channels(bundle)
    if cfg.task == "classify":
        folds = stratified_folds(labels, cfg.folds, seed=cfg.seed)
    else:
        folds = plain_folds(len(labels), cfg.folds, seed=cfg.seed)

    per_fold = []
    for f, test_idx in enumerate(folds):
        train_idx = np.setdiff1d(np.arange(len(labels)), test_idx)
        sub = bundle.subset(train_idx)
        sub_channels = [channels[i] for i in train_idx]
        model = train(sub, replace(cfg, seed=cfg.seed + f), channels=sub_channels)
        test_graphs = [bundle.graphs[i] for i in test_idx]
        test_channels = [channels[i] for i in test_idx]
        out = predict(model, test_graphs, test_channels)
        if cfg.task == "classify":
            metric = float(np.mean(np.argmax(out, axis=1) == labels[test_idx]))
        else:
            mean, std = model.target_stats
            whitened = (labels[test_idx].astype(float) - mean) / std
            metric = float(np.mean((out.ravel() - whitened) ** 2))
        per_fold.append({"fold": f, "size": int(len(test_idx)), "metric": metric})
    values = np.asarray([r["metric"] for r in per_fold])
    return CrossvalResult(
        metric="accuracy" if cfg.task == "classify" else "mse",
        per_fold=tuple(per_fold),
        mean=float(values.mean()),
        std=float(values.std()),
    )
