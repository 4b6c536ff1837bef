"""Minimal reverse-mode tape for the scattering module and its task heads.

The tape is a Wengert list: every operation appends one node holding its
forward value and the references needed for its vector-Jacobian product.
``backward`` sweeps the list once in reverse, so accumulation is linear in
the number of recorded nodes.

Only the operations the package actually trains through are provided:
diffusion of a signal through a fixed walk operator, the band-selection
combination of a diffusion stack, absolute value, integer powers, sums,
rectifier, row softmax, affine maps, batch normalisation, the
squared-exponential anchor kernel, the two losses, and a handful of
zero-cost structural ops (take/concat/reshape/transpose/scale-shift).
There is no broadcasting engine; shapes are what the callers make them.

Conventions: the walk operator inside ``diffuse`` is a constant (graph
structure carries no trainable parameters), and the absolute value uses
subgradient 0 at 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, NonScalarLossError

__all__ = ["Tape", "Node", "BatchNormState", "Gradients", "backward", "finite_diff_check"]


class Node:
    """One recorded operation: forward value plus backward bookkeeping."""

    __slots__ = ("idx", "op", "parents", "value", "ctx", "name", "needs_grad")

    def __init__(self, idx, op, parents, value, ctx=None, name=None):
        self.idx = idx
        self.op = op
        self.parents = parents
        self.value = value
        self.ctx = ctx
        self.name = name
        self.needs_grad = (op == "parameter") or any(p.needs_grad for p in parents)

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node({self.idx}, {self.op}, shape={self.value.shape})"


@dataclass
class BatchNormState:
    """Running statistics of a batch-normalisation layer."""

    running_mean: np.ndarray
    running_var: np.ndarray
    eps: float = 1e-5
    momentum: float = 0.1

    @classmethod
    def from_batch(cls, x: np.ndarray, eps: float = 1e-5, momentum: float = 0.1):
        return cls(
            running_mean=x.mean(axis=0).copy(),
            running_var=x.var(axis=0).copy(),
            eps=eps,
            momentum=momentum,
        )

    def copy(self):
        return BatchNormState(
            self.running_mean.copy(), self.running_var.copy(), self.eps, self.momentum
        )


@dataclass(frozen=True)
class Gradients:
    """Gradient arrays keyed by parameter name.

    ``disconnected`` lists parameters the loss never touched; their entry in
    ``by_name`` is a zero array of the right shape.
    """

    by_name: dict
    disconnected: tuple

    def __getitem__(self, name):
        return self.by_name[name]


class Tape:
    """Append-only record of operations; insertion order is topological."""

    def __init__(self):
        self.nodes = []
        self.params = {}

    def _add(self, op, parents, value, ctx=None, name=None):
        node = Node(len(self.nodes), op, tuple(parents), np.asarray(value, dtype=float), ctx, name)
        self.nodes.append(node)
        return node

    def _wrap(self, x):
        return x if isinstance(x, Node) else self.constant(x)

    # ---- leaves ----------------------------------------------------------

    def constant(self, value) -> Node:
        return self._add("constant", (), value)

    def parameter(self, name: str, value) -> Node:
        if name in self.params:
            raise ValueError(f"parameter {name!r} already registered on this tape")
        node = self._add("parameter", (), value, name=name)
        self.params[name] = node
        return node

    # ---- diffusion and band selection ------------------------------------

    def diffuse(self, x, operator, steps: int) -> Node:
        """Stack ``[x, P x, ..., P^steps x]`` through a constant walk operator.

        Input must be 2-D ``(n, c)``; the output is ``(steps + 1, n, c)``.
        """
        x = self._wrap(x)
        if x.value.ndim != 2:
            raise DimensionMismatchError(f"diffuse expects (n, c), got {x.value.shape}")
        out = np.empty((steps + 1,) + x.value.shape)
        out[0] = x.value
        r = x.value
        for t in range(1, steps + 1):
            r = operator.apply(r)
            out[t] = r
        return self._add("diffuse", (x,), out, ctx=operator)

    def select_combine(self, stack, selection, perm) -> Node:
        """Band responses of a diffusion stack under a row-stochastic selection.

        ``stack`` is ``(m + 1, n, c)`` with slice 0 the undiffused signal,
        ``selection`` is the raw ``(J, m)`` row-softmax and ``perm`` the
        constant row order (sorted by leading band, recomputed by the caller
        each forward pass and not differentiated through).  Output rows are
        the ``J`` band-pass responses followed by the low-pass response.
        """
        stack = self._wrap(stack)
        selection = self._wrap(selection)
        j_rows, m = selection.value.shape
        if stack.value.shape[0] != m + 1:
            raise DimensionMismatchError(
                f"stack depth {stack.value.shape[0]} incompatible with {m} selection columns"
            )
        perm = np.asarray(perm, dtype=int)
        f_ord = selection.value[perm]
        coeffs = np.empty((j_rows + 1, m))
        coeffs[0] = -f_ord[0]
        coeffs[1:j_rows] = f_ord[:-1] - f_ord[1:]
        coeffs[j_rows] = f_ord[-1]
        out = np.tensordot(coeffs, stack.value[1:], axes=(1, 0))
        out[0] += stack.value[0]
        return self._add("select_combine", (stack, selection), out, ctx=(perm, coeffs))

    # ---- elementwise and reductions ---------------------------------------

    def abs(self, x) -> Node:
        x = self._wrap(x)
        return self._add("abs", (x,), np.abs(x.value), ctx=np.sign(x.value))

    def powi(self, x, q: int) -> Node:
        x = self._wrap(x)
        q = int(q)
        if q < 1:
            raise ValueError(f"integer power must be >= 1, got {q}")
        return self._add("powi", (x,), x.value**q, ctx=q)

    def sum(self, x, axis=None) -> Node:
        x = self._wrap(x)
        return self._add("sum", (x,), np.sum(x.value, axis=axis), ctx=(axis, x.value.shape))

    def relu(self, x) -> Node:
        x = self._wrap(x)
        return self._add("relu", (x,), np.maximum(x.value, 0.0), ctx=x.value > 0)

    def softmax(self, x, axis=-1) -> Node:
        x = self._wrap(x)
        shifted = x.value - np.max(x.value, axis=axis, keepdims=True)
        e = np.exp(shifted)
        y = e / np.sum(e, axis=axis, keepdims=True)
        return self._add("softmax", (x,), y, ctx=axis)

    # ---- structural -------------------------------------------------------

    def take(self, x, indices, axis=0) -> Node:
        x = self._wrap(x)
        indices = np.asarray(indices, dtype=int)
        return self._add("take", (x,), np.take(x.value, indices, axis=axis), ctx=(indices, axis))

    def concat(self, xs, axis=0) -> Node:
        xs = [self._wrap(x) for x in xs]
        sizes = [x.value.shape[axis] for x in xs]
        return self._add("concat", xs, np.concatenate([x.value for x in xs], axis=axis), ctx=(sizes, axis))

    def reshape(self, x, shape) -> Node:
        x = self._wrap(x)
        return self._add("reshape", (x,), x.value.reshape(shape), ctx=x.value.shape)

    def transpose(self, x, axes) -> Node:
        x = self._wrap(x)
        return self._add("transpose", (x,), np.transpose(x.value, axes), ctx=tuple(axes))

    def scale_shift(self, x, scale, shift) -> Node:
        """Elementwise ``x * scale + shift`` with constant coefficients."""
        x = self._wrap(x)
        scale = np.asarray(scale, dtype=float)
        return self._add("scale_shift", (x,), x.value * scale + shift, ctx=scale)

    # ---- layers -----------------------------------------------------------

    def affine(self, x, weight, bias) -> Node:
        x, weight, bias = self._wrap(x), self._wrap(weight), self._wrap(bias)
        if x.value.shape[-1] != weight.value.shape[0]:
            raise DimensionMismatchError(
                f"affine: {x.value.shape} @ {weight.value.shape} mismatch"
            )
        return self._add("affine", (x, weight, bias), x.value @ weight.value + bias.value)

    def batchnorm(self, x, gamma, beta, state: BatchNormState, training: bool,
                  update_stats: bool = True) -> Node:
        """Normalise per feature; batch statistics in training mode, running
        statistics in eval mode.  Running stats use the biased batch variance
        so that train and eval agree exactly when the stats coincide."""
        x, gamma, beta = self._wrap(x), self._wrap(gamma), self._wrap(beta)
        v = x.value
        if training:
            mean = v.mean(axis=0)
            var = v.var(axis=0)
            if update_stats:
                mom = state.momentum
                state.running_mean = (1 - mom) * state.running_mean + mom * mean
                state.running_var = (1 - mom) * state.running_var + mom * var
        else:
            mean, var = state.running_mean, state.running_var
        inv_std = 1.0 / np.sqrt(var + state.eps)
        xhat = (v - mean) * inv_std
        out = gamma.value * xhat + beta.value
        return self._add(
            "batchnorm", (x, gamma, beta), out, ctx=(xhat, inv_std, bool(training))
        )

    def rbf(self, x, anchors) -> Node:
        """Squared-exponential response to each anchor: ``exp(-||x_i - c_k||^2)``."""
        x, anchors = self._wrap(x), self._wrap(anchors)
        if x.value.shape[1] != anchors.value.shape[1]:
            raise DimensionMismatchError(
                f"rbf: feature dim {x.value.shape[1]} vs anchor dim {anchors.value.shape[1]}"
            )
        diff = x.value[:, None, :] - anchors.value[None, :, :]  # (B, K, d)
        out = np.exp(-np.sum(diff * diff, axis=2))
        return self._add("rbf", (x, anchors), out, ctx=(diff, out))

    # ---- losses -----------------------------------------------------------

    def cross_entropy(self, logits, labels) -> Node:
        """Mean softmax cross-entropy of integer class labels."""
        logits = self._wrap(logits)
        labels = np.asarray(labels, dtype=int)
        if labels.shape[0] != logits.value.shape[0]:
            raise DimensionMismatchError("one label per logit row required")
        z = logits.value - logits.value.max(axis=1, keepdims=True)
        log_probs = z - np.log(np.sum(np.exp(z), axis=1, keepdims=True))
        value = -np.mean(log_probs[np.arange(len(labels)), labels])
        return self._add("cross_entropy", (logits,), value, ctx=(np.exp(log_probs), labels))

    def mse(self, pred, target) -> Node:
        """Mean squared error against a constant target array."""
        pred = self._wrap(pred)
        target = np.asarray(target, dtype=float)
        if target.shape != pred.value.shape:
            raise DimensionMismatchError(
                f"mse: prediction {pred.value.shape} vs target {target.shape}"
            )
        resid = pred.value - target
        return self._add("mse", (pred,), np.mean(resid**2), ctx=resid)


def _bw_diffuse(node, g):
    acc = g[-1]
    pt = node.ctx.matrix.T
    for t in range(g.shape[0] - 2, -1, -1):
        acc = pt @ acc + g[t]
    return (acc,)


def _bw_select_combine(node, g):
    stack, selection = node.parents
    perm, coeffs = node.ctx
    j_rows = selection.value.shape[0]
    grads = [None, None]
    if stack.needs_grad:
        ds = np.empty_like(stack.value)
        ds[1:] = np.tensordot(coeffs, g, axes=(0, 0))
        ds[0] = g[0]
        grads[0] = ds
    if selection.needs_grad:
        dc = np.tensordot(g, stack.value[1:], axes=([1, 2], [1, 2]))  # (J+1, m)
        df_ord = -dc[:j_rows] + dc[1:]
        df = np.empty_like(selection.value)
        df[perm] = df_ord
        grads[1] = df
    return tuple(grads)


def _bw_sum(node, g):
    axis, shape = node.ctx
    if axis is None:
        return (np.broadcast_to(g, shape).copy(),)
    return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)


def _bw_take(node, g):
    indices, axis = node.ctx
    out = np.zeros_like(node.parents[0].value)
    np.add.at(np.moveaxis(out, axis, 0), indices, np.moveaxis(g, axis, 0))
    return (out,)


def _bw_concat(node, g):
    sizes, axis = node.ctx
    return tuple(np.split(g, np.cumsum(sizes)[:-1], axis=axis))


def _bw_softmax(node, g):
    y, axis = node.value, node.ctx
    return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)


def _bw_affine(node, g):
    x, weight, _ = node.parents
    dx = g @ weight.value.T if x.needs_grad else None
    dw = x.value.T @ g if weight.needs_grad else None
    db = g.sum(axis=0)
    return (dx, dw, db)


def _bw_batchnorm(node, g):
    x, gamma, _ = node.parents
    xhat, inv_std, training = node.ctx
    dgamma = np.sum(g * xhat, axis=0)
    dbeta = np.sum(g, axis=0)
    dxhat = g * gamma.value
    if not training:
        return (dxhat * inv_std, dgamma, dbeta)
    b = x.value.shape[0]
    dx = (inv_std / b) * (
        b * dxhat - np.sum(dxhat, axis=0) - xhat * np.sum(dxhat * xhat, axis=0)
    )
    return (dx, dgamma, dbeta)


def _bw_rbf(node, g):
    x, anchors = node.parents
    diff, out = node.ctx
    w = (g * out)[:, :, None]  # (B, K, 1)
    dx = -2.0 * np.sum(w * diff, axis=1) if x.needs_grad else None
    dc = 2.0 * np.sum(w * diff, axis=0) if anchors.needs_grad else None
    return (dx, dc)


def _bw_cross_entropy(node, g):
    probs, labels = node.ctx
    d = probs.copy()
    d[np.arange(len(labels)), labels] -= 1.0
    return (float(g) * d / len(labels),)


_BACKWARD = {
    "diffuse": _bw_diffuse,
    "select_combine": _bw_select_combine,
    "abs": lambda node, g: (g * node.ctx,),
    "powi": lambda node, g: (g * node.ctx * node.parents[0].value ** (node.ctx - 1),),
    "sum": _bw_sum,
    "relu": lambda node, g: (g * node.ctx,),
    "softmax": _bw_softmax,
    "take": _bw_take,
    "concat": _bw_concat,
    "reshape": lambda node, g: (g.reshape(node.ctx),),
    "transpose": lambda node, g: (np.transpose(g, np.argsort(node.ctx)),),
    "scale_shift": lambda node, g: (g * node.ctx,),
    "affine": _bw_affine,
    "batchnorm": _bw_batchnorm,
    "rbf": _bw_rbf,
    "cross_entropy": _bw_cross_entropy,
    "mse": lambda node, g: (float(g) * 2.0 * node.ctx / node.ctx.size,),
}


def backward(tape: Tape, loss: Node) -> Gradients:
    """Reverse accumulation from a scalar loss node.

    Returns gradients for every registered parameter; parameters the loss
    does not depend on get zeros and are listed as disconnected.
    """
    if loss.value.size != 1:
        raise NonScalarLossError(f"loss must be scalar, got shape {loss.value.shape}")
    adjoint = [None] * len(tape.nodes)
    adjoint[loss.idx] = np.ones_like(loss.value)
    for node in reversed(tape.nodes[: loss.idx + 1]):
        g = adjoint[node.idx]
        if g is None or not node.parents:
            continue
        if not node.needs_grad:
            continue
        parent_grads = _BACKWARD[node.op](node, g)
        for parent, pg in zip(node.parents, parent_grads):
            if pg is None or not parent.needs_grad:
                continue
            if adjoint[parent.idx] is None:
                adjoint[parent.idx] = pg
            else:
                adjoint[parent.idx] = adjoint[parent.idx] + pg
    by_name = {}
    disconnected = []
    for name, node in tape.params.items():
        g = adjoint[node.idx]
        if g is None:
            g = np.zeros_like(node.value)
            disconnected.append(name)
        by_name[name] = g
    return Gradients(by_name=by_name, disconnected=tuple(disconnected))


def finite_diff_check(fn, point: dict, eps: float = 1e-6, max_coords: int = 128,
                      n_projections: int = 8, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``fn(params, want_grad)`` must return ``(value, grads_or_None)`` where
    ``grads`` maps parameter names to arrays.  Small parameters are checked
    coordinate by coordinate; larger ones through random unit projections.
    A coordinate whose one-sided slopes disagree (a kink of ``|.|`` within
    ``eps``) is excluded rather than misreported.
    """
    if not 1e-7 <= eps <= 1e-4:
        raise ValueError(f"eps must lie in [1e-7, 1e-4], got {eps}")
    rng = np.random.default_rng(seed)
    f0, grads = fn(point, True)
    worst = 0.0
    for name, value in point.items():
        value = np.asarray(value, dtype=float)
        if value.size <= max_coords:
            directions = np.eye(value.size)
        else:
            directions = rng.standard_normal((n_projections, value.size))
            directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        analytic_flat = np.asarray(grads[name]).ravel()
        for direction in directions:
            analytic = float(analytic_flat @ direction)
            bumped = dict(point)
            bumped[name] = value + eps * direction.reshape(value.shape)
            f_plus, _ = fn(bumped, False)
            bumped[name] = value - eps * direction.reshape(value.shape)
            f_minus, _ = fn(bumped, False)
            slope_plus = (f_plus - f0) / eps
            slope_minus = (f0 - f_minus) / eps
            if abs(slope_plus - slope_minus) > 1e-2 * (abs(slope_plus) + abs(slope_minus) + 1e-12):
                continue  # nondifferentiable point straddled; excluded by policy
            numeric = (f_plus - f_minus) / (2 * eps)
            err = abs(analytic - numeric) / (abs(analytic) + abs(numeric) + 1e-12)
            worst = max(worst, err)
    return worst
