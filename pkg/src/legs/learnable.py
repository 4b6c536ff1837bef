"""Trainable scattering with data-driven diffusion-scale selection.

Instead of fixing wavelet scales up front, a trainable logit matrix is
pushed through a row softmax to give a row-stochastic selection matrix
``F``; row ``j`` softly picks the diffusion time of band ``j`` out of the
first ``m`` walk powers.  The filters

    band 0:    x - sum_t F[1, t] P^t x
    band j:    sum_t (F[j, t] - F[j+1, t]) P^t x
    low-pass:  sum_t F[J, t] P^t x

reduce to the fixed bank whenever the rows are one-hot, and they telescope
to the identity for any row-stochastic ``F``.  Rows are re-sorted by their
leading step every forward pass so scales stay monotone; the sort is a
constant in the gradient.

The forward pass mirrors the fixed cascade: diffusion stack, band
responses, absolute values, a second pass for increasing band pairs, and
node moments.  Feature ordering matches ``scatter_features`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .autodiff import Node, Tape
from .errors import DimensionMismatchError
from .graph import DiffusionOperator, Graph, lazy_diffusion, validate_signal
from .scattering import LOWPASS, FeatureVector, ScatterConfig, enumerate_paths

__all__ = [
    "SelectionParams",
    "SelectionMatrix",
    "DiffusionStack",
    "selection_logits",
    "init_selection",
    "selection_matrix",
    "diffusion_stack",
    "legs_filters",
    "legs_forward",
    "legs_forward_node",
    "input_stack",
]

FIXED_SHARPNESS = 500.0  # softmax is one-hot to double precision
LEARN_SHARPNESS = 2.0  # near the handcrafted prior, gradients stay informative


@dataclass(frozen=True, eq=False)
class SelectionParams:
    """Trainable scale-selection logits: one row per band, one column per step."""

    theta: np.ndarray
    trainable: bool = True

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim != 2:
            raise ValueError(f"logits must be a (J, m) matrix, got shape {theta.shape}")
        if theta.shape[0] > theta.shape[1]:
            raise ValueError(f"more bands than diffusion steps: {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise ValueError("logits must be finite")
        object.__setattr__(self, "theta", theta)

    @property
    def J(self) -> int:
        return self.theta.shape[0]

    @property
    def m(self) -> int:
        return self.theta.shape[1]


@dataclass(frozen=True, eq=False)
class SelectionMatrix:
    """Row-stochastic selection with rows sorted by leading diffusion step."""

    F: np.ndarray
    row_order: np.ndarray


@dataclass(frozen=True, eq=False)
class DiffusionStack:
    """Walk iterates ``[P x, P^2 x, ..., P^m x]`` of a channel stack, shape (m, n, c)."""

    tensor: np.ndarray

    @property
    def m(self) -> int:
        return self.tensor.shape[0]


def selection_logits(scales, m: int, sharpness: float) -> np.ndarray:
    """Logit matrix peaked at the given diffusion steps: row ``j`` carries
    ``sharpness`` at column ``scales[j] - 1`` and zero elsewhere."""
    scales = tuple(int(t) for t in scales)
    if any(not 1 <= t <= m for t in scales):
        raise ValueError(f"scales {scales} must lie in [1, {m}]")
    if len(set(scales)) != len(scales):
        raise ValueError(f"scales {scales} contain duplicates")
    theta = np.zeros((len(scales), m))
    theta[np.arange(len(scales)), np.asarray(scales) - 1] = sharpness
    return theta


def init_selection(m: int = 16, n_bands: int = 5, mode: str = "learn") -> SelectionParams:
    """Default selection parameters on the dyadic ladder ``(1, 2, 4, ...)``.

    ``mode="fixed"`` freezes a one-hot-sharp pattern; ``mode="learn"`` starts
    softly at the same pattern and leaves the logits trainable.
    """
    ladder = tuple(2**j for j in range(n_bands))
    if ladder[-1] > m:
        raise ValueError(f"dyadic ladder {ladder} exceeds {m} diffusion steps")
    if mode == "fixed":
        return SelectionParams(selection_logits(ladder, m, FIXED_SHARPNESS), trainable=False)
    if mode == "learn":
        return SelectionParams(selection_logits(ladder, m, LEARN_SHARPNESS), trainable=True)
    raise ValueError(f"unknown mode {mode!r}")


def _row_order(f_raw: np.ndarray) -> np.ndarray:
    """Stable sort of rows by argmax column (leading selected step)."""
    return np.argsort(np.argmax(f_raw, axis=1), kind="stable")


def _softmax_rows(theta: np.ndarray) -> np.ndarray:
    z = theta - theta.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def selection_matrix(params: SelectionParams) -> SelectionMatrix:
    """Row softmax of the logits with rows sorted by leading step."""
    f_raw = _softmax_rows(params.theta)
    order = _row_order(f_raw)
    return SelectionMatrix(F=f_raw[order], row_order=order)


def diffusion_stack(p: DiffusionOperator, x: np.ndarray, m: int) -> DiffusionStack:
    """First ``m`` walk iterates of a signal stack, computed recursively."""
    if m < 1:
        raise ValueError(f"need at least one diffusion step, got {m}")
    x = np.asarray(x, dtype=float)
    stack2d = x[:, None] if x.ndim == 1 else x
    out = np.empty((m,) + stack2d.shape)
    r = stack2d
    for t in range(m):
        r = p.apply(r)
        out[t] = r
    return DiffusionStack(tensor=out)


def input_stack(p: DiffusionOperator, x: np.ndarray, m: int) -> np.ndarray:
    """``(m + 1, n, c)`` stack with the undiffused signal at slice 0.

    This is the cacheable constant the trainable forward pass contracts
    against; it does not depend on the selection logits.
    """
    x = np.asarray(x, dtype=float)
    stack2d = x[:, None] if x.ndim == 1 else x
    return np.concatenate([stack2d[None], diffusion_stack(p, stack2d, m).tensor], axis=0)


def legs_filters(selection: SelectionMatrix, stack: DiffusionStack, x: np.ndarray) -> np.ndarray:
    """All band responses (plus low-pass) of a signal under a selection matrix.

    Returns ``(J + 1, n, c)``: rows ``0..J-1`` are band-pass outputs, row ``J``
    the low-pass.  Responses telescope: their sum reconstructs ``x`` for any
    row-stochastic selection.
    """
    f = selection.F
    if f.shape[1] != stack.m:
        raise DimensionMismatchError(
            f"selection has {f.shape[1]} step columns, stack has depth {stack.m}"
        )
    x = np.asarray(x, dtype=float)
    stack2d = x[:, None] if x.ndim == 1 else x
    if stack.tensor.shape[1:] != stack2d.shape:
        raise DimensionMismatchError(
            f"stack slices {stack.tensor.shape[1:]} do not match signal {stack2d.shape}"
        )
    j_rows = f.shape[0]
    coeffs = np.empty((j_rows + 1, f.shape[1]))
    coeffs[0] = -f[0]
    coeffs[1:j_rows] = f[:-1] - f[1:]
    coeffs[j_rows] = f[-1]
    out = np.tensordot(coeffs, stack.tensor, axes=(1, 0))
    out[0] += stack2d
    if x.ndim == 1:
        return out[:, :, 0]
    return out


@lru_cache(maxsize=128)
def _feature_index(cfg: ScatterConfig, n_channels: int):
    """Descriptor tuples and gather indices realising the canonical order.

    The gather maps the concatenated moment blocks
    ``[order0 | per-q first-order grids | per-q second-order grids]``
    onto channel-major (channel, path, q) order, shared by the fixed and
    trainable transforms.
    """
    j_bands = cfg.J
    n_q = len(cfg.q_list)
    c = n_channels
    off1 = n_q * c  # after the order-0 block
    size1 = (j_bands + 1) * c
    off2 = off1 + n_q * size1
    size2 = j_bands * j_bands * c

    paths = enumerate_paths(cfg)
    index = []
    gather = []
    for ch in range(c):
        entries = [(p,) for p in paths]
        if cfg.include_lowpass:
            entries.append((LOWPASS,))
        for (p,) in entries:
            for qi, q in enumerate(cfg.q_list):
                index.append((ch, p, q))
                if p == LOWPASS:
                    gather.append(off1 + qi * size1 + j_bands * c + ch)
                elif len(p) == 0:
                    gather.append(qi * c + ch)
                elif len(p) == 1:
                    gather.append(off1 + qi * size1 + p[0] * c + ch)
                else:
                    j1, j2 = p
                    gather.append(off2 + qi * size2 + j2 * j_bands * c + j1 * c + ch)
    return tuple(index), np.asarray(gather, dtype=int)


def legs_forward_node(
    tape: Tape,
    g: Graph,
    x: np.ndarray,
    theta: Node,
    cfg: ScatterConfig,
    base: np.ndarray | None = None,
    operator: DiffusionOperator | None = None,
    m: int | None = None,
):
    """Record the trainable scattering forward pass on a tape.

    ``theta`` is the (J, m) logit node; ``base`` may carry a precomputed
    ``input_stack`` (it is selection-independent and worth caching across
    epochs).  Returns the flat feature node and its descriptor tuple.
    """
    x = validate_signal(g, x)
    stack2d = x[:, None] if x.ndim == 1 else x
    n, c = stack2d.shape
    j_bands, steps = theta.value.shape
    if m is not None and m != steps:
        raise DimensionMismatchError(f"logits have {steps} step columns, expected {m}")
    if cfg.J != j_bands:
        raise ValueError(f"config expects {cfg.J} bands, logits define {j_bands}")
    if operator is None:
        operator = lazy_diffusion(g)
    if base is None:
        base = input_stack(operator, stack2d, steps)

    f_node = tape.softmax(theta, axis=-1)
    perm = _row_order(f_node.value)

    first = tape.select_combine(tape.constant(base), f_node, perm)  # (J+1, n, c)
    abs_first = tape.abs(first)
    moment_blocks = []
    # order-0 block: raw-signal moments, constant under the selection
    order0 = np.concatenate([np.sum(np.abs(stack2d) ** q, axis=0) for q in cfg.q_list])
    moment_blocks.append(tape.constant(order0))
    for q in cfg.q_list:
        m1 = tape.sum(tape.powi(abs_first, q), axis=1)  # (J+1, c)
        moment_blocks.append(tape.reshape(m1, (-1,)))

    has_pairs = cfg.max_order >= 2 and any(len(p) == 2 for p in enumerate_paths(cfg))
    if has_pairs:
        sources = tape.take(abs_first, np.arange(j_bands), axis=0)  # (J, n, c)
        merged = tape.reshape(tape.transpose(sources, (1, 0, 2)), (n, j_bands * c))
        second_stack = tape.diffuse(merged, operator, steps)
        second = tape.select_combine(second_stack, f_node, perm)
        abs_second = tape.abs(tape.take(second, np.arange(j_bands), axis=0))
        for q in cfg.q_list:
            m2 = tape.sum(tape.powi(abs_second, q), axis=1)  # (J, J*c)
            moment_blocks.append(tape.reshape(m2, (-1,)))

    index, gather = _feature_index(cfg, c)
    feats = tape.take(tape.concat(moment_blocks, axis=0), gather, axis=0)
    if cfg.normalize_moments:
        feats = tape.scale_shift(feats, 1.0 / g.n, 0.0)
    return feats, index


def legs_forward(g: Graph, x: np.ndarray, params: SelectionParams, cfg: ScatterConfig) -> FeatureVector:
    """Graph-level features of the trainable transform at fixed logits.

    Differentiability is exercised through ``legs_forward_node``; this
    wrapper just evaluates and matches ``scatter_features`` ordering.
    """
    tape = Tape()
    theta = tape.constant(params.theta)
    node, index = legs_forward_node(tape, g, x, theta, cfg)
    return FeatureVector(values=node.value.copy(), index=index)
