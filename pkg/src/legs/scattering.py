"""Fixed geometric scattering: wavelet cascades and graph-level moments.

Node-level features are built by alternating band-pass filters with
element-wise absolute values,

    u_p(x) = Psi_{j_m} | Psi_{j_{m-1}} ... | Psi_{j_1} x | ... |,

indexed by a path ``p = (j_1, ..., j_m)`` of wavelet bands.  Graph-level
features sum ``|u_p(x)|^q`` over nodes, which makes them invariant to node
permutations while the node-level map stays equivariant.

The default path set keeps orders 0-2 with strictly increasing bands in
second-order paths; decreasing-band responses carry little energy.  The
low-pass response of the raw signal is aggregated alongside the paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadFilterIndexError
from .filterbank import FilterBank, ScaleSequence, build_bank, dyadic_scales, response_stack
from .graph import Graph, lazy_diffusion, validate_signal

__all__ = [
    "LOWPASS",
    "ScatterConfig",
    "FeatureVector",
    "enumerate_paths",
    "scatter_node",
    "scatter_moment",
    "scatter_features",
]

# Path marker for the aggregated low-pass channel (not a cascade path).
LOWPASS = "lp"


@dataclass(frozen=True)
class ScatterConfig:
    """Cascade shape: band count ``J``, depth, moments, and aggregation flags."""

    J: int = 5
    max_order: int = 2
    q_list: tuple = (1, 2, 3, 4)
    include_lowpass: bool = True
    all_order2_pairs: bool = False  # default: strictly increasing (j1 < j2)
    normalize_moments: bool = False  # divide moments by node count

    def __post_init__(self):
        if self.J < 1:
            raise ValueError("need at least one wavelet band")
        if self.max_order not in (0, 1, 2):
            raise ValueError(f"max_order must be 0, 1 or 2, got {self.max_order}")
        q = tuple(int(v) for v in self.q_list)
        if len(q) == 0 or any(v < 1 for v in q):
            raise ValueError(f"moment orders must be positive integers, got {self.q_list}")
        object.__setattr__(self, "q_list", q)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Flat feature values aligned with ``(channel, path, q)`` descriptors."""

    values: np.ndarray
    index: tuple

    def __len__(self):
        return len(self.values)


def enumerate_paths(cfg: ScatterConfig) -> list:
    """Deterministic path list: order 0, then order 1, then order 2.

    Second-order paths pair bands ``(j1, j2)`` with ``j1 < j2`` unless
    ``all_order2_pairs`` asks for every ordered pair with ``j1 != j2``.
    """
    paths = [()]
    if cfg.max_order >= 1:
        paths += [(j,) for j in range(cfg.J)]
    if cfg.max_order >= 2:
        if cfg.all_order2_pairs:
            paths += [(a, b) for a in range(cfg.J) for b in range(cfg.J) if a != b]
        else:
            paths += [(a, b) for a in range(cfg.J) for b in range(a + 1, cfg.J)]
    return paths


def scatter_node(bank: FilterBank, p, x: np.ndarray) -> np.ndarray:
    """Node-level cascade response for path ``p``; the empty path returns ``x``.

    Absolute values sit between consecutive filters, not after the last one.
    """
    x = np.asarray(x, dtype=float)
    for j in p:
        if not 0 <= j < bank.num_wavelets:
            raise BadFilterIndexError(f"path band {j} outside [0, {bank.num_wavelets})")
    r = x
    for k, j in enumerate(p):
        if k > 0:
            r = np.abs(r)
        r = response_stack(bank, r)[j]
    return r


def scatter_moment(u: np.ndarray, q: int) -> float:
    """Unnormalised node moment ``sum_i |u_i|^q``."""
    if q < 1:
        raise ValueError(f"moment order must be >= 1, got {q}")
    return float(np.sum(np.abs(u) ** q))


def scatter_features(
    g: Graph,
    x: np.ndarray,
    cfg: ScatterConfig,
    scales: ScaleSequence | None = None,
) -> FeatureVector:
    """Graph-level scattering features of a signal (or channel stack).

    ``scales`` defaults to the dyadic ladder with ``cfg.J`` bands.  The
    output is ordered channel-major, then by path (low-pass marker last),
    then by moment order, matching the descriptor tuples in ``index``.
    """
    x = validate_signal(g, x)
    stack = x[:, None] if x.ndim == 1 else x
    if scales is None:
        scales = dyadic_scales(cfg.J - 1)
    if scales.J != cfg.J:
        raise ValueError(f"scale sequence has {scales.J} bands, config expects {cfg.J}")
    bank = build_bank(lazy_diffusion(g), scales)
    paths = enumerate_paths(cfg)

    # One sweep for all first-order bands (+ low-pass); reuse per second-order source.
    first = response_stack(bank, stack)  # (J+1, n, c)
    second = {}
    if cfg.max_order >= 2:
        needed = sorted({p[0] for p in paths if len(p) == 2})
        for j1 in needed:
            second[j1] = response_stack(bank, np.abs(first[j1]))

    norm = 1.0 / g.n if cfg.normalize_moments else 1.0
    n_channels = stack.shape[1]
    values = []
    index = []
    for ch in range(n_channels):
        responses = []
        for p in paths:
            if len(p) == 0:
                responses.append((p, stack[:, ch]))
            elif len(p) == 1:
                responses.append((p, first[p[0], :, ch]))
            else:
                responses.append((p, second[p[0]][p[1], :, ch]))
        if cfg.include_lowpass:
            responses.append((LOWPASS, first[cfg.J, :, ch]))
        for p, u in responses:
            a = np.abs(u)
            for q in cfg.q_list:
                values.append(norm * float(np.sum(a**q)))
                index.append((ch, p, q))
    return FeatureVector(values=np.asarray(values), index=tuple(index))
