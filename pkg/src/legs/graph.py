"""Weighted undirected graphs, the lazy diffusion operator, and node features.

A graph is stored with a symmetric non-negative adjacency matrix ``W`` (zero
diagonal) and the degree vector ``d`` with ``d_i = sum_j W[i, j]``.  Isolated
nodes receive a unit self-loop, recorded separately from ``W`` so that the
degree matrix stays invertible; the self-loop only enters the diffusion
operator and the degrees, never the adjacency itself.

The lazy random walk ``P = (I + W D^{-1}) / 2`` is column-stochastic: at each
step the walker stays put or moves to a neighbour with equal probability.
``Graph`` and ``DiffusionOperator`` are immutable after construction and safe
to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path

from .errors import (
    DimensionMismatchError,
    DuplicateEdgeError,
    NonPositiveWeightError,
    ZeroDegreeError,
)

__all__ = [
    "Graph",
    "DiffusionOperator",
    "build_graph",
    "lazy_diffusion",
    "weighted_norm",
    "eccentricity",
    "clustering_coefficient",
    "conjugate_spectrum",
    "permute_nodes",
    "validate_signal",
]


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable weighted undirected graph.

    Attributes
    ----------
    n : number of nodes.
    edges : tuple of ``(i, j, weight)`` with ``i < j`` and ``weight > 0``.
    adjacency : n x n symmetric CSR matrix with zero diagonal.
    degrees : row sums of the adjacency plus the self-loop fix, so every
        entry is strictly positive.
    self_loops : boolean mask of nodes that received the unit self-loop
        (exactly the isolated nodes).
    """

    n: int
    edges: tuple
    adjacency: sp.csr_matrix
    degrees: np.ndarray
    self_loops: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class DiffusionOperator:
    """Column-stochastic lazy random walk matrix ``P = (I + W D^{-1}) / 2``."""

    matrix: sp.csr_matrix
    n: int

    def apply(self, x: np.ndarray) -> np.ndarray:
        """One diffusion step ``P x``; ``x`` may carry trailing channel axes."""
        return self.matrix @ x


def build_graph(n: int, edges) -> Graph:
    """Assemble a graph from an undirected edge list.

    Node ids must lie in ``[0, n)``, self-edges and duplicate undirected
    edges are rejected, and all weights must be strictly positive.  Isolated
    nodes are given a unit self-loop (tracked in ``Graph.self_loops``) so the
    diffusion operator is well defined on every node.
    """
    if n <= 0:
        raise ValueError(f"node count must be positive, got {n}")
    seen = set()
    canonical = []
    for i, j, w in edges:
        i, j = int(i), int(j)
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError(f"edge ({i},{j}) references a node outside [0,{n})")
        if i == j:
            raise ValueError(f"self-edge ({i},{i}) not allowed")
        w = float(w)
        if not w > 0:
            raise NonPositiveWeightError(f"edge ({i},{j}) has weight {w}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise DuplicateEdgeError(f"undirected edge {key} supplied twice")
        seen.add(key)
        canonical.append((key[0], key[1], w))

    if canonical:
        ii = np.fromiter((e[0] for e in canonical), int, len(canonical))
        jj = np.fromiter((e[1] for e in canonical), int, len(canonical))
        ww = np.fromiter((e[2] for e in canonical), float, len(canonical))
        adj = sp.coo_matrix(
            (np.concatenate([ww, ww]), (np.concatenate([ii, jj]), np.concatenate([jj, ii]))),
            shape=(n, n),
        ).tocsr()
    else:
        adj = sp.csr_matrix((n, n))

    degrees = np.asarray(adj.sum(axis=1)).ravel()
    self_loops = degrees == 0.0
    degrees = degrees + self_loops  # unit self-loop on isolated nodes
    return Graph(
        n=n,
        edges=tuple(canonical),
        adjacency=adj,
        degrees=degrees,
        self_loops=self_loops,
    )


def lazy_diffusion(g: Graph) -> DiffusionOperator:
    """Lazy random walk operator ``P = (I + W D^{-1}) / 2``.

    Columns of ``P`` sum to one and every diagonal entry is at least 1/2
    (isolated nodes become absorbing with ``P[i, i] = 1``).
    """
    if np.any(g.degrees <= 0.0):
        raise ZeroDegreeError("graph has zero-degree nodes; preprocessing missing")
    w_eff = g.adjacency
    if g.self_loops.any():
        w_eff = w_eff + sp.diags(g.self_loops.astype(float))
    inv_deg = sp.diags(1.0 / g.degrees)
    p = 0.5 * (sp.eye(g.n, format="csr") + w_eff @ inv_deg)
    return DiffusionOperator(matrix=p.tocsr(), n=g.n)


def weighted_norm(g: Graph, x: np.ndarray) -> float:
    """Degree-weighted norm ``||D^{-1/2} x||_2 = sqrt(sum_i x_i^2 / d_i)``."""
    if np.any(g.degrees <= 0.0):
        raise ZeroDegreeError("degree-weighted norm needs positive degrees")
    x = validate_signal(g, x)
    return float(np.sqrt(np.sum(x * x / g.degrees)))


def eccentricity(g: Graph) -> np.ndarray:
    """Per-node eccentricity: max hop distance to any reachable node.

    Distances are unweighted shortest paths; node pairs in different
    components are ignored, so an isolated node has eccentricity 0.
    """
    if g.n == 1:
        return np.zeros(1)
    hops = shortest_path(g.adjacency, method="auto", directed=False, unweighted=True)
    hops[~np.isfinite(hops)] = 0.0
    return hops.max(axis=1)


def clustering_coefficient(g: Graph) -> np.ndarray:
    """Fraction of realised edges among each node's neighbour pairs.

    For a node with ``k`` neighbours and ``e`` edges between them the value is
    ``2 e / (k (k - 1))``; nodes with fewer than two neighbours get 0.  Edge
    weights are ignored, only the connectivity pattern counts.
    """
    a = (g.adjacency > 0).astype(float)
    k = np.asarray(a.sum(axis=1)).ravel()
    closed = (a @ a @ a).diagonal()  # closed 3-walks = 2 * triangles
    denom = k * (k - 1.0)
    out = np.zeros(g.n)
    mask = denom > 0
    out[mask] = closed[mask] / denom[mask]
    return out


def conjugate_spectrum(g: Graph) -> np.ndarray:
    """Eigenvalues of the symmetric conjugate ``M = D^{-1/2} P D^{1/2}``.

    Diagnostic only: the laziness of the walk places the spectrum in [0, 1].
    Densifies the operator, so intended for small graphs.
    """
    p = lazy_diffusion(g).matrix.toarray()
    dhalf = np.sqrt(g.degrees)
    m = (p / dhalf[:, None]) * dhalf[None, :]
    return np.linalg.eigvalsh(0.5 * (m + m.T))


def permute_nodes(g: Graph, permutation) -> Graph:
    """Relabelled copy: node ``i`` becomes ``permutation[i]``.

    Used by the invariance checks; signals move along via
    ``x_new[permutation] = x_old``.
    """
    pi = np.asarray(permutation, dtype=int)
    if sorted(pi.tolist()) != list(range(g.n)):
        raise ValueError("not a permutation of the node set")
    return build_graph(g.n, [(pi[i], pi[j], w) for i, j, w in g.edges])


def validate_signal(g: Graph, x: np.ndarray) -> np.ndarray:
    """Check that ``x`` is a finite signal (or channel stack) on ``g``."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != g.n:
        raise DimensionMismatchError(f"signal has {x.shape[0]} rows, graph has {g.n} nodes")
    if not np.all(np.isfinite(x)):
        raise ValueError("signal contains non-finite entries")
    return x
