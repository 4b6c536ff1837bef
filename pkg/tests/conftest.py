"""Shared fixtures and hypothesis strategies for the test suite."""

import numpy as np
import pytest
from hypothesis import strategies as st

from legs.data import random_graph
from legs.graph import build_graph


@pytest.fixture
def edge_graph():
    """Two nodes, one unit edge."""
    return build_graph(2, [(0, 1, 1.0)])


@pytest.fixture
def path3():
    """Three-node path graph."""
    return build_graph(3, [(0, 1, 1.0), (1, 2, 1.0)])


@pytest.fixture
def triangle():
    return build_graph(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])


@st.composite
def small_graphs(draw, max_nodes=24, weighted=False, connected=True):
    """Random graphs as (graph, seed) via the package's seeded generator."""
    n = draw(st.integers(min_value=2, max_value=max_nodes))
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    p = draw(st.sampled_from([0.15, 0.3, 0.5]))
    return random_graph(n, seed=seed, edge_prob=p, weighted=weighted, connected=connected)


@st.composite
def scale_tuples(draw, max_len=4, max_step=20):
    j = draw(st.integers(min_value=1, max_value=max_len))
    steps = draw(
        st.lists(st.integers(min_value=1, max_value=max_step), min_size=j, max_size=j,
                 unique=True)
    )
    return tuple(sorted(steps))


def rng_signal(g, seed=0, channels=None):
    rng = np.random.default_rng(seed)
    if channels is None:
        return rng.standard_normal(g.n)
    return rng.standard_normal((g.n, channels))
