"""Fixed scattering cascade: paths, moments, and the invariance theorems."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from legs.errors import BadFilterIndexError
from legs.filterbank import ScaleSequence, build_bank
from legs.graph import build_graph, lazy_diffusion, permute_nodes, weighted_norm
from legs.scattering import (
    LOWPASS,
    ScatterConfig,
    enumerate_paths,
    scatter_features,
    scatter_moment,
    scatter_node,
)

from conftest import rng_signal, small_graphs


class TestEnumeratePaths:
    def test_default_order_two(self):
        paths = enumerate_paths(ScatterConfig(J=3))
        assert paths == [(), (0,), (1,), (2,), (0, 1), (0, 2), (1, 2)]

    def test_single_band(self):
        assert enumerate_paths(ScatterConfig(J=1)) == [(), (0,)]

    def test_order_one(self):
        assert len(enumerate_paths(ScatterConfig(J=3, max_order=1))) == 4

    @settings(max_examples=20, deadline=None)
    @given(st.integers(min_value=1, max_value=8))
    def test_count_formula(self, j):
        paths = enumerate_paths(ScatterConfig(J=j))
        assert len(paths) == 1 + j + j * (j - 1) // 2

    def test_all_ordered_pairs(self):
        paths = enumerate_paths(ScatterConfig(J=3, all_order2_pairs=True))
        assert len(paths) == 1 + 3 + 6


class TestScatterNode:
    def test_empty_path_is_identity(self, path3):
        bank = build_bank(lazy_diffusion(path3), ScaleSequence((1, 2)))
        x = rng_signal(path3, seed=0)
        np.testing.assert_array_equal(scatter_node(bank, (), x), x)

    def test_single_band_example(self, edge_graph):
        bank = build_bank(lazy_diffusion(edge_graph), ScaleSequence((1,)))
        np.testing.assert_allclose(scatter_node(bank, (0,), np.array([1.0, 0.0])), [0.5, -0.5])

    def test_constant_signal_on_regular_graph(self):
        ring = build_graph(5, [(k, (k + 1) % 5, 1.0) for k in range(5)])
        bank = build_bank(lazy_diffusion(ring), ScaleSequence((1, 2, 4)))
        for p in [(0,), (1,), (0, 2), (2,)]:
            np.testing.assert_allclose(scatter_node(bank, p, np.ones(5)), 0.0, atol=1e-13)

    def test_bad_band_index(self, edge_graph):
        bank = build_bank(lazy_diffusion(edge_graph), ScaleSequence((1,)))
        with pytest.raises(BadFilterIndexError):
            scatter_node(bank, (1,), np.zeros(2))

    def test_cascade_matches_manual_composition(self, path3):
        bank = build_bank(lazy_diffusion(path3), ScaleSequence((1, 3)))
        x = rng_signal(path3, seed=4)
        manual = scatter_node(bank, (1,), np.abs(scatter_node(bank, (0,), x)))
        np.testing.assert_allclose(scatter_node(bank, (0, 1), x), manual)


class TestScatterMoment:
    def test_first_moment(self):
        assert scatter_moment(np.array([0.5, -0.5]), 1) == 1.0

    def test_second_moment(self):
        assert scatter_moment(np.array([0.5, -0.5]), 2) == 0.5

    def test_zero_signal(self):
        for q in (1, 2, 3, 4):
            assert scatter_moment(np.zeros(5), q) == 0.0

    @settings(max_examples=20, deadline=None)
    @given(st.integers(min_value=1, max_value=5))
    def test_matches_bruteforce(self, q):
        u = np.random.default_rng(q).standard_normal(9)
        assert scatter_moment(u, q) == pytest.approx(sum(abs(v) ** q for v in u))


class TestScatterFeatures:
    def test_two_node_hand_example(self, edge_graph):
        cfg = ScatterConfig(J=1, max_order=1, q_list=(1, 2), include_lowpass=False)
        fv = scatter_features(edge_graph, np.array([1.0, 0.0]), cfg, scales=ScaleSequence((1,)))
        assert fv.values.tolist() == [1.0, 1.0, 1.0, 0.5]
        assert fv.index == ((0, (), 1), (0, (), 2), (0, (0,), 1), (0, (0,), 2))

    def test_zero_signal_all_zero(self, path3):
        fv = scatter_features(path3, np.zeros(3), ScatterConfig(J=2))
        assert np.all(fv.values == 0.0)

    def test_lowpass_marker_present(self, path3):
        fv = scatter_features(path3, rng_signal(path3), ScatterConfig(J=2))
        assert any(p == LOWPASS for _, p, _ in fv.index)

    def test_feature_length(self, path3):
        cfg = ScatterConfig(J=3)
        fv = scatter_features(path3, rng_signal(path3, channels=2), cfg)
        n_paths = 7 + 1  # including low-pass
        assert len(fv) == 2 * n_paths * 4

    def test_deterministic_bit_identical(self, path3):
        x = rng_signal(path3, seed=8, channels=2)
        a = scatter_features(path3, x, ScatterConfig(J=3))
        b = scatter_features(path3, x, ScatterConfig(J=3))
        assert np.array_equal(a.values, b.values)

    def test_normalized_variant(self, path3):
        x = rng_signal(path3, seed=8)
        raw = scatter_features(path3, x, ScatterConfig(J=2))
        normed = scatter_features(path3, x, ScatterConfig(J=2, normalize_moments=True))
        np.testing.assert_allclose(normed.values, raw.values / 3.0)


class TestPermutationTheorem:
    @settings(max_examples=25, deadline=None)
    @given(small_graphs(max_nodes=16), st.integers(min_value=0, max_value=2**31 - 1))
    def test_node_level_equivariance(self, g, seed):
        rng = np.random.default_rng(seed)
        bank = build_bank(lazy_diffusion(g), ScaleSequence((1, 2, 4)))
        x = rng.standard_normal(g.n)
        pi = rng.permutation(g.n)
        gp = permute_nodes(g, pi)
        xp = np.empty_like(x)
        xp[pi] = x
        bank_p = build_bank(lazy_diffusion(gp), bank.scales)
        for p in [(0,), (2,), (0, 1), (1, 2)]:
            u = scatter_node(bank, p, x)
            up = scatter_node(bank_p, p, xp)
            expected = np.empty_like(u)
            expected[pi] = u
            assert np.max(np.abs(up - expected)) < 1e-10

    @settings(max_examples=25, deadline=None)
    @given(small_graphs(max_nodes=16), st.integers(min_value=0, max_value=2**31 - 1))
    def test_graph_level_invariance(self, g, seed):
        rng = np.random.default_rng(seed)
        cfg = ScatterConfig(J=3)
        x = rng.standard_normal((g.n, 2))
        pi = rng.permutation(g.n)
        gp = permute_nodes(g, pi)
        xp = np.empty_like(x)
        xp[pi] = x
        a = scatter_features(g, x, cfg).values
        b = scatter_features(gp, xp, cfg).values
        scale = max(np.abs(a).max(), 1e-300)
        assert np.max(np.abs(a - b)) / scale < 1e-9


class TestNonExpansiveness:
    @settings(max_examples=25, deadline=None)
    @given(small_graphs(max_nodes=20, weighted=True))
    def test_single_band_never_grows_weighted_norm(self, g):
        bank = build_bank(lazy_diffusion(g), ScaleSequence((1, 2, 4, 8)))
        x = rng_signal(g, seed=21)
        nx = weighted_norm(g, x)
        for j in range(bank.num_wavelets):
            nj = weighted_norm(g, scatter_node(bank, (j,), x))
            assert nj <= nx + 1e-9
