"""Uncollapsed baseline sampler: prior draws, ancestral descent, sweep costs."""

import math

import numpy as np
import pytest
from conftest import manual_mixture_graph

from spngibbs import chain
from spngibbs.bottomup import (
    ancestral_assignment,
    gibbs_sweep_bottom_up,
    prior_assignment,
    run as run_bottom_up,
)
from spngibbs.graph import build_balanced, eval_nodes
from spngibbs.inference import MaterializedParams, materialize
from spngibbs.leaves import HyperDefaults, get_family
from spngibbs.state import init_random


def _default_hypers(graph):
    defaults = HyperDefaults()
    return [get_family(tag).default_hyper(defaults) for tag in graph.leaf_families]


def _mixture_params(graph):
    """Hand-picked three-branch mixture over two binary dimensions."""
    weights = np.array([[0.6, 0.3, 0.1]])
    leaf_probs = [0.35, 0.2, 0.4, 0.15, 0.1, 0.2]
    leaf_params = [(np.array([p, 1.0 - p]),) for p in leaf_probs]
    return MaterializedParams(graph, weights, leaf_params)


class TestPriorAssignment:
    def test_matches_weight_rows(self, toy_graph, rng):
        weights = np.array(
            [
                [0.2, 0.8],
                [0.5, 0.5],
                [0.9, 0.1],
                [1.0, 0.0],
                [0.35, 0.65],
            ]
        )
        leaf_params = [(0.0, 1.0)] * toy_graph.num_leaves
        params = MaterializedParams(toy_graph, weights, leaf_params)
        draws = 20_000
        hits = np.zeros_like(weights)
        for _ in range(draws):
            coords = prior_assignment(params, rng)
            hits[np.arange(5), coords] += 1
        freq = hits / draws
        sigma = np.sqrt(weights * (1 - weights) / draws)
        assert np.all(np.abs(freq - weights) < 4 * sigma + 1e-9)
        assert hits[3, 1] == 0  # zero-weight branch is never drawn


class TestAncestralDescent:
    def test_branch_posterior_frequencies(self, rng):
        graph = manual_mixture_graph()
        params = _mixture_params(graph)
        x = np.zeros(2)
        table = eval_nodes(graph, params, x)
        assert math.exp(table[graph.root]) == pytest.approx(0.062, abs=1e-12)

        # Posterior over the root's three branches at x = (0, 0).
        want = np.array([0.042, 0.018, 0.002]) / 0.062
        draws = 100_000
        hits = np.zeros(3)
        for _ in range(draws):
            coords = prior_assignment(params, rng)
            tree = ancestral_assignment(graph, params, table, coords, rng)
            hits[coords[0]] += 1
            # The induced tree must be the branch the coordinate names.
            branch = graph.children[graph.root][coords[0]]
            assert tuple(tree.leaf_by_dim) == graph.children[branch]
        freq = hits / draws
        sigma = np.sqrt(want * (1 - want) / draws)
        assert np.all(np.abs(freq - want) < 4 * sigma)

    def test_one_hot_weights_are_deterministic(self, rng):
        graph = manual_mixture_graph()
        weights = np.array([[0.0, 1.0, 0.0]])
        leaf_params = [(np.array([0.5, 0.5]),)] * 6
        params = MaterializedParams(graph, weights, leaf_params)
        table = eval_nodes(graph, params, np.zeros(2))
        for _ in range(50):
            coords = prior_assignment(params, rng)
            tree = ancestral_assignment(graph, params, table, coords, rng)
            assert coords[0] == 1
            assert tuple(tree.leaf_by_dim) == graph.children[graph.children[graph.root][1]]

    def test_out_of_tree_coordinates_keep_prior_draw(self, toy_graph, rng):
        """Sums outside the walk keep whatever the prior draw put there."""
        weights = np.full((5, 2), 0.5)
        weights[0] = [1.0, 0.0]  # root always descends into branch 0
        leaf_params = [(0.0, 1.0)] * toy_graph.num_leaves
        params = MaterializedParams(toy_graph, weights, leaf_params)
        table = eval_nodes(toy_graph, params, np.zeros(toy_graph.dims))
        in_tree = set()
        marker = None
        for _ in range(200):
            coords = prior_assignment(params, rng)
            before = coords.copy()
            tree = ancestral_assignment(toy_graph, params, table, coords, rng)
            cols = [toy_graph.sum_cols[s] for s in tree.sum_ids]
            in_tree.update(cols)
            out = [c for c in range(5) if c not in cols]
            marker = out
            assert np.array_equal(coords[out], before[out])
        # With a one-hot root the same two dimension sums are always in-tree,
        # so two sums stayed out-of-tree in every iteration.
        assert len(in_tree) == 3
        assert len(marker) == 2


class TestMaterialize:
    def test_zero_counts_draw_from_symmetric_prior(self, rng):
        graph = manual_mixture_graph()
        hypers = _default_hypers(graph)
        counts = np.zeros((1, 3), dtype=np.int64)
        stats = [get_family(t).make_stats() for t in graph.leaf_families]
        draws = np.stack(
            [
                materialize(graph, hypers, counts, stats, 1.0, rng).weights[0]
                for _ in range(2000)
            ]
        )
        assert np.allclose(draws.sum(axis=1), 1.0, atol=1e-12)
        se = math.sqrt((1 / 3) * (2 / 3) / (3 * 1.0 + 1)) / math.sqrt(2000)
        assert np.all(np.abs(draws.mean(axis=0) - 1 / 3) < 5 * se)

    def test_heavy_counts_pin_the_weights(self, rng):
        graph = manual_mixture_graph()
        hypers = _default_hypers(graph)
        counts = np.array([[8000, 1500, 500]], dtype=np.int64)
        stats = [get_family(t).make_stats() for t in graph.leaf_families]
        params = materialize(graph, hypers, counts, stats, 1.0, rng)
        assert np.all(np.abs(params.weights[0] - [0.8, 0.15, 0.05]) < 0.02)


class TestSweep:
    def test_touch_counter_is_rows_times_nodes(self, rng):
        graph = build_balanced(3, 2, 2)
        data = rng.normal(size=(30, 3))
        state = init_random(graph, data, _default_hypers(graph), rng)
        report = gibbs_sweep_bottom_up(state, 1.0, rng)
        assert report.node_touches == 30 * graph.num_nodes
        assert report.accepted == 30
        assert report.acceptance_rate == 1.0
        assert state.audit() == []

    def test_assignments_actually_move(self, rng):
        graph = build_balanced(3, 2, 2)
        data = rng.normal(size=(30, 3))
        state = init_random(graph, data, _default_hypers(graph), rng)
        before = state.assignments.copy()
        gibbs_sweep_bottom_up(state, 1.0, rng)
        assert not np.array_equal(before, state.assignments)

    def test_run_checks_sampler_tag(self, rng):
        graph = build_balanced(2, 2, 2)
        data = rng.normal(size=(8, 2))
        cfg = chain.RunConfig(sampler="topdown", iterations=2, seed=0)
        with pytest.raises(ValueError, match="bottomup"):
            run_bottom_up(graph, data, _default_hypers(graph), cfg)

    def test_same_seed_reproduces_run(self, rng):
        graph = build_balanced(2, 2, 2)
        data = rng.normal(size=(12, 2))
        hypers = _default_hypers(graph)
        cfg = chain.RunConfig(sampler="bottomup", iterations=6, burn_in=2, seed=3)
        r1 = chain.run(graph, data, hypers, cfg)
        r2 = chain.run(graph, data, hypers, cfg)
        assert np.array_equal(r1.samples, r2.samples)
        assert r1.state.audit() == []
