"""Graph construction, sizes, evaluation, resolution, and serialization."""

import json
import math

import numpy as np
import pytest

from spngibbs.errors import GraphFormatError
from spngibbs.graph import (
    LEAF,
    PRODUCT,
    SUM,
    Node,
    SpnGraph,
    build_balanced,
    closed_form_sizes,
    count_induced_trees,
    deserialize,
    eval_log_density,
    eval_log_density_batch,
    eval_nodes,
    graph_from_dict,
    graph_to_dict,
    resolve_induced_tree,
    serialize,
    validate,
)
from spngibbs.inference import MaterializedParams

from conftest import manual_mixture_graph

# Dimension counts from common tabular benchmark suites, with the exact
# (sum count, node count) the balanced builder must produce at widths 2 and
# 4.  Duplicate dimension counts are kept on purpose: one row per dataset.
SIZE_TABLE = [
    # (dims, sums@2, nodes@2, sums@4, nodes@4)
    (9, 117, 351, 1097, 5485),
    (41, 2517, 7551, 111177, 555885),
    (6, 53, 159, 329, 1645),
    (10, 149, 447, 1609, 8045),
    (9, 117, 351, 1097, 5485),
    (22, 725, 2175, 16969, 84845),
    (13, 245, 735, 3145, 15725),
    (16, 341, 1023, 4681, 23405),
    (35, 1749, 5247, 62025, 310125),
    (19, 533, 1599, 10825, 54125),
    (13, 245, 735, 3145, 15725),
    (21, 661, 1983, 14921, 74605),
    (14, 277, 831, 3657, 18285),
    (4, 21, 63, 73, 365),
    (9, 117, 351, 1097, 5485),
    (7, 69, 207, 457, 2285),
    (12, 213, 639, 2633, 13165),
    (17, 405, 1215, 6729, 33645),
    (17, 405, 1215, 6729, 33645),
    (10, 149, 447, 1609, 8045),
    (12, 213, 639, 2633, 13165),
    (12, 213, 639, 2633, 13165),
    (14, 277, 831, 3657, 18285),
    (7, 69, 207, 457, 2285),
]


class TestBuilderSizes:
    def test_reference_size_table(self):
        built = {}
        for dims, s2, v2, s4, v4 in SIZE_TABLE:
            for cs, s_want, v_want in ((2, s2, v2), (4, s4, v4)):
                if (dims, cs) not in built:
                    built[(dims, cs)] = build_balanced(dims, cs, 2).size_report()
                report = built[(dims, cs)]
                assert report.num_sums == s_want, (dims, cs)
                assert report.num_nodes == v_want, (dims, cs)

    def test_validate_passes_on_built_graphs(self):
        for dims in (1, 2, 3, 5, 9, 17):
            for cs in (2, 3, 4):
                g = build_balanced(dims, cs, 2)
                assert validate(g) == []

    def test_single_dimension_graph(self):
        g = build_balanced(1, 3, 2)
        r = g.size_report()
        assert (r.num_sums, r.num_products, r.num_leaves) == (1, 0, 3)
        assert r.height == 2
        assert r.induced_trees == 3

    def test_leaf_spec_round_robin(self):
        spec = [("gaussian", "exponential"), ("poisson",)]
        g = build_balanced(2, 4, 2, leaf_spec=spec)
        for slot in range(g.num_leaves):
            d = g.leaf_dims[slot]
            fams = {
                g.leaf_families[s]
                for s in range(g.num_leaves)
                if g.leaf_dims[s] == d
            }
            assert fams == set(spec[d])
        assert validate(g) == []


class TestClosedFormSizes:
    def test_matches_builder_on_complete_trees(self):
        checked = 0
        for cs in (2, 3, 4):
            for cp in (2, 3, 4):
                k = 1
                while True:
                    dims = cp**k
                    if dims > 64:
                        break
                    want = closed_form_sizes(dims, cs, cp, "complete")
                    if want.num_nodes > 250_000:
                        break
                    got = build_balanced(dims, cs, cp).size_report()
                    assert got == want, (dims, cs, cp)
                    checked += 1
                    k += 1
        assert checked >= 10

    def test_matches_builder_on_skewed_trees(self):
        # Chain-shaped scopes: every product splits off single dimensions.
        for cs in (2, 3, 4):
            for cp in (2, 3):
                for k in (1, 2, 3, 4):
                    dims = k * (cp - 1) + 1
                    want = closed_form_sizes(dims, cs, cp, "skewed")
                    got = build_skewed_report(dims, cs, cp)
                    assert got == (want.num_sums, want.num_nodes), (dims, cs, cp)

    def test_induced_tree_formula_matches_enumeration(self):
        for dims, cs, cp in [(2, 2, 2), (4, 2, 2), (3, 3, 2), (4, 3, 2), (2, 8, 2)]:
            g = build_balanced(dims, cs, cp)
            report = g.size_report()
            if report.induced_trees <= 10_000:
                assert report.induced_trees == count_induced_trees(g)


def build_skewed_report(dims, cs, cp):
    """Sum/node counts for the maximally unbalanced scope recursion."""

    def sums(d):
        if d == 1:
            return 1
        return 1 + cs * ((cp - 1) * sums(1) + sums(d - (cp - 1)))

    def leaves(d):
        if d == 1:
            return cs
        return cs * ((cp - 1) * leaves(1) + leaves(d - (cp - 1)))

    def prods(d):
        if d == 1:
            return 0
        return cs * (1 + (cp - 1) * prods(1) + prods(d - (cp - 1)))

    s, l, p = sums(dims), leaves(dims), prods(dims)
    return (s, s + l + p)


class TestEvaluation:
    def test_worked_mixture_example(self):
        g = manual_mixture_graph()
        weights = np.array([[0.6, 0.3, 0.1]])
        leaf_values = [0.35, 0.2, 0.4, 0.15, 0.1, 0.2]
        params = MaterializedParams(
            g,
            weights,
            [(np.array([v, 1.0 - v]),) for v in leaf_values],
        )
        got = eval_log_density(g, params, np.zeros(2))
        assert math.exp(got) == pytest.approx(0.062, abs=1e-12)

    def test_table_root_matches_scalar_eval(self):
        g = manual_mixture_graph()
        params = MaterializedParams(
            g,
            np.array([[0.5, 0.25, 0.25]]),
            [(np.array([v, 1.0 - v]),) for v in (0.3, 0.6, 0.1, 0.9, 0.8, 0.2)],
        )
        x = np.zeros(2)
        table = eval_nodes(g, params, x)
        assert table[g.root] == pytest.approx(eval_log_density(g, params, x))
        # product value = sum of child log values
        for u in range(g.num_nodes):
            if g.kinds[u] == PRODUCT:
                assert table[u] == pytest.approx(
                    sum(table[k] for k in g.children[u])
                )

    def test_missing_dimension_marginalizes(self):
        g = manual_mixture_graph()
        params = MaterializedParams(
            g,
            np.array([[0.6, 0.3, 0.1]]),
            [(np.array([v, 1.0 - v]),) for v in (0.35, 0.2, 0.4, 0.15, 0.1, 0.2)],
        )
        # Marginalizing x1 leaves the mixture over the x0 leaf values.
        want = 0.6 * 0.35 + 0.3 * 0.4 + 0.1 * 0.1
        got = eval_log_density(g, params, np.array([0.0, np.nan]))
        assert math.exp(got) == pytest.approx(want, rel=1e-12)
        # All dims missing -> normalized: log density 0.
        got = eval_log_density(g, params, np.array([np.nan, np.nan]))
        assert got == pytest.approx(0.0, abs=1e-12)

    def test_batch_matches_scalar(self, rng):
        g = build_balanced(3, 2, 2)
        from spngibbs.leaves import default_hypers
        from spngibbs.inference import materialize
        from spngibbs.state import init_random

        X = rng.standard_normal((20, 3))
        state = init_random(g, X, default_hypers(g), rng)
        params = materialize(
            g, state.hypers, state.alloc_counts, state.leaf_stats, 1.0, rng
        )
        batch = eval_log_density_batch(g, params, X)
        for i in range(X.shape[0]):
            assert batch[i] == pytest.approx(eval_log_density(g, params, X[i]))


class TestResolve:
    def test_follows_selected_children(self, toy_graph):
        g = toy_graph
        # Sum columns are allocated in node-id order: column 0 is the root,
        # columns 1-2 the sums under the first product (dims 0, 1), columns
        # 3-4 the sums under the second product.
        coords = np.array([1, 0, 0, 0, 1])
        tree = resolve_induced_tree(g, coords)
        second_product = g.children[g.root][1]
        dim0_sum, dim1_sum = g.children[second_product]
        assert tree.leaf_by_dim[0] == g.children[dim0_sum][0]
        assert tree.leaf_by_dim[1] == g.children[dim1_sum][1]
        assert set(tree.sum_ids) == {g.root, dim0_sum, dim1_sum}
        assert tree.nodes_visited == 6  # root, product, 2 sums, 2 leaves

    def test_out_of_tree_coordinate_is_ignored(self, toy_graph):
        g = toy_graph
        base = np.array([1, 0, 0, 0, 1])
        tree = resolve_induced_tree(g, base)
        for flip_col in (1, 2):  # sums under the unselected product
            other = base.copy()
            other[flip_col] ^= 1
            alt = resolve_induced_tree(g, other)
            assert np.array_equal(alt.leaf_by_dim, tree.leaf_by_dim)

    def test_single_dim_graph(self):
        g = build_balanced(1, 4, 2)
        for c in range(4):
            tree = resolve_induced_tree(g, np.array([c]))
            assert tree.leaf_by_dim[0] == g.children[g.root][c]
            assert tree.nodes_visited == 2


class TestValidate:
    def test_reports_bad_root(self):
        nodes = [
            Node(PRODUCT, (0, 1), children=(1, 2)),
            Node(LEAF, (0,), dim=0, family="gaussian"),
            Node(LEAF, (1,), dim=1, family="gaussian"),
        ]
        g = SpnGraph(nodes, 0, 2, sum_outdegree=2, product_outdegree=2)
        assert any("root" in v for v in validate(g))

    def test_reports_incomplete_sum(self):
        # Sum children with different scopes.
        nodes = [
            Node(SUM, (0, 1), children=(1, 2)),
            Node(PRODUCT, (0, 1), children=(3, 4)),
            Node(LEAF, (0,), dim=0, family="gaussian"),
            Node(LEAF, (0,), dim=0, family="gaussian"),
            Node(LEAF, (1,), dim=1, family="gaussian"),
        ]
        g = SpnGraph(nodes, 0, 2, sum_outdegree=2, product_outdegree=2)
        assert any("scope" in v or "complete" in v for v in validate(g))

    def test_reports_overlapping_product_scopes(self):
        nodes = [
            Node(SUM, (0,), children=(1, 2)),
            Node(LEAF, (0,), dim=0, family="gaussian"),
            Node(LEAF, (0,), dim=0, family="gaussian"),
        ]
        ok = SpnGraph(nodes, 0, 1, sum_outdegree=2, product_outdegree=2)
        assert validate(ok) == []
        bad_nodes = [
            Node(SUM, (0, 1), children=(1,)),
            Node(PRODUCT, (0, 1), children=(2, 3)),
            Node(LEAF, (0,), dim=0, family="gaussian"),
            Node(LEAF, (0,), dim=0, family="gaussian"),
        ]
        g = SpnGraph(bad_nodes, 0, 2, sum_outdegree=1, product_outdegree=2)
        assert any("disjoint" in v or "decompos" in v for v in validate(g))

    def test_reports_wrong_outdegree(self):
        nodes = [
            Node(SUM, (0,), children=(1, 2, 3)),
            Node(LEAF, (0,), dim=0, family="gaussian"),
            Node(LEAF, (0,), dim=0, family="gaussian"),
            Node(LEAF, (0,), dim=0, family="gaussian"),
        ]
        g = SpnGraph(nodes, 0, 1, sum_outdegree=2, product_outdegree=2)
        assert any("children" in v for v in validate(g))


class TestSerialization:
    def test_round_trip_preserves_everything(self):
        g = build_balanced(5, 3, 2, leaf_spec=[("gaussian", "poisson")] * 5)
        blob = serialize(g)
        back = deserialize(blob)
        assert back == g
        assert serialize(back) == blob

    def test_dict_round_trip(self, toy_graph):
        assert graph_from_dict(graph_to_dict(toy_graph)) == toy_graph

    def test_rejects_malformed_json_with_position(self):
        with pytest.raises(GraphFormatError) as err:
            deserialize(b'{"format": "spngibbs-graph", ')
        assert "byte offset" in str(err.value)
        assert err.value.position is not None

    def test_rejects_wrong_format_header(self, toy_graph):
        obj = graph_to_dict(toy_graph)
        obj["format"] = "something-else"
        with pytest.raises(GraphFormatError):
            graph_from_dict(obj)

    def test_rejects_child_out_of_range(self, toy_graph):
        obj = graph_to_dict(toy_graph)
        obj["nodes"][0][2][0] = 999
        with pytest.raises(GraphFormatError) as err:
            graph_from_dict(obj)
        assert "node" in str(err.value)

    def test_serialization_is_canonical(self, toy_graph):
        blob = serialize(toy_graph)
        assert blob == serialize(deserialize(blob))
        parsed = json.loads(blob)
        assert parsed["format"] == "spngibbs-graph"
