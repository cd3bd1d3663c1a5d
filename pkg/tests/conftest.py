"""Shared fixtures: small hand-built graphs and synthetic data."""

import numpy as np
import pytest

from spngibbs.graph import LEAF, PRODUCT, SUM, Node, SpnGraph, build_balanced


def manual_mixture_graph():
    """Root sum over three products, each covering both dims with one leaf.

    The classic two-dimensional worked example: one mixture node whose
    components factorize over (x0, x1), with two-category leaves so leaf
    densities can be dialed in exactly.
    """
    nodes = [
        Node(SUM, (0, 1), children=(1, 2, 3)),
        Node(PRODUCT, (0, 1), children=(4, 5)),
        Node(PRODUCT, (0, 1), children=(6, 7)),
        Node(PRODUCT, (0, 1), children=(8, 9)),
        Node(LEAF, (0,), dim=0, family="categorical:2"),
        Node(LEAF, (1,), dim=1, family="categorical:2"),
        Node(LEAF, (0,), dim=0, family="categorical:2"),
        Node(LEAF, (1,), dim=1, family="categorical:2"),
        Node(LEAF, (0,), dim=0, family="categorical:2"),
        Node(LEAF, (1,), dim=1, family="categorical:2"),
    ]
    return SpnGraph(nodes, root=0, dims=2, sum_outdegree=3, product_outdegree=2)


@pytest.fixture
def toy_graph():
    """Smallest interesting built graph: D=2, sum width 2 -> 5 sum nodes."""
    return build_balanced(2, 2, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)


def gaussian_leaf_graph(dims, cs, cp=2):
    return build_balanced(dims, cs, cp)
