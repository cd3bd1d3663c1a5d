"""Uncollapsed baseline sampler.

One sweep draws concrete network parameters from their full conditional,
then redraws every row's assignment vector by ancestral sampling: a full
bottom-up evaluation of the node table at the row, followed by a top-down
descent that picks each in-tree sum child in proportion to weight times
child value and every out-of-tree coordinate from its weight row alone.
Each row costs a whole-network evaluation, which is what makes this the
slow reference point for the collapsed sampler.
"""

from __future__ import annotations

import time

import numpy as np

from .graph import PRODUCT, SUM, InducedTree, eval_nodes
from .inference import materialize
from .topdown import SweepReport


def prior_assignment(params, rng) -> np.ndarray:
    """Draw a full assignment vector from the weight rows alone.

    Vectorized inverse-cdf draw: one uniform per sum node against its row's
    cumulative weights.
    """
    cum = np.cumsum(params.weights, axis=1)
    u = rng.random(params.weights.shape[0])
    coords = (u[:, None] > cum).sum(axis=1)
    return np.minimum(coords, params.weights.shape[1] - 1)


def ancestral_assignment(graph, params, table, coords, rng) -> InducedTree:
    """Overwrite in-tree coordinates of ``coords`` given a node value table.

    Starting at the root, each visited sum node redraws its coordinate in
    proportion to ``weight * exp(child value)``; product nodes descend into
    all children.  ``coords`` already holds prior draws for every sum node,
    so after the walk it is a complete sample of the assignment vector.
    Returns the induced tree of the walk.
    """
    kinds = graph.kinds
    children = graph.children
    sum_cols = graph.sum_cols
    leaf_dim = graph.leaf_dim_of_node
    leaf_by_dim = np.full(graph.dims, -1, dtype=np.int64)
    sum_ids: list[int] = []
    visited = 0
    stack = [graph.root]
    while stack:
        u = stack.pop()
        visited += 1
        kind = kinds[u]
        if kind == SUM:
            col = sum_cols[u]
            sum_ids.append(u)
            kids = children[u]
            logits = params.log_weights[col] + table[list(kids)]
            logits = logits - logits.max()
            probs = np.exp(logits)
            cum = np.cumsum(probs)
            i = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
            i = min(i, len(kids) - 1)
            coords[col] = i
            stack.append(kids[i])
        elif kind == PRODUCT:
            stack.extend(children[u])
        else:
            leaf_by_dim[leaf_dim[u]] = u
    return InducedTree(leaf_by_dim=leaf_by_dim, sum_ids=sum_ids, nodes_visited=visited)


def gibbs_sweep_bottom_up(state, concentration, rng) -> SweepReport:
    """One full sweep of the baseline sampler over every row.

    The parameter draw happens once per sweep; given it, row assignments are
    conditionally independent, so the per-row loop is a valid systematic
    scan.  Bookkeeping (detach/attach) keeps allocation counts and leaf
    statistics current for the next sweep's parameter draw.

    The reported ``node_touches`` is the evaluation workload: every sweep
    computes a full node table per row, exactly ``num_points * num_nodes``
    touches, regardless of how cheap the descent itself is.
    """
    started = time.perf_counter()
    graph = state.graph
    data = state.data
    n_rows = data.shape[0]
    params = materialize(
        graph, state.hypers, state.alloc_counts, state.leaf_stats, concentration, rng
    )
    table = np.empty(graph.num_nodes)
    for n in range(n_rows):
        state.detach(n)
        eval_nodes(graph, params, data[n], table=table)
        coords = prior_assignment(params, rng)
        tree = ancestral_assignment(graph, params, table, coords, rng)
        state.attach(n, coords, tree=tree)
    return SweepReport(
        num_points=n_rows,
        accepted=n_rows,
        acceptance_rate=1.0,
        skipped_dims=0,
        seconds=time.perf_counter() - started,
        node_touches=n_rows * graph.num_nodes,
    )


def run(graph, data, hypers, config):
    """Run a full baseline chain; see ``chain.run`` for the report format."""
    from . import chain

    if config.sampler != "bottomup":
        raise ValueError(f"config.sampler must be 'bottomup', got {config.sampler!r}")
    return chain.run(graph, data, hypers, config)
