"""Collapsed Gibbs sampling with top-down Metropolis-Hastings proposals.

Mixture weights and leaf parameters are marginalized out; the chain moves
only the per-datapoint assignment vectors.  One datapoint update costs
O(num_sums + dims) and never evaluates the full graph:

* the proposal draws every assignment coordinate from the collapsed
  allocation law — with probability ``m / (m + outdegree * concentration)``
  (``m`` = other attached rows) it copies the coordinate of a uniformly
  chosen other row (a straight memory lookup, equivalent to sampling
  proportional to allocation counts), otherwise it draws from the symmetric
  prior;
* because the proposal equals the allocation factor of the full conditional,
  the Metropolis-Hastings ratio reduces to the induced-tree leaf-predictive
  ratio, touching at most the ``dims`` leaves where the two trees differ.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np


@dataclass
class SweepReport:
    """What one full sweep over the data did.

    ``accepted`` counts datapoints whose proposal passed the acceptance test
    (proposals identical to the current tree always pass).  ``skipped_dims``
    counts dimension evaluations avoided because both trees selected the same
    leaf.  ``node_touches`` counts graph-node visits: induced-tree walk
    visits plus leaf predictive evaluations for this sampler; bottom-up
    sweeps report evaluated nodes (num_points * num_nodes) instead.
    """

    num_points: int
    accepted: int
    acceptance_rate: float
    skipped_dims: int
    seconds: float
    node_touches: int
    iteration: int = -1


def propose_network(state, n, concentration, rng):
    """Draw a full assignment vector for row ``n`` from the allocation law.

    Requires every row except ``n`` to be attached (call after
    ``state.detach(n)``).  Coordinate ``s`` is distributed as
    ``(alloc_counts[s, c] + concentration) / (m + outdegree*concentration)``
    — realized without reading the counts: copy the coordinate of a uniform
    other row with probability ``m / (m + outdegree*concentration)``, else
    draw uniformly from the symmetric prior.
    """
    g = state.graph
    num_sums, cs = g.num_sums, g.sum_outdegree
    m = state.num_attached
    cand = rng.integers(0, cs, size=num_sums)
    if m > 0:
        total = m + cs * float(concentration)
        from_counts = rng.random(num_sums) * total < m
        src = rng.integers(0, m, size=num_sums)
        src += src >= n
        cand = np.where(
            from_counts, state.assignments[src, state._cols], cand
        )
    return cand.astype(state.assignments.dtype)


def log_acceptance(state, n, tree_old, tree_new, skip_same_leaf=True):
    """Log acceptance ratio for moving row ``n`` between two induced trees.

    The allocation factors of target and proposal cancel exactly, leaving
    the ratio of leaf posterior predictives (row ``n`` excluded — it must be
    detached).  Dimensions where both trees select the same leaf contribute
    exactly zero and are skipped when ``skip_same_leaf``.

    Returns
    -------
    (log_ratio, skipped) : (float, int)
    """
    leaf_slots = state.graph.leaf_slots
    families = state.families
    hypers = state.hypers
    stats = state.leaf_stats
    row = state.data[n]
    old_leaf = tree_old.leaf_by_dim
    new_leaf = tree_new.leaf_by_dim
    log_ratio = 0.0
    skipped = 0
    for d in range(state.graph.dims):
        u_new = new_leaf[d]
        u_old = old_leaf[d]
        if skip_same_leaf and u_new == u_old:
            skipped += 1
            continue
        x = row[d]
        s_new = leaf_slots[u_new]
        s_old = leaf_slots[u_old]
        log_ratio += families[s_new].log_predictive(hypers[s_new], stats[s_new], x)
        log_ratio -= families[s_old].log_predictive(hypers[s_old], stats[s_old], x)
        state.node_touches += 2
    return log_ratio, skipped


def gibbs_sweep(state, concentration, rng, skip_same_leaf=True) -> SweepReport:
    """One Metropolis-within-Gibbs pass over all rows (one proposal each).

    Rejected proposals re-attach the previous assignment vector unchanged,
    out-of-tree coordinates included.
    """
    t0 = time.perf_counter()
    touches0 = state.node_touches
    accepted = 0
    skipped = 0
    for n in range(state.num_points):
        tree_old = state.detach(n)
        cand = propose_network(state, n, concentration, rng)
        tree_new = state.resolve(cand)
        log_ratio, sk = log_acceptance(
            state, n, tree_old, tree_new, skip_same_leaf
        )
        skipped += sk
        if log_ratio >= 0.0 or rng.random() < math.exp(log_ratio):
            accepted += 1
            state.attach(n, cand, tree_new)
        else:
            state.attach(n, state.assignments[n], tree_old)
    seconds = time.perf_counter() - t0
    return SweepReport(
        num_points=state.num_points,
        accepted=accepted,
        acceptance_rate=accepted / max(state.num_points, 1),
        skipped_dims=skipped,
        seconds=seconds,
        node_touches=state.node_touches - touches0,
    )


def run(graph, data, hypers, config):
    """Run a full top-down chain; see :func:`spngibbs.chain.run`."""
    from . import chain

    if config.sampler != "topdown":
        raise ValueError("topdown.run drives the top-down sampler")
    return chain.run(graph, data, hypers, config)
