"""Mutable latent state for the Gibbs samplers.

The state couples a graph with a dataset: one assignment vector per datapoint
(one coordinate per sum node, including sums outside the datapoint's induced
tree), the per-sum-node allocation counts those vectors imply, and per-leaf
sufficient statistics of the points each leaf currently owns.  Counts and
statistics are maintained incrementally by :meth:`LatentState.detach` /
:meth:`LatentState.attach`; :func:`recount` rebuilds both from scratch along
an independent code path so :meth:`LatentState.audit` is a real check.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from . import graph as graphmod
from .errors import BookkeepingError
from .leaves import get_family


def _assignment_dtype(sum_outdegree):
    return np.uint8 if sum_outdegree <= 256 else np.uint16


class LatentState:
    """Assignments, allocation counts, and leaf statistics for one dataset.

    Build instances with :func:`init_random` (or :func:`from_assignments`);
    the constructor wires an empty state with no rows attached.

    Attributes
    ----------
    assignments : ndarray (num_points, num_sums)
        One row per datapoint, one column per sum node, values in
        ``0..sum_outdegree-1``; stored at the smallest integer width that
        covers the outdegree.
    alloc_counts : ndarray (num_sums, sum_outdegree) of int64
        ``alloc_counts[s, c]`` = number of attached rows with coordinate
        ``c`` at sum ``s``.
    leaf_stats : list
        Slot-aligned sufficient statistics (see the leaf families).
    node_touches : int
        Instrumentation counter; induced-tree walks and leaf evaluations
        driven through the state add to it.
    """

    def __init__(self, graph, data, hypers):
        data = np.ascontiguousarray(data, dtype=float)
        if data.ndim != 2 or data.shape[1] != graph.dims:
            raise ValueError(f"data must be (n, {graph.dims}), got {data.shape}")
        if len(hypers) != graph.num_leaves:
            raise ValueError("need one hyperparameter set per leaf")
        self.graph = graph
        self.data = data
        self.hypers = list(hypers)
        self.num_points = data.shape[0]
        self.families = [get_family(tag) for tag in graph.leaf_families]
        self.assignments = np.zeros(
            (self.num_points, graph.num_sums),
            dtype=_assignment_dtype(graph.sum_outdegree),
        )
        self.alloc_counts = np.zeros(
            (graph.num_sums, graph.sum_outdegree), dtype=np.int64
        )
        self.leaf_stats = [f.make_stats() for f in self.families]
        self.num_attached = 0
        self.detached_row = None
        self.node_touches = 0
        self._cols = np.arange(graph.num_sums)

    # -- induced trees ------------------------------------------------------

    def resolve(self, coords) -> graphmod.InducedTree:
        """Induced tree selected by one assignment vector (counts touches)."""
        tree = graphmod.resolve_induced_tree(self.graph, coords)
        self.node_touches += tree.nodes_visited
        return tree

    # -- incremental bookkeeping ---------------------------------------------

    def _apply_row(self, n, tree, sign):
        leaf_slots = self.graph.leaf_slots
        row = self.data[n]
        for d in range(self.graph.dims):
            slot = leaf_slots[tree.leaf_by_dim[d]]
            fam = self.families[slot]
            if sign > 0:
                fam.add(self.leaf_stats[slot], row[d])
            else:
                fam.remove(self.leaf_stats[slot], row[d])

    def detach(self, n) -> graphmod.InducedTree:
        """Remove row ``n`` from counts and leaf statistics.

        Returns the induced tree the row was detached from (callers reuse it
        for the acceptance comparison and possible re-attach).
        """
        if self.detached_row is not None:
            raise BookkeepingError(
                f"detach({n}) while row {self.detached_row} is already detached"
            )
        coords = self.assignments[n]
        self.alloc_counts[self._cols, coords] -= 1
        tree = self.resolve(coords)
        self._apply_row(n, tree, -1)
        self.detached_row = n
        self.num_attached -= 1
        return tree

    def attach(self, n, coords, tree=None):
        """Attach row ``n`` with assignment vector ``coords``.

        ``tree`` may pass the already-resolved induced tree of ``coords`` to
        avoid a second walk.  The full vector is stored, out-of-tree
        coordinates included.
        """
        if self.detached_row != n:
            raise BookkeepingError(
                f"attach({n}) without matching detach (detached row: "
                f"{self.detached_row})"
            )
        self.assignments[n] = coords
        coords = self.assignments[n]
        self.alloc_counts[self._cols, coords] += 1
        if tree is None:
            tree = self.resolve(coords)
        self._apply_row(n, tree, +1)
        self.detached_row = None
        self.num_attached += 1

    # -- audits ---------------------------------------------------------------

    def audit(self, rel_tol=1e-9) -> list[str]:
        """Compare incremental counts/statistics against a full recount.

        Integer quantities must match exactly; running continuous sums within
        ``rel_tol`` relative error.  Returns a list of discrepancy messages
        (empty when the state is consistent).
        """
        problems = []
        if self.detached_row is not None:
            problems.append(f"row {self.detached_row} is detached")
            return problems
        counts, stats = recount(self.graph, self.data, self.assignments)
        if not np.array_equal(counts, self.alloc_counts):
            bad = np.argwhere(counts != self.alloc_counts)
            problems.append(
                f"allocation counts differ at {len(bad)} entries, first "
                f"{tuple(bad[0])}"
            )
        for slot, (fresh, live) in enumerate(zip(stats, self.leaf_stats)):
            if fresh.n != live.n:
                problems.append(
                    f"leaf {slot}: point count {live.n} != recount {fresh.n}"
                )
                continue
            if hasattr(fresh, "counts"):
                if not np.array_equal(fresh.counts, live.counts):
                    problems.append(f"leaf {slot}: category counts differ")
                continue
            for name in ("sum_x", "sum_x2", "sum_log_fact"):
                a, b = getattr(live, name), getattr(fresh, name)
                scale = max(abs(a), abs(b), 1.0)
                if abs(a - b) > rel_tol * scale:
                    problems.append(
                        f"leaf {slot}: {name} drifted ({a} vs recount {b})"
                    )
        return problems

    # -- collapsed joint ------------------------------------------------------

    def joint_log_lik(self, concentration) -> float:
        """Collapsed log p(data, assignments) for symmetric ``concentration``.

        Sum of the per-sum-node Dirichlet-multinomial allocation factors and
        the per-leaf marginal likelihoods of the points each leaf owns.
        Constants are included, so values are comparable across runs.
        """
        a = float(concentration)
        cs = self.graph.sum_outdegree
        counts = self.alloc_counts
        n_tot = self.num_attached
        network = self.graph.num_sums * (
            gammaln(cs * a) - gammaln(cs * a + n_tot) - cs * gammaln(a)
        ) + gammaln(counts + a).sum()
        leaf = 0.0
        for fam, hyper, stats in zip(self.families, self.hypers, self.leaf_stats):
            leaf += fam.log_marginal(hyper, stats)
        return float(network) + leaf


def init_random(graph, data, hypers, rng) -> LatentState:
    """Fresh state with uniformly random assignment vectors.

    Rows are attached through the incremental path, so a subsequent
    :meth:`LatentState.audit` genuinely cross-checks two code paths.
    """
    state = LatentState(graph, data, hypers)
    draws = rng.integers(
        0, graph.sum_outdegree, size=state.assignments.shape
    ).astype(state.assignments.dtype)
    for n in range(state.num_points):
        state.detached_row = n  # open the slot: row was never attached
        state.attach(n, draws[n])
    state.node_touches = 0
    return state


def from_assignments(graph, data, hypers, assignments) -> LatentState:
    """State with a given assignment matrix (rebuilds counts and stats)."""
    state = LatentState(graph, data, hypers)
    arr = np.asarray(assignments)
    if arr.shape != state.assignments.shape:
        raise ValueError(
            f"assignments must be {state.assignments.shape}, got {arr.shape}"
        )
    for n in range(state.num_points):
        state.detached_row = n
        state.attach(n, arr[n].astype(state.assignments.dtype))
    state.node_touches = 0
    return state


def recount(graph, data, assignments):
    """Rebuild allocation counts and leaf statistics from scratch.

    Counts come from per-column bincounts; leaf statistics from a top-down
    membership-mask pass (vectorized over rows), so this path shares no code
    with the incremental attach/detach updates.

    Returns
    -------
    (counts, stats) : (ndarray, list)
    """
    n_rows = assignments.shape[0]
    counts = np.empty((graph.num_sums, graph.sum_outdegree), dtype=np.int64)
    for s in range(graph.num_sums):
        counts[s] = np.bincount(
            assignments[:, s], minlength=graph.sum_outdegree
        )

    member = [None] * graph.num_nodes
    member[graph.root] = np.ones(n_rows, dtype=bool)
    for u in reversed(graph.postorder):  # root before descendants
        m = member[u]
        if m is None:
            continue
        kind = graph.kinds[u]
        if kind == graphmod.SUM:
            col = assignments[:, graph.sum_cols[u]]
            for i, c in enumerate(graph.children[u]):
                member[c] = m & (col == i)
        elif kind == graphmod.PRODUCT:
            for c in graph.children[u]:
                member[c] = m

    stats = []
    for slot, u in enumerate(graph.leaf_node_ids):
        fam = get_family(graph.leaf_families[slot])
        values = data[member[u], graph.leaf_dims[slot]]
        stats.append(fam.stats_from_values(values))
    return counts, stats
