"""Turning stored assignments into densities.

The collapsed samplers store only assignment matrices.  To answer density
queries, each stored sample is turned into one concrete parameterization of
the network — mixture weights drawn from their Dirichlet full conditional
and leaf parameters from their conjugate posteriors — and test densities are
averaged over samples in the density domain (log-mean-exp).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import state as statemod
from .errors import NumericError
from .graph import eval_log_density, eval_log_density_batch
from .leaves import get_family


class MaterializedParams:
    """One concrete parameterization of a graph.

    Parameters
    ----------
    graph : SpnGraph
    weights : ndarray (num_sums, sum_outdegree)
        Rows must be non-negative and sum to one.
    leaf_params : list
        Slot-aligned family-specific parameter tuples.
    """

    def __init__(self, graph, weights, leaf_params):
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (graph.num_sums, graph.sum_outdegree):
            raise ValueError(
                f"weights must be ({graph.num_sums}, {graph.sum_outdegree}), "
                f"got {weights.shape}"
            )
        if len(leaf_params) != graph.num_leaves:
            raise ValueError("need one parameter tuple per leaf")
        if np.any(weights < 0) or not np.allclose(
            weights.sum(axis=1), 1.0, atol=1e-12, rtol=0.0
        ):
            raise ValueError("weight rows must be non-negative and sum to 1")
        self.graph = graph
        self.weights = weights
        with np.errstate(divide="ignore"):
            self.log_weights = np.log(weights)
        self.leaf_params = list(leaf_params)
        # Pack per-family parameter arrays once for vectorized leaf lookups.
        groups: dict[str, list[int]] = {}
        for slot, tag in enumerate(graph.leaf_families):
            groups.setdefault(tag, []).append(slot)
        self._groups = []
        for tag, slots in groups.items():
            fam = get_family(tag)
            slots_arr = np.asarray(slots, dtype=np.int64)
            dims_arr = graph.leaf_dims[slots_arr]
            packed = fam.pack([self.leaf_params[s] for s in slots])
            self._groups.append((fam, slots_arr, dims_arr, packed))

    def leaf_log_pdfs(self, x) -> np.ndarray:
        """Slot-aligned leaf log densities at one data vector.

        NaN marks a missing dimension; its leaves contribute log 1 = 0.
        """
        x = np.asarray(x, dtype=float)
        out = np.empty(self.graph.num_leaves)
        for fam, slots, dims, packed in self._groups:
            vals = x[dims]
            with np.errstate(invalid="ignore", divide="ignore"):
                got = fam.log_pdf_packed(packed, vals)
            out[slots] = np.where(np.isnan(vals), 0.0, got)
        return out

    def leaf_log_pdfs_batch(self, X) -> np.ndarray:
        """Like :meth:`leaf_log_pdfs`, for every row of ``X``; shape (n, L)."""
        X = np.asarray(X, dtype=float)
        out = np.empty((X.shape[0], self.graph.num_leaves))
        for fam, slots, dims, packed in self._groups:
            vals = X[:, dims]
            with np.errstate(invalid="ignore", divide="ignore"):
                got = fam.log_pdf_packed(packed, vals)
            out[:, slots] = np.where(np.isnan(vals), 0.0, got)
        return out


def materialize(graph, hypers, alloc_counts, leaf_stats, concentration, rng):
    """Draw one parameterization from the full conditional given assignments.

    Weight rows are Dirichlet(concentration + allocation counts) — drawn as
    normalized standard-gamma variates — and each leaf draws from its
    conjugate posterior.  Shared by the bottom-up sampler's parameter step
    and by query-time materialization, so both are identical in law.
    """
    shape = np.asarray(alloc_counts, dtype=float) + float(concentration)
    gammas = rng.standard_gamma(shape)
    weights = gammas / gammas.sum(axis=1, keepdims=True)
    leaf_params = []
    for slot, tag in enumerate(graph.leaf_families):
        fam = get_family(tag)
        leaf_params.append(fam.draw_params(hypers[slot], leaf_stats[slot], rng))
    return MaterializedParams(graph, weights, leaf_params)


def materialize_from_assignments(
    graph, hypers, data, assignments, concentration, rng
):
    """Materialize from a stored assignment matrix (rebuilds counts/stats)."""
    counts, stats = statemod.recount(graph, data, assignments)
    return materialize(graph, hypers, counts, stats, concentration, rng)


@dataclass
class TestLLReport:
    """Posterior-averaged held-out log likelihood.

    ``posterior_avg`` is the mean over test points of
    ``log((1/K) sum_k density_k(x))``; ``per_sample`` is each sample's own
    mean test log density (a useful trace); ``log_density_matrix`` holds the
    raw (K, n_test) log densities.
    """

    posterior_avg: float
    per_sample: np.ndarray
    per_point: np.ndarray
    log_density_matrix: np.ndarray


def test_log_likelihood(
    samples, graph, hypers, concentration, train_data, test_data, rng
) -> TestLLReport:
    """Score ``test_data`` under the posterior represented by ``samples``.

    Each stored assignment matrix is materialized with its own generator
    spawned from ``rng`` (so scores are deterministic given the seed and
    independent of evaluation order) and scored on every test row.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("need at least one stored sample")
    test_data = np.asarray(test_data, dtype=float)
    k = len(samples)
    mat = np.empty((k, test_data.shape[0]))
    for i, (assign, child) in enumerate(zip(samples, rng.spawn(k))):
        params = materialize_from_assignments(
            graph, hypers, train_data, assign, concentration, child
        )
        mat[i] = eval_log_density_batch(graph, params, test_data)
    per_point = logsumexp(mat, axis=0) - np.log(k)
    report = TestLLReport(
        posterior_avg=float(per_point.mean()),
        per_sample=mat.mean(axis=1),
        per_point=per_point,
        log_density_matrix=mat,
    )
    if not np.isfinite(report.posterior_avg):
        raise NumericError("posterior-averaged test log likelihood is not finite")
    return report


def _evidence_vector(graph, evidence):
    x = np.full(graph.dims, np.nan)
    for dim, value in evidence.items():
        d = int(dim)
        if not (0 <= d < graph.dims):
            raise ValueError(f"evidence dimension {d} out of range")
        x[d] = value
    return x


def query_marginal(graph, params, evidence) -> float:
    """Log marginal density of the evidence ``{dim: value}``.

    Non-evidence dimensions are marginalized out exactly (missing-dimension
    leaves contribute log 1).  An empty evidence dict returns log 1 = 0.
    """
    return eval_log_density(graph, params, _evidence_vector(graph, evidence))


def query_conditional(graph, params, evidence, targets) -> float:
    """Log conditional density of ``targets`` given ``evidence``.

    Both are ``{dim: value}`` dicts over disjoint dimensions; the result is
    ``log p(targets, evidence) - log p(evidence)``.
    """
    overlap = set(map(int, evidence)) & set(map(int, targets))
    if overlap:
        raise ValueError(f"evidence and targets overlap on dims {sorted(overlap)}")
    joint = dict(evidence)
    joint.update(targets)
    return query_marginal(graph, params, joint) - query_marginal(
        graph, params, evidence
    )
