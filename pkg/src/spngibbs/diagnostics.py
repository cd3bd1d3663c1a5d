"""Chain quality and cost measurement.

Effective sample size for short scalar traces, a timing harness that runs
sweeps against a live state while collecting wall times and node-touch
counters, and helpers turning stored samples into scalar traces worth
feeding to the ESS estimator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import inference
from . import state as statemod


@dataclass
class EssReport:
    """Effective sample size of one scalar trace.

    ``integrated_autocorr`` is the estimated integrated autocorrelation time
    (1 for white noise).  ``degenerate`` flags a constant trace and
    ``negative_correlation`` flags traces whose estimate came out below the
    white-noise value; both are reported as ESS = n by convention.
    """

    ess: float
    n: int
    integrated_autocorr: float
    degenerate: bool = False
    negative_correlation: bool = False

    def __float__(self) -> float:
        return self.ess


def _autocorrelations(x: np.ndarray) -> np.ndarray:
    n = x.size
    centered = x - x.mean()
    # Biased (1/n) autocovariances for all lags via one correlation pass.
    acov = np.correlate(centered, centered, mode="full")[n - 1 :] / n
    return acov / acov[0]


def effective_sample_size(trace) -> EssReport:
    """ESS of a scalar trace: n over the integrated autocorrelation time.

    The lag sum uses the initial monotone positive sequence rule: sums of
    adjacent autocorrelation pairs are accumulated while positive, with a
    running-minimum monotonicity correction.  The result is clamped to
    (0, n]; constant and negatively correlated traces are flagged and
    reported at the clamp value n.
    """
    x = np.asarray(trace, dtype=float)
    if x.ndim != 1 or x.size < 4:
        raise ValueError("trace must be a 1-d sequence of length >= 4")
    n = x.size
    if not np.all(np.isfinite(x)):
        raise ValueError("trace contains non-finite values")
    if np.ptp(x) == 0.0:
        return EssReport(
            ess=float(n), n=n, integrated_autocorr=1.0, degenerate=True
        )
    rho = _autocorrelations(x)
    if rho.size % 2:
        rho = np.append(rho, 0.0)
    pair_sums = rho[0::2] + rho[1::2]
    tau = -1.0
    cap = np.inf
    for g in pair_sums:
        if g <= 0.0:
            break
        cap = min(cap, g)
        tau += 2.0 * cap
    if tau < 1.0:
        return EssReport(
            ess=float(n), n=n, integrated_autocorr=float(tau),
            negative_correlation=True,
        )
    return EssReport(ess=float(n / tau), n=n, integrated_autocorr=float(tau))


@dataclass
class TimingReport:
    """Per-sweep wall times and node-touch counts from a timing run."""

    seconds: np.ndarray
    node_touches: np.ndarray

    @property
    def mean_seconds(self) -> float:
        return float(self.seconds.mean())

    @property
    def std_seconds(self) -> float:
        if self.seconds.size < 2:
            return 0.0
        return float(self.seconds.std(ddof=1))

    @property
    def mean_touches(self) -> float:
        return float(self.node_touches.mean())


def timing_harness(sweep, state, iterations: int) -> TimingReport:
    """Run ``sweep(state)`` repeatedly, collecting wall time and touches.

    ``sweep`` is any callable returning a report with ``seconds`` and
    ``node_touches`` fields (both samplers' sweep functions qualify, usually
    via ``functools.partial`` to bind concentration and generator).  The
    state should be warmed up first so the numbers reflect steady-state cost.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    seconds = np.empty(iterations)
    touches = np.empty(iterations, dtype=np.int64)
    for i in range(iterations):
        report = sweep(state)
        seconds[i] = report.seconds
        touches[i] = report.node_touches
    return TimingReport(seconds=seconds, node_touches=touches)


def speedup(baseline: TimingReport, candidate: TimingReport) -> float:
    """How many times faster the candidate's mean sweep is than the baseline's."""
    return baseline.mean_seconds / candidate.mean_seconds


TRACE_KINDS = ("train_joint", "heldout")


def trace_statistic(
    samples,
    graph,
    hypers,
    concentration,
    train,
    kind: str,
    heldout=None,
    rng=None,
) -> np.ndarray:
    """Scalar trace over stored samples, for ESS input.

    ``train_joint`` scores each stored assignment matrix by the collapsed
    joint log likelihood of the training data (deterministic).  ``heldout``
    scores each sample's mean held-out log density under one materialized
    parameter draw, identical to the per-sample traces of the test-scoring
    report; it requires ``heldout`` data and a generator.
    """
    samples = list(samples)
    if kind == "train_joint":
        out = np.empty(len(samples))
        for i, assign in enumerate(samples):
            st = statemod.from_assignments(graph, train, hypers, assign)
            out[i] = st.joint_log_lik(concentration)
        return out
    if kind == "heldout":
        if heldout is None:
            raise ValueError("kind 'heldout' requires held-out data")
        if rng is None:
            rng = np.random.default_rng()
        report = inference.test_log_likelihood(
            samples, graph, hypers, concentration, train, heldout, rng
        )
        return report.per_sample
    raise ValueError(f"kind must be one of {TRACE_KINDS}, got {kind!r}")
