"""Effective sample size, timing harness, and scalar trace extraction."""

import functools
import math

import numpy as np
import pytest

from spngibbs.chain import RunConfig, run
from spngibbs.diagnostics import (
    EssReport,
    effective_sample_size,
    speedup,
    timing_harness,
    trace_statistic,
)
from spngibbs.graph import build_balanced
from spngibbs.leaves import HyperDefaults, get_family
from spngibbs.state import init_random
from spngibbs.topdown import gibbs_sweep


def _default_hypers(graph):
    defaults = HyperDefaults()
    return [get_family(tag).default_hyper(defaults) for tag in graph.leaf_families]


class TestEffectiveSampleSize:
    def test_iid_series_average_near_n(self):
        n = 50
        values = []
        for seed in range(100):
            x = np.random.default_rng(seed).normal(size=n)
            values.append(effective_sample_size(x).ess)
        mean = float(np.mean(values))
        assert 35.0 <= mean <= 65.0

    def test_ar1_matches_integrated_autocorr_time(self):
        # tau for an AR(1) chain is (1 + phi) / (1 - phi) = 19 at phi = 0.9.
        phi, n = 0.9, 50_000
        rng = np.random.default_rng(1234)
        eps = rng.normal(size=n)
        x = np.empty(n)
        x[0] = eps[0]
        for i in range(1, n):
            x[i] = phi * x[i - 1] + eps[i]
        report = effective_sample_size(x)
        want = n / 19.0
        assert abs(report.ess - want) / want < 0.2
        assert report.ess <= n
        assert not report.degenerate and not report.negative_correlation

    def test_alternating_series_flags_negative_correlation(self):
        x = np.tile([1.0, -1.0], 25)
        report = effective_sample_size(x)
        assert report.negative_correlation
        assert report.ess == report.n == 50

    def test_constant_series_flags_degenerate(self):
        report = effective_sample_size(np.full(20, 3.25))
        assert report.degenerate
        assert report.ess == 20.0
        assert report.integrated_autocorr == 1.0

    def test_affine_invariance(self):
        x = np.random.default_rng(7).normal(size=200).cumsum()  # correlated
        a = effective_sample_size(x)
        b = effective_sample_size(-3.0 * x + 11.0)
        assert a.ess == pytest.approx(b.ess, rel=1e-12)
        assert a.integrated_autocorr == pytest.approx(
            b.integrated_autocorr, rel=1e-12
        )

    def test_float_conversion_and_bounds(self):
        x = np.random.default_rng(3).normal(size=64)
        report = effective_sample_size(x)
        assert float(report) == report.ess
        assert 0.0 < report.ess <= 64.0
        assert isinstance(report, EssReport)

    def test_input_validation(self):
        with pytest.raises(ValueError, match="length >= 4"):
            effective_sample_size([1.0, 2.0, 3.0])
        with pytest.raises(ValueError, match="non-finite"):
            effective_sample_size([1.0, math.nan, 2.0, 3.0])
        with pytest.raises(ValueError, match="1-d"):
            effective_sample_size(np.zeros((4, 4)))


class TestTimingHarness:
    def test_collects_per_sweep_numbers(self, rng):
        graph = build_balanced(3, 2, 2)
        data = rng.normal(size=(25, 3))
        state = init_random(graph, data, _default_hypers(graph), rng)
        sweep = functools.partial(gibbs_sweep, concentration=1.0, rng=rng)
        report = timing_harness(lambda s: sweep(s), state, 6)
        assert report.seconds.shape == (6,)
        assert report.node_touches.shape == (6,)
        assert np.all(report.seconds >= 0)
        assert np.all(report.node_touches > 0)
        assert report.mean_seconds == pytest.approx(report.seconds.mean())
        assert report.std_seconds == pytest.approx(report.seconds.std(ddof=1))
        assert report.mean_touches == pytest.approx(report.node_touches.mean())

    def test_single_iteration_std_is_zero(self, rng):
        graph = build_balanced(2, 2, 2)
        data = rng.normal(size=(10, 2))
        state = init_random(graph, data, _default_hypers(graph), rng)
        report = timing_harness(
            lambda s: gibbs_sweep(s, 1.0, rng), state, 1
        )
        assert report.std_seconds == 0.0

    def test_iterations_validated(self, rng):
        graph = build_balanced(2, 2, 2)
        data = rng.normal(size=(10, 2))
        state = init_random(graph, data, _default_hypers(graph), rng)
        with pytest.raises(ValueError, match="iterations"):
            timing_harness(lambda s: gibbs_sweep(s, 1.0, rng), state, 0)

    def test_speedup_is_mean_seconds_ratio(self):
        a = _report([2.0, 2.0], [10, 10])
        b = _report([0.5, 0.5], [10, 10])
        assert speedup(a, b) == pytest.approx(4.0)


def _report(seconds, touches):
    from spngibbs.diagnostics import TimingReport

    return TimingReport(
        seconds=np.asarray(seconds, dtype=float),
        node_touches=np.asarray(touches, dtype=np.int64),
    )


class TestTraceStatistic:
    def _run(self, rng):
        graph = build_balanced(2, 2, 2)
        data = rng.normal(size=(30, 2))
        hypers = _default_hypers(graph)
        cfg = RunConfig(sampler="topdown", iterations=10, burn_in=2, thin=2, seed=1)
        return graph, data, hypers, run(graph, data, hypers, cfg)

    def test_train_joint_is_deterministic_and_matches_state(self, rng):
        graph, data, hypers, result = self._run(rng)
        trace = trace_statistic(
            result.samples, graph, hypers, 1.0, data, "train_joint"
        )
        assert trace.shape == (len(result.samples),)
        again = trace_statistic(
            result.samples, graph, hypers, 1.0, data, "train_joint"
        )
        assert np.array_equal(trace, again)
        from spngibbs.state import from_assignments

        direct = from_assignments(
            graph, data, hypers, result.samples[0]
        ).joint_log_lik(1.0)
        assert trace[0] == pytest.approx(direct, rel=1e-12)

    def test_heldout_returns_per_sample_scores(self, rng):
        graph, data, hypers, result = self._run(rng)
        heldout = rng.normal(size=(12, 2))
        trace = trace_statistic(
            result.samples, graph, hypers, 1.0, data, "heldout",
            heldout=heldout, rng=np.random.default_rng(5),
        )
        assert trace.shape == (len(result.samples),)
        assert np.all(np.isfinite(trace))

    def test_heldout_requires_data(self, rng):
        graph, data, hypers, result = self._run(rng)
        with pytest.raises(ValueError, match="requires held-out data"):
            trace_statistic(result.samples, graph, hypers, 1.0, data, "heldout")

    def test_unknown_kind_rejected(self, rng):
        graph, data, hypers, result = self._run(rng)
        with pytest.raises(ValueError, match="kind must be one of"):
            trace_statistic(result.samples, graph, hypers, 1.0, data, "bogus")
