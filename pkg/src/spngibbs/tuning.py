"""Hyperparameter assignment by subsampled moment fits, plus ratio search.

Instead of optimizing every leaf hyperparameter directly, each dimension
gets one knob: a subsampling ratio.  Every leaf on that dimension fits its
hyperparameters (closed-form marginal-likelihood maximizers) to its own
random subsample of the column; small ratios give the leaves nearly
disjoint subsamples and therefore diverse priors, ratio 1 gives every leaf
on the dimension the identical full-column fit.  The search space stays at
one scalar per dimension no matter how wide the network is.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from . import chain as chainmod
from . import inference
from .leaves import HyperDefaults, get_family

DEFAULT_MIN_RATIO = 0.01


def _ratio_vector(ratios, dims: int) -> np.ndarray:
    r = np.asarray(ratios, dtype=float)
    if r.ndim == 0:
        r = np.full(dims, float(r))
    if r.shape != (dims,):
        raise ValueError(f"need one ratio per dimension ({dims}), got shape {r.shape}")
    if np.any(r <= 0) or np.any(r > 1):
        raise ValueError("ratios must lie in (0, 1]")
    return r


def assign_leaf_hyperparams(graph, data, ratios, defaults=None, rng=None) -> list:
    """Fit per-leaf hyperparameters on per-leaf column subsamples.

    ``ratios`` is a scalar or one value per dimension in (0, 1].  Each leaf
    independently draws ``max(1, ceil(ratio * N))`` rows of its column
    without replacement and fits the family's closed-form hyperparameters to
    them.  Ratio 1 uses the whole column, so all leaves on that dimension
    come out identical; smaller ratios decorrelate the leaves.  Returns a
    slot-aligned hyperparameter list.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError("data must be a non-empty (rows, dims) matrix")
    n = data.shape[0]
    r = _ratio_vector(ratios, graph.dims)
    if defaults is None:
        defaults = HyperDefaults()
    if rng is None:
        rng = np.random.default_rng()
    full_fit: dict[tuple[int, str], object] = {}
    hypers = []
    for slot, tag in enumerate(graph.leaf_families):
        d = int(graph.leaf_dims[slot])
        fam = get_family(tag)
        if r[d] == 1.0:
            key = (d, tag)
            if key not in full_fit:
                full_fit[key] = fam.fit_hyper(data[:, d], defaults)
            hypers.append(full_fit[key])
            continue
        m = max(1, math.ceil(r[d] * n))
        rows = rng.choice(n, size=m, replace=False)
        hypers.append(fam.fit_hyper(data[rows, d], defaults))
    return hypers


@dataclass
class TuneTrial:
    """One search trial: the candidate ratios and how they scored."""

    ratios: tuple
    validation_log_lik: float
    seed: int
    seconds: float


@dataclass
class TuneResult:
    """Search outcome: the best trial's ratios plus the full trial log."""

    best_ratios: np.ndarray
    best_score: float
    best_trial: int
    trials: list[TuneTrial]


def default_search_config() -> chainmod.RunConfig:
    """Per-trial sampler budget: a short collapsed chain."""
    return chainmod.RunConfig(
        sampler="topdown", iterations=75, burn_in=25, thin=5
    )


def search_ratios(
    graph,
    train,
    valid,
    budget: int,
    defaults=None,
    sampler_config=None,
    seed: int = 0,
    min_ratio: float = DEFAULT_MIN_RATIO,
) -> TuneResult:
    """Random search over per-dimension subsampling ratios.

    Trial 0 is always the all-ones baseline (full-column fits); later trials
    draw each dimension's ratio log-uniformly from ``[min_ratio, 1]``.  Each
    trial fits hyperparameters, runs a short chain on ``train``, and scores
    the posterior-averaged log likelihood of ``valid``.  The best trial can
    therefore never score below the baseline.  Deterministic given ``seed``.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if not 0 < min_ratio <= 1:
        raise ValueError("min_ratio must lie in (0, 1]")
    train = np.asarray(train, dtype=float)
    valid = np.asarray(valid, dtype=float)
    if defaults is None:
        defaults = HyperDefaults()
    if sampler_config is None:
        sampler_config = default_search_config()

    trial_seqs = np.random.SeedSequence(seed).spawn(budget)
    trials: list[TuneTrial] = []
    best_idx = -1
    for t in range(budget):
        started = time.perf_counter()
        draw_seq, fit_seq, chain_seq, eval_seq = trial_seqs[t].spawn(4)
        if t == 0:
            ratios = np.ones(graph.dims)
        else:
            draw_rng = np.random.default_rng(draw_seq)
            ratios = 10.0 ** draw_rng.uniform(
                math.log10(min_ratio), 0.0, size=graph.dims
            )
        hypers = assign_leaf_hyperparams(
            graph, train, ratios, defaults, np.random.default_rng(fit_seq)
        )
        trial_seed = int(chain_seq.generate_state(1)[0])
        result = chainmod.run(
            graph, train, hypers, replace(sampler_config, seed=trial_seed)
        )
        score = inference.test_log_likelihood(
            result.samples,
            graph,
            hypers,
            sampler_config.concentration,
            train,
            valid,
            np.random.default_rng(eval_seq),
        ).posterior_avg
        trials.append(
            TuneTrial(
                ratios=tuple(float(v) for v in ratios),
                validation_log_lik=float(score),
                seed=trial_seed,
                seconds=time.perf_counter() - started,
            )
        )
        if best_idx < 0 or score > trials[best_idx].validation_log_lik:
            best_idx = t
    best = trials[best_idx]
    return TuneResult(
        best_ratios=np.asarray(best.ratios),
        best_score=best.validation_log_lik,
        best_trial=best_idx,
        trials=trials,
    )
