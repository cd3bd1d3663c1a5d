"""Chain driver shared by both samplers.

``run`` owns iteration control, seeding, burn-in/thinning, trace recording,
and optional held-out scoring; the per-sweep work is delegated to the
requested sampler.  Streams are split with ``SeedSequence.spawn`` so the
chain's own randomness is untouched by whether evaluation happens.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import bottomup as bottomupmod
from . import topdown as topdownmod
from .graph import eval_log_density_batch
from .inference import materialize
from .state import LatentState, init_random

SAMPLERS = ("topdown", "bottomup")


@dataclass
class RunConfig:
    """Settings for one chain.

    ``iterations`` counts sweeps after initialization; sweep ``i`` (0-based)
    is stored when ``i >= burn_in`` and ``(i - burn_in) % thin == 0``.
    ``heldout_every`` of 0 disables held-out scoring even when data is given.
    ``max_seconds`` stops early (after completing a sweep) once exceeded.
    """

    sampler: str = "topdown"
    iterations: int = 100
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    concentration: float = 1.0
    skip_same_leaf: bool = True
    heldout_every: int = 0
    max_seconds: float = 0.0

    def __post_init__(self):
        if self.sampler not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}, got {self.sampler!r}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.burn_in < 0 or self.burn_in >= self.iterations:
            raise ValueError("burn_in must lie in [0, iterations)")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.concentration <= 0:
            raise ValueError("concentration must be positive")

    def to_jsonable(self) -> dict:
        return asdict(self)

    @classmethod
    def from_jsonable(cls, obj: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**obj)


@dataclass
class TraceRow:
    """Per-sweep scalars recorded for every iteration (not just stored ones)."""

    iteration: int
    seconds: float
    joint_log_lik: float
    acceptance_rate: float
    skipped_dims: int
    node_touches: int
    heldout_log_lik: float = float("nan")


@dataclass
class RunResult:
    """Everything a finished chain hands back.

    ``samples`` holds stored assignment matrices (copies), ``trace`` one row
    per completed sweep, ``state`` the final latent state for callers that
    keep sampling or audit.
    """

    config: RunConfig
    samples: list[np.ndarray]
    sample_iterations: list[int]
    trace: list[TraceRow]
    state: LatentState
    seconds: float

    @property
    def acceptance_rate(self) -> float:
        return float(np.mean([r.acceptance_rate for r in self.trace]))

    def trace_array(self, name: str) -> np.ndarray:
        return np.asarray([getattr(r, name) for r in self.trace])


def _heldout_score(state, concentration, heldout, rng) -> float:
    """Mean held-out log density under one parameter draw from the state."""
    params = materialize(
        state.graph, state.hypers, state.alloc_counts, state.leaf_stats,
        concentration, rng,
    )
    return float(eval_log_density_batch(state.graph, params, heldout).mean())


def run(graph, data, hypers, config: RunConfig, heldout=None) -> RunResult:
    """Run one chain and return samples plus a per-sweep trace.

    Chain, initialization, and evaluation randomness come from separate
    streams spawned off the seed, so results are bit-reproducible and the
    chain path does not depend on whether held-out scoring is on.
    """
    data = np.ascontiguousarray(np.asarray(data, dtype=float))
    if heldout is not None:
        heldout = np.asarray(heldout, dtype=float)
    init_seq, chain_seq, eval_seq = np.random.SeedSequence(config.seed).spawn(3)
    init_rng = np.random.default_rng(init_seq)
    chain_rng = np.random.default_rng(chain_seq)
    eval_rng = np.random.default_rng(eval_seq)

    state = init_random(graph, data, hypers, init_rng)
    samples: list[np.ndarray] = []
    sample_iterations: list[int] = []
    trace: list[TraceRow] = []
    started = time.perf_counter()
    for i in range(config.iterations):
        if config.sampler == "topdown":
            report = topdownmod.gibbs_sweep(
                state, config.concentration, chain_rng,
                skip_same_leaf=config.skip_same_leaf,
            )
        else:
            report = bottomupmod.gibbs_sweep_bottom_up(
                state, config.concentration, chain_rng
            )
        row = TraceRow(
            iteration=i,
            seconds=report.seconds,
            joint_log_lik=state.joint_log_lik(config.concentration),
            acceptance_rate=report.acceptance_rate,
            skipped_dims=report.skipped_dims,
            node_touches=report.node_touches,
        )
        if (
            heldout is not None
            and config.heldout_every > 0
            and (i + 1) % config.heldout_every == 0
        ):
            row.heldout_log_lik = _heldout_score(
                state, config.concentration, heldout, eval_rng
            )
        trace.append(row)
        if i >= config.burn_in and (i - config.burn_in) % config.thin == 0:
            samples.append(state.assignments.copy())
            sample_iterations.append(i)
        if config.max_seconds > 0 and time.perf_counter() - started > config.max_seconds:
            break
    return RunResult(
        config=config,
        samples=samples,
        sample_iterations=sample_iterations,
        trace=trace,
        state=state,
        seconds=time.perf_counter() - started,
    )


# -- persistence ---------------------------------------------------------------

TRACE_FIELDS = (
    "iteration", "seconds", "joint_log_lik", "acceptance_rate",
    "skipped_dims", "node_touches", "heldout_log_lik",
)


def save_samples(path, result: RunResult) -> None:
    """Store assignment samples and their iteration indices as one npz file."""
    if not result.samples:
        raise ValueError("no stored samples to save")
    np.savez_compressed(
        path,
        samples=np.stack(result.samples),
        iterations=np.asarray(result.sample_iterations, dtype=np.int64),
    )


def load_samples(path):
    """Inverse of ``save_samples``; returns (samples list, iteration list)."""
    with np.load(path) as z:
        stack = z["samples"]
        iters = z["iterations"]
    return [stack[i] for i in range(stack.shape[0])], [int(v) for v in iters]


def save_trace(path, trace: list[TraceRow]) -> None:
    """Write the per-sweep trace as a plain CSV with a header row."""
    lines = [",".join(TRACE_FIELDS)]
    for row in trace:
        vals = [getattr(row, f) for f in TRACE_FIELDS]
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in vals))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_trace(path) -> list[TraceRow]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln]
    header = lines[0].split(",")
    if tuple(header) != TRACE_FIELDS:
        raise ValueError(f"unexpected trace header: {header}")
    out = []
    for ln in lines[1:]:
        parts = ln.split(",")
        out.append(TraceRow(
            iteration=int(parts[0]),
            seconds=float(parts[1]),
            joint_log_lik=float(parts[2]),
            acceptance_rate=float(parts[3]),
            skipped_dims=int(parts[4]),
            node_touches=int(parts[5]),
            heldout_log_lik=float(parts[6]),
        ))
    return out


def save_config(path, config: RunConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_jsonable(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return RunConfig.from_jsonable(json.load(fh))
