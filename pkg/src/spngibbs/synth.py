"""Synthetic datasets for benchmarks, demos, and experiment-style tests.

Two generators: a two-arm planar spiral (a shape a shallow mixture cannot
represent well, so density quality improves with mixture width) and a
heterogeneous finite mixture cycling through all four leaf kinds.
"""

from __future__ import annotations

import numpy as np

from .dataio import Column, Dataset

MIXED_KINDS = ("continuous", "positive", "count", "categorical:3")


def spiral(n: int, rng, noise: float = 0.08, turns: float = 1.5) -> np.ndarray:
    """Two interleaved spiral arms in the plane; returns an (n, 2) matrix."""
    theta = rng.uniform(0.25 * np.pi, 2.0 * np.pi * turns, size=n)
    arm = rng.integers(0, 2, size=n)
    radius = theta / (2.0 * np.pi * turns)
    angle = theta + np.pi * arm
    x = radius * np.cos(angle) + noise * rng.standard_normal(n)
    y = radius * np.sin(angle) + noise * rng.standard_normal(n)
    return np.column_stack([x, y])


def mixed_mixture(
    n: int, dims: int, rng, components: int = 3
) -> tuple[np.ndarray, list[str]]:
    """Heterogeneous mixture sample; returns (matrix, per-column kinds).

    Column kinds cycle continuous / positive / count / categorical(3).
    Component parameters are drawn once per call (means spread apart, rates
    and category weights varied), so the mixture structure is clearly
    recoverable; everything is deterministic given ``rng``.
    """
    if n < 1 or dims < 1 or components < 1:
        raise ValueError("n, dims, and components must all be >= 1")
    kinds = [MIXED_KINDS[d % len(MIXED_KINDS)] for d in range(dims)]
    weights = rng.dirichlet(np.full(components, 5.0))
    z = rng.choice(components, size=n, p=weights)
    X = np.empty((n, dims))
    for d, kind in enumerate(kinds):
        if kind == "continuous":
            means = rng.normal(0.0, 3.0, size=components)
            sds = 0.5 + rng.random(components)
            X[:, d] = rng.normal(means[z], sds[z])
        elif kind == "positive":
            scales = 10.0 ** rng.uniform(-0.7, 0.7, size=components)
            X[:, d] = rng.exponential(scales[z])
        elif kind == "count":
            rates = rng.uniform(1.0, 15.0, size=components)
            X[:, d] = rng.poisson(rates[z])
        else:
            probs = rng.dirichlet(np.full(3, 0.5), size=components)
            u = rng.random(n)
            cum = np.cumsum(probs[z], axis=1)
            X[:, d] = np.minimum((u[:, None] > cum).sum(axis=1), 2)
    return X, kinds


def to_dataset(X: np.ndarray, kinds: list[str], source: str = "synthetic") -> Dataset:
    """Wrap a generated matrix as a dataset (categorical levels = codes)."""
    columns = []
    for d, kind in enumerate(kinds):
        levels = ()
        if kind.startswith("categorical:"):
            levels = tuple(str(c) for c in range(int(kind.split(":", 1)[1])))
        columns.append(Column(name=f"x{d}", kind=kind, levels=levels))
    return Dataset(X=np.asarray(X, dtype=float), columns=columns, source=source)
