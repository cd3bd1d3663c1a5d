"""Tour of the conjugate leaf families.

Each family keeps sufficient statistics that support O(1) add/remove of a
single value, a collapsed marginal over a block of values, a posterior
predictive density, and a closed-form empirical-Bayes fit from a subsample.

Run:  python3 demos/02_leaf_families.py
"""

import math

import numpy as np

from spngibbs.leaves import HyperDefaults, get_family


def _stat_fields(stats):
    return [getattr(stats, f) for f in stats.__slots__ if f != "counts"] + list(
        np.atleast_1d(getattr(stats, "counts", []))
    )


def main():
    rng = np.random.default_rng(1)
    defaults = HyperDefaults()

    samples = {
        "gaussian": rng.normal(2.0, 0.5, size=200),
        "exponential": rng.exponential(0.25, size=200),
        "poisson": rng.poisson(6.0, size=200).astype(float),
        "categorical:3": rng.integers(0, 3, size=200).astype(float),
    }

    for name, values in samples.items():
        fam = get_family(name)
        hyper = fam.fit_hyper(values, defaults)

        # incremental statistics: add everything, remove half, compare
        stats = fam.make_stats()
        for v in values:
            fam.add(stats, v)
        for v in values[:100]:
            fam.remove(stats, v)
        recomputed = fam.stats_from_values(values[100:])
        drift = max(
            abs(float(a) - float(b))
            for a, b in zip(_stat_fields(stats), _stat_fields(recomputed))
        )
        print(f"\n[{name}] fitted hyper: {hyper}")
        print(f"  add/remove drift vs recomputation: {drift:.2e}")

        # posterior predictive after seeing the first 100 values
        seen = fam.stats_from_values(values[:100])
        at = float(np.median(values))
        lp = fam.log_predictive(hyper, seen, at)
        print(f"  predictive density at median ({at:.3g}): {math.exp(lp):.4f}")

        # collapsed marginal obeys the chain rule
        block = fam.log_marginal(hyper, fam.stats_from_values(values))
        part1 = fam.log_marginal(hyper, seen)
        part2 = sum(
            fam.log_predictive(
                hyper, fam.stats_from_values(values[: 100 + i]), values[100 + i]
            )
            for i in range(100)
        )
        print(
            f"  chain-rule identity: block {block:.4f} "
            f"vs sequential {part1 + part2:.4f}"
        )


if __name__ == "__main__":
    main()
