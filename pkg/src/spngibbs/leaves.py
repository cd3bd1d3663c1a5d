"""Conjugate univariate leaf families.

Four families are provided, each with a conjugate prior, O(1) sufficient
statistics, a closed-form posterior-predictive density, posterior parameter
draws, the collapsed marginal likelihood of the points currently in the
statistics, and a closed-form empirical-Bayes hyperparameter fit:

========== =================== ======================= =====================
family     likelihood          prior                   predictive
========== =================== ======================= =====================
gaussian   Normal(mu, 1/tau)   normal-gamma            Student-t
exponential Exponential(rate)  Gamma(shape, rate)      Lomax
poisson    Poisson(rate)       Gamma(shape, rate)      negative binomial
categorical Categorical(pi)    Dirichlet               Dirichlet-categorical
========== =================== ======================= =====================

Families are stateless singletons obtained via :func:`get_family`; per-leaf
state lives in small mutable stats objects created by ``make_stats``.
Everything that touches a density works in the log domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import BookkeepingError, SupportError

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class HyperDefaults:
    """Fallback hyperparameters used where no closed-form fit exists.

    ``variance_floor`` replaces the Gaussian sample variance when the fitting
    subsample has a single point (or zero spread).  Rate-type fits that would
    be degenerate on an all-zero subsample fall back to ``gamma_rate``.
    """

    gamma_shape: float = 1.0
    gamma_rate: float = 1.0
    gauss_mean: float = 0.0
    gauss_precision_scale: float = 1.0
    gauss_shape: float = 1.0
    gauss_rate: float = 1.0
    cat_concentration: float = 1.0
    variance_floor: float = 1.0


# -- hyperparameter containers -------------------------------------------------


@dataclass(frozen=True)
class GaussianHyper:
    mean: float
    precision_scale: float  # prior pseudo-count on the mean
    shape: float
    rate: float


@dataclass(frozen=True)
class GammaHyper:
    """Gamma(shape, rate) prior on a positive rate parameter."""

    shape: float
    rate: float


@dataclass(frozen=True)
class DirichletHyper:
    concentration: tuple[float, ...]


# -- sufficient statistics -----------------------------------------------------


class MomentStats:
    """Count, sum, and sum of squares (squares tracked only where needed)."""

    __slots__ = ("n", "sum_x", "sum_x2", "sum_log_fact")

    def __init__(self):
        self.n = 0
        self.sum_x = 0.0
        self.sum_x2 = 0.0
        self.sum_log_fact = 0.0

    def copy(self):
        out = MomentStats()
        out.n, out.sum_x, out.sum_x2, out.sum_log_fact = (
            self.n,
            self.sum_x,
            self.sum_x2,
            self.sum_log_fact,
        )
        return out


class CountStats:
    """Per-category counts for categorical leaves."""

    __slots__ = ("n", "counts")

    def __init__(self, k):
        self.n = 0
        self.counts = np.zeros(k, dtype=np.int64)

    def copy(self):
        out = CountStats(len(self.counts))
        out.n = self.n
        out.counts = self.counts.copy()
        return out


def _check_removal(stats):
    if stats.n <= 0:
        raise BookkeepingError("remove called on empty leaf statistics")


# -- families ------------------------------------------------------------------


class Gaussian:
    """Normal likelihood with unknown mean and precision, normal-gamma prior."""

    tag = "gaussian"

    def default_hyper(self, defaults: HyperDefaults) -> GaussianHyper:
        return GaussianHyper(
            mean=defaults.gauss_mean,
            precision_scale=defaults.gauss_precision_scale,
            shape=defaults.gauss_shape,
            rate=defaults.gauss_rate,
        )

    def make_stats(self):
        return MomentStats()

    def check_support(self, x):
        if not math.isfinite(x):
            raise SupportError(f"gaussian leaf needs finite values, got {x}")

    def add(self, stats, x):
        self.check_support(x)
        stats.n += 1
        stats.sum_x += x
        stats.sum_x2 += x * x

    def remove(self, stats, x):
        _check_removal(stats)
        stats.n -= 1
        stats.sum_x -= x
        stats.sum_x2 -= x * x

    def stats_from_values(self, values):
        stats = MomentStats()
        stats.n = int(values.size)
        stats.sum_x = float(values.sum())
        stats.sum_x2 = float(np.square(values).sum())
        return stats

    def _posterior(self, hyper, stats):
        n = stats.n
        rho_n = hyper.precision_scale + n
        a_n = hyper.shape + 0.5 * n
        if n == 0:
            return hyper.mean, rho_n, a_n, hyper.rate
        mean = stats.sum_x / n
        mu_n = (hyper.precision_scale * hyper.mean + stats.sum_x) / rho_n
        scatter = stats.sum_x2 - stats.sum_x * stats.sum_x / n
        shift = (
            hyper.precision_scale
            * n
            * (mean - hyper.mean) ** 2
            / (2.0 * rho_n)
        )
        b_n = hyper.rate + 0.5 * scatter + shift
        return mu_n, rho_n, a_n, b_n

    def log_predictive(self, hyper, stats, x):
        self.check_support(x)
        mu_n, rho_n, a_n, b_n = self._posterior(hyper, stats)
        dof = 2.0 * a_n
        sig2 = b_n * (rho_n + 1.0) / (a_n * rho_n)
        z2 = (x - mu_n) ** 2 / (dof * sig2)
        return (
            math.lgamma(0.5 * (dof + 1.0))
            - math.lgamma(0.5 * dof)
            - 0.5 * math.log(dof * math.pi * sig2)
            - 0.5 * (dof + 1.0) * math.log1p(z2)
        )

    def log_marginal(self, hyper, stats):
        mu_n, rho_n, a_n, b_n = self._posterior(hyper, stats)
        return (
            -0.5 * stats.n * _LOG_2PI
            + 0.5 * (math.log(hyper.precision_scale) - math.log(rho_n))
            + math.lgamma(a_n)
            - math.lgamma(hyper.shape)
            + hyper.shape * math.log(hyper.rate)
            - a_n * math.log(b_n)
        )

    def draw_params(self, hyper, stats, rng):
        mu_n, rho_n, a_n, b_n = self._posterior(hyper, stats)
        tau = rng.gamma(a_n, 1.0 / b_n)
        mu = rng.normal(mu_n, math.sqrt(1.0 / (rho_n * tau)))
        return (mu, tau)

    def log_pdf(self, params, x):
        mu, tau = params
        return 0.5 * (math.log(tau) - _LOG_2PI) - 0.5 * tau * (x - mu) ** 2

    def pack(self, params_list):
        arr = np.asarray(params_list, dtype=float)
        return arr[:, 0].copy(), arr[:, 1].copy()

    def log_pdf_packed(self, packed, x_vals):
        mu, tau = packed
        with np.errstate(over="ignore"):
            # Extreme values overflow the squared deviation; the density
            # rounds to -inf, which downstream code reports as a numeric error.
            return 0.5 * (np.log(tau) - _LOG_2PI) - 0.5 * tau * (x_vals - mu) ** 2

    def fit_hyper(self, values, defaults: HyperDefaults) -> GaussianHyper:
        n = values.size
        mean = float(values.mean()) if n else defaults.gauss_mean
        var = float(values.var()) if n > 1 else 0.0
        if var <= 0.0:
            var = defaults.variance_floor
        return GaussianHyper(
            mean=mean,
            precision_scale=defaults.gauss_precision_scale,
            shape=defaults.gauss_shape,
            rate=var * defaults.gauss_shape,
        )

    def hyper_to_jsonable(self, hyper):
        return [hyper.mean, hyper.precision_scale, hyper.shape, hyper.rate]

    def hyper_from_jsonable(self, obj):
        return GaussianHyper(*(float(v) for v in obj))


class Exponential:
    """Exponential likelihood with Gamma prior on the rate."""

    tag = "exponential"

    def default_hyper(self, defaults: HyperDefaults) -> GammaHyper:
        return GammaHyper(shape=defaults.gamma_shape, rate=defaults.gamma_rate)

    def make_stats(self):
        return MomentStats()

    def check_support(self, x):
        if not (math.isfinite(x) and x >= 0.0):
            raise SupportError(f"exponential leaf needs x >= 0, got {x}")

    def add(self, stats, x):
        self.check_support(x)
        stats.n += 1
        stats.sum_x += x

    def remove(self, stats, x):
        _check_removal(stats)
        stats.n -= 1
        stats.sum_x -= x

    def stats_from_values(self, values):
        stats = MomentStats()
        stats.n = int(values.size)
        stats.sum_x = float(values.sum())
        return stats

    def log_predictive(self, hyper, stats, x):
        self.check_support(x)
        a_n = hyper.shape + stats.n
        b_n = hyper.rate + stats.sum_x
        return math.log(a_n) + a_n * math.log(b_n) - (a_n + 1.0) * math.log(b_n + x)

    def log_marginal(self, hyper, stats):
        a_n = hyper.shape + stats.n
        b_n = hyper.rate + stats.sum_x
        return (
            math.lgamma(a_n)
            - math.lgamma(hyper.shape)
            + hyper.shape * math.log(hyper.rate)
            - a_n * math.log(b_n)
        )

    def draw_params(self, hyper, stats, rng):
        a_n = hyper.shape + stats.n
        b_n = hyper.rate + stats.sum_x
        return (rng.gamma(a_n, 1.0 / b_n),)

    def log_pdf(self, params, x):
        (rate,) = params
        if x < 0.0:
            return -math.inf
        return math.log(rate) - rate * x

    def pack(self, params_list):
        return (np.asarray([p[0] for p in params_list], dtype=float),)

    def log_pdf_packed(self, packed, x_vals):
        (rate,) = packed
        out = np.log(rate) - rate * x_vals
        return np.where(x_vals < 0.0, -np.inf, out)

    def fit_hyper(self, values, defaults: HyperDefaults) -> GammaHyper:
        mean = float(values.mean()) if values.size else 0.0
        if mean <= 0.0:
            return GammaHyper(defaults.gamma_shape, defaults.gamma_rate)
        return GammaHyper(defaults.gamma_shape, mean * defaults.gamma_shape)

    def hyper_to_jsonable(self, hyper):
        return [hyper.shape, hyper.rate]

    def hyper_from_jsonable(self, obj):
        return GammaHyper(*(float(v) for v in obj))


class Poisson:
    """Poisson likelihood with Gamma prior on the rate.

    Statistics carry the running sum of log-factorials so the collapsed
    marginal likelihood is exact including its data constant.
    """

    tag = "poisson"

    def default_hyper(self, defaults: HyperDefaults) -> GammaHyper:
        return GammaHyper(shape=defaults.gamma_shape, rate=defaults.gamma_rate)

    def make_stats(self):
        return MomentStats()

    def check_support(self, x):
        if not (math.isfinite(x) and x >= 0.0 and x == math.floor(x)):
            raise SupportError(f"poisson leaf needs non-negative integers, got {x}")

    def add(self, stats, x):
        self.check_support(x)
        stats.n += 1
        stats.sum_x += x
        stats.sum_log_fact += math.lgamma(x + 1.0)

    def remove(self, stats, x):
        _check_removal(stats)
        stats.n -= 1
        stats.sum_x -= x
        stats.sum_log_fact -= math.lgamma(x + 1.0)

    def stats_from_values(self, values):
        stats = MomentStats()
        stats.n = int(values.size)
        stats.sum_x = float(values.sum())
        stats.sum_log_fact = float(gammaln(values + 1.0).sum())
        return stats

    def log_predictive(self, hyper, stats, x):
        self.check_support(x)
        a_n = hyper.shape + stats.sum_x
        b_n = hyper.rate + stats.n
        return (
            math.lgamma(x + a_n)
            - math.lgamma(a_n)
            - math.lgamma(x + 1.0)
            + a_n * math.log(b_n / (b_n + 1.0))
            - x * math.log(b_n + 1.0)
        )

    def log_marginal(self, hyper, stats):
        a_n = hyper.shape + stats.sum_x
        b_n = hyper.rate + stats.n
        return (
            math.lgamma(a_n)
            - math.lgamma(hyper.shape)
            + hyper.shape * math.log(hyper.rate)
            - a_n * math.log(b_n)
            - stats.sum_log_fact
        )

    def draw_params(self, hyper, stats, rng):
        a_n = hyper.shape + stats.sum_x
        b_n = hyper.rate + stats.n
        return (rng.gamma(a_n, 1.0 / b_n),)

    def log_pdf(self, params, x):
        (rate,) = params
        if x < 0.0 or x != math.floor(x):
            return -math.inf
        return x * math.log(rate) - rate - math.lgamma(x + 1.0)

    def pack(self, params_list):
        return (np.asarray([p[0] for p in params_list], dtype=float),)

    def log_pdf_packed(self, packed, x_vals):
        (rate,) = packed
        ok = (x_vals >= 0.0) & (x_vals == np.floor(x_vals))
        safe = np.where(ok, x_vals, 0.0)
        out = safe * np.log(rate) - rate - gammaln(safe + 1.0)
        return np.where(ok, out, -np.inf)

    def fit_hyper(self, values, defaults: HyperDefaults) -> GammaHyper:
        mean = float(values.mean()) if values.size else 0.0
        if mean <= 0.0:
            return GammaHyper(defaults.gamma_shape, defaults.gamma_rate)
        return GammaHyper(defaults.gamma_shape, defaults.gamma_shape / mean)

    def hyper_to_jsonable(self, hyper):
        return [hyper.shape, hyper.rate]

    def hyper_from_jsonable(self, obj):
        return GammaHyper(*(float(v) for v in obj))


class Categorical:
    """Categorical likelihood over ``k`` codes with a Dirichlet prior."""

    def __init__(self, k):
        if k < 1:
            raise ValueError("categorical needs at least one category")
        self.k = int(k)
        self.tag = f"categorical:{self.k}"

    def default_hyper(self, defaults: HyperDefaults) -> DirichletHyper:
        return DirichletHyper((defaults.cat_concentration,) * self.k)

    def make_stats(self):
        return CountStats(self.k)

    def check_support(self, x):
        if not (
            math.isfinite(x) and x == math.floor(x) and 0 <= x < self.k
        ):
            raise SupportError(
                f"categorical leaf needs codes in 0..{self.k - 1}, got {x}"
            )

    def add(self, stats, x):
        self.check_support(x)
        stats.n += 1
        stats.counts[int(x)] += 1

    def remove(self, stats, x):
        _check_removal(stats)
        if stats.counts[int(x)] <= 0:
            raise BookkeepingError(
                f"remove would drive category {int(x)} count negative"
            )
        stats.n -= 1
        stats.counts[int(x)] -= 1

    def stats_from_values(self, values):
        stats = CountStats(self.k)
        stats.n = int(values.size)
        stats.counts = np.bincount(
            values.astype(np.int64), minlength=self.k
        ).astype(np.int64)
        return stats

    def log_predictive(self, hyper, stats, x):
        self.check_support(x)
        conc = hyper.concentration
        num = conc[int(x)] + stats.counts[int(x)]
        den = sum(conc) + stats.n
        return math.log(num / den)

    def log_marginal(self, hyper, stats):
        conc = np.asarray(hyper.concentration)
        total = conc.sum()
        return float(
            math.lgamma(total)
            - math.lgamma(total + stats.n)
            + (gammaln(conc + stats.counts) - gammaln(conc)).sum()
        )

    def draw_params(self, hyper, stats, rng):
        probs = rng.dirichlet(np.asarray(hyper.concentration) + stats.counts)
        return (probs,)

    def log_pdf(self, params, x):
        (probs,) = params
        code = int(x)
        if not (0 <= code < self.k and x == math.floor(x)):
            return -math.inf
        p = probs[code]
        return math.log(p) if p > 0.0 else -math.inf

    def pack(self, params_list):
        probs = np.asarray([p[0] for p in params_list], dtype=float)
        with np.errstate(divide="ignore"):
            return (np.log(probs),)

    def log_pdf_packed(self, packed, x_vals):
        (log_probs,) = packed
        ok = (
            (x_vals >= 0.0)
            & (x_vals < self.k)
            & (x_vals == np.floor(x_vals))
        )
        codes = np.where(ok, x_vals, 0.0).astype(np.int64)
        out = log_probs[np.arange(len(log_probs)), codes]
        return np.where(ok, out, -np.inf)

    def fit_hyper(self, values, defaults: HyperDefaults) -> DirichletHyper:
        # No closed-form empirical-Bayes update; keep the symmetric default.
        return self.default_hyper(defaults)

    def hyper_to_jsonable(self, hyper):
        return list(hyper.concentration)

    def hyper_from_jsonable(self, obj):
        return DirichletHyper(tuple(float(v) for v in obj))


GAUSSIAN = Gaussian()
EXPONENTIAL = Exponential()
POISSON = Poisson()

_CATEGORICALS: dict[int, Categorical] = {}


def get_family(tag: str):
    """Resolve a family tag (``"gaussian"``, ``"categorical:4"``, ...)."""
    if tag == "gaussian":
        return GAUSSIAN
    if tag == "exponential":
        return EXPONENTIAL
    if tag == "poisson":
        return POISSON
    if tag.startswith("categorical:"):
        k = int(tag.split(":", 1)[1])
        if k not in _CATEGORICALS:
            _CATEGORICALS[k] = Categorical(k)
        return _CATEGORICALS[k]
    raise ValueError(f"unknown leaf family tag {tag!r}")


def default_hypers(graph, defaults: HyperDefaults | None = None) -> list:
    """Default hyperparameters for every leaf of ``graph``, slot-aligned."""
    defaults = defaults or HyperDefaults()
    return [
        get_family(tag).default_hyper(defaults) for tag in graph.leaf_families
    ]


def families_for_column(kind: str) -> tuple[str, ...]:
    """Enabled leaf family tags for one data-column kind.

    Kinds are ``"continuous"``, ``"positive"``, ``"count"``, and
    ``"categorical:K"``.  Positive columns get a heterogeneous
    exponential/gaussian mix; the rest map to their natural family.
    """
    if kind == "continuous":
        return ("gaussian",)
    if kind == "positive":
        return ("exponential", "gaussian")
    if kind == "count":
        return ("poisson",)
    if kind.startswith("categorical:"):
        return (kind,)
    raise ValueError(f"unknown column kind {kind!r}")
