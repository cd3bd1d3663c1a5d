"""Bayesian sum-product networks with collapsed Gibbs sampling.

A sum-product network over mixed-type tabular data, trained by MCMC over
latent mixture assignments.  Two samplers share one state representation:
a collapsed sampler that walks only the induced tree per data point, and an
uncollapsed baseline that re-evaluates the whole network per point.  The
rest of the package covers conjugate leaf families, density queries,
hyperparameter fitting, chain diagnostics, and dataset handling.
"""

from .chain import RunConfig, RunResult, run
from .diagnostics import effective_sample_size, timing_harness
from .errors import (
    BookkeepingError,
    DataFormatError,
    GraphFormatError,
    NumericError,
    SpnError,
    SupportError,
)
from .graph import (
    SpnGraph,
    SizeReport,
    build_balanced,
    closed_form_sizes,
    deserialize,
    eval_log_density,
    eval_log_density_batch,
    serialize,
    validate,
)
from .inference import (
    MaterializedParams,
    materialize,
    query_conditional,
    query_marginal,
    test_log_likelihood,
)
from .leaves import HyperDefaults, default_hypers, get_family
from .state import LatentState, from_assignments, init_random
from .tuning import assign_leaf_hyperparams, search_ratios

__version__ = "0.1.0"

__all__ = [
    "BookkeepingError",
    "DataFormatError",
    "GraphFormatError",
    "HyperDefaults",
    "LatentState",
    "MaterializedParams",
    "NumericError",
    "RunConfig",
    "RunResult",
    "SizeReport",
    "SpnError",
    "SpnGraph",
    "SupportError",
    "__version__",
    "assign_leaf_hyperparams",
    "build_balanced",
    "closed_form_sizes",
    "default_hypers",
    "deserialize",
    "effective_sample_size",
    "eval_log_density",
    "eval_log_density_batch",
    "from_assignments",
    "get_family",
    "init_random",
    "materialize",
    "query_conditional",
    "query_marginal",
    "run",
    "search_ratios",
    "serialize",
    "test_log_likelihood",
    "timing_harness",
    "validate",
]
