"""Bayesian quantile regression for partially linear additive models.

Spike-and-slab indicators sort each additive component into a nonlinear,
linear, or zero effect while a partially collapsed Gibbs sampler draws
from the posterior built on the asymmetric Laplace working likelihood.
"""

__version__ = "0.1.0"

from .gibbs import (
    FitModel,
    GibbsConfig,
    PosteriorSummary,
    PriorConfig,
    run_chain,
)
from . import gibbs, metrics, samplers, simulate, splines, variants
from .metrics import ComponentLabel, SelectionCounts, acl, classify_components, ise, selection_counts, test_errors
from .model import ChainState, Dataset, ModelSpec, QuantileSpec, ald_log_density, check_loss, eval_f, mixture_constants
from .samplers import GigParams, RngHandle, make_rng, sample_exponential, sample_gig, sample_inverse_gamma, sample_mvn
from .simulate import SimDesign, generate_dataset, run_experiment, true_components
from .splines import KnotGrid, SplineSystem, build_system, penalty_matrix, raw_basis
from .variants import EngineVariant, build_engine

__all__ = [
    "ChainState",
    "ComponentLabel",
    "Dataset",
    "EngineVariant",
    "FitModel",
    "GibbsConfig",
    "GigParams",
    "KnotGrid",
    "ModelSpec",
    "PosteriorSummary",
    "PriorConfig",
    "QuantileSpec",
    "RngHandle",
    "SelectionCounts",
    "SimDesign",
    "SplineSystem",
    "acl",
    "ald_log_density",
    "build_engine",
    "build_system",
    "check_loss",
    "classify_components",
    "eval_f",
    "generate_dataset",
    "ise",
    "make_rng",
    "mixture_constants",
    "penalty_matrix",
    "raw_basis",
    "run_chain",
    "run_experiment",
    "sample_exponential",
    "sample_gig",
    "sample_inverse_gamma",
    "sample_mvn",
    "selection_counts",
    "test_errors",
    "true_components",
]
