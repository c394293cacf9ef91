"""Bayesian model selection and posterior inference for structured linear models.

A structured linear signal couples a discrete structure (labels,
supports, sign codes) with a continuous parameter through a linear map.
This package implements a two-step selection prior over (structure,
parameter) with an elliptical Laplace parameter law, exact posterior
tables for enumerable model spaces, a collapsed Metropolis-Hastings
sampler for larger ones, and an experiment harness that measures
posterior losses against complexity benchmarks.
"""

from .design import DesignOperator, build_design, enumerate_structures, verify_structure
from .errors import (
    CapExceeded,
    CollinearStructure,
    ConfigError,
    NoValidModels,
    NumericFailure,
    StructBayesError,
)
from .estimators import CollapsedSampler, ExactPosterior
from .families import (
    AggregationFamily,
    BesovLevelFamily,
    BiclusteringFamily,
    ComplexityValue,
    DictionaryFamily,
    GroupSparsityFamily,
    GroupTwoLevelFamily,
    ModelFamily,
    MultiTaskFamily,
    SbmFamily,
    SobolevFamily,
    SparseRegressionFamily,
    check_capacity,
    check_complexity_dominates,
    family_from_dict,
)
from .marginal import (
    PosteriorEntry,
    PosteriorTable,
    exact_posterior_table,
    log_marginal,
    sample_q_conditional,
)
from .prior import (
    PriorConfig,
    PriorDraw,
    elliptical_laplace_log_density,
    log_correction_factor,
    model_index_log_pmf,
    sample_elliptical_laplace,
    sample_prior,
)
from .radial import log_radial_integral
from .rates import aggregation_rate, effective_sparsity
from .sampler import ChainConfig, ChainResult, ChainState, collapsed_mh_step, run_chain
from .structures import Structure, structure_from_json, structure_to_json

__version__ = "0.1.0"

__all__ = [
    "AggregationFamily",
    "BesovLevelFamily",
    "BiclusteringFamily",
    "CapExceeded",
    "ChainConfig",
    "ChainResult",
    "ChainState",
    "CollapsedSampler",
    "CollinearStructure",
    "ComplexityValue",
    "ConfigError",
    "DesignOperator",
    "DictionaryFamily",
    "ExactPosterior",
    "GroupSparsityFamily",
    "GroupTwoLevelFamily",
    "ModelFamily",
    "MultiTaskFamily",
    "NoValidModels",
    "NumericFailure",
    "PosteriorEntry",
    "PosteriorTable",
    "PriorConfig",
    "PriorDraw",
    "SbmFamily",
    "SobolevFamily",
    "SparseRegressionFamily",
    "StructBayesError",
    "Structure",
    "aggregation_rate",
    "build_design",
    "check_capacity",
    "check_complexity_dominates",
    "collapsed_mh_step",
    "effective_sparsity",
    "elliptical_laplace_log_density",
    "enumerate_structures",
    "exact_posterior_table",
    "family_from_dict",
    "log_correction_factor",
    "log_marginal",
    "log_radial_integral",
    "model_index_log_pmf",
    "run_chain",
    "sample_elliptical_laplace",
    "sample_prior",
    "sample_q_conditional",
    "structure_from_json",
    "structure_to_json",
    "verify_structure",
]
