"""semforge: structural equation model estimation and benchmarking.

Fit covariance-structure models written in a compact text syntax, compute
standard errors and fit indices, and stress-test estimators on randomly
generated models with known true parameters.
"""

from .bench import (
    BenchRecord,
    Campaign,
    campaign_from_dict,
    classify_failure,
    delta,
    run_campaign,
    standard_sets,
    summarize,
    write_results,
)
from .data import Dataset, load_csv
from .errors import (
    DataError,
    GenerationError,
    ModelError,
    NotPositiveDefiniteError,
    ParseError,
    SemforgeError,
    SingularityError,
)
from .fitting import FitResult, fit_model, fit_system
from .generator import GenConfig, GeneratedCase, generate, write_case
from .model import ParamSystem, VariableTaxonomy, baseline_system, build, classify
from .objective import (
    ObjectiveEval,
    eval_gls,
    eval_mlw,
    eval_uls,
    get_objective,
    value_and_grad,
)
from .optim import Minimizer, OptimOutcome, canonical_method, minimize
from .stats import (
    FitIndices,
    Inference,
    fisher_information,
    fit_baseline,
    fit_indices,
    gather,
    infer,
    report,
    report_dict,
    wishart_loglik,
)
from .syntax import (
    COVARIANCE,
    LOADING,
    REGRESSION,
    TYPEDECL,
    ModelDescription,
    Statement,
    Term,
    parse,
    serialize,
)

__version__ = "0.1.0"

__all__ = [
    "COVARIANCE",
    "LOADING",
    "REGRESSION",
    "TYPEDECL",
    "BenchRecord",
    "Campaign",
    "DataError",
    "Dataset",
    "FitIndices",
    "FitResult",
    "GenConfig",
    "GeneratedCase",
    "GenerationError",
    "Inference",
    "Minimizer",
    "ModelDescription",
    "ModelError",
    "NotPositiveDefiniteError",
    "ObjectiveEval",
    "OptimOutcome",
    "ParamSystem",
    "ParseError",
    "SemforgeError",
    "SingularityError",
    "Statement",
    "Term",
    "VariableTaxonomy",
    "baseline_system",
    "build",
    "campaign_from_dict",
    "canonical_method",
    "classify",
    "classify_failure",
    "delta",
    "eval_gls",
    "eval_mlw",
    "eval_uls",
    "fisher_information",
    "fit_baseline",
    "fit_indices",
    "fit_model",
    "fit_system",
    "gather",
    "generate",
    "get_objective",
    "infer",
    "load_csv",
    "minimize",
    "parse",
    "report",
    "report_dict",
    "run_campaign",
    "serialize",
    "standard_sets",
    "summarize",
    "value_and_grad",
    "wishart_loglik",
    "write_case",
    "write_results",
]
