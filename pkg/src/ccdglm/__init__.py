"""Central composite designs and gamma log-link regression for designed experiments."""

from .doe import Design, DesignPoint, design_to_dataset, generate_ccd
from .glm import (
    FitOptions,
    FitResult,
    GammaParams,
    estimate_dispersion,
    expected_information,
    fit,
    fit_dataset,
    log_likelihood,
    observed_information,
    predict,
    score,
)
from .inference import LinearHypothesis, TestReport, likelihood_ratio_test, stars, t_tests, wald_test
from .model import Dataset, Factor, ModelSpec, Term, build_design_matrix, code_value, decode_value
from .selection import SelectionTrace, aic, backward_eliminate
from .validation import ValidationReport, adj_r_squared, kfold_cv, loocv, r_squared

__version__ = "0.1.0"

__all__ = [
    "Dataset", "Design", "DesignPoint", "Factor", "FitOptions", "FitResult", "GammaParams",
    "LinearHypothesis", "ModelSpec", "SelectionTrace", "Term", "TestReport", "ValidationReport",
    "adj_r_squared", "aic", "backward_eliminate", "build_design_matrix", "code_value",
    "decode_value", "design_to_dataset", "estimate_dispersion", "expected_information", "fit",
    "fit_dataset", "generate_ccd", "kfold_cv", "likelihood_ratio_test", "log_likelihood", "loocv",
    "observed_information", "predict", "r_squared", "score", "stars", "t_tests", "wald_test",
]
