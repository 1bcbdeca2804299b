"""Wald, t and likelihood-ratio tests on fitted gamma regressions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .distributions import chi2_sf, t_two_sided
from .glm import FitResult, log_likelihood

WALD = "wald"
T = "t"
LRT = "lrt"

# strict upper bounds, as in "***p<0.001"
STAR_THRESHOLDS = ((0.001, "***"), (0.01, "**"), (0.05, "*"), (0.1, "•"))


class InferenceError(ValueError):
    pass


def stars(p_value: float) -> str:
    for bound, glyph in STAR_THRESHOLDS:
        if p_value < bound:
            return glyph
    return ""


@dataclass(frozen=True)
class LinearHypothesis:
    """H0: C @ beta = d with C of full row rank."""

    C: np.ndarray
    d: np.ndarray

    def __post_init__(self) -> None:
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        d = np.asarray(self.d, dtype=float).reshape(-1)
        if d.shape[0] != C.shape[0]:
            raise InferenceError(f"d has {d.shape[0]} entries for {C.shape[0]} constraints")
        if C.shape[0] > C.shape[1]:
            raise InferenceError("more constraints than coefficients")
        if np.linalg.matrix_rank(C) != C.shape[0]:
            raise InferenceError("hypothesis matrix C must have full row rank")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "d", d)

    @property
    def r(self) -> int:
        return self.C.shape[0]

    @classmethod
    def coefficient(cls, p: int, j: int, value: float = 0.0) -> LinearHypothesis:
        C = np.zeros((1, p))
        C[0, j] = 1.0
        return cls(C, np.array([value]))

    @classmethod
    def coefficients(cls, p: int, indices) -> LinearHypothesis:
        idx = list(indices)
        C = np.zeros((len(idx), p))
        C[np.arange(len(idx)), idx] = 1.0
        return cls(C, np.zeros(len(idx)))


@dataclass(frozen=True)
class TestReport:
    statistic: float
    df: int
    p_value: float
    kind: str
    stars: str
    term: Optional[str] = None
    estimate: Optional[float] = None
    std_error: Optional[float] = None

    __test__ = False  # not a pytest class


def wald_test(result: FitResult, hyp: LinearHypothesis) -> TestReport:
    """w = (C b - d)' [C V C']^-1 (C b - d), referred to chi-square(r)."""
    if hyp.C.shape[1] != result.p:
        raise InferenceError(f"C has {hyp.C.shape[1]} columns, model has {result.p} coefficients")
    diff = hyp.C @ result.beta_hat - hyp.d
    middle = hyp.C @ result.cov_beta @ hyp.C.T
    if not np.all(np.isfinite(middle)):
        raise InferenceError("covariance unavailable (dispersion not identified)")
    if np.linalg.matrix_rank(middle) < hyp.r:
        raise InferenceError("C cov C' is singular on the tested subspace")
    if hyp.r == 1:
        w = float(diff[0] * diff[0] / middle[0, 0])
    else:
        w = float(diff @ np.linalg.solve(middle, diff))
    p = chi2_sf(max(w, 0.0), hyp.r)
    return TestReport(w, hyp.r, p, WALD, stars(p))


def wald_rejects(report: TestReport, level: float) -> bool:
    """Reject at ``level`` iff the chi-square tail probability is below it."""
    return report.p_value < level


def t_tests(result: FitResult) -> list[TestReport]:
    """Per-coefficient t = b_j / se_j with two-sided Student-t(n - p) p-values."""
    dof = result.n - result.p
    if dof <= 0:
        raise InferenceError(f"t tests need n > p (n={result.n}, p={result.p})")
    if not np.all(np.isfinite(result.cov_beta)):
        raise InferenceError("covariance unavailable (dispersion not identified)")
    labels = result.labels
    reports = []
    for j in range(result.p):
        a_jj = result.cov_beta[j, j]
        se = float(np.sqrt(a_jj))
        b = float(result.beta_hat[j])
        t = b / se
        p = t_two_sided(t, dof)
        reports.append(TestReport(t, dof, p, T, stars(p), labels[j], b, se))
    return reports


def coefficient_table(result: FitResult) -> list[dict]:
    """Estimate, standard error, t statistic and both p-value framings per term."""
    rows = []
    for rep in t_tests(result):
        rows.append({
            "term": rep.term,
            "estimate": rep.estimate,
            "std_error": rep.std_error,
            "t": rep.statistic,
            "p_t": rep.p_value,
            "p_wald": chi2_sf(rep.statistic**2, 1),
            "stars": rep.stars,
        })
    return rows


def _is_nested(full: FitResult, restricted: FitResult) -> bool:
    if full.spec is not None and restricted.spec is not None:
        return set(restricted.spec.terms) <= set(full.spec.terms)
    for col in restricted.X.T:
        if not any(np.array_equal(col, c) for c in full.X.T):
            return False
    return True


def likelihood_ratio_test(full: FitResult, restricted: FitResult) -> TestReport:
    """2 (l_full - l_restricted), both evaluated at the full model's nu_hat."""
    if full.n != restricted.n or not np.array_equal(full.y, restricted.y):
        raise InferenceError("likelihood ratio test needs both fits on the same data")
    if not _is_nested(full, restricted):
        raise InferenceError("restricted model is not nested in the full model")
    nu = full.nu_hat
    if not np.isfinite(nu):
        raise InferenceError("full model dispersion is not identified")
    l_full = log_likelihood(full.beta_hat, nu, full.X, full.y)
    l_restr = log_likelihood(restricted.beta_hat, nu, restricted.X, restricted.y)
    stat = 2.0 * (l_full - l_restr)
    slack = 1e-7 * max(1.0, abs(l_full))
    if stat < -slack:
        raise InferenceError(
            f"negative likelihood ratio statistic {stat:.6g}: restricted fit beats the full fit"
        )
    stat = max(stat, 0.0)
    df = full.p - restricted.p
    p = chi2_sf(stat, df) if df > 0 else 1.0
    return TestReport(stat, df, p, LRT, stars(p))
