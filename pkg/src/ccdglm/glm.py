"""Gamma regression with a log link, fitted by maximum likelihood.

The response is parameterized by its mean mu = exp(X @ beta) and a shape
(precision) nu, so that Var(y) = mu**2 / nu.  For this family the root of
the score does not depend on nu; fitting therefore iterates at a fixed
nu (1 by default) and estimates nu afterwards from Pearson residuals.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import ModelError, ModelSpec

logger = logging.getLogger(__name__)

NEWTON = "newton"
FISHER = "fisher"
_ALGORITHMS = {
    NEWTON: NEWTON,
    "newton-raphson": NEWTON,
    "newtonraphson": NEWTON,
    FISHER: FISHER,
    "fisher-scoring": FISHER,
    "fisherscoring": FISHER,
}


class GLMError(ValueError):
    """Invalid input to a gamma GLM routine."""


class RankDeficientError(GLMError):
    pass


class DispersionError(GLMError):
    pass


class GLMConvergenceWarning(RuntimeWarning):
    pass


# ------------------------------------------------------------------ #
# Parameterizations
# ------------------------------------------------------------------ #


@dataclass(frozen=True)
class GammaParams:
    """Gamma law in shape/rate form; ``from_mean`` converts from (mu, nu)."""

    shape: float
    rate: float

    def __post_init__(self) -> None:
        if not (self.shape > 0 and self.rate > 0):
            raise GLMError("gamma shape and rate must be > 0")

    @classmethod
    def from_mean(cls, mu: float, nu: float) -> GammaParams:
        if not (mu > 0 and nu > 0):
            raise GLMError("gamma mean and shape must be > 0")
        return cls(nu, nu / mu)

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    @property
    def variance(self) -> float:
        return self.shape / self.rate**2

    @property
    def nu(self) -> float:
        return self.shape

    def logpdf(self, y: float) -> float:
        if y <= 0:
            raise GLMError("gamma density is supported on y > 0")
        a, b = self.shape, self.rate
        return a * math.log(b) - math.lgamma(a) + (a - 1) * math.log(y) - b * y


# ------------------------------------------------------------------ #
# Likelihood and derivatives
# ------------------------------------------------------------------ #


def _check(beta, nu, X, y):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    beta = np.asarray(beta, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[1] != beta.shape[0]:
        raise GLMError(f"beta has {beta.shape[0]} entries for {X.shape[1]} columns")
    if X.shape[0] != y.shape[0]:
        raise GLMError(f"X has {X.shape[0]} rows for {y.shape[0]} responses")
    if not (np.isfinite(nu) and nu > 0):
        raise GLMError(f"nu must be finite and > 0, got {nu!r}")
    if not np.all(np.isfinite(y) & (y > 0)):
        raise GLMError("responses must be finite and > 0 (gamma support)")
    eta = X @ beta
    if not np.all(np.isfinite(eta)):
        raise GLMError("non-finite linear predictor")
    return beta, float(nu), X, y, eta


def log_likelihood(beta, nu: float, X, y) -> float:
    beta, nu, X, y, eta = _check(beta, nu, X, y)
    n = y.shape[0]
    return float(
        n * (nu * math.log(nu) - math.lgamma(nu))
        + np.sum(-nu * eta + (nu - 1.0) * np.log(y) - nu * y * np.exp(-eta))
    )


def score(beta, nu: float, X, y) -> np.ndarray:
    beta, nu, X, y, eta = _check(beta, nu, X, y)
    return X.T @ (nu * (y / np.exp(eta) - 1.0))


def observed_information(beta, nu: float, X, y) -> np.ndarray:
    beta, nu, X, y, eta = _check(beta, nu, X, y)
    w = nu * y / np.exp(eta)
    H = X.T @ (w[:, None] * X)
    return 0.5 * (H + H.T)


def expected_information(nu: float, X) -> np.ndarray:
    if not (np.isfinite(nu) and nu > 0):
        raise GLMError(f"nu must be finite and > 0, got {nu!r}")
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    return nu * (X.T @ X)


def mean_response(X, beta) -> np.ndarray:
    return np.exp(np.asarray(X, dtype=float) @ np.asarray(beta, dtype=float))


# ------------------------------------------------------------------ #
# Fitting
# ------------------------------------------------------------------ #


@dataclass(frozen=True)
class FitOptions:
    algorithm: str = FISHER
    max_iter: int = 50
    tol: float = 1e-8
    init: Optional[Sequence[float]] = None
    iteration_nu: float = 1.0
    max_halvings: int = 10

    def __post_init__(self) -> None:
        key = str(self.algorithm).lower().replace("_", "-")
        if key not in _ALGORITHMS:
            raise GLMError(f"unknown algorithm {self.algorithm!r}; use 'newton' or 'fisher'")
        object.__setattr__(self, "algorithm", _ALGORITHMS[key])
        if int(self.max_iter) < 1:
            raise GLMError("max_iter must be >= 1")
        if not self.tol > 0:
            raise GLMError("tol must be > 0")
        if not (np.isfinite(self.iteration_nu) and self.iteration_nu > 0):
            raise GLMError("iteration_nu must be > 0")


@dataclass(frozen=True)
class FitResult:
    beta_hat: np.ndarray
    nu_hat: float
    cov_beta: np.ndarray
    loglik: float
    n: int
    p: int
    iterations: int
    converged: bool
    algorithm_used: str
    spec: Optional[ModelSpec] = None
    X: np.ndarray = field(default=None, repr=False)
    y: np.ndarray = field(default=None, repr=False)
    trace: tuple[float, ...] = ()
    score_norm: float = float("nan")

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov_beta))

    @property
    def fitted(self) -> np.ndarray:
        return mean_response(self.X, self.beta_hat)

    @property
    def labels(self) -> list[str]:
        if self.spec is not None:
            return self.spec.labels
        return [f"x{j}" for j in range(self.p)]


def dependent_columns(X: np.ndarray) -> list[int]:
    """Indices of columns that are linear combinations of earlier columns."""
    X = np.asarray(X, dtype=float)
    scale = np.linalg.norm(X, axis=0)
    scale[scale == 0] = 1.0
    Xs = X / scale
    kept: list[int] = []
    dependent: list[int] = []
    for j in range(X.shape[1]):
        trial = kept + [j]
        if np.linalg.matrix_rank(Xs[:, trial]) == len(trial):
            kept.append(j)
        else:
            dependent.append(j)
    return dependent


def check_full_rank(X: np.ndarray, labels: Sequence[str] | None = None) -> None:
    dep = dependent_columns(X)
    if dep:
        names = [labels[j] if labels else f"column {j}" for j in dep]
        raise RankDeficientError(
            f"design matrix is rank deficient; linearly dependent column(s): {', '.join(names)}"
        )


def _spd_solve(M: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, bool]:
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        warnings.warn(
            "information matrix not positive definite; falling back to pseudo-inverse",
            GLMConvergenceWarning,
            stacklevel=3,
        )
        return np.linalg.pinv(M) @ b, False
    z = np.linalg.solve(L, b)
    return np.linalg.solve(L.T, z), True


def _spd_inverse(M: np.ndarray) -> np.ndarray:
    inv, _ = _spd_solve(M, np.eye(M.shape[0]))
    return 0.5 * (inv + inv.T)


def estimate_dispersion(beta_hat, X, y) -> float:
    """Pearson estimate of nu: 1 / (sum(((y - mu) / mu)**2) / (n - p))."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    n, p = X.shape
    if n <= p:
        raise DispersionError(f"need n > p to estimate dispersion (n={n}, p={p})")
    mu = mean_response(X, beta_hat)
    phi = float(np.sum(((y - mu) / mu) ** 2)) / (n - p)
    if not phi > 0:
        raise DispersionError(
            "Pearson statistic is zero (perfect fit); the gamma shape nu is not identifiable"
        )
    return 1.0 / phi


def initial_beta(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares fit of log(y) on X."""
    beta, *_ = np.linalg.lstsq(X, np.log(y), rcond=None)
    return beta


def fit(
    X,
    y,
    opts: FitOptions | None = None,
    spec: ModelSpec | None = None,
) -> FitResult:
    """Maximum likelihood fit by Newton-Raphson or Fisher scoring.

    Iteration stops when the largest absolute change in beta falls below
    ``opts.tol``.  A proposed step that lowers the log-likelihood is halved
    up to ``opts.max_halvings`` times.  Hitting ``max_iter`` returns the
    last iterate with ``converged=False`` instead of raising.

    ``nu_hat`` is the Pearson estimate; ``loglik`` and ``cov_beta`` are
    evaluated at it.  When nu cannot be identified (perfect fit or n <= p)
    those three fields are NaN.
    """
    opts = opts or FitOptions()
    X = np.array(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.array(y, dtype=float).reshape(-1)
    n, p = X.shape
    if y.shape[0] != n:
        raise GLMError(f"X has {n} rows for {y.shape[0]} responses")
    if spec is not None and len(spec) != p:
        raise GLMError(f"spec has {len(spec)} terms for {p} columns")
    if not np.all(np.isfinite(y) & (y > 0)):
        raise GLMError("responses must be finite and > 0 (gamma support)")
    if not np.all(np.isfinite(X)):
        raise GLMError("design matrix has non-finite entries")
    check_full_rank(X, spec.labels if spec is not None else None)
    if n < p:
        warnings.warn(f"fewer observations ({n}) than coefficients ({p})", stacklevel=2)

    nu_it = float(opts.iteration_nu)
    if opts.init is None:
        beta = initial_beta(X, y)
    else:
        beta = np.array(opts.init, dtype=float).reshape(-1)
        if beta.shape[0] != p:
            raise GLMError(f"init has {beta.shape[0]} entries for {p} columns")

    fisher = expected_information(nu_it, X) if opts.algorithm == FISHER else None
    ll = log_likelihood(beta, nu_it, X, y)
    trace: list[float] = []
    converged = False
    it = 0
    for it in range(1, int(opts.max_iter) + 1):
        s = score(beta, nu_it, X, y)
        if opts.algorithm == NEWTON:
            H = observed_information(beta, nu_it, X, y)
            step, _ = _spd_solve(H, s)
        else:
            step, _ = _spd_solve(fisher, s)

        candidate = beta + step
        new_ll = _safe_loglik(candidate, nu_it, X, y)
        halvings = 0
        slack = 1e-12 * max(1.0, abs(ll))
        while not (new_ll >= ll - slack) and halvings < opts.max_halvings:
            step = 0.5 * step
            candidate = beta + step
            new_ll = _safe_loglik(candidate, nu_it, X, y)
            halvings += 1
        if not np.isfinite(new_ll):
            logger.warning("iteration %d produced a non-finite log-likelihood; stopping", it)
            break

        delta = float(np.max(np.abs(candidate - beta)))
        beta, ll = candidate, new_ll
        trace.append(delta)
        if delta < opts.tol:
            converged = True
            break

    s_final = score(beta, nu_it, X, y)
    score_norm = float(np.max(np.abs(s_final))) / nu_it
    info_scale = float(np.max(np.abs(observed_information(beta, 1.0, X, y))))
    if converged and score_norm > opts.tol * max(1.0, info_scale) * 10:
        logger.warning("step criterion met but score is %.3g; flagging as not converged", score_norm)
        converged = False
    if not converged:
        warnings.warn(
            f"gamma GLM did not converge in {it} iterations (last step {trace[-1] if trace else float('nan'):.3g})",
            GLMConvergenceWarning,
            stacklevel=2,
        )

    try:
        nu_hat = estimate_dispersion(beta, X, y)
    except DispersionError as exc:
        logger.warning("%s", exc)
        nu_hat = float("nan")
    if np.isfinite(nu_hat):
        loglik = log_likelihood(beta, nu_hat, X, y)
        cov = _spd_inverse(expected_information(nu_hat, X))
    else:
        loglik = float("nan")
        cov = np.full((p, p), np.nan)

    beta.setflags(write=False)
    cov.setflags(write=False)
    X.setflags(write=False)
    y.setflags(write=False)
    return FitResult(
        beta_hat=beta,
        nu_hat=nu_hat,
        cov_beta=cov,
        loglik=loglik,
        n=n,
        p=p,
        iterations=it,
        converged=converged,
        algorithm_used=opts.algorithm,
        spec=spec,
        X=X,
        y=y,
        trace=tuple(trace),
        score_norm=score_norm,
    )


def _safe_loglik(beta, nu, X, y) -> float:
    eta = X @ beta
    if not np.all(np.isfinite(eta)) or np.max(np.abs(eta)) > 700:
        return -math.inf
    return log_likelihood(beta, nu, X, y)


def predict(result: FitResult, X_new) -> np.ndarray:
    X_new = np.asarray(X_new, dtype=float)
    if X_new.ndim == 1:
        X_new = X_new.reshape(1, -1)
    if X_new.shape[1] != result.p:
        raise GLMError(f"X_new has {X_new.shape[1]} columns, model has {result.p}")
    return mean_response(X_new, result.beta_hat)


def fit_dataset(dataset, response: str, spec: ModelSpec, opts: FitOptions | None = None) -> FitResult:
    from .model import build_design_matrix

    X = build_design_matrix(dataset, spec)
    return fit(X, dataset.response(response), opts, spec=spec)


def with_dispersion(result: FitResult, nu: float) -> FitResult:
    """Re-evaluate log-likelihood and covariance of ``result`` at a given nu."""
    if not (np.isfinite(nu) and nu > 0):
        raise ModelError(f"nu must be > 0, got {nu!r}")
    cov = _spd_inverse(expected_information(nu, result.X))
    cov.setflags(write=False)
    return FitResult(
        beta_hat=result.beta_hat,
        nu_hat=float(nu),
        cov_beta=cov,
        loglik=log_likelihood(result.beta_hat, nu, result.X, result.y),
        n=result.n,
        p=result.p,
        iterations=result.iterations,
        converged=result.converged,
        algorithm_used=result.algorithm_used,
        spec=result.spec,
        X=result.X,
        y=result.y,
        trace=result.trace,
        score_norm=result.score_norm,
    )
