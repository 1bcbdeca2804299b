"""Leave-one-out and k-fold cross-validation, R^2 and adjusted R^2."""

from __future__ import annotations

import csv
import io
import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .doe import point_class_of
from .glm import FitOptions, GLMConvergenceWarning, RankDeficientError, fit, predict
from .model import Dataset, ModelSpec, build_design_matrix

logger = logging.getLogger(__name__)


class ValidationError(ValueError):
    pass


def r_squared(observed, fitted) -> float:
    y = np.asarray(observed, dtype=float).reshape(-1)
    f = np.asarray(fitted, dtype=float).reshape(-1)
    if y.shape != f.shape:
        raise ValidationError(f"{y.shape[0]} observed values for {f.shape[0]} fitted values")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        raise ValidationError("R^2 undefined for a constant response")
    return 1.0 - float(np.sum((y - f) ** 2)) / ss_tot


def adj_r_squared(r2: float, n: int, p: int) -> float:
    """1 - (n - 1) / (n - p) * (1 - R^2), p counting all coefficients."""
    if n <= p:
        raise ValidationError(f"adjusted R^2 needs n > p (n={n}, p={p})")
    return 1.0 - (n - 1) / (n - p) * (1.0 - r2)


@dataclass(frozen=True)
class ObservationRecord:
    run_id: str
    point_class: str
    observed: float
    fitted_in_sample: float
    loocv_prediction: float
    fold_converged: bool = True


@dataclass(frozen=True)
class ValidationReport:
    cv_n: float
    r2: float
    adj_r2: float
    n: int
    p: int
    per_obs: tuple[ObservationRecord, ...]
    n_folds: int
    nonconverged_folds: tuple[int, ...] = ()

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["run_id", "point_class", "observed", "loocv_prediction"])
        for rec in self.per_obs:
            writer.writerow([rec.run_id, rec.point_class, repr(rec.observed), repr(rec.loocv_prediction)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "cv_n": self.cv_n,
            "r2": self.r2,
            "adj_r2": self.adj_r2,
            "n": self.n,
            "p": self.p,
            "n_folds": self.n_folds,
            "nonconverged_folds": list(self.nonconverged_folds),
            "per_obs": [
                {
                    "run_id": r.run_id,
                    "point_class": r.point_class,
                    "observed": r.observed,
                    "fitted_in_sample": r.fitted_in_sample,
                    "loocv_prediction": r.loocv_prediction,
                    "fold_converged": r.fold_converged,
                }
                for r in self.per_obs
            ],
        }


def _fold_predictions(dataset, response, spec, opts, folds):
    """Fit once per fold on the complement and predict the held-out rows."""
    y = dataset.response(response)
    n = dataset.n
    preds = np.full(n, np.nan)
    ok = np.ones(n, dtype=bool)
    bad_folds = []
    for f, held in enumerate(folds):
        mask = np.ones(n, dtype=bool)
        mask[held] = False
        train = dataset.subset(mask)
        X_train = build_design_matrix(train, spec)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", GLMConvergenceWarning)
                res = fit(X_train, train.response(response), opts, spec=spec)
        except RankDeficientError as exc:
            raise ValidationError(f"fold {f} (held out {[dataset.run_ids[i] for i in held]}): {exc}") from None
        X_held = build_design_matrix(dataset.subset(held), spec)
        preds[held] = predict(res, X_held)
        if not res.converged:
            ok[held] = False
            bad_folds.append(f)
    if bad_folds:
        logger.warning("%d fold(s) did not converge and are excluded from CV: %s", len(bad_folds), bad_folds)
    return y, preds, ok, tuple(bad_folds)


def _report(dataset, response, spec, opts, folds) -> ValidationReport:
    n = dataset.n
    p = len(spec)
    full_fit = fit(build_design_matrix(dataset, spec), dataset.response(response), opts, spec=spec)
    fitted = full_fit.fitted
    y, preds, ok, bad = _fold_predictions(dataset, response, spec, opts, folds)
    err = y[ok] - preds[ok]
    cv = float(np.mean(err**2)) if err.size else float("nan")
    r2 = r_squared(y, fitted)
    adj = adj_r_squared(r2, n, p)
    records = tuple(
        ObservationRecord(
            dataset.run_ids[i],
            point_class_of(dataset.run_ids[i]),
            float(y[i]),
            float(fitted[i]),
            float(preds[i]),
            bool(ok[i]),
        )
        for i in range(n)
    )
    return ValidationReport(cv, r2, adj, n, p, records, len(folds), bad)


def loocv(dataset: Dataset, response: str, spec: ModelSpec, opts: FitOptions | None = None) -> ValidationReport:
    """CV(n) = mean of (y_i - yhat_(-i))^2 over n single-row folds."""
    opts = opts or FitOptions()
    if dataset.n < len(spec) + 2:
        raise ValidationError(f"LOOCV needs n >= p + 2 (n={dataset.n}, p={len(spec)})")
    folds = [np.array([i]) for i in range(dataset.n)]
    return _report(dataset, response, spec, opts, folds)


def kfold_cv(
    dataset: Dataset,
    response: str,
    spec: ModelSpec,
    k: int,
    seed: int = 0,
    opts: FitOptions | None = None,
) -> ValidationReport:
    """k-fold variant; fold membership is a seeded shuffle dealt round-robin."""
    opts = opts or FitOptions()
    n = dataset.n
    if not 2 <= k <= n:
        raise ValidationError(f"k must lie in [2, n], got {k}")
    if k == n:
        return loocv(dataset, response, spec, opts)
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    folds = [np.sort(perm[f::k]) for f in range(k)]
    if n - max(len(f) for f in folds) < len(spec) + 1:
        raise ValidationError("folds too large to leave an estimable training set")
    return _report(dataset, response, spec, opts, folds)
