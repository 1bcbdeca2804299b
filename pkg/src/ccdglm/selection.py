"""AIC and AIC-guided backward elimination."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .glm import FitOptions, FitResult, GLMError, fit
from .model import INTERACTION, INTERCEPT, MAIN, QUADRATIC, Dataset, ModelSpec, Term, build_design_matrix, canonical_key

logger = logging.getLogger(__name__)


class SelectionError(ValueError):
    pass


def aic_from_loglik(loglik: float, n_coef: int) -> float:
    """-2 l + 2 (n_coef + 1); the +1 counts the gamma dispersion."""
    return -2.0 * loglik + 2.0 * (n_coef + 1)


def aic(result: FitResult) -> float:
    if not result.converged:
        raise SelectionError("AIC requested for a fit that did not converge")
    if not np.isfinite(result.loglik):
        raise SelectionError("AIC undefined: log-likelihood not available (dispersion not identified)")
    return aic_from_loglik(result.loglik, result.p)


@dataclass(frozen=True)
class SelectionStep:
    spec: ModelSpec
    aic: float
    removed: Optional[Term]
    forced: frozenset[Term]
    candidates: tuple[tuple[str, float], ...] = ()


@dataclass(frozen=True)
class SelectionTrace:
    steps: tuple[SelectionStep, ...]
    final_spec: ModelSpec
    final_fit: Optional[FitResult] = field(default=None, repr=False)

    @property
    def aic_path(self) -> list[float]:
        return [s.aic for s in self.steps]

    @property
    def removed(self) -> list[Term]:
        return [s.removed for s in self.steps if s.removed is not None]

    def to_dict(self) -> dict:
        return {
            "steps": [
                {
                    "terms": s.spec.labels,
                    "aic": s.aic,
                    "removed": s.removed.label if s.removed else None,
                    "forced": sorted(t.label for t in s.forced),
                    "candidates": [{"term": t, "aic": a} for t, a in s.candidates],
                }
                for s in self.steps
            ],
            "final_terms": self.final_spec.labels,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"


def protected_by_hierarchy(term: Term, spec: ModelSpec) -> bool:
    """A main effect stays while its square or any interaction with it remains."""
    if term.kind != MAIN:
        return False
    f = term.factors[0]
    for other in spec.terms:
        if other.kind == QUADRATIC and other.factors[0] == f:
            return True
        if other.kind == INTERACTION and f in other.factors:
            return True
    return False


def backward_eliminate(
    dataset: Dataset,
    response: str,
    full: ModelSpec,
    forced: Iterable[Term] = (),
    hierarchy: bool = True,
    opts: FitOptions | None = None,
) -> SelectionTrace:
    """Greedy backward elimination on AIC.

    Each step refits every admissible single-term deletion and accepts the
    one with the lowest AIC if it beats the current model.  Ties go to the
    term that comes first in canonical order (intercept, mains, squares,
    interactions; factor order as in ``dataset``).
    """
    opts = opts or FitOptions()
    forced_set = frozenset(forced) | {Term.intercept()}
    unknown = forced_set - set(full.terms)
    if unknown:
        raise SelectionError(f"forced terms not in the full model: {sorted(t.label for t in unknown)}")
    y = dataset.response(response)
    order = dataset.factor_names

    def refit(spec: ModelSpec, parent: Optional[FitResult] = None) -> FitResult:
        X = build_design_matrix(dataset, spec)
        init = None
        if parent is not None and parent.spec is not None:
            pos = {t: i for i, t in enumerate(parent.spec.terms)}
            init = [parent.beta_hat[pos[t]] for t in spec.terms]
        run_opts = FitOptions(opts.algorithm, opts.max_iter, opts.tol, init, opts.iteration_nu, opts.max_halvings)
        return fit(X, y, run_opts, spec=spec)

    current = full
    current_fit = refit(current)
    current_aic = aic(current_fit)
    steps = [SelectionStep(current, current_aic, None, forced_set)]

    while True:
        candidates = [
            t for t in sorted(current.terms, key=lambda t: canonical_key(t, order))
            if t not in forced_set and t.kind != INTERCEPT
            and not (hierarchy and protected_by_hierarchy(t, current))
        ]
        scored: list[tuple[Term, float, FitResult]] = []
        for term in candidates:
            spec = current.without(term)
            try:
                cand_fit = refit(spec, current_fit)
                cand_aic = aic(cand_fit)
            except (GLMError, SelectionError) as exc:
                logger.warning("skipping deletion of %s: %s", term.label, exc)
                continue
            scored.append((term, cand_aic, cand_fit))
        if not scored:
            break
        best_term, best_aic, best_fit = min(scored, key=lambda c: c[1])
        if not best_aic < current_aic:
            break
        current = current.without(best_term)
        current_fit, current_aic = best_fit, best_aic
        steps.append(
            SelectionStep(
                current, current_aic, best_term, forced_set,
                tuple((t.label, a) for t, a, _ in scored),
            )
        )

    path = [s.aic for s in steps]
    assert all(b < a for a, b in zip(path, path[1:])), "AIC path must strictly decrease"
    return SelectionTrace(tuple(steps), current, current_fit)
