"""Factors, datasets and the term algebra for second-order response models.

Coded units are the canonical representation throughout the package:
a factor with ``center`` x0 and ``step`` dx maps a physical value v to
``(v - x0) / dx``.  Physical values only appear at I/O boundaries.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np


class ModelError(ValueError):
    """Invalid factor, term, spec or dataset."""


# ------------------------------------------------------------------ #
# Factors
# ------------------------------------------------------------------ #


@dataclass(frozen=True)
class Factor:
    name: str
    center: float
    step: float
    unit: str = ""

    def __post_init__(self) -> None:
        if not self.name or not str(self.name).strip():
            raise ModelError("factor name must be non-empty")
        if not (math.isfinite(self.step) and self.step > 0):
            raise ModelError(f"factor {self.name!r}: step must be > 0, got {self.step!r}")
        if not math.isfinite(self.center):
            raise ModelError(f"factor {self.name!r}: center must be finite")


def code_value(factor: Factor, physical: float) -> float:
    """Map a physical level to coded units."""
    return (physical - factor.center) / factor.step


def decode_value(factor: Factor, coded: float) -> float:
    """Map a coded level back to physical units."""
    return factor.center + coded * factor.step


def check_factor_names(factors: Sequence[Factor]) -> None:
    seen: set[str] = set()
    for f in factors:
        if f.name in seen:
            raise ModelError(f"duplicate factor name {f.name!r}")
        seen.add(f.name)


# ------------------------------------------------------------------ #
# Term algebra
# ------------------------------------------------------------------ #

INTERCEPT = "intercept"
MAIN = "main"
QUADRATIC = "quadratic"
INTERACTION = "interaction"

_KIND_RANK = {INTERCEPT: 0, MAIN: 1, QUADRATIC: 2, INTERACTION: 3}


@dataclass(frozen=True, order=False)
class Term:
    """One column of a design matrix.

    Interactions are stored with their two factor names sorted, so
    ``Term.interaction("b", "a") == Term.interaction("a", "b")``.
    """

    kind: str
    factors: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        expected = {INTERCEPT: 0, MAIN: 1, QUADRATIC: 1, INTERACTION: 2}
        if self.kind not in expected:
            raise ModelError(f"unknown term kind {self.kind!r}")
        if len(self.factors) != expected[self.kind]:
            raise ModelError(f"{self.kind} term takes {expected[self.kind]} factor(s)")
        if self.kind == INTERACTION:
            a, b = self.factors
            if a == b:
                raise ModelError(f"interaction needs two distinct factors, got {a!r} twice")
            if b < a:
                object.__setattr__(self, "factors", (b, a))

    @classmethod
    def intercept(cls) -> Term:
        return cls(INTERCEPT)

    @classmethod
    def main(cls, factor: str) -> Term:
        return cls(MAIN, (factor,))

    @classmethod
    def quadratic(cls, factor: str) -> Term:
        return cls(QUADRATIC, (factor,))

    @classmethod
    def interaction(cls, a: str, b: str) -> Term:
        return cls(INTERACTION, (a, b))

    @property
    def label(self) -> str:
        if self.kind == INTERCEPT:
            return "Intercept"
        if self.kind == MAIN:
            return self.factors[0]
        if self.kind == QUADRATIC:
            return f"{self.factors[0]}^2"
        return ":".join(self.factors)

    @classmethod
    def parse(cls, label: str) -> Term:
        """Inverse of :attr:`label` (``Intercept``, ``A``, ``A^2``, ``A:B``)."""
        text = label.strip()
        if text.lower() in {"intercept", "(intercept)", "1"}:
            return cls.intercept()
        if ":" in text:
            a, _, b = text.partition(":")
            return cls.interaction(a.strip(), b.strip())
        if text.endswith("^2"):
            return cls.quadratic(text[:-2].strip())
        if not text:
            raise ModelError("empty term label")
        return cls.main(text)

    def __str__(self) -> str:
        return self.label


def canonical_key(term: Term, factor_order: Sequence[str]):
    """Sort key: intercept, mains, quadratics, then interactions by factor-index pair."""
    pos = {name: i for i, name in enumerate(factor_order)}
    try:
        idx = tuple(sorted(pos[f] for f in term.factors))
    except KeyError as exc:
        raise ModelError(f"term {term.label!r} references unknown factor {exc.args[0]!r}") from None
    return (_KIND_RANK[term.kind], idx)


@dataclass(frozen=True)
class ModelSpec:
    terms: tuple[Term, ...]

    def __post_init__(self) -> None:
        terms = tuple(self.terms)
        object.__setattr__(self, "terms", terms)
        if len(set(terms)) != len(terms):
            dup = [t.label for t in terms if terms.count(t) > 1]
            raise ModelError(f"duplicate terms in model spec: {sorted(set(dup))}")
        if Term.intercept() not in terms:
            raise ModelError("model spec must contain the intercept")

    @classmethod
    def from_labels(cls, labels: Iterable[str]) -> ModelSpec:
        return cls(tuple(Term.parse(s) for s in labels))

    @classmethod
    def full_second_order(cls, factor_names: Sequence[str]) -> ModelSpec:
        names = list(factor_names)
        terms = [Term.intercept()]
        terms += [Term.main(f) for f in names]
        terms += [Term.quadratic(f) for f in names]
        terms += [Term.interaction(a, b) for a, b in itertools.combinations(names, 2)]
        return cls(tuple(terms))

    @property
    def labels(self) -> list[str]:
        return [t.label for t in self.terms]

    @property
    def factors(self) -> set[str]:
        return {f for t in self.terms for f in t.factors}

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: object) -> bool:
        return term in self.terms

    def without(self, term: Term) -> ModelSpec:
        return ModelSpec(tuple(t for t in self.terms if t != term))

    def canonical(self, factor_order: Sequence[str]) -> ModelSpec:
        return ModelSpec(tuple(sorted(self.terms, key=lambda t: canonical_key(t, factor_order))))


def n_full_second_order(k: int) -> int:
    return 1 + 2 * k + k * (k - 1) // 2


# ------------------------------------------------------------------ #
# Dataset
# ------------------------------------------------------------------ #


@dataclass(frozen=True)
class Dataset:
    """Coded factor settings plus any number of named positive responses."""

    factor_names: tuple[str, ...]
    factor_values: np.ndarray
    responses: Mapping[str, np.ndarray] = field(default_factory=dict)
    run_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        names = tuple(self.factor_names)
        if len(set(names)) != len(names):
            raise ModelError("duplicate factor names in dataset")
        values = np.array(self.factor_values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, len(names)) if names else values.reshape(-1, 0)
        if values.ndim != 2 or values.shape[1] != len(names):
            raise ModelError(
                f"factor_values must be n x {len(names)}, got shape {values.shape}"
            )
        n = values.shape[0]
        if n < 1:
            raise ModelError("dataset needs at least one run")
        values.setflags(write=False)

        run_ids = tuple(str(r) for r in self.run_ids) or tuple(f"run{i}" for i in range(n))
        if len(run_ids) != n:
            raise ModelError(f"{len(run_ids)} run ids for {n} runs")

        responses = {}
        for name, vec in dict(self.responses).items():
            arr = np.array(vec, dtype=float).reshape(-1)
            if arr.shape[0] != n:
                raise ModelError(f"response {name!r} has {arr.shape[0]} values for {n} runs")
            bad = ~(np.isfinite(arr) & (arr > 0))
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                raise ModelError(
                    f"response {name!r} violates gamma support (must be > 0): "
                    f"run {run_ids[i]} has value {arr[i]!r}"
                )
            arr.setflags(write=False)
            responses[name] = arr

        object.__setattr__(self, "factor_names", names)
        object.__setattr__(self, "factor_values", values)
        object.__setattr__(self, "responses", responses)
        object.__setattr__(self, "run_ids", run_ids)

    @property
    def n(self) -> int:
        return self.factor_values.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.factor_names.index(name)
        except ValueError:
            raise ModelError(
                f"unknown factor {name!r}; dataset has {list(self.factor_names)}"
            ) from None
        return self.factor_values[:, j]

    def response(self, name: str) -> np.ndarray:
        try:
            return self.responses[name]
        except KeyError:
            raise ModelError(
                f"unknown response {name!r}; dataset has {sorted(self.responses)}"
            ) from None

    def with_response(self, name: str, values) -> Dataset:
        responses = dict(self.responses)
        responses[name] = values
        return Dataset(self.factor_names, self.factor_values, responses, self.run_ids)

    def subset(self, rows) -> Dataset:
        idx = np.asarray(rows)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        return Dataset(
            self.factor_names,
            self.factor_values[idx],
            {k: v[idx] for k, v in self.responses.items()},
            tuple(self.run_ids[i] for i in idx),
        )


def build_design_matrix(dataset: Dataset, spec: ModelSpec) -> np.ndarray:
    """Evaluate every term of ``spec`` on every run; columns follow ``spec.terms``."""
    missing = sorted(spec.factors - set(dataset.factor_names))
    if missing:
        raise ModelError(
            f"model references unknown factor(s) {missing}; dataset has {list(dataset.factor_names)}"
        )
    cols = []
    for term in spec.terms:
        if term.kind == INTERCEPT:
            cols.append(np.ones(dataset.n))
        elif term.kind == MAIN:
            cols.append(dataset.column(term.factors[0]))
        elif term.kind == QUADRATIC:
            x = dataset.column(term.factors[0])
            cols.append(x * x)
        else:
            a, b = term.factors
            cols.append(dataset.column(a) * dataset.column(b))
    return np.column_stack(cols)
