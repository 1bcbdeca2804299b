"""Project configuration, CSV ingestion and report formatting."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from .doe import SPHERICAL, physical_column, point_class_of, run_id as make_run_id
from .glm import FitOptions
from .model import Dataset, Factor, ModelError, ModelSpec, Term, check_factor_names, code_value

FULL = "full"


class ConfigError(ModelError):
    pass


@dataclass(frozen=True)
class ProjectConfig:
    factors: tuple[Factor, ...]
    responses: tuple[str, ...] = ()
    model: str | tuple[str, ...] = FULL
    forced_terms: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    fit: FitOptions = field(default_factory=FitOptions)
    hierarchy: bool = True
    seed: int = 0
    n_center: int = 1
    alpha: float | str = SPHERICAL

    @property
    def factor_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.factors)

    def model_spec(self) -> ModelSpec:
        if self.model == FULL:
            return ModelSpec.full_second_order(self.factor_names)
        return ModelSpec.from_labels(self.model)

    def forced_for(self, response: str) -> frozenset[Term]:
        labels = self.forced_terms.get(response, self.forced_terms.get("*", ()))
        return frozenset(Term.parse(s) for s in labels)


def parse_config(doc: Mapping[str, Any]) -> ProjectConfig:
    if not isinstance(doc, Mapping):
        raise ConfigError("config must be a mapping")
    raw_factors = doc.get("factors")
    if not raw_factors:
        raise ConfigError("config needs a non-empty 'factors' list")
    factors = []
    for i, item in enumerate(raw_factors):
        try:
            name = str(item["name"])
            factors.append(Factor(name, float(item["center"]), float(item["step"]), str(item.get("unit", ""))))
        except KeyError as exc:
            raise ConfigError(f"factor #{i + 1} is missing {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid factor {item.get('name', i + 1)!r}: {exc}") from None
    check_factor_names(factors)

    model = doc.get("model", FULL)
    if isinstance(model, str):
        if model != FULL:
            raise ConfigError("model must be 'full' or a list of term labels")
    else:
        model = tuple(str(t) for t in model)

    forced = doc.get("forced_terms", []) or []
    if isinstance(forced, Mapping):
        forced_map = {str(k): tuple(str(t) for t in v) for k, v in forced.items()}
    else:
        forced_map = {"*": tuple(str(t) for t in forced)}

    fit_doc = doc.get("fit", {}) or {}
    try:
        opts = FitOptions(
            algorithm=fit_doc.get("algorithm", "fisher"),
            max_iter=int(fit_doc.get("max_iter", 50)),
            tol=float(fit_doc.get("tol", 1e-8)),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid fit options: {exc}") from None

    design = doc.get("design", {}) or {}
    alpha = design.get("alpha", SPHERICAL)
    if not isinstance(alpha, str):
        alpha = float(alpha)

    cfg = ProjectConfig(
        factors=tuple(factors),
        responses=tuple(str(r) for r in doc.get("responses", []) or []),
        model=model,
        forced_terms=forced_map,
        fit=opts,
        hierarchy=bool((doc.get("selection", {}) or {}).get("hierarchy", True)),
        seed=int(doc.get("seed", 0)),
        n_center=int(design.get("n_center", 1)),
        alpha=alpha,
    )
    spec = cfg.model_spec()
    unknown = sorted(spec.factors - set(cfg.factor_names))
    if unknown:
        raise ConfigError(f"model references undeclared factor(s) {unknown}")
    for labels in forced_map.values():
        for label in labels:
            if Term.parse(label) not in spec:
                raise ConfigError(f"forced term {label!r} is not in the model")
    return cfg


def load_config(path: str | Path) -> ProjectConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    return parse_config(doc)


def read_dataset(path: str | Path, cfg: ProjectConfig, responses: Sequence[str] = ()) -> Dataset:
    """Read a wide CSV: one row per run, factor columns coded (or ``<name>_physical``)."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read data {path}: {exc}") from None
    if not rows:
        raise ConfigError(f"data file {path} has no rows")
    header = set(rows[0])

    def number(row, col, i):
        try:
            return float(row[col])
        except (TypeError, ValueError):
            raise ConfigError(f"row {i + 1}, column {col!r}: not a number ({row[col]!r})") from None

    columns = []
    for f in cfg.factors:
        if f.name in header:
            columns.append([number(r, f.name, i) for i, r in enumerate(rows)])
        elif physical_column(f.name) in header:
            columns.append([code_value(f, number(r, physical_column(f.name), i)) for i, r in enumerate(rows)])
        else:
            raise ConfigError(f"data file has no column for factor {f.name!r}")
    values = np.column_stack(columns)

    if "run_id" in header:
        ids = tuple(r["run_id"] for r in rows)
    elif "point_class" in header:
        ids = tuple(make_run_id(r["point_class"], i) for i, r in enumerate(rows))
    else:
        ids = tuple(f"run-{i:03d}" for i in range(len(rows)))

    resp = {}
    for name in responses:
        if name not in header:
            raise ConfigError(f"data file has no response column {name!r}")
        resp[name] = [number(r, name, i) for i, r in enumerate(rows)]
    return Dataset(cfg.factor_names, values, resp, ids)


def write_dataset_csv(dataset: Dataset, path: str | Path) -> None:
    names = sorted(dataset.responses)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["run_id", "point_class", *dataset.factor_names, *names])
        for i in range(dataset.n):
            writer.writerow([
                dataset.run_ids[i],
                point_class_of(dataset.run_ids[i]),
                *(repr(float(v)) for v in dataset.factor_values[i]),
                *(repr(float(dataset.responses[k][i])) for k in names),
            ])


# ------------------------------------------------------------------ #
# Formatting
# ------------------------------------------------------------------ #


def fmt6(x: float) -> str:
    """Six significant digits, the precision used in all text tables."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "NA"
    return f"{x:.6g}"


def jsonable(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, (np.floating,)):
        return jsonable(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, Mapping):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, allow_nan=False) + "\n"


def render_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(h)), *(len(str(r[j])) for r in rows)) if rows else len(str(h)) for j, h in enumerate(header)]
    lines = ["  ".join(str(h).ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def render_csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()
