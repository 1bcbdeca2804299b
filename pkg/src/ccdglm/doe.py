"""Central composite designs: full 2^k cube, 2k axial points, replicated centers."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Dataset, Factor, ModelError, check_factor_names, decode_value

CENTER = "center"
CUBE = "cube"
STAR = "star"
POINT_CLASSES = (CENTER, CUBE, STAR)

SPHERICAL = "spherical"


@dataclass(frozen=True)
class DesignPoint:
    coded: tuple[float, ...]
    point_class: str

    def __post_init__(self) -> None:
        if self.point_class not in POINT_CLASSES:
            raise ModelError(f"unknown point class {self.point_class!r}")


@dataclass(frozen=True)
class Design:
    factors: tuple[Factor, ...]
    points: tuple[DesignPoint, ...]
    alpha: float
    n_center: int
    run_order: tuple[int, ...]
    seed: int

    @property
    def k(self) -> int:
        return len(self.factors)

    @property
    def factor_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.factors)

    def coded_matrix(self) -> np.ndarray:
        """Points in generation order (not run order)."""
        return np.array([p.coded for p in self.points], dtype=float)


def resolve_alpha(alpha: float | str, k: int) -> float:
    if isinstance(alpha, str):
        if alpha.lower() != SPHERICAL:
            raise ModelError(f"alpha must be 'spherical' or a positive number, got {alpha!r}")
        return math.sqrt(k)
    value = float(alpha)
    if not (math.isfinite(value) and value > 0):
        raise ModelError(f"custom alpha must be > 0, got {alpha!r}")
    return value


def generate_ccd(
    factors: Sequence[Factor],
    n_center: int = 1,
    alpha: float | str = SPHERICAL,
    seed: int = 0,
) -> Design:
    """Build a central composite design with a seeded randomized run order.

    Points are generated in a fixed standard order (cube points with the
    last factor varying fastest, then -alpha/+alpha per factor, then the
    center replicates).  ``run_order`` is a uniform permutation drawn with
    ``numpy.random.Generator(PCG64(seed))``, which shuffles by Fisher-Yates.
    """
    factors = tuple(factors)
    k = len(factors)
    if k == 0:
        raise ModelError("a central composite design needs at least one factor")
    check_factor_names(factors)
    if int(n_center) != n_center or n_center < 1:
        raise ModelError(f"n_center must be an integer >= 1, got {n_center!r}")
    n_center = int(n_center)
    a = resolve_alpha(alpha, k)

    points: list[DesignPoint] = []
    for signs in itertools.product((-1.0, 1.0), repeat=k):
        points.append(DesignPoint(tuple(signs), CUBE))
    for j in range(k):
        for s in (-a, a):
            coord = [0.0] * k
            coord[j] = s
            points.append(DesignPoint(tuple(coord), STAR))
    for _ in range(n_center):
        points.append(DesignPoint((0.0,) * k, CENTER))

    rng = np.random.Generator(np.random.PCG64(int(seed)))
    order = tuple(int(i) for i in rng.permutation(len(points)))
    return Design(factors, tuple(points), a, n_center, order, int(seed))


def run_id(point_class: str, index: int) -> str:
    return f"{point_class}-{index:03d}"


def point_class_of(run: str) -> str:
    """Recover the point class from a run id produced by :func:`design_to_dataset`."""
    head = str(run).split("-", 1)[0]
    return head if head in POINT_CLASSES else ""


def design_to_dataset(design: Design) -> Dataset:
    """Rows in run order; run ids carry point class and generation index."""
    coded = design.coded_matrix()
    order = list(design.run_order)
    ids = tuple(run_id(design.points[i].point_class, i) for i in order)
    return Dataset(design.factor_names, coded[order], {}, ids)


# ------------------------------------------------------------------ #
# Serialization
# ------------------------------------------------------------------ #


def physical_column(name: str) -> str:
    return f"{name}_physical"


def design_rows(design: Design) -> list[dict]:
    rows = []
    for position, i in enumerate(design.run_order, start=1):
        pt = design.points[i]
        row = {"run_order": position, "run_id": run_id(pt.point_class, i), "point_class": pt.point_class}
        for f, c in zip(design.factors, pt.coded):
            row[f.name] = c
        for f, c in zip(design.factors, pt.coded):
            row[physical_column(f.name)] = decode_value(f, c)
        rows.append(row)
    return rows


def design_to_csv(design: Design) -> str:
    rows = design_rows(design)
    header = ["run_order", "run_id", "point_class"]
    header += [f.name for f in design.factors]
    header += [physical_column(f.name) for f in design.factors]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt_cell(row[h]) for h in header])
    return buf.getvalue()


def design_to_json(design: Design) -> str:
    doc = {
        "factors": [
            {"name": f.name, "center": f.center, "step": f.step, "unit": f.unit}
            for f in design.factors
        ],
        "alpha": design.alpha,
        "n_center": design.n_center,
        "seed": design.seed,
        "n_runs": len(design.points),
        "runs": design_rows(design),
    }
    return json.dumps(doc, indent=2) + "\n"


def _fmt_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)
