"""Simulated gamma responses on coded designs.

The bundled campaign mirrors the shape of a five-factor thermal-spray
study (49-run spherical CCD, eight positive responses).  Its numbers are
invented; they exist so the full pipeline can be exercised end to end.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .doe import design_to_dataset, generate_ccd
from .model import Dataset, Factor, ModelSpec, Term, build_design_matrix

HVOF_FACTORS = (
    Factor("PFR", 60.0, 15.0, "g/min"),
    Factor("SOD", 220.0, 40.0, "mm"),
    Factor("Lambda", 0.94, 0.10, ""),
    Factor("CV", 100.0, 25.0, "m/min"),
    Factor("TGF", 683.0, 68.0, "nl/min"),
)

# log-scale truths: {term label: coefficient}, plus the gamma shape nu
CAMPAIGN_TRUTH: dict[str, tuple[dict[str, float], float]] = {
    "velocity": ({"Intercept": 6.48, "TGF": 0.045, "Lambda": 0.012, "PFR": -0.010, "TGF^2": -0.008, "Lambda^2": -0.006}, 4000.0),
    "temperature": ({"Intercept": 7.50, "Lambda": 0.030, "TGF": 0.025, "PFR": -0.012, "Lambda^2": -0.010, "SOD": -0.008}, 6000.0),
    "deposition_rate": ({"Intercept": 3.62, "PFR": 0.268, "SOD": -0.020, "Lambda": 0.063, "TGF": 0.126, "PFR^2": -0.029, "Lambda^2": -0.024, "CV^2": -0.051, "TGF^2": -0.051, "PFR:TGF": 0.018}, 400.0),
    "deposition_efficiency": ({"Intercept": -0.47, "SOD": -0.020, "Lambda": 0.063, "TGF": 0.126, "Lambda^2": -0.025, "CV^2": -0.052, "TGF^2": -0.052, "PFR:TGF": 0.018}, 400.0),
    "thickness": ({"Intercept": 5.70, "PFR": 0.20, "CV": -0.18, "TGF": 0.09, "CV^2": 0.03, "PFR:CV": -0.02}, 300.0),
    "roughness": ({"Intercept": 1.40, "SOD": 0.05, "Lambda": -0.06, "TGF": -0.08, "PFR^2": 0.03, "Lambda:TGF": 0.03}, 120.0),
    "hardness": ({"Intercept": 7.10, "Lambda": 0.04, "TGF": 0.05, "SOD": -0.03, "TGF^2": -0.02}, 350.0),
    "porosity": ({"Intercept": 0.40, "Lambda": -0.15, "TGF": -0.12, "SOD": 0.08, "Lambda^2": 0.06}, 25.0),
}


def simulate_gamma(mu, nu: float, rng: np.random.Generator) -> np.ndarray:
    """Draw y ~ Gamma(mean mu, shape nu), i.e. Var(y) = mu^2 / nu."""
    mu = np.asarray(mu, dtype=float)
    return rng.gamma(shape=nu, scale=mu / nu)


def simulate_response(
    dataset: Dataset,
    truth: Mapping[str, float],
    nu: float,
    rng: np.random.Generator,
) -> np.ndarray:
    spec = ModelSpec(tuple(Term.parse(label) for label in truth))
    beta = np.array(list(truth.values()), dtype=float)
    mu = np.exp(build_design_matrix(dataset, spec) @ beta)
    return simulate_gamma(mu, nu, rng)


def synthetic_campaign(seed: int = 2024, n_center: int = 7) -> Dataset:
    """49-run spherical CCD over the five HVOF factors with eight simulated responses."""
    design = generate_ccd(HVOF_FACTORS, n_center=n_center, seed=seed)
    ds = design_to_dataset(design)
    rng = np.random.Generator(np.random.PCG64(seed))
    for name, (truth, nu) in CAMPAIGN_TRUTH.items():
        ds = ds.with_response(name, simulate_response(ds, truth, nu, rng))
    return ds


def random_coded_design(n: int, k: int, rng: np.random.Generator, spread: float = 1.0) -> np.ndarray:
    return rng.uniform(-spread, spread, size=(n, k))
