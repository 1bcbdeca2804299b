"""Command-line front end: ``ccdglm design|fit|select|validate|report``.

Exit status: 0 success, 1 input/validation error, 2 numerical failure.
Text tables print six significant digits; JSON carries full precision.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .doe import design_to_csv, design_to_json, generate_ccd
from .glm import FitResult, GLMConvergenceWarning, GLMError, RankDeficientError, fit
from .inference import InferenceError, coefficient_table
from .io import (
    ConfigError,
    ProjectConfig,
    dumps,
    fmt6,
    load_config,
    read_dataset,
    render_csv,
    render_table,
)
from .model import ModelError, ModelSpec, build_design_matrix
from .selection import SelectionError, SelectionTrace, aic, backward_eliminate
from .validation import ValidationError, ValidationReport, loocv

logger = logging.getLogger("ccdglm")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERIC = 2

SUMMARY_COLUMNS = ("Property", "Model", "N_p", "AIC", "R²", "R²_adj", "CV(n)")


class NumericalFailure(RuntimeError):
    pass


# ------------------------------------------------------------------ #
# Pipeline pieces
# ------------------------------------------------------------------ #


def _fit(dataset, response, spec, cfg: ProjectConfig) -> FitResult:
    res = fit(build_design_matrix(dataset, spec), dataset.response(response), cfg.fit, spec=spec)
    if not res.converged:
        raise NumericalFailure(f"{response}: fit did not converge in {res.iterations} iterations")
    return res


def _select(dataset, response, cfg: ProjectConfig) -> SelectionTrace:
    return backward_eliminate(
        dataset, response, cfg.model_spec(), cfg.forced_for(response), cfg.hierarchy, cfg.fit
    )


def fit_report(res: FitResult, response: str, model: str) -> dict:
    try:
        rows = coefficient_table(res)
    except InferenceError:
        rows = [
            {"term": t, "estimate": float(b), "std_error": None, "t": None, "p_t": None, "p_wald": None, "stars": ""}
            for t, b in zip(res.labels, res.beta_hat)
        ]
    try:
        aic_value = aic(res)
    except SelectionError:
        aic_value = None
    return {
        "response": response,
        "model": model,
        "n": res.n,
        "n_coefficients": res.p,
        "algorithm": res.algorithm_used,
        "iterations": res.iterations,
        "converged": res.converged,
        "nu_hat": res.nu_hat,
        "log_likelihood": res.loglik,
        "aic": aic_value,
        "coefficients": rows,
    }


def format_fit_table(report: dict) -> str:
    rows = []
    for r in report["coefficients"]:
        se = "" if r["std_error"] is None else f"({fmt6(r['std_error'])})"
        rows.append([r["term"], fmt6(r["estimate"]), se, r["stars"]])
    out = f"{report['response']} ({report['model']} model)\n"
    out += render_table(["Term", "Estimate", "(Std. Error)", ""], rows)
    out += f"AIC             {fmt6(report['aic'])}\n"
    out += f"Log Likelihood  {fmt6(report['log_likelihood'])}\n"
    out += "***p<0.001; **p<0.01; *p<0.05; •p<0.1\n"
    return out


def summary_row(response: str, model: str, res: FitResult, rep: ValidationReport) -> dict:
    return {
        "Property": response,
        "Model": model,
        "N_p": res.p,
        "AIC": aic(res),
        "R²": rep.r2,
        "R²_adj": rep.adj_r2,
        "CV(n)": rep.cv_n,
    }


def _summary_text(rows: list[dict], fmt: str) -> str:
    cells = [[r[c] if c in ("Property", "Model", "N_p") else fmt6(r[c]) for c in SUMMARY_COLUMNS] for r in rows]
    if fmt == "json":
        return dumps(rows)
    if fmt == "csv":
        return render_csv(SUMMARY_COLUMNS, [[r[c] if c in ("Property", "Model", "N_p") else repr(r[c]) for c in SUMMARY_COLUMNS] for r in rows])
    return render_table(SUMMARY_COLUMNS, cells)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# ------------------------------------------------------------------ #
# Subcommands
# ------------------------------------------------------------------ #


def cmd_design(cfg: ProjectConfig, out: Path, seed: int | None, fmt: str) -> int:
    design = generate_ccd(cfg.factors, cfg.n_center, cfg.alpha, cfg.seed if seed is None else seed)
    csv_text = design_to_csv(design)
    json_text = design_to_json(design)
    _write(out / "design.csv", csv_text)
    _write(out / "design.json", json_text)
    sys.stdout.write(json_text if fmt == "json" else csv_text)
    return EXIT_OK


def _resolve_spec(cfg, dataset, response, source) -> tuple[ModelSpec, str]:
    if source == "full":
        return ModelSpec.full_second_order(cfg.factor_names), "full"
    if source == "explicit":
        return cfg.model_spec(), "explicit"
    return _select(dataset, response, cfg).final_spec, "reduced"


def cmd_fit(cfg: ProjectConfig, data: Path, response: str, source: str, out: Path, fmt: str) -> int:
    dataset = read_dataset(data, cfg, [response])
    spec, label = _resolve_spec(cfg, dataset, response, source)
    res = _fit(dataset, response, spec, cfg)
    report = fit_report(res, response, label)
    _write(out / f"fit_{response}_{label}.json", dumps(report))
    if fmt == "json":
        sys.stdout.write(dumps(report))
    elif fmt == "csv":
        sys.stdout.write(render_csv(
            ["term", "estimate", "std_error", "stars"],
            [[r["term"], repr(r["estimate"]), repr(r["std_error"]), r["stars"]] for r in report["coefficients"]],
        ))
    else:
        sys.stdout.write(format_fit_table(report))
    return EXIT_OK


def cmd_select(cfg: ProjectConfig, data: Path, response: str, out: Path, fmt: str) -> int:
    dataset = read_dataset(data, cfg, [response])
    trace = _select(dataset, response, cfg)
    report = fit_report(trace.final_fit, response, "reduced")
    _write(out / f"trace_{response}.json", trace.to_json())
    _write(out / f"fit_{response}_reduced.json", dumps(report))
    if fmt == "json":
        sys.stdout.write(trace.to_json())
    else:
        lines = [
            [str(i), s.removed.label if s.removed else "-", str(len(s.spec)), fmt6(s.aic)]
            for i, s in enumerate(trace.steps)
        ]
        sys.stdout.write(render_table(["Step", "Removed", "N_p", "AIC"], lines))
        sys.stdout.write("\n" + format_fit_table(report))
    return EXIT_OK


def cmd_validate(cfg: ProjectConfig, data: Path, response: str, source: str, out: Path, fmt: str) -> int:
    dataset = read_dataset(data, cfg, [response])
    spec, label = _resolve_spec(cfg, dataset, response, source)
    rep = loocv(dataset, response, spec, cfg.fit)
    if rep.nonconverged_folds:
        raise NumericalFailure(f"{response}: {len(rep.nonconverged_folds)} LOOCV fold(s) did not converge")
    _write(out / f"validation_{response}_{label}.json", dumps(rep.to_dict()))
    _write(out / f"loocv_{response}_{label}.csv", rep.to_csv())
    if fmt == "json":
        sys.stdout.write(dumps(rep.to_dict()))
    elif fmt == "csv":
        sys.stdout.write(rep.to_csv())
    else:
        sys.stdout.write(render_table(
            ["Property", "Model", "N_p", "R²", "R²_adj", "CV(n)"],
            [[response, label, str(rep.p), fmt6(rep.r2), fmt6(rep.adj_r2), fmt6(rep.cv_n)]],
        ))
    return EXIT_OK


def run_report(cfg: ProjectConfig, data: Path, out: Path, responses: Sequence[str] | None = None):
    """Full and reduced model per response; returns (summary rows, failures)."""
    responses = list(responses or cfg.responses)
    if not responses:
        raise ConfigError("no responses configured")
    read_dataset(data, cfg)  # factor columns must parse before any response is attempted
    rows: list[dict] = []
    failures: dict[str, str] = {}
    for response in responses:
        try:
            dataset = read_dataset(data, cfg, [response])
            full_spec = cfg.model_spec()
            trace = _select(dataset, response, cfg)
            for label, spec in (("full", full_spec), ("reduced", trace.final_spec)):
                res = _fit(dataset, response, spec, cfg)
                rep = loocv(dataset, response, spec, cfg.fit)
                if rep.nonconverged_folds:
                    raise NumericalFailure(f"{len(rep.nonconverged_folds)} LOOCV fold(s) did not converge")
                rows.append(summary_row(response, label, res, rep))
                _write(out / f"fit_{response}_{label}.json", dumps(fit_report(res, response, label)))
                _write(out / f"loocv_{response}_{label}.csv", rep.to_csv())
            _write(out / f"trace_{response}.json", trace.to_json())
        except (ModelError, GLMError, SelectionError, ValidationError, InferenceError, NumericalFailure) as exc:
            failures[response] = str(exc)
            logger.error("%s: %s", response, exc)
    return rows, failures


def cmd_report(cfg: ProjectConfig, data: Path, out: Path, fmt: str) -> int:
    rows, failures = run_report(cfg, data, out)
    _write(out / "summary.csv", _summary_text(rows, "csv"))
    _write(out / "summary.json", _summary_text(rows, "json"))
    _write(out / "summary.txt", _summary_text(rows, "table"))
    sys.stdout.write(_summary_text(rows, fmt))
    for response, msg in failures.items():
        sys.stderr.write(f"error: {response}: {msg}\n")
    return EXIT_NUMERIC if failures else EXIT_OK


# ------------------------------------------------------------------ #
# Entry point
# ------------------------------------------------------------------ #


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ccdglm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True, response=True):
        p.add_argument("--config", required=True, type=Path)
        if data:
            p.add_argument("--data", required=True, type=Path)
        if response:
            p.add_argument("--response", required=True)
        p.add_argument("--out", type=Path, default=Path("."))
        p.add_argument("--format", choices=("table", "json", "csv"), default="table")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("design", help="generate a central composite design")
    common(p, data=False, response=False)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("fit", help="fit a gamma log-link model")
    common(p)
    p.add_argument("--model", choices=("full", "reduced", "explicit"), default="full")

    p = sub.add_parser("select", help="AIC backward elimination from the configured model")
    common(p)

    p = sub.add_parser("validate", help="leave-one-out cross-validation")
    common(p)
    p.add_argument("--model", choices=("full", "reduced", "explicit"), default="full")

    p = sub.add_parser("report", help="full + reduced models, selection and LOOCV for every response")
    common(p, response=False)
    p.add_argument("--seed", type=int, default=None)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.ERROR,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore", GLMConvergenceWarning)
            cfg = load_config(args.config)
            if getattr(args, "seed", None) is not None:
                cfg = replace(cfg, seed=args.seed)
            if args.command == "design":
                return cmd_design(cfg, args.out, args.seed, args.format)
            if args.command == "fit":
                return cmd_fit(cfg, args.data, args.response, args.model, args.out, args.format)
            if args.command == "select":
                return cmd_select(cfg, args.data, args.response, args.out, args.format)
            if args.command == "validate":
                return cmd_validate(cfg, args.data, args.response, args.model, args.out, args.format)
            return cmd_report(cfg, args.data, args.out, args.format)
    except (RankDeficientError, NumericalFailure) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERIC
    except (ModelError, GLMError, SelectionError, ValidationError, InferenceError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
