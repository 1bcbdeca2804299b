import numpy as np
import pytest

from ccdglm.glm import FitOptions, fit
from ccdglm.model import Dataset, ModelSpec, Term, build_design_matrix
from ccdglm.selection import (
    SelectionError,
    aic,
    aic_from_loglik,
    backward_eliminate,
    protected_by_hierarchy,
)
from ccdglm.synthetic import simulate_response


def test_aic_counts_dispersion():
    assert aic_from_loglik(-91.492, 21) == pytest.approx(226.984, abs=1e-9)
    assert aic_from_loglik(-96.371, 10) == pytest.approx(214.742, abs=1e-9)
    assert aic_from_loglik(0.0, 0) == 2.0


def test_aic_of_fit(rng):
    x = rng.uniform(-1, 1, 30)
    X = np.column_stack([np.ones(30), x])
    res = fit(X, rng.gamma(5.0, np.exp(x) / 5.0))
    assert aic(res) == pytest.approx(-2 * res.loglik + 2 * 3)


def test_aic_rejects_unconverged(rng):
    X = np.column_stack([np.ones(30), rng.uniform(-1, 1, 30)])
    with pytest.warns(Warning):
        res = fit(X, rng.gamma(5.0, 1.0, 30), FitOptions(max_iter=1, init=[4.0, 3.0]))
    with pytest.raises(SelectionError, match="converge"):
        aic(res)


def test_hierarchy_rule():
    spec = ModelSpec.from_labels(["Intercept", "a", "b", "c", "a^2", "b:c"])
    assert protected_by_hierarchy(Term.main("a"), spec)
    assert protected_by_hierarchy(Term.main("b"), spec)
    assert protected_by_hierarchy(Term.main("c"), spec)
    assert not protected_by_hierarchy(Term.quadratic("a"), spec)
    assert not protected_by_hierarchy(Term.main("a"), spec.without(Term.quadratic("a")))


def null_data(seed, n=30):
    # mirrored x with shared y: the slope score vanishes at slope 0 exactly
    rng = np.random.Generator(np.random.PCG64(seed))
    x = rng.uniform(0.1, 1, n)
    y = rng.gamma(10.0, 2.0 / 10.0, n)
    ds = Dataset(("x",), np.concatenate([x, -x])[:, None])
    return ds.with_response("y", np.concatenate([y, y]))


def test_null_slope_is_removed():
    ds = null_data(11)
    full = ModelSpec.from_labels(["Intercept", "x"])
    trace = backward_eliminate(ds, "y", full)
    assert trace.final_spec == ModelSpec.from_labels(["Intercept"])
    # direct check of the AIC comparison that drove the removal
    full_fit = fit(build_design_matrix(ds, full), ds.response("y"))
    assert abs(full_fit.beta_hat[1]) < 1e-8
    a_full = aic(full_fit)
    a_int = aic(fit(np.ones((ds.n, 1)), ds.response("y")))
    assert a_int < a_full
    assert trace.aic_path == pytest.approx([a_full, a_int], rel=1e-10)
    assert trace.removed == [Term.main("x")]


def test_all_forced_means_no_steps(hvof_dataset):
    rng = np.random.Generator(np.random.PCG64(2))
    ds = hvof_dataset.with_response("y", simulate_response(hvof_dataset, {"Intercept": 1.0}, 30.0, rng))
    full = ModelSpec.full_second_order(ds.factor_names)
    trace = backward_eliminate(ds, "y", full, forced=full.terms)
    assert len(trace.steps) == 1 and trace.final_spec == full


def test_forced_term_must_exist(hvof_dataset):
    ds = hvof_dataset.with_response("y", np.ones(49) + np.arange(49) * 0.01)
    with pytest.raises(SelectionError, match="forced"):
        backward_eliminate(ds, "y", ModelSpec.from_labels(["Intercept", "PFR"]), forced=[Term.main("SOD")])


def sparse_campaign(hvof_dataset, seed):
    truth = {"Intercept": 2.0, "PFR": 0.12, "TGF^2": -0.10, "Lambda:SOD": 0.10}
    rng = np.random.Generator(np.random.PCG64(seed))
    return hvof_dataset.with_response("y", simulate_response(hvof_dataset, truth, 50.0, rng))


def test_elimination_path_properties(hvof_dataset):
    ds = sparse_campaign(hvof_dataset, 0)
    full = ModelSpec.full_second_order(ds.factor_names)
    trace = backward_eliminate(ds, "y", full)
    path = trace.aic_path
    assert all(b < a for a, b in zip(path, path[1:]))
    for i, step in enumerate(trace.steps[1:], start=1):
        for later in trace.steps[i:]:
            assert step.removed not in later.spec
    for t in ("PFR", "TGF^2", "Lambda:SOD"):
        assert Term.parse(t) in trace.final_spec
    # hierarchy keeps mains of surviving squares and interactions
    for t in trace.final_spec.terms:
        for f in t.factors:
            assert Term.main(f) in trace.final_spec
    assert trace.final_fit.spec == trace.final_spec


def test_dataset_untouched(hvof_dataset):
    ds = sparse_campaign(hvof_dataset, 1)
    before = (ds.factor_values.copy(), {k: v.copy() for k, v in ds.responses.items()})
    backward_eliminate(ds, "y", ModelSpec.full_second_order(ds.factor_names))
    np.testing.assert_array_equal(ds.factor_values, before[0])
    np.testing.assert_array_equal(ds.responses["y"], before[1]["y"])


def test_order_invariance(hvof_dataset):
    ds = sparse_campaign(hvof_dataset, 2)
    full = ModelSpec.full_second_order(ds.factor_names)
    shuffled = ModelSpec(tuple(reversed(full.terms[1:])) + (full.terms[0],))
    a = backward_eliminate(ds, "y", full)
    b = backward_eliminate(ds, "y", shuffled)
    assert set(a.final_spec.terms) == set(b.final_spec.terms)
    assert a.aic_path == pytest.approx(b.aic_path, rel=1e-9)


def test_hierarchy_off_allows_dropping_mains(hvof_dataset):
    ds = sparse_campaign(hvof_dataset, 3)
    trace = backward_eliminate(ds, "y", ModelSpec.full_second_order(ds.factor_names), hierarchy=False)
    assert Term.parse("TGF^2") in trace.final_spec
    assert trace.aic_path[-1] <= backward_eliminate(ds, "y", ModelSpec.full_second_order(ds.factor_names)).aic_path[-1] + 1e-9


def test_trace_json(hvof_dataset):
    import json

    ds = sparse_campaign(hvof_dataset, 4)
    trace = backward_eliminate(ds, "y", ModelSpec.full_second_order(ds.factor_names))
    doc = json.loads(trace.to_json())
    assert doc["final_terms"] == trace.final_spec.labels
    assert doc["steps"][0]["removed"] is None
    assert [s["aic"] for s in doc["steps"]] == trace.aic_path
