import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import naive_loocv
from ccdglm.glm import FitOptions
from ccdglm.model import Dataset, ModelSpec
from ccdglm.synthetic import simulate_response
from ccdglm.validation import ValidationError, adj_r_squared, kfold_cv, loocv, r_squared


def test_r_squared_cases():
    y = np.array([1.0, 2.0, 3.0])
    assert r_squared(y, y) == 1.0
    assert r_squared(y, np.full(3, y.mean())) == 0.0
    assert r_squared(y, [1.0, 2.0, 4.0]) == pytest.approx(0.5)
    with pytest.raises(ValidationError, match="constant"):
        r_squared([2.0, 2.0], [1.0, 3.0])
    with pytest.raises(ValidationError):
        r_squared([1.0, 2.0], [1.0])


def test_adj_r_squared_cases():
    assert adj_r_squared(0.97, 49, 21) == pytest.approx(1 - 48 / 28 * 0.03)
    assert adj_r_squared(1.0, 10, 4) == 1.0
    assert adj_r_squared(0.42, 10, 1) == pytest.approx(0.42, rel=1e-15)
    with pytest.raises(ValidationError):
        adj_r_squared(0.5, 5, 5)


@given(r2=st.floats(-1.0, 0.999), n=st.integers(5, 200), p=st.integers(2, 4))
def test_adj_r_squared_monotone_in_p(r2, n, p):
    a = adj_r_squared(r2, n, p)
    assert a <= r2
    if p + 1 < n:
        assert adj_r_squared(r2, n, p + 1) < a


def intercept_dataset(y):
    return Dataset(("x",), np.zeros((len(y), 1)), {"y": y})


def test_loocv_intercept_closed_form():
    rep = loocv(intercept_dataset([1.0, 2.0, 3.0]), "y", ModelSpec.from_labels(["Intercept"]))
    assert rep.cv_n == pytest.approx(1.5, rel=1e-12)
    np.testing.assert_allclose([r.loocv_prediction for r in rep.per_obs], [2.5, 2.0, 1.5], rtol=1e-12)


def test_loocv_duplicated_rows():
    base = [1.0, 4.0, 2.0, 7.0]
    y = [v for v in base for _ in range(2)]
    rep = loocv(intercept_dataset(y), "y", ModelSpec.from_labels(["Intercept"]))
    total = sum(y)
    n = len(y)
    want = np.mean([(v - (total - v) / (n - 1)) ** 2 for v in y])
    assert rep.cv_n == pytest.approx(want, rel=1e-12)


def test_loocv_needs_p_plus_two():
    with pytest.raises(ValidationError, match="p \\+ 2"):
        loocv(intercept_dataset([1.0, 2.0]), "y", ModelSpec.from_labels(["Intercept"]))


def random_dataset(rng, n, labels, nu=20.0):
    names = ("a", "b", "c")
    ds = Dataset(names, rng.uniform(-1.5, 1.5, size=(n, 3)))
    truth = {lab: rng.normal(0, 0.3) for lab in labels}
    truth["Intercept"] = 1.0
    return ds.with_response("y", simulate_response(ds, truth, nu, rng))


@pytest.mark.parametrize("seed", range(6))
def test_loocv_matches_naive_oracle(seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    labels = ["Intercept", "a", "b", "a^2", "a:c"][: 2 + seed % 4]
    ds = random_dataset(rng, 15 + seed, labels)
    rep = loocv(ds, "y", ModelSpec.from_labels(labels))
    want, preds = naive_loocv(ds.factor_values, ds.response("y"), ds.factor_names, labels)
    assert abs(rep.cv_n - want) <= 1e-10 * want
    # per-row agreement is limited by the coefficient tolerance, so tighten it
    tight = loocv(ds, "y", ModelSpec.from_labels(labels), FitOptions(tol=1e-13))
    _, tight_preds = naive_loocv(ds.factor_values, ds.response("y"), ds.factor_names, labels, tol=1e-13)
    np.testing.assert_allclose([r.loocv_prediction for r in tight.per_obs], tight_preds, rtol=1e-10)


def test_loocv_report_contents(hvof_dataset):
    rng = np.random.Generator(np.random.PCG64(1))
    ds = hvof_dataset.with_response("y", simulate_response(hvof_dataset, {"Intercept": 2.0, "PFR": 0.2}, 50.0, rng))
    spec = ModelSpec.from_labels(["Intercept", "PFR", "SOD"])
    rep = loocv(ds, "y", spec)
    assert rep.n == 49 and rep.p == 3 and rep.n_folds == 49
    assert [r.run_id for r in rep.per_obs] == list(ds.run_ids)
    assert {r.point_class for r in rep.per_obs} == {"cube", "star", "center"}
    assert rep.cv_n == pytest.approx(np.mean([(r.observed - r.loocv_prediction) ** 2 for r in rep.per_obs]))
    assert rep.adj_r2 <= rep.r2
    lines = rep.to_csv().splitlines()
    assert lines[0] == "run_id,point_class,observed,loocv_prediction"
    assert len(lines) == 50
    again = loocv(ds, "y", spec)
    assert again == rep  # bit-identical


@pytest.mark.filterwarnings("ignore::ccdglm.glm.GLMConvergenceWarning")
def test_fold_never_sees_held_out_value():
    rng = np.random.Generator(np.random.PCG64(8))
    ds = random_dataset(rng, 12, ["Intercept", "a"])
    spec = ModelSpec.from_labels(["Intercept", "a"])
    base = loocv(ds, "y", spec)
    y = np.array(ds.response("y"))
    y[4] *= 1000.0
    moved = loocv(ds.with_response("y", y), "y", spec)
    assert moved.per_obs[4].loocv_prediction == pytest.approx(base.per_obs[4].loocv_prediction, rel=1e-12)


def test_nonconverged_folds_are_reported():
    rng = np.random.Generator(np.random.PCG64(3))
    ds = random_dataset(rng, 12, ["Intercept", "a"])
    with pytest.warns(Warning):
        rep = loocv(ds, "y", ModelSpec.from_labels(["Intercept", "a"]), FitOptions(max_iter=1))
    assert len(rep.nonconverged_folds) == 12
    assert not any(r.fold_converged for r in rep.per_obs)


def test_rank_deficient_fold_names_fold():
    x = np.array([[0.0], [0.0], [0.0], [1.0]])
    ds = Dataset(("a",), x, {"y": [1.0, 2.0, 3.0, 4.0]})
    with pytest.raises(ValidationError, match="fold 3"):
        loocv(ds, "y", ModelSpec.from_labels(["Intercept", "a"]))


def test_kfold(rng):
    ds = random_dataset(rng, 30, ["Intercept", "a", "b"])
    spec = ModelSpec.from_labels(["Intercept", "a", "b"])
    rep = kfold_cv(ds, "y", spec, k=5, seed=4)
    assert rep.n_folds == 5 and np.all(np.isfinite([r.loocv_prediction for r in rep.per_obs]))
    assert kfold_cv(ds, "y", spec, k=5, seed=4) == rep
    assert kfold_cv(ds, "y", spec, k=30).cv_n == loocv(ds, "y", spec).cv_n
    with pytest.raises(ValidationError):
        kfold_cv(ds, "y", spec, k=1)
