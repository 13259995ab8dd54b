import warnings

import numpy as np
import pytest

from conftest import random_dataset
from reggkm import coxlik, data, fitter, metrics, simgen
from reggkm import kernel as kern
from reggkm.coxlik import LambdaTriple
from reggkm.errors import NotConverged

LAM = LambdaTriple(0.01, 0.01, 0.01)


def setting_data(setting, seed, n=100):
    return data.standardize(simgen.generate(simgen.SettingSpec(setting, n=n, seed=seed)))


@pytest.fixture(scope="module")
def fitted():
    ds = setting_data(1, 3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotConverged)
        return ds, fitter.fit(ds, LAM)


def test_init_state():
    ds = setting_data(1, 0)
    st = fitter.init_state(ds, LAM)
    np.testing.assert_array_equal(st.delta, np.full(5, 0.2))
    np.testing.assert_array_equal(st.alpha, np.full(100, 0.01))
    st = fitter.init_state(ds, LambdaTriple(1e3, 0.01, 0.01))
    np.testing.assert_array_equal(st.beta, 0.0)


def test_fit_requires_standardized(rng):
    with pytest.raises(ValueError):
        fitter.fit(random_dataset(rng, 20, 1, 2), LAM)


def test_trace_and_cache_consistency(fitted):
    ds, m = fitted
    risk = data.build_risk_index(ds)
    fresh = coxlik.FitState.build(m.alpha, m.beta, m.delta, ds.x,
                                  kern.gram(m.kernel, ds.z))
    assert coxlik.objective(fresh, LAM, risk, ds.status) == pytest.approx(m.trace[-1], abs=1e-6)
    np.testing.assert_allclose(fresh.eta, m.state.eta, atol=1e-10)
    assert len(m.trace) == 1 + 3 * m.n_cycles
    assert np.all(m.delta >= 0)


def test_objective_monotone_per_cycle(fitted):
    _, m = fitted
    per_cycle = np.array(m.trace[::3])
    assert np.all(np.diff(per_cycle) >= -1e-6)
    assert m.flagged_cycles == []


def test_degenerate_kernel_matches_linear_lasso_cox():
    ds = setting_data(2, 100)
    m = fitter.fit(ds, LambdaTriple(0.01, 10.0, 0.1), fitter.FitConfig(tol=1e-10, max_outer_cycles=200))
    np.testing.assert_array_equal(m.delta, 0.0)
    b, _ = fitter.fit_linear_cox(ds.x, data.build_risk_index(ds), ds.status, 0.01)
    np.testing.assert_allclose(m.beta, b, atol=1e-4)


def test_null_data_no_events(rng):
    raw = random_dataset(rng, 30, 2, 3)
    ds = data.standardize(data.SurvivalDataset(time=raw.time, status=np.zeros(30, int),
                                               x=raw.x, z=raw.z))
    m = fitter.fit(ds, LAM)
    np.testing.assert_array_equal(m.beta, 0.0)
    assert np.abs(m.alpha).max() < 1e-8
    assert m.objective == pytest.approx(-coxlik.penalty(m.state, LAM), abs=1e-12)


def test_predict_training_rows_reproduce_eta(fitted):
    ds, m = fitted
    raw = data.unstandardize(ds)
    np.testing.assert_allclose(m.predict_risk(raw.x, raw.z), m.state.eta, atol=1e-10)
    assert m.predict_risk(raw.x[7], raw.z[7]) == pytest.approx(m.state.eta[7], abs=1e-10)


def test_predict_matches_augmented_gram(fitted, rng):
    ds, m = fitted
    x_new, z_new = rng.normal(size=1), rng.normal(size=5)
    aug = kern.gram(m.kernel, np.vstack([ds.z, z_new]))
    expect = x_new @ m.beta + aug[-1, :-1] @ m.alpha
    assert m.predict_risk(x_new, z_new, standardized=True) == pytest.approx(expect, abs=1e-12)


def test_degenerate_model_constant_score(fitted, rng):
    ds, m = fitted
    st = coxlik.FitState(alpha=m.alpha, beta=np.zeros(1), delta=np.zeros(5),
                         gram=np.ones((100, 100)), eta=np.full(100, m.alpha.sum()))
    m0 = fitter.FittedModel(state=st, lam=LAM, kernel=m.kernel.with_delta(np.zeros(5)),
                            standardizer=m.standardizer, z_train=m.z_train)
    np.testing.assert_allclose(m0.predict_risk(rng.normal(size=(4, 1)), rng.normal(size=(4, 5))),
                               m.alpha.sum(), rtol=1e-12)


def test_model_json_round_trip(fitted, tmp_path):
    ds, m = fitted
    path = tmp_path / "m.json"
    m.save(path)
    back = fitter.FittedModel.load(path)
    np.testing.assert_array_equal(back.alpha, m.alpha)
    np.testing.assert_array_equal(back.delta, m.delta)
    raw = data.unstandardize(ds)
    np.testing.assert_allclose(back.predict_risk(raw.x, raw.z), m.state.eta, atol=1e-10)


def test_permutation_invariance():
    ds = setting_data(1, 5, n=60)
    perm = np.random.default_rng(1).permutation(60)
    cfg = fitter.FitConfig(tol=1e-9, max_outer_cycles=300)
    a = fitter.fit(ds, LambdaTriple(0.01, 0.05, 0.05), cfg)
    b = fitter.fit(ds.subset(perm), LambdaTriple(0.01, 0.05, 0.05), cfg)
    assert a.objective == pytest.approx(b.objective, abs=1e-6)
    np.testing.assert_allclose(a.state.eta[perm], b.state.eta, atol=1e-4)


def test_polynomial_kernel_fit():
    ds = setting_data(1, 2, n=50)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotConverged)
        m = fitter.fit(ds, LAM, fitter.FitConfig(kernel="polynomial", max_outer_cycles=10))
    assert np.isfinite(m.objective) and np.all(m.delta >= 0)
    assert np.all(np.diff(m.trace) >= -1e-12)


def test_not_converged_warning():
    ds = setting_data(1, 4, n=50)
    with pytest.warns(NotConverged):
        m = fitter.fit(ds, LAM, fitter.FitConfig(max_outer_cycles=1))
    assert not m.converged and m.n_cycles == 1


def test_lasso_cox_kill_and_block_degeneracy(rng):
    ds = setting_data(2, 1)
    m = fitter.fit_lasso_cox(ds, 1e3)
    np.testing.assert_array_equal(m.coef, 0.0)
    no_z = data.SurvivalDataset(time=ds.time, status=ds.status, x=ds.x, z=np.zeros((100, 0)),
                                standardized=True, standardizer=None)
    m = fitter.fit_lasso_cox(no_z, 0.01)
    b, _ = fitter.fit_linear_cox(ds.x, data.build_risk_index(ds), ds.status, 0.01)
    np.testing.assert_allclose(m.coef, b, atol=1e-12)


def test_lasso_cox_recovers_linear_effect():
    hits = 0
    for seed in range(50):
        r = np.random.default_rng(seed)
        x = r.normal(size=(60, 4))
        t = r.exponential(size=60) / np.exp(x[:, 0])
        ds = data.standardize(data.SurvivalDataset(time=t, status=np.ones(60, int), x=x,
                                                   z=r.normal(size=(60, 1))))
        b = fitter.fit_lasso_cox(ds, 0.02).beta[0] / ds.standardizer.x_sd[0]
        hits += 0.4 < b < 1.6
    assert hits >= 45


def test_beats_lasso_cox_in_sample_on_setting_one():
    wins = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotConverged)
        for seed in range(50):
            ds = setting_data(1, 500 + seed)
            cfg = fitter.FitConfig(max_outer_cycles=20)
            c_k = metrics.c_statistic(fitter.fit(ds, LAM, cfg).state.eta, ds)
            lc = fitter.fit_lasso_cox(ds, 0.01)
            c_l = metrics.c_statistic(lc.predict_risk(ds.x, ds.z, standardized=True), ds)
            wins += c_k > c_l
    assert wins >= 40
