import math

import numpy as np
import pytest
from scipy import stats

from ptcmnet.data import write_csv
from ptcmnet.metrics import delta_metrics
from ptcmnet.orthogonal import with_intercept
from ptcmnet.simulation import (
    SCENARIO3_COV,
    ScenarioSpec,
    TruthOracle,
    generate_dataset,
    min_of_exponentials,
    run_replications,
    scenario4_components,
    scenario_eta,
    theta_scenario,
)


def scenario3_by_hand(x):
    """Re-transcription of the printed expression, log of the 20th power kept literal."""
    x1, x2, x3, x4, x5, x6, x7, x8, x9, x10 = x
    a = x1**2 + math.tanh(x2) - x3 * x4 * (4 - 0.0005 * x3 * x4) ** 2 + math.log(abs(x1 + x5) ** 20)
    b = x6**2 + math.tanh(x7) - x8 * x9 * (4 - 0.0005 * x8 * x9) ** 2 + math.log(abs(x6 + x10) ** 20)
    return 0.4 * (0.05 * a) + 0.05 * b


def test_scenario_values_at_origin():
    assert theta_scenario(1, [[0.0]])[0] == pytest.approx(0.15, rel=1e-14)
    assert theta_scenario(2, [[0.0, 0.0, 0.0]])[0] == pytest.approx(math.exp(-0.75), rel=1e-14)
    lin, _ = scenario4_components(np.zeros((1, 3)))
    assert lin[0] == -1.0


def test_scenario1_by_hand():
    for x in (0.1, 0.35, 0.8):
        expected = 0.15 * math.exp(3.5e3 * x**2 * (1 - x) ** 8 + 2.2e4 * x**8 * (1 - x) ** 3)
        assert theta_scenario(1, [[x]])[0] == pytest.approx(expected, rel=1e-12)


def test_scenario3_matches_transcription():
    X = np.random.default_rng(0).normal(size=(20, 10))
    expected = [scenario3_by_hand(row) for row in X]
    np.testing.assert_allclose(scenario_eta(3, X), expected, rtol=1e-12)


def test_scenario4_truth_projects_over_design():
    X = np.random.default_rng(1).uniform(size=(500, 3))
    lin, non = scenario4_components(X)
    eta = scenario_eta(4, X)
    resid = eta - lin
    Xt = with_intercept(X)
    assert np.all(np.abs(Xt.T @ resid) < 1e-9 * np.linalg.norm(resid) * np.linalg.norm(Xt, axis=0))
    # the projection is a least-squares residual of the raw non-linear part
    beta, *_ = np.linalg.lstsq(Xt, non, rcond=None)
    np.testing.assert_allclose(resid, non - Xt @ beta, atol=1e-10)


def test_wrong_dimension_rejected():
    with pytest.raises(ValueError):
        scenario_eta(2, np.zeros((3, 2)))
    with pytest.raises(ValueError):
        ScenarioSpec(5, 10)


def test_almost_everyone_cured_when_theta_small():
    rng = np.random.default_rng(2)
    K = rng.poisson(0.01, size=100_000)
    t = min_of_exponentials(K, rng)
    frac = np.mean(t <= 8.0)
    expected = 1 - math.exp(-0.01 * (1 - math.exp(-8.0)))
    assert frac < 0.02
    assert abs(frac - expected) < 0.002


def test_empirical_cure_fraction():
    sim = generate_dataset(ScenarioSpec(2, 100_000, seed=3))
    cured = sim.truth["cured"].mean()
    expected = np.mean(np.exp(-sim.truth["theta"]))
    # within half a percentage point (about five standard errors here)
    assert abs(cured - expected) < 0.005


@pytest.mark.parametrize("sid", [1, 2, 3, 4])
def test_generated_data_invariants(sid):
    sim = generate_dataset(ScenarioSpec(sid, 5000, seed=sid))
    ds = sim.dataset
    assert np.all(ds.time > 0)
    assert set(np.unique(ds.event)) <= {0.0, 1.0}
    assert np.all(ds.event[sim.truth["cured"]] == 0)
    assert np.all(ds.time <= 8.0)
    # expm1 keeps 1 - exp(-t) accurate at the tiny times of scenario 1
    F = -np.expm1(-ds.time)
    np.testing.assert_allclose(sim.truth["S_p"], np.exp(-sim.truth["theta"] * F), rtol=1e-12)
    np.testing.assert_allclose(sim.truth["S"], 1 - F, rtol=1e-12)


def test_same_seed_same_bytes(tmp_path):
    for name in ("a.csv", "b.csv"):
        write_csv(generate_dataset(ScenarioSpec(3, 300, seed=7)).dataset, tmp_path / name)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_scenario3_covariance():
    sim = generate_dataset(ScenarioSpec(3, 100_000, seed=4))
    cov = np.cov(sim.dataset.X[:, :5], rowvar=False)
    assert np.abs(cov - SCENARIO3_COV).max() < 0.02


def test_min_of_exponentials_law():
    rng = np.random.default_rng(5)
    K = rng.poisson(3.0, size=100_000)
    t = min_of_exponentials(K, rng)
    assert np.all(np.isinf(t[K == 0]))
    for k in range(1, 7):
        sample = t[K == k]
        assert stats.kstest(sample, stats.expon(scale=1 / k).cdf).statistic < 0.02


def test_large_counts_use_exact_law():
    rng = np.random.default_rng(6)
    t = min_of_exponentials(np.full(20_000, 5000), rng)
    assert stats.kstest(t, stats.expon(scale=1 / 5000).cdf).statistic < 0.02


def test_oracle_fit_has_zero_deltas(tmp_path):
    spec = ScenarioSpec(2, 500, seed=8)
    res = run_replications(spec, 3, lambda ds, seed: TruthOracle())
    assert len(res.rows) == 3
    for row in res.rows:
        assert row["delta_eta"] == 0.0 and row["delta_S"] == 0.0 and row["delta_S_p"] == 0.0
    res.write_csv(tmp_path / "r.csv")
    res.write_json(tmp_path / "r.json")
    assert res.summary["delta_eta"] == 0.0


def test_failed_replication_is_recorded():
    def flaky(ds, seed):
        raise FloatingPointError("boom")

    res = run_replications(ScenarioSpec(2, 200, seed=9), 2, flaky)
    assert not res.rows and len(res.failures) == 2


def test_replications_deterministic_and_thread_safe():
    spec = ScenarioSpec(2, 300, seed=10)

    def fit_fn(ds, seed):
        return TruthOracle()

    a = run_replications(spec, 4, fit_fn)
    b = run_replications(spec, 4, fit_fn, n_jobs=3)
    strip = lambda rows: [{k: v for k, v in r.items() if k != "fit_seconds"} for r in rows]  # noqa: E731
    assert strip(a.rows) == strip(b.rows)


def test_delta_metrics_against_truth_shift():
    sim = generate_dataset(ScenarioSpec(2, 100, seed=11))
    est = TruthOracle().estimates(sim)
    est = dict(est, eta=est["eta"] + 0.1)
    assert delta_metrics(est, sim.truth)["eta"] == pytest.approx(0.01)
