import numpy as np
import pytest

from ptcmnet.baseline import build_partition
from ptcmnet.data import Dataset
from ptcmnet.model import CureModel, neg_log_likelihood, save_model
from ptcmnet.network import LayerSpec, init_params
from ptcmnet.optim import (
    OptimizerConfig,
    NonFiniteGradientError,
    SGD,
    Adam,
    RMSprop,
    lr_at,
    make_optimizer,
)
from ptcmnet.training import (
    TrainConfig,
    _batches,
    fit,
    random_search,
    sample_space,
)

from conftest import linear_data

# ---------------------------------------------------------------- schedules


def test_inverse_time_schedule():
    c = OptimizerConfig(lr0=0.01, schedule="inverse_time", decay_rate=0.75, decay_steps=100)
    assert lr_at(c, 0) == 0.01
    assert lr_at(c, 100) == pytest.approx(0.01 / 1.75, rel=1e-12)


def test_cosine_reaches_zero():
    c = OptimizerConfig(lr0=0.1, schedule="cosine", decay_steps=50)
    assert lr_at(c, 50) == pytest.approx(0.0, abs=1e-18)
    assert lr_at(c, 500) == pytest.approx(0.0, abs=1e-18)
    assert lr_at(c, 0) == 0.1


def test_exponential_and_constant():
    c = OptimizerConfig(lr0=0.2, schedule="exponential", decay_rate=0.5, decay_steps=10)
    assert lr_at(c, 20) == pytest.approx(0.05)
    assert lr_at(OptimizerConfig(lr0=0.3, schedule="constant"), 12345) == 0.3


def test_bad_configs():
    with pytest.raises(ValueError):
        OptimizerConfig(kind="lbfgs")
    with pytest.raises(ValueError):
        OptimizerConfig(schedule="step")
    with pytest.raises(ValueError):
        OptimizerConfig(lr0=0.0)
    with pytest.raises(ValueError):
        lr_at(OptimizerConfig(), -1)


# ---------------------------------------------------------------- optimizers


def test_sgd_step():
    p = {"w": np.array(1.0)}
    SGD(OptimizerConfig()).step(p, {"w": np.array(0.5)}, 0.1)
    assert p["w"] == pytest.approx(0.95)


def test_adam_first_step():
    p = {"w": np.array(1.0)}
    Adam(OptimizerConfig(kind="adam")).step(p, {"w": np.array(0.5)}, 0.001)
    # bias-corrected moments give a step of lr * g / (|g| + eps)
    assert p["w"] == pytest.approx(1 - 0.001 * 0.5 / (0.5 + 1e-8), abs=1e-15)


def test_rmsprop_first_step():
    p = {"w": np.array(1.0)}
    RMSprop(OptimizerConfig(kind="rmsprop")).step(p, {"w": np.array(0.5)}, 0.01)
    assert p["w"] == pytest.approx(1 - 0.01 * 0.5 / (np.sqrt(0.1 * 0.25) + 1e-8))


@pytest.mark.parametrize("kind", ["sgd", "adam", "rmsprop"])
def test_zero_gradient_is_a_no_op(kind):
    p = {"a": np.array([1.0, -2.0]), "b": np.array(3.0)}
    opt = make_optimizer(OptimizerConfig(kind=kind))
    for _ in range(3):
        opt.step(p, {"a": np.zeros(2), "b": np.array(0.0)}, 0.1)
    np.testing.assert_array_equal(p["a"], [1.0, -2.0])
    assert p["b"] == 3.0


@pytest.mark.parametrize("kind", ["sgd", "adam", "rmsprop"])
def test_non_finite_gradient_rejected(kind):
    p = {"a": np.ones(2)}
    with pytest.raises(NonFiniteGradientError):
        make_optimizer(OptimizerConfig(kind=kind)).step(p, {"a": np.array([np.nan, 1.0])}, 0.1)
    np.testing.assert_array_equal(p["a"], 1.0)


# ---------------------------------------------------------------- batching


def test_batches_cover_every_row_once():
    rng = np.random.default_rng(0)
    bs = _batches(103, 10, rng, 1)
    assert len(bs) == 11
    assert np.array_equal(np.sort(np.concatenate(bs)), np.arange(103))


def test_small_tail_merged_when_orthogonalizing():
    rng = np.random.default_rng(0)
    bs = _batches(103, 10, rng, min_size=5)
    assert len(bs) == 10
    assert len(bs[-1]) == 13


def test_orthogonal_batch_size_must_exceed_design_rank():
    ds = linear_data(200, 0, coefs=(1.0, 0.5, 0.2))
    with pytest.raises(ValueError, match="batch_size"):
        fit(ds, [], train=TrainConfig(batch_size=4, orthogonalize=True))


def test_validation_fraction_bounds():
    with pytest.raises(ValueError):
        TrainConfig(validation_fraction=1.0)
    with pytest.raises(ValueError):
        TrainConfig(validation_fraction=-0.1)


# ---------------------------------------------------------------- fitting


def test_linear_coefficients_recovered():
    ds = linear_data(20_000, seed=1, intercept=-0.5, coefs=(1.0, -0.5))
    res = fit(
        ds, [],
        OptimizerConfig("adam", 0.01, "inverse_time", 0.75, 1000),
        TrainConfig(batch_size=1024, max_epochs=300, patience=20),
    )
    net = res.model.net
    assert abs(float(net.b_out) + 0.5) < 0.05
    np.testing.assert_allclose(net.w_out, [1.0, -0.5], atol=0.05)


def test_early_stop_returns_first_epoch_when_validation_worsens():
    train = linear_data(400, seed=2, intercept=0.0, coefs=(2.0,))
    # validation data with the opposite effect: every step on train hurts it
    flipped = linear_data(400, seed=3, intercept=0.0, coefs=(-2.0,))
    opt = OptimizerConfig("sgd", 0.5, "constant")
    cfg = TrainConfig(batch_size=400, max_epochs=50, patience=1, seed=4)
    res = fit(train, [], opt, cfg, validation=flipped)
    assert res.stopped_epoch == 2
    assert res.best_epoch == 1
    assert res.history[1]["val_nll"] > res.history[0]["val_nll"]
    one = fit(train, [], opt, TrainConfig(batch_size=400, max_epochs=1, patience=1, seed=4),
              validation=flipped)
    for k, v in res.model.trainable().items():
        assert np.array_equal(v, one.model.trainable()[k])


def test_returns_minimum_validation_parameters():
    ds = linear_data(1500, seed=5)
    res = fit(ds, [LayerSpec(8, "tanh")], OptimizerConfig("adam", 0.05, "constant"),
              TrainConfig(batch_size=64, max_epochs=30, patience=4, seed=1))
    val = res.validation
    losses = [h["val_nll"] for h in res.history]
    assert res.best_epoch == int(np.argmin(losses)) + 1
    assert neg_log_likelihood(res.model, val.X, val.time, val.event) == min(losses)
    assert res.model.metadata["best_loss"] == min(losses)


def test_fit_is_deterministic(tmp_path):
    ds = linear_data(800, seed=6)
    layers = [LayerSpec(6, "elu", dropout=0.2), LayerSpec(4, "sigmoid")]
    cfg = TrainConfig(batch_size=100, max_epochs=5, seed=11)
    a = fit(ds, layers, OptimizerConfig("rmsprop", 0.01), cfg).model
    b = fit(ds, layers, OptimizerConfig("rmsprop", 0.01), cfg).model
    save_model(a, tmp_path / "a.json")
    save_model(b, tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_training_loss_halves_on_small_instance():
    # times shrunk tenfold so the unit-hazard initial baseline fits poorly
    d = linear_data(500, seed=0, intercept=1.0, coefs=(1.5, -1.0))
    ds = Dataset(d.X, d.time * 0.1, d.event)
    layers = [LayerSpec(16, "relu")]
    cfg = TrainConfig(batch_size=500, max_epochs=200, patience=1000, validation_fraction=0.0)
    init_seed = np.random.SeedSequence(cfg.seed).spawn(3)[1]
    part = build_partition(ds.time[ds.event == 1], cfg.n_intervals, max_time=ds.time.max())
    start = neg_log_likelihood(CureModel(init_params(2, layers, seed=init_seed), part),
                               ds.X, ds.time, ds.event)
    res = fit(ds, layers, OptimizerConfig("sgd", 0.01, "constant"), cfg)
    assert res.history[0]["train_nll"] < start
    assert start - res.history[-1]["train_nll"] >= 0.5 * abs(start)


def test_orthogonal_fit_stores_reference():
    ds = linear_data(600, seed=7, coefs=(1.0, 0.5))
    held = linear_data(200, seed=17, coefs=(1.0, 0.5))
    res = fit(ds, [LayerSpec(4)], OptimizerConfig("adam", 0.01),
              TrainConfig(batch_size=128, max_epochs=3, orthogonalize=True), validation=held)
    m = res.model.copy()
    assert m.projection_reference.shape == (3, 4)
    m.net.w_lin[:] = 0.0
    m.net.b_lin[...] = 0.0
    # with the stored reference, the non-linear part is orthogonal to [1, X] over the training rows
    nonlin = m.eta(ds.X, "reference")
    Xt = np.column_stack([np.ones(len(ds)), ds.X])
    assert np.all(np.abs(Xt.T @ nonlin) < 1e-8 * np.linalg.norm(nonlin) * np.linalg.norm(Xt, axis=0))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_diverging_run_raises():
    from ptcmnet.training import TrainingDivergedError

    ds = linear_data(300, seed=8)
    with pytest.raises(TrainingDivergedError):
        fit(ds, [LayerSpec(8)], OptimizerConfig("sgd", 1e12, "constant"),
            TrainConfig(batch_size=300, max_epochs=20))


# ---------------------------------------------------------------- search


def test_single_config_space_returns_it():
    ds = linear_data(400, seed=9)
    space = {"n_layers": [1], "units": [4], "activation": ["tanh"], "dropout": [0.0],
             "optimizer": ["adam"], "decay_steps": [100], "decay_rate": [0.5],
             "schedule": ["inverse_time"]}
    res = random_search(ds, space, n_trials=2, runs_per_trial=1,
                        train=TrainConfig(batch_size=100, max_epochs=3))
    assert res.best == {"n_layers": 1, "units": [4], "activation": "tanh", "dropout": 0.0,
                        "optimizer": "adam", "decay_steps": 100, "decay_rate": 0.5,
                        "schedule": "inverse_time"}


def test_same_seed_same_trials():
    from ptcmnet.training import DEFAULT_SPACE

    assert sample_space(DEFAULT_SPACE, 8, 3) == sample_space(DEFAULT_SPACE, 8, 3)
    assert sample_space(DEFAULT_SPACE, 8, 3) != sample_space(DEFAULT_SPACE, 8, 4)


def test_search_returns_lowest_mean_loss(tmp_path):
    import json

    ds = linear_data(600, seed=10)
    space = {"n_layers": [1, 2], "units": [4, 8], "activation": ["tanh", "relu"],
             "optimizer": ["adam", "sgd"]}
    res = random_search(ds, space, n_trials=5, runs_per_trial=2, seed=1,
                        train=TrainConfig(batch_size=128, max_epochs=4), lr0=0.02)
    means = [t["mean_val_loss"] for t in res.trials]
    assert len(means) == 5
    assert res.best_loss == min(means)
    assert all(res.best_loss <= m for m in means)
    res.write_log(tmp_path / "log.jsonl")
    lines = (tmp_path / "log.jsonl").read_text().splitlines()
    assert [json.loads(s)["trial"] for s in lines] == list(range(5))


def test_empty_search_space():
    with pytest.raises(ValueError):
        sample_space({"units": []}, 1, 0)
