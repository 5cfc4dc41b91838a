"""Mini-batch maximum-likelihood fitting, early stopping and random search."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .baseline import DEFAULT_INTERVALS, build_partition
from .data import Dataset
from .model import CureModel, loss_and_gradients, neg_log_likelihood
from .network import LayerSpec, forward, init_params
from .optim import NonFiniteGradientError, OptimizerConfig, lr_at, make_optimizer
from .orthogonal import linear_reference

log = logging.getLogger(__name__)


class TrainingDivergedError(FloatingPointError):
    def __init__(self, message, epoch):
        super().__init__(message)
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 1024
    max_epochs: int = 200
    patience: int = 10
    validation_fraction: float = 0.2
    seed: int = 0
    orthogonalize: bool = False
    n_intervals: int = DEFAULT_INTERVALS
    min_delta: float = 0.0

    def __post_init__(self):
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in [0, 1)")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass
class FitResult:
    model: CureModel
    history: list
    best_epoch: int
    stopped_epoch: int
    validation: Dataset | None = None

    def write_history(self, path):
        write_history(self.history, path)


def write_history(history, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["epoch", "train_nll", "val_nll", "lr"])
        writer.writeheader()
        for row in history:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def split_indices(n: int, fraction: float, rng):
    """Sorted (train, validation) row indices for a random split."""
    perm = rng.permutation(n)
    n_val = int(round(fraction * n))
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def split_validation(dataset: Dataset, fraction: float, rng):
    train_idx, val_idx = split_indices(len(dataset), fraction, rng)
    return dataset.subset(train_idx), dataset.subset(val_idx)


def _batches(n, batch_size, rng, min_size):
    perm = rng.permutation(n)
    bounds = list(range(0, n, batch_size)) + [n]
    if len(bounds) > 2 and bounds[-1] - bounds[-2] < min_size:
        # too few rows for the QR of the last batch: fold it into the previous one
        del bounds[-2]
    return [perm[a:b] for a, b in zip(bounds[:-1], bounds[1:])]


def config_digest(*parts) -> str:
    blob = json.dumps(parts, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def fit(
    dataset: Dataset,
    layers=(),
    opt: OptimizerConfig | None = None,
    train: TrainConfig | None = None,
    validation: Dataset | None = None,
    preprocessing=None,
) -> FitResult:
    """Fit the network predictor and the baseline jointly by mini-batch descent.

    After each epoch the validation NLL is recorded; the parameters with the
    lowest value are returned once ``patience`` epochs pass without
    improvement or ``max_epochs`` is reached. When neither a validation set
    nor a validation fraction is given, the full training NLL is monitored.
    """
    opt = opt or OptimizerConfig()
    train = train or TrainConfig()
    layers = tuple(layers)
    seeds = np.random.SeedSequence(train.seed).spawn(3)
    split_rng, init_seed, batch_rng = (
        np.random.default_rng(seeds[0]),
        seeds[1],
        np.random.default_rng(seeds[2]),
    )

    if validation is None and train.validation_fraction > 0:
        fit_set, validation = split_validation(dataset, train.validation_fraction, split_rng)
    else:
        fit_set = dataset
    q = fit_set.n_features
    if train.orthogonalize:
        if train.batch_size <= q + 1:
            raise ValueError(f"orthogonalization needs batch_size > q + 1 = {q + 1}")
        if validation is not None and len(validation) <= q + 1:
            raise ValueError("validation set too small for the orthogonal projection")

    events = fit_set.time[fit_set.event == 1]
    partition = build_partition(events, train.n_intervals, max_time=fit_set.time.max())
    net = init_params(q, layers, seed=init_seed, linear_part=train.orthogonalize)
    model = CureModel(net, partition, train.orthogonalize, list(fit_set.feature_names), preprocessing)
    optimizer = make_optimizer(opt)

    history = []
    best_loss, best_model, best_epoch = np.inf, model.copy(), 0
    wait, step, epoch = 0, 0, 0
    min_size = q + 2 if train.orthogonalize else 1
    for epoch in range(1, train.max_epochs + 1):
        for idx in _batches(len(fit_set), train.batch_size, batch_rng, min_size):
            _, grads = loss_and_gradients(
                model, fit_set.X[idx], fit_set.time[idx], fit_set.event[idx],
                training=True, rng=batch_rng,
            )
            lr = lr_at(opt, step)
            try:
                optimizer.step(model.trainable(), grads, lr)
            except NonFiniteGradientError as exc:
                raise TrainingDivergedError(f"epoch {epoch}: {exc}", epoch) from exc
            step += 1

        train_nll = neg_log_likelihood(model, fit_set.X, fit_set.time, fit_set.event)
        val_nll = (
            neg_log_likelihood(model, validation.X, validation.time, validation.event)
            if validation is not None
            else train_nll
        )
        history.append({"epoch": epoch, "train_nll": train_nll, "val_nll": val_nll, "lr": lr_at(opt, step)})
        if not np.isfinite(val_nll):
            raise TrainingDivergedError(f"validation loss is {val_nll} at epoch {epoch}", epoch)
        if val_nll < best_loss - train.min_delta:
            best_loss, best_model, best_epoch = val_nll, model.copy(), epoch
            wait = 0
        else:
            wait += 1
            if wait >= train.patience:
                break
    log.info("stopped after %d epochs; best validation NLL %.6f at epoch %d", epoch, best_loss, best_epoch)

    if train.orthogonalize:
        H, _ = forward(best_model.net, fit_set.X)
        best_model.projection_reference = linear_reference(fit_set.X, H)
    best_model.metadata = {
        "config_digest": config_digest(
            [s.__dict__ for s in layers], opt.to_dict(), train.to_dict(), len(dataset)
        ),
        "best_epoch": best_epoch,
        "monitor": "validation" if validation is not None else "training",
        "best_loss": best_loss,
    }
    return FitResult(best_model, history, best_epoch, epoch, validation)


# ---------------------------------------------------------------- search

DEFAULT_SPACE = {
    "n_layers": [1, 2, 3],
    "units": [64, 128, 192, 256, 320, 384, 448, 512],
    "activation": ["tanh", "elu", "relu", "sigmoid"],
    "dropout": [0.20, 0.35, 0.50],
    "optimizer": ["adam", "rmsprop", "sgd"],
    "decay_steps": [10, 100, 1000],
    "decay_rate": [0.50, 0.75, 0.90],
    "schedule": ["exponential", "inverse_time", "cosine"],
}


@dataclass
class SearchResult:
    best: dict
    best_loss: float
    trials: list = field(default_factory=list)

    def write_log(self, path):
        with open(path, "w") as fh:
            for trial in self.trials:
                fh.write(json.dumps(trial, sort_keys=True) + "\n")


def sample_space(space: dict, n_trials: int, seed) -> list:
    """Draw ``n_trials`` configurations uniformly from each axis."""
    if not space or any(len(v) == 0 for v in space.values()):
        raise ValueError("search space must have at least one option per axis")
    rng = np.random.default_rng(seed)
    trials = []
    for _ in range(n_trials):
        cfg = {}
        for key in sorted(space):
            options = space[key]
            if key == "units":
                continue
            cfg[key] = options[int(rng.integers(len(options)))]
        n_layers = cfg.get("n_layers", 1)
        units = space.get("units", [64])
        cfg["units"] = [units[int(rng.integers(len(units)))] for _ in range(n_layers)]
        trials.append(_plain(cfg))
    return trials


def _plain(cfg):
    return {k: (v.item() if isinstance(v, np.generic) else v) for k, v in cfg.items()}


def trial_setup(cfg: dict, lr0: float = 0.01):
    layers = [
        LayerSpec(u, cfg.get("activation", "relu"), cfg.get("dropout", 0.0)) for u in cfg["units"]
    ]
    opt = OptimizerConfig(
        kind=cfg.get("optimizer", "sgd"),
        lr0=cfg.get("lr0", lr0),
        schedule=cfg.get("schedule", "inverse_time"),
        decay_rate=cfg.get("decay_rate", 0.75),
        decay_steps=cfg.get("decay_steps", 100),
    )
    return layers, opt


def random_search(
    dataset: Dataset,
    space: dict | None = None,
    n_trials: int = 10,
    runs_per_trial: int = 3,
    seed: int = 0,
    train: TrainConfig | None = None,
    lr0: float = 0.01,
    n_jobs: int = 1,
) -> SearchResult:
    """Random hyperparameter search; each trial is trained ``runs_per_trial``
    times with independent initializations and scored by its mean best
    validation NLL. All runs share one validation split."""
    if n_trials < 1 or runs_per_trial < 1:
        raise ValueError("n_trials and runs_per_trial must be at least 1")
    space = DEFAULT_SPACE if space is None else space
    train = train or TrainConfig()
    root = np.random.SeedSequence(seed)
    sample_seed, split_seed, run_root = root.spawn(3)
    configs = sample_space(space, n_trials, sample_seed)
    frac = train.validation_fraction or 0.2
    fit_set, validation = split_validation(dataset, frac, np.random.default_rng(split_seed))
    run_seeds = [
        [int(s.generate_state(1)[0]) for s in ts.spawn(runs_per_trial)]
        for ts in run_root.spawn(n_trials)
    ]

    def run(task):
        i, r = task
        layers, opt = trial_setup(configs[i], lr0)
        cfg = replace(train, seed=run_seeds[i][r])
        try:
            res = fit(fit_set, layers, opt, cfg, validation=validation)
        except (TrainingDivergedError, FloatingPointError) as exc:
            log.warning("trial %d run %d diverged: %s", i, r, exc)
            return np.inf
        return float(res.model.metadata["best_loss"])

    tasks = [(i, r) for i in range(n_trials) for r in range(runs_per_trial)]
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            losses = list(pool.map(run, tasks))
    else:
        losses = [run(t) for t in tasks]

    trials = []
    for i, cfg in enumerate(configs):
        runs = losses[i * runs_per_trial:(i + 1) * runs_per_trial]
        finite = all(np.isfinite(runs))
        trials.append({
            "trial": i,
            "config": cfg,
            "val_losses": [float(v) if np.isfinite(v) else None for v in runs],
            "mean_val_loss": float(np.mean(runs)) if finite else None,
        })
    scored = [t for t in trials if t["mean_val_loss"] is not None]
    if not scored:
        raise TrainingDivergedError("every trial diverged", -1)
    best = min(scored, key=lambda t: t["mean_val_loss"])
    return SearchResult(best["config"], best["mean_val_loss"], trials)
