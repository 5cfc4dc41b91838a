"""Simulated cure data (four covariate scenarios) and the replication harness.

Each subject draws ``K ~ Poisson(theta(x))`` latent risk factors with iid
Exp(1) activation times; the event time is the earliest of them and
subjects with ``K = 0`` are cured. Follow-up ends administratively at
``tau``.
"""

from __future__ import annotations

import csv
import json
import logging
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import model as cm
from .data import Dataset
from .metrics import delta_metrics
from .orthogonal import qr_orthonormal, with_intercept

log = logging.getLogger(__name__)

SCENARIO_DIMS = {1: 1, 2: 3, 3: 10, 4: 3}
SCENARIO3_COV = np.array([
    [1.0, 0.8, 0.5, 0.2, 0.0],
    [0.8, 1.0, 0.2, 0.6, 0.0],
    [0.5, 0.2, 1.0, 0.3, 0.0],
    [0.2, 0.6, 0.3, 1.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 1.0],
])
SCENARIO4_INTERCEPT = -1.0
SCENARIO4_COEFS = np.array([2 / 1, 2 / 2, 2 / 3])
DEFAULT_TAU = 8.0
# above this many risk factors the minimum is drawn from its exact Exp(K) law
LITERAL_K_CAP = 1000


@dataclass(frozen=True)
class ScenarioSpec:
    id: int
    n: int
    seed: int = 0
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if self.id not in SCENARIO_DIMS:
            raise ValueError(f"unknown scenario {self.id}; choose from 1-4")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not self.tau > 0:
            raise ValueError("tau must be positive")


def _check_dim(sid, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != SCENARIO_DIMS[sid]:
        raise ValueError(f"scenario {sid} needs {SCENARIO_DIMS[sid]} covariates, got {X.shape[1]}")
    return X


def nonlinear_part(X):
    """``-0.8 x1^2 + 4 x2^3 - 0.75 cos(x3)``: log-theta of scenario 2."""
    return -0.8 * X[:, 0] ** 2 + 4 * X[:, 1] ** 3 - 0.75 * np.cos(X[:, 2])


def scenario4_components(X):
    """Linear and (unprojected) non-linear parts of scenario 4."""
    X = _check_dim(4, X)
    return SCENARIO4_INTERCEPT + X @ SCENARIO4_COEFS, nonlinear_part(X)


def scenario_eta(sid: int, X):
    """True log-theta for every row of ``X``.

    Scenario 4 projects its non-linear part onto the orthogonal complement
    of ``[1, X]`` computed over the rows passed in, so it needs at least
    four rows.
    """
    X = _check_dim(sid, X)
    if sid == 1:
        x = X[:, 0]
        return np.log(0.15) + 3.5e3 * x**2 * (1 - x) ** 8 + 2.2e4 * x**8 * (1 - x) ** 3
    if sid == 2:
        return nonlinear_part(X)
    if sid == 3:
        x = X.T
        # products use (x3, x4) and (x8, x9); the log term pairs x1 with x5 and x6 with x10
        first = x[0] ** 2 + np.tanh(x[1]) - x[2] * x[3] * (4 - 0.0005 * x[2] * x[3]) ** 2 \
            + 20 * np.log(np.abs(x[0] + x[4]))
        second = x[5] ** 2 + np.tanh(x[6]) - x[7] * x[8] * (4 - 0.0005 * x[7] * x[8]) ** 2 \
            + 20 * np.log(np.abs(x[5] + x[9]))
        return 0.4 * (0.05 * first) + 0.05 * second
    lin, non = scenario4_components(X)
    pp = qr_orthonormal(with_intercept(X))
    return lin + pp.project_complement(non[:, None])[:, 0]


def theta_scenario(sid: int, X):
    return np.exp(scenario_eta(sid, X))


def sample_covariates(sid: int, n: int, rng):
    if sid == 3:
        head = rng.multivariate_normal(np.zeros(5), SCENARIO3_COV, size=n)
        return np.hstack([head, rng.standard_normal((n, 5))])
    return rng.uniform(0.0, 1.0, size=(n, SCENARIO_DIMS[sid]))


def min_of_exponentials(K, rng):
    """Earliest of ``K_i`` iid Exp(1) times per subject (``inf`` when ``K_i = 0``)."""
    K = np.asarray(K, dtype=np.int64)
    out = np.full(K.shape, np.inf)
    literal = (K > 0) & (K <= LITERAL_K_CAP)
    if literal.any():
        k = K[literal]
        draws = rng.exponential(1.0, size=int(k.sum()))
        starts = np.concatenate([[0], np.cumsum(k)[:-1]])
        out[literal] = np.minimum.reduceat(draws, starts)
    big = K > LITERAL_K_CAP
    if big.any():
        out[big] = rng.exponential(1.0, size=int(big.sum())) / K[big]
    return out


@dataclass
class SimulatedData:
    dataset: Dataset
    truth: dict
    spec: ScenarioSpec | None = None

    def subset(self, idx):
        return SimulatedData(
            self.dataset.subset(idx),
            {k: v[idx] for k, v in self.truth.items()},
            self.spec,
        )


def generate_dataset(spec: ScenarioSpec) -> SimulatedData:
    """Draw one dataset plus the true ``eta``, ``theta``, ``S`` and ``S_p``
    at each subject's observed time."""
    rng = np.random.default_rng(spec.seed)
    X = sample_covariates(spec.id, spec.n, rng)
    eta = scenario_eta(spec.id, X)
    theta = np.exp(eta)
    K = rng.poisson(theta)
    t_star = min_of_exponentials(K, rng)
    event = (t_star <= spec.tau).astype(float)
    t = np.minimum(t_star, spec.tau)
    truth = {
        "eta": eta,
        "theta": theta,
        "S": np.exp(-t),
        "S_p": np.exp(-theta * -np.expm1(-t)),
        "K": K,
        "cured": (K == 0),
    }
    if spec.id == 4:
        lin, non = scenario4_components(X)
        truth["eta_lin"] = lin
        truth["eta_non"] = eta - lin
    names = [f"x{j + 1}" for j in range(X.shape[1])]
    return SimulatedData(Dataset(X, t, event, names), truth, spec)


def model_estimates(model, data: SimulatedData, projection="batch") -> dict:
    """Fitted ``eta``, ``S`` and ``S_p`` at the observed times of ``data``."""
    ds = data.dataset
    eta = cm.eta(model, ds.X, projection)
    F = cm.bl.cdf(model.baseline, ds.time)
    return {"eta": eta, "S": 1.0 - F, "S_p": np.exp(-np.exp(eta) * F)}


class TruthOracle:
    """Stand-in "fit" that reports the data-generating quantities."""

    def estimates(self, data: SimulatedData) -> dict:
        return {k: data.truth[k] for k in ("eta", "S", "S_p")}


@dataclass
class ReplicationResult:
    spec: ScenarioSpec
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def summary(self) -> dict:
        ok = self.rows
        out = {"scenario": self.spec.id, "n": self.spec.n, "tau": self.spec.tau,
               "replications": len(ok), "failed": len(self.failures)}
        for key in ("S", "S_p", "eta"):
            out[f"delta_{key}"] = float(np.mean([r[f"delta_{key}"] for r in ok])) if ok else None
        out["mean_fit_minutes"] = float(np.mean([r["fit_seconds"] for r in ok]) / 60) if ok else None
        return out

    def write_csv(self, path):
        if not self.rows:
            return
        keys = sorted({k for r in self.rows for k in r})
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys)
            w.writeheader()
            for r in self.rows:
                w.writerow(r)

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump({"spec": asdict(self.spec), "summary": self.summary, "rows": self.rows,
                       "failures": self.failures}, fh, indent=1, sort_keys=True)


def run_replications(spec: ScenarioSpec, R: int, fit_fn, n_holdout=None, n_jobs=1):
    """Generate, fit and score ``R`` independent replications.

    ``fit_fn(train: Dataset, seed: int)`` returns a fitted model or any
    object with an ``estimates(SimulatedData)`` method. Each replication's
    holdout set comes from the same scenario with fresh seeds; failing
    replications are logged and excluded.
    """
    if R < 1:
        raise ValueError("R must be at least 1")
    n_holdout = spec.n if n_holdout is None else n_holdout
    children = np.random.SeedSequence(spec.seed).spawn(R)

    def one(r):
        s_train, s_hold, s_fit = (int(c.generate_state(1)[0]) for c in children[r].spawn(3))
        train = generate_dataset(ScenarioSpec(spec.id, spec.n, s_train, spec.tau))
        hold = generate_dataset(ScenarioSpec(spec.id, n_holdout, s_hold, spec.tau))
        start = _time.perf_counter()
        try:
            fitted = fit_fn(train.dataset, s_fit)
        except Exception as exc:  # noqa: BLE001 - a failed replication is recorded, not fatal
            log.warning("replication %d failed: %s", r, exc)
            return {"replication": r, "error": repr(exc)}
        elapsed = _time.perf_counter() - start
        est = fitted.estimates(hold) if hasattr(fitted, "estimates") else model_estimates(fitted, hold)
        deltas = delta_metrics(est, hold.truth)
        row = {"replication": r, "fit_seconds": elapsed}
        row.update({f"delta_{k}": v for k, v in deltas.items()})
        net = getattr(fitted, "net", None)
        if net is not None and net.w_lin is not None:
            row["b_lin"] = float(net.b_lin)
            row.update({f"w_lin_{j + 1}": float(w) for j, w in enumerate(net.w_lin)})
        return row

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            out = list(pool.map(one, range(R)))
    else:
        out = [one(r) for r in range(R)]
    result = ReplicationResult(spec)
    for row in out:
        (result.failures if "error" in row else result.rows).append(row)
    return result


def default_fit_settings(orthogonalize=False):
    """Architecture and optimizer used for the simulation studies."""
    from .network import LayerSpec
    from .optim import OptimizerConfig
    from .training import TrainConfig

    layers = [LayerSpec(64, "relu"), LayerSpec(64, "relu")]
    opt = OptimizerConfig("adam", 0.005, "inverse_time", 0.75, 1000)
    train = TrainConfig(batch_size=1024, max_epochs=300, patience=15, orthogonalize=orthogonalize)
    return layers, opt, train


def make_fit_fn(layers=None, opt=None, train=None, orthogonalize=False):
    """``fit_fn`` for :func:`run_replications` that trains with a fixed setup."""
    from dataclasses import replace

    from .training import fit

    d_layers, d_opt, d_train = default_fit_settings(orthogonalize)
    layers = d_layers if layers is None else layers
    opt = d_opt if opt is None else opt
    train = d_train if train is None else train

    def fit_fn(dataset, seed):
        return fit(dataset, layers, opt, replace(train, seed=seed)).model

    return fit_fn
