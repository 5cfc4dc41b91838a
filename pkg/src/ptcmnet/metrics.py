"""Cure-aware discrimination and calibration metrics.

``auc_cure`` scores the separation implied by the model's own cure
probabilities; the Brier score weights observations by the reverse
Kaplan-Meier estimate of the censoring survival ``G``, evaluated at
``G(t_i)`` for events (not the left limit).
"""

from __future__ import annotations

import csv
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import baseline as bl


@dataclass
class StepFunction:
    """Right-continuous step function equal to 1 before the first jump."""

    times: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.times, t, side="right")
        padded = np.concatenate([[1.0], self.values])
        return padded[k]


def kaplan_meier(times, events) -> StepFunction:
    """Product-limit estimate of the survival function.

    Pass ``1 - events`` to estimate the censoring survival instead.
    """
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=float)
    if times.size == 0:
        raise ValueError("kaplan_meier needs at least one observation")
    if times.shape != events.shape:
        raise ValueError("times and events must have the same length")
    if not np.all((events == 0) | (events == 1)):
        raise ValueError("indicators must be binary")
    uniq, inverse = np.unique(times, return_inverse=True)
    deaths = np.bincount(inverse, weights=events, minlength=uniq.size)
    counts = np.bincount(inverse, minlength=uniq.size)
    at_risk = counts[::-1].cumsum()[::-1]
    return StepFunction(uniq, np.cumprod(1.0 - deaths / at_risk))


def censoring_survival(times, events) -> StepFunction:
    return kaplan_meier(times, 1.0 - np.asarray(events, dtype=float))


def roc_cure(pi_hat):
    """(FPR, TPR) pairs over the cut grid ``{0} U unique(pi) U {1}``."""
    pi = np.asarray(pi_hat, dtype=float).ravel()
    if pi.size == 0:
        raise ValueError("auc_cure needs at least one prediction")
    if np.any((pi < 0) | (pi > 1)):
        raise ValueError("cure probabilities must lie in [0, 1]")
    order = np.sort(pi)
    cuts = np.unique(np.concatenate([[0.0], order, [1.0]]))
    k = np.searchsorted(order, cuts, side="right")
    sus = np.concatenate([[0.0], np.cumsum(1.0 - order)])
    cured = np.concatenate([[0.0], np.cumsum(order)])
    if sus[-1] <= 0 or cured[-1] <= 0:
        raise ValueError("cure probabilities are degenerate (all 0 or all 1)")
    return cured[k] / cured[-1], sus[k] / sus[-1]


def auc_cure(pi_hat) -> float:
    fpr, tpr = roc_cure(pi_hat)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def brier_score(surv_at_t, times, events, G, t) -> float:
    """Censoring-weighted Brier score at a single time ``t``.

    Subjects whose weight would need ``G = 0`` contribute nothing; their
    count is reported through a warning.
    """
    s = np.asarray(surv_at_t, dtype=float)
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=float)
    n = times.size
    died = (times <= t) & (events == 1)
    alive = times > t
    g_i = G(times)
    g_t = float(G(t))
    ok_died = died & (g_i > 0)
    total = np.sum(s[ok_died] ** 2 / g_i[ok_died])
    excluded = int(np.sum(died & ~ok_died))
    if g_t > 0:
        total += np.sum((1.0 - s[alive]) ** 2) / g_t
    else:
        excluded += int(alive.sum())
    if excluded:
        warnings.warn(f"{excluded} subjects excluded from BS({t:g}) for zero censoring weight",
                      RuntimeWarning, stacklevel=2)
    return float(total / n)


def brier_curve(surv_fn, times, events, grid, G=None):
    """``BS(t)`` on a time grid; ``surv_fn(t)`` returns one value per subject."""
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=float)
    G = censoring_survival(times, events) if G is None else G
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return np.array([brier_score(surv_fn(t), times, events, G, t) for t in grid])


def integrated_brier(grid, bs) -> float:
    """Trapezoidal integral of ``BS`` over the grid divided by its last point."""
    grid = np.asarray(grid, dtype=float)
    bs = np.asarray(bs, dtype=float)
    if grid.size < 2:
        raise ValueError("the Brier curve needs at least two grid points")
    return float(np.sum(np.diff(grid) * (bs[1:] + bs[:-1]) / 2.0) / grid[-1])


def ibs_grid(times, size=None):
    """``0`` followed by the unique observed times (or ``size`` quantiles of them)."""
    times = np.asarray(times, dtype=float)
    pts = np.unique(times)
    if size is not None and pts.size > size:
        pts = np.unique(np.quantile(times, np.linspace(0, 1, size)))
    return np.concatenate([[0.0], pts])


def delta_metrics(est: dict, truth: dict) -> dict:
    """Mean squared differences for ``S``, ``S_p`` and ``eta``.

    Arrays may be stacked over replications; the mean runs over all entries.
    """
    out = {}
    for key in ("S", "S_p", "eta"):
        if key not in est:
            continue
        a = np.asarray(est[key], dtype=float)
        b = np.asarray(truth[key], dtype=float)
        if a.shape != b.shape:
            raise ValueError(f"shape mismatch for {key}: {a.shape} vs {b.shape}")
        out[key] = float(np.mean((a - b) ** 2))
    return out


@dataclass
class MetricsReport:
    auc_cure: float
    ibs: float
    grid: np.ndarray
    bs: np.ndarray
    deltas: dict = field(default_factory=dict)
    bootstrap_sd: dict = field(default_factory=dict)
    n: int = 0

    def to_dict(self) -> dict:
        return {
            "auc_cure": self.auc_cure,
            "ibs": self.ibs,
            "n": self.n,
            "deltas": self.deltas,
            "bootstrap_sd": self.bootstrap_sd,
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)

    def write_curve(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "brier"])
            for t, b in zip(self.grid, self.bs):
                w.writerow([repr(float(t)), repr(float(b))])


def _report_from_theta(theta, partition, times, events, grid_size=None):
    pi = np.exp(-theta)
    grid = ibs_grid(times, grid_size)
    F = bl.cdf(partition, grid)
    G = censoring_survival(times, events)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        bs = np.array([
            brier_score(np.exp(-theta * Fk), times, events, G, t) for t, Fk in zip(grid, F)
        ])
    return MetricsReport(auc_cure(pi), integrated_brier(grid, bs), grid, bs, n=len(times))


def evaluate(model, dataset, grid_size=None, projection="batch") -> MetricsReport:
    """AUC_cure, the Brier curve and IBS for a fitted model on one dataset."""
    theta = model.theta(dataset.X, projection)
    return _report_from_theta(theta, model.baseline, dataset.time, dataset.event, grid_size)


def bootstrap_metrics(dataset, model, B=100, seed=0, grid_size=None, n_jobs=1, projection="batch"):
    """Standard deviations of AUC_cure and IBS over ``B`` row resamples.

    Replicates in which every subject has the same event indicator are
    skipped and counted.
    """
    if B < 2:
        raise ValueError("bootstrap needs at least two replicates")
    children = np.random.SeedSequence(seed).spawn(B)
    n = len(dataset)

    def one(ss):
        idx = np.random.default_rng(ss).integers(0, n, size=n)
        ev = dataset.event[idx]
        if ev.min() == ev.max():
            return None
        theta = model.theta(dataset.X[idx], projection)
        rep = _report_from_theta(theta, model.baseline, dataset.time[idx], ev, grid_size)
        return rep.auc_cure, rep.ibs

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(one, children))
    else:
        results = [one(ss) for ss in children]
    kept = np.array([r for r in results if r is not None])
    skipped = sum(r is None for r in results)
    if kept.shape[0] < 2:
        raise ValueError("fewer than two usable bootstrap replicates")
    return {
        "auc_cure": float(kept[:, 0].std(ddof=1)),
        "ibs": float(kept[:, 1].std(ddof=1)),
        "replicates": int(kept.shape[0]),
        "skipped": int(skipped),
    }
