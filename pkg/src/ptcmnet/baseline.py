"""Piecewise-exponential distribution of the latent risk-factor times.

The hazard is constant on each interval ``(u_{j-1}, u_j]`` and is stored on
the log scale so that unconstrained gradient updates keep it positive.
Beyond the last cut the final hazard simply continues.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_INTERVALS = 10


@dataclass
class BaselinePartition:
    """Interval cuts ``0 = u_0 < ... < u_J`` and per-interval log-hazards."""

    cuts: np.ndarray
    log_hazards: np.ndarray

    def __post_init__(self):
        self.cuts = np.asarray(self.cuts, dtype=float)
        self.log_hazards = np.asarray(self.log_hazards, dtype=float)
        if self.cuts.ndim != 1 or self.cuts.size < 2:
            raise ValueError("cuts must be a vector with at least two entries")
        if self.cuts[0] != 0.0:
            raise ValueError("the first cut must be 0")
        if np.any(np.diff(self.cuts) <= 0):
            raise ValueError("cuts must be strictly increasing")
        if self.log_hazards.shape != (self.cuts.size - 1,):
            raise ValueError(
                f"expected {self.cuts.size - 1} log-hazards, got {self.log_hazards.shape}"
            )

    @property
    def n_intervals(self) -> int:
        return self.log_hazards.size

    @property
    def hazards(self) -> np.ndarray:
        return np.exp(self.log_hazards)

    def copy(self) -> "BaselinePartition":
        return BaselinePartition(self.cuts.copy(), self.log_hazards.copy())

    def to_dict(self) -> dict:
        return {"cuts": self.cuts.tolist(), "log_hazards": self.log_hazards.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "BaselinePartition":
        return cls(np.array(d["cuts"], dtype=float), np.array(d["log_hazards"], dtype=float))


def build_partition(event_times, n_intervals: int = DEFAULT_INTERVALS, max_time=None):
    """Place interval cuts at empirical quantiles of the event times.

    Interior cuts sit at the ``j / J`` quantiles (linear interpolation) and
    the last cut slightly exceeds the largest observed time, which defaults
    to the largest event time. All log-hazards start at 0.

    Parameters
    ----------
    event_times : array_like
        Observed event times (``delta == 1``), all strictly positive.
    n_intervals : int
        Number of intervals ``J``.
    max_time : float, optional
        Largest observed time including censored subjects.
    """
    event_times = np.asarray(event_times, dtype=float).ravel()
    if event_times.size == 0:
        raise ValueError("at least one event time is required to build the partition")
    if np.any(event_times <= 0):
        raise ValueError("event times must be strictly positive")
    if n_intervals < 1:
        raise ValueError("the number of intervals must be at least 1")
    n_distinct = np.unique(event_times).size
    if n_intervals > n_distinct:
        raise ValueError(
            f"{n_intervals} intervals requested but only {n_distinct} distinct event times"
        )

    top = event_times.max() if max_time is None else max(float(max_time), event_times.max())
    probs = np.arange(1, n_intervals) / n_intervals
    interior = np.quantile(event_times, probs) if n_intervals > 1 else np.empty(0)
    cuts = np.concatenate([[0.0], interior, [top * (1 + 1e-6)]])
    if np.any(np.diff(cuts) <= 0):
        raise ValueError(
            "quantile cuts collapse onto each other; use fewer intervals"
        )
    return BaselinePartition(cuts, np.zeros(n_intervals))


def _check_times(t, strict: bool):
    t = np.asarray(t, dtype=float)
    if strict and np.any(t <= 0):
        raise ValueError("times must be strictly positive")
    if np.any(t < 0):
        raise ValueError("times must be non-negative")
    return t


def interval_index(p: BaselinePartition, t) -> np.ndarray:
    """0-based index of the right-closed interval containing each time.

    Times past the last cut map to the last interval; ``t = 0`` maps to the
    first one.
    """
    idx = np.searchsorted(p.cuts, np.asarray(t, dtype=float), side="left") - 1
    return np.clip(idx, 0, p.n_intervals - 1)


def exposure(p: BaselinePartition, t) -> np.ndarray:
    """Time spent in each interval up to ``t``; shape ``t.shape + (J,)``.

    The last interval is unbounded on the right.
    """
    t = np.asarray(t, dtype=float)[..., None]
    lower = p.cuts[:-1]
    width = np.diff(p.cuts).copy()
    width[-1] = np.inf
    return np.clip(t - lower, 0.0, width)


def cumulative_hazard(p: BaselinePartition, t) -> np.ndarray:
    t = _check_times(t, strict=False)
    return exposure(p, t) @ p.hazards


def cdf(p: BaselinePartition, t) -> np.ndarray:
    """Risk-factor CDF ``F(t) = 1 - exp(-Lambda(t))``."""
    return -np.expm1(-cumulative_hazard(p, t))


def survival(p: BaselinePartition, t) -> np.ndarray:
    """Proper survival of a single risk factor, ``S(t) = 1 - F(t)``."""
    return np.exp(-cumulative_hazard(p, t))


def density(p: BaselinePartition, t) -> np.ndarray:
    t = _check_times(t, strict=True)
    return p.hazards[interval_index(p, t)] * np.exp(-cumulative_hazard(p, t))


def log_density(p: BaselinePartition, t) -> np.ndarray:
    t = _check_times(t, strict=True)
    return p.log_hazards[interval_index(p, t)] - cumulative_hazard(p, t)


def cdf_grad(p: BaselinePartition, t) -> np.ndarray:
    """Jacobian of ``F(t)`` with respect to the log-hazards, shape ``(n, J)``."""
    t = _check_times(t, strict=False)
    e = exposure(p, t)
    lam = p.hazards
    return np.exp(-(e @ lam))[..., None] * e * lam


def density_grad(p: BaselinePartition, t) -> np.ndarray:
    """Jacobian of ``f(t)`` with respect to the log-hazards."""
    t = _check_times(t, strict=True)
    e = exposure(p, t)
    lam = p.hazards
    idx = interval_index(p, t)
    dlog = -e * lam
    np.put_along_axis(
        dlog,
        idx[..., None],
        np.take_along_axis(dlog, idx[..., None], axis=-1) + 1.0,
        axis=-1,
    )
    return density(p, t)[..., None] * dlog
