"""Predictor curves for one covariate and surfaces for two.

All other covariates are held at base values: the median (or mean, or
zero) for numeric columns and the most frequent level for categorical
ones. Orthogonalized models are evaluated with the projection stored from
the training design, because a grid of otherwise-constant rows does not
span ``[1, X]``.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

from . import model as cm
from .data import Dataset, SurvivalFrame

BASE_RULES = ("median", "mean", "zero")


def _projection(model):
    return "reference" if model.orthogonalize else "batch"


def _frame_of(model, data):
    """Raw covariate table plus the names of numeric columns."""
    if isinstance(data, SurvivalFrame):
        return data.covariates, list(data.schema.numeric)
    if isinstance(data, Dataset):
        cm.check_feature_names(model, data.feature_names)
        return pd.DataFrame(data.X, columns=data.feature_names), list(data.feature_names)
    raise TypeError("data must be a Dataset or a SurvivalFrame")


def base_row(frame: pd.DataFrame, numeric, rule="median") -> dict:
    if rule not in BASE_RULES:
        raise ValueError(f"base rule must be one of {BASE_RULES}")
    row = {}
    for col in frame.columns:
        if col in numeric:
            vals = frame[col].to_numpy(dtype=float)
            row[col] = {"median": np.median, "mean": np.mean, "zero": lambda v: 0.0}[rule](vals)
        else:
            row[col] = frame[col].mode().iloc[0]
    return row


def _grid_for(frame, numeric, var, size):
    if var not in frame.columns:
        raise KeyError(f"unknown covariate {var!r}")
    if var not in numeric:
        raise ValueError(f"covariate {var!r} is not numeric")
    if size < 2:
        raise ValueError("grid size must be at least 2")
    vals = frame[var].to_numpy(dtype=float)
    return np.linspace(vals.min(), vals.max(), size)


def _eta_for_rows(model, rows: pd.DataFrame, data):
    if model.preprocessing is not None and isinstance(data, SurvivalFrame):
        n = len(rows)
        frame = SurvivalFrame(rows, np.ones(n), np.zeros(n), data.schema)
        X = model.preprocessing.transform(frame).X
    else:
        X = rows.to_numpy(dtype=float)
    return cm.eta(model, X, _projection(model))


def covariate_effect(model, data, var, grid_size=50, base="median") -> pd.DataFrame:
    """``eta`` over an even grid spanning the observed range of ``var``."""
    frame, numeric = _frame_of(model, data)
    grid = _grid_for(frame, numeric, var, grid_size)
    rows = pd.DataFrame([base_row(frame, numeric, base)] * grid.size)
    rows[var] = grid
    return pd.DataFrame({var: grid, "eta": _eta_for_rows(model, rows, data)})


def interaction_surface(model, data, var1, var2, grid_size=25, base="median") -> pd.DataFrame:
    """``eta`` on a two-dimensional grid, one row per grid point."""
    frame, numeric = _frame_of(model, data)
    g1 = _grid_for(frame, numeric, var1, grid_size)
    g2 = _grid_for(frame, numeric, var2, grid_size)
    a, b = np.meshgrid(g1, g2, indexing="ij")
    rows = pd.DataFrame([base_row(frame, numeric, base)] * a.size)
    rows[var1] = a.ravel()
    rows[var2] = b.ravel()
    return pd.DataFrame({var1: a.ravel(), var2: b.ravel(), "eta": _eta_for_rows(model, rows, data)})
