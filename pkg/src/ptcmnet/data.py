"""Survival data containers and CSV input/output."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd


class DataValidationError(ValueError):
    pass


@dataclass
class Dataset:
    """Numeric design matrix with observed times and event indicators."""

    X: np.ndarray
    time: np.ndarray
    event: np.ndarray
    feature_names: list = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X[:, None]
        self.time = np.asarray(self.time, dtype=float)
        self.event = np.asarray(self.event, dtype=float)
        n = self.X.shape[0]
        if self.time.shape != (n,) or self.event.shape != (n,):
            raise DataValidationError("X, time and event must have matching row counts")
        if not self.feature_names:
            self.feature_names = [f"x{j + 1}" for j in range(self.X.shape[1])]
        if len(self.feature_names) != self.X.shape[1]:
            raise DataValidationError("one feature name per column is required")

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.time[idx], self.event[idx], list(self.feature_names))

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.X, columns=self.feature_names)
        df["time"] = self.time
        df["event"] = self.event.astype(int)
        return df


@dataclass
class TabularSchema:
    numeric: list
    categorical: list
    time_col: str = "time"
    event_col: str = "event"

    @property
    def covariates(self) -> list:
        return list(self.numeric) + list(self.categorical)

    def to_dict(self) -> dict:
        return {
            "numeric": list(self.numeric),
            "categorical": list(self.categorical),
            "time_col": self.time_col,
            "event_col": self.event_col,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["numeric"], d["categorical"], d["time_col"], d["event_col"])


@dataclass
class SurvivalFrame:
    """Raw covariates (numeric and categorical) plus outcomes."""

    covariates: pd.DataFrame
    time: np.ndarray
    event: np.ndarray
    schema: TabularSchema

    def __len__(self):
        return len(self.covariates)

    def subset(self, idx) -> "SurvivalFrame":
        return SurvivalFrame(
            self.covariates.iloc[idx].reset_index(drop=True),
            self.time[idx],
            self.event[idx],
            self.schema,
        )

    def to_dataset(self) -> Dataset:
        if self.schema.categorical:
            raise DataValidationError("categorical columns need preprocessing first")
        X = self.covariates[self.schema.numeric].to_numpy(dtype=float)
        return Dataset(X, self.time, self.event, list(self.schema.numeric))


def _parse_floats(values):
    """Exact decimal-to-double parsing; NaN marks unparseable or non-finite cells."""
    out = np.full(len(values), np.nan)
    for i, v in enumerate(values):
        try:
            x = float(v)
        except (TypeError, ValueError):
            continue
        if np.isfinite(x):
            out[i] = x
    return out


def infer_schema(df: pd.DataFrame, time_col="time", event_col="event") -> TabularSchema:
    numeric, categorical = [], []
    for col in df.columns:
        if col in (time_col, event_col):
            continue
        parsed = pd.to_numeric(df[col], errors="coerce")
        if parsed.notna().sum() == df[col].notna().sum() and df[col].notna().all():
            numeric.append(col)
        else:
            categorical.append(col)
    return TabularSchema(numeric, categorical, time_col, event_col)


def load_csv(path, schema: TabularSchema | None = None, time_col="time", event_col="event"):
    """Read and validate a survival table.

    Every offending row is reported with its line number in the file
    (the header is line 1).
    """
    path = Path(path)
    df = pd.read_csv(path, dtype=str, keep_default_na=False, na_values=[""])
    if schema is None:
        schema = infer_schema(df, time_col, event_col)
    needed = [schema.time_col, schema.event_col] + schema.covariates
    missing = [c for c in needed if c not in df.columns]
    if missing:
        raise DataValidationError(f"{path}: missing columns {missing}")

    problems = []
    line = np.arange(len(df)) + 2
    # pandas' fast float parser can be off by one ulp, so parse with float()
    time = _parse_floats(df[schema.time_col])
    event = _parse_floats(df[schema.event_col])
    for i in np.flatnonzero(~np.isfinite(time)):
        problems.append(f"line {line[i]}: unparseable time {df[schema.time_col].iloc[i]!r}")
    for i in np.flatnonzero(np.isfinite(time) & (time <= 0)):
        problems.append(f"line {line[i]}: time must be > 0, got {time[i]}")
    for i in np.flatnonzero(~np.isin(event, (0.0, 1.0))):
        problems.append(f"line {line[i]}: event must be 0 or 1, got {df[schema.event_col].iloc[i]!r}")

    cov = pd.DataFrame(index=df.index)
    for col in schema.numeric:
        vals = _parse_floats(df[col])
        for i in np.flatnonzero(np.isnan(vals)):
            problems.append(f"line {line[i]}: column {col!r} needs a number, got {df[col].iloc[i]!r}")
        cov[col] = vals
    for col in schema.categorical:
        # missing categories become a level of their own
        cov[col] = df[col].fillna("__missing__").astype(str)

    if problems:
        shown = "\n  ".join(problems[:20])
        more = f"\n  ... and {len(problems) - 20} more" if len(problems) > 20 else ""
        raise DataValidationError(f"{path}: invalid rows\n  {shown}{more}")
    return SurvivalFrame(cov, time, event, schema)


def write_csv(data, path):
    """Write a :class:`Dataset` or :class:`SurvivalFrame` with full float precision."""
    if isinstance(data, Dataset):
        df = data.to_frame()
        time_col, event_col = "time", "event"
    else:
        df = data.covariates.copy()
        time_col, event_col = data.schema.time_col, data.schema.event_col
        df[time_col] = data.time
        df[event_col] = data.event.astype(int)
    df.to_csv(path, index=False, float_format="%.17g")
