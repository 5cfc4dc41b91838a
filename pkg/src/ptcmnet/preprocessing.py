"""Fit-once / apply-many feature transforms for tabular survival data.

Three encodings of categorical columns are supported: full one-hot,
smoothed target encoding (with the event indicator as target) and PCA over
the encoded matrix. Numeric columns are z-scored with training statistics.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .data import Dataset, SurvivalFrame, TabularSchema

log = logging.getLogger(__name__)

ROUTES = ("onehot", "target", "pca")


@dataclass
class Normalizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=float)
        mean = X.mean(axis=0)
        sd = X.std(axis=0)
        constant = sd == 0
        if np.any(constant):
            log.warning("columns %s are constant and are passed through unscaled",
                        np.flatnonzero(constant).tolist())
        # constant columns are left untouched
        mean = np.where(constant, 0.0, mean)
        sd = np.where(constant, 1.0, sd)
        return cls(mean, sd)

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def inverse_transform(self, Z):
        return np.asarray(Z, dtype=float) * self.scale + self.mean


@dataclass
class OneHot:
    categories: dict
    drop_first: bool = False

    @classmethod
    def fit(cls, frame: pd.DataFrame, columns, drop_first=False):
        cats = {c: sorted(frame[c].astype(str).unique().tolist()) for c in columns}
        return cls(cats, drop_first)

    def feature_names(self):
        names = []
        for col, levels in self.categories.items():
            kept = levels[1:] if self.drop_first else levels
            names.extend(f"{col}={lvl}" for lvl in kept)
        return names

    def transform(self, frame: pd.DataFrame):
        blocks = []
        for col, levels in self.categories.items():
            kept = levels[1:] if self.drop_first else levels
            codes = pd.Categorical(frame[col].astype(str), categories=kept).codes
            block = np.zeros((len(frame), len(kept)))
            seen = codes >= 0
            # unseen or dropped levels leave the block at zero
            block[np.flatnonzero(seen), codes[seen]] = 1.0
            blocks.append(block)
        if not blocks:
            return np.zeros((len(frame), 0))
        return np.hstack(blocks)


@dataclass
class TargetEncoder:
    """Smoothed category means ``(n_c mean_c + m prior) / (n_c + m)``."""

    mapping: dict
    prior: float
    smoothing: float

    @classmethod
    def fit(cls, frame: pd.DataFrame, columns, target, smoothing=20.0, prior=None):
        if smoothing < 0:
            raise ValueError("smoothing must be non-negative")
        target = np.asarray(target, dtype=float)
        prior = float(target.mean()) if prior is None else float(prior)
        mapping = {}
        for col in columns:
            stats = pd.DataFrame({"c": frame[col].astype(str).to_numpy(), "y": target})
            agg = stats.groupby("c")["y"].agg(["sum", "count"])
            enc = (agg["sum"] + smoothing * prior) / (agg["count"] + smoothing)
            mapping[col] = enc.to_dict()
        return cls(mapping, prior, float(smoothing))

    def feature_names(self):
        return [f"{col}_enc" for col in self.mapping]

    def transform(self, frame: pd.DataFrame):
        cols = [
            frame[col].astype(str).map(table).fillna(self.prior).to_numpy(dtype=float)
            for col, table in self.mapping.items()
        ]
        if not cols:
            return np.zeros((len(frame), 0))
        return np.column_stack(cols)


@dataclass
class PCA:
    """Principal components from the symmetric eigendecomposition of the
    training covariance, truncated at a cumulative variance target."""

    mean: np.ndarray
    components: np.ndarray  # (p, k)
    explained_variance: np.ndarray

    @classmethod
    def fit(cls, X, variance_target=0.95):
        if not 0 < variance_target <= 1:
            raise ValueError("variance_target must lie in (0, 1]")
        X = np.asarray(X, dtype=float)
        mean = X.mean(axis=0)
        Xc = X - mean
        cov = Xc.T @ Xc / max(X.shape[0] - 1, 1)
        evals, evecs = np.linalg.eigh(cov)
        order = np.argsort(evals)[::-1]
        evals = np.clip(evals[order], 0.0, None)
        evecs = evecs[:, order]
        total = evals.sum()
        if total <= 0:
            raise ValueError("PCA input has zero variance")
        ratio = np.cumsum(evals) / total
        k = int(np.searchsorted(ratio, variance_target - 1e-12) + 1)
        k = min(k, evals.size)
        return cls(mean, evecs[:, :k], evals[:k])

    @property
    def n_components(self):
        return self.components.shape[1]

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean) @ self.components

    def inverse_transform(self, Z):
        return np.asarray(Z, dtype=float) @ self.components.T + self.mean


@dataclass
class Preprocessor:
    """Fitted feature pipeline persisted inside the model file."""

    schema: TabularSchema
    route: str = "onehot"
    normalize: bool = True
    drop_first: bool = False
    smoothing: float = 20.0
    variance_target: float = 0.95
    pca_scope: str = "all"
    normalizer: Normalizer | None = None
    onehot: OneHot | None = None
    target: TargetEncoder | None = None
    pca: PCA | None = None
    feature_names: list = field(default_factory=list)

    def fit(self, frame: SurvivalFrame) -> "Preprocessor":
        if self.route not in ROUTES:
            raise ValueError(f"unknown route {self.route!r}; choose from {ROUTES}")
        if self.pca_scope not in ("all", "numeric"):
            raise ValueError("pca_scope must be 'all' or 'numeric'")
        s = self.schema
        num = frame.covariates[s.numeric].to_numpy(dtype=float)
        if self.normalize and s.numeric:
            self.normalizer = Normalizer.fit(num)
        if self.route == "target":
            self.target = TargetEncoder.fit(frame.covariates, s.categorical, frame.event, self.smoothing)
        else:
            self.onehot = OneHot.fit(frame.covariates, s.categorical, self.drop_first)
        self.pca = None
        if self.route == "pca":
            self.pca = PCA.fit(self._pca_input(frame), self.variance_target)
        self.feature_names = self._names()
        return self

    def _numeric(self, frame):
        num = frame.covariates[self.schema.numeric].to_numpy(dtype=float)
        if self.normalizer is not None:
            num = self.normalizer.transform(num)
        return num

    def _encoded(self, frame):
        if self.target is not None:
            cat = self.target.transform(frame.covariates)
        else:
            cat = self.onehot.transform(frame.covariates)
        return np.hstack([self._numeric(frame), cat])

    def _pca_input(self, frame):
        if self.pca_scope == "numeric":
            return self._numeric(frame)
        return self._encoded(frame)

    def _names(self):
        if self.pca is not None:
            pcs = [f"pc{k + 1}" for k in range(self.pca.n_components)]
            if self.pca_scope == "numeric":
                return pcs + self.onehot.feature_names()
            return pcs
        enc = self.target.feature_names() if self.target is not None else self.onehot.feature_names()
        return list(self.schema.numeric) + enc

    def check_columns(self, frame: SurvivalFrame):
        have = list(frame.covariates.columns)
        missing = [c for c in self.schema.covariates if c not in have]
        if missing:
            from .model import FeatureMismatchError

            extra = [c for c in have if c not in self.schema.covariates]
            raise FeatureMismatchError(
                f"data lacks columns {missing} required by the fitted pipeline (unexpected: {extra})"
            )

    def transform(self, frame: SurvivalFrame) -> Dataset:
        self.check_columns(frame)
        if self.pca is None:
            X = self._encoded(frame)
        elif self.pca_scope == "numeric":
            X = np.hstack([self.pca.transform(self._numeric(frame)),
                           self.onehot.transform(frame.covariates)])
        else:
            X = self.pca.transform(self._encoded(frame))
        if not np.all(np.isfinite(X)):
            raise ValueError("preprocessing produced non-finite values")
        return Dataset(X, frame.time, frame.event, list(self.feature_names))

    def fit_transform(self, frame: SurvivalFrame) -> Dataset:
        return self.fit(frame).transform(frame)

    def to_dict(self) -> dict:
        d = {
            "schema": self.schema.to_dict(),
            "route": self.route,
            "normalize": self.normalize,
            "drop_first": self.drop_first,
            "smoothing": self.smoothing,
            "variance_target": self.variance_target,
            "pca_scope": self.pca_scope,
            "feature_names": list(self.feature_names),
            "normalizer": None,
            "onehot": None,
            "target": None,
            "pca": None,
        }
        if self.normalizer is not None:
            d["normalizer"] = {"mean": self.normalizer.mean.tolist(),
                               "scale": self.normalizer.scale.tolist()}
        if self.onehot is not None:
            d["onehot"] = {"categories": self.onehot.categories, "drop_first": self.onehot.drop_first}
        if self.target is not None:
            d["target"] = {"mapping": self.target.mapping, "prior": self.target.prior,
                           "smoothing": self.target.smoothing}
        if self.pca is not None:
            d["pca"] = {"mean": self.pca.mean.tolist(), "components": self.pca.components.tolist(),
                        "explained_variance": self.pca.explained_variance.tolist()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Preprocessor":
        pre = cls(
            TabularSchema.from_dict(d["schema"]),
            d["route"],
            d["normalize"],
            d["drop_first"],
            d["smoothing"],
            d["variance_target"],
            d["pca_scope"],
        )
        if d["normalizer"] is not None:
            pre.normalizer = Normalizer(np.array(d["normalizer"]["mean"]), np.array(d["normalizer"]["scale"]))
        if d["onehot"] is not None:
            pre.onehot = OneHot(d["onehot"]["categories"], d["onehot"]["drop_first"])
        if d["target"] is not None:
            t = d["target"]
            pre.target = TargetEncoder(t["mapping"], t["prior"], t["smoothing"])
        if d["pca"] is not None:
            p = d["pca"]
            pre.pca = PCA(np.array(p["mean"]), np.array(p["components"]).reshape(len(p["mean"]), -1),
                          np.array(p["explained_variance"]))
        pre.feature_names = list(d["feature_names"])
        return pre
