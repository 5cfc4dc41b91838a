"""Promotion time cure model with a network predictor.

The population survival is ``S_p(t; x) = exp(-theta(x) F(t))`` with
``theta(x) = exp(eta(x))``; the cure probability is its limit
``exp(-theta(x))``. ``S(t) = 1 - F(t)`` is the survival of a single risk
factor and is exposed separately: it bounds the survival of susceptible
subjects from above and is not the population survival.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baseline as bl
from .network import NetworkParams, backward, forward
from .orthogonal import qr_orthonormal, with_intercept

ETA_CLAMP = 30.0
FORMAT_VERSION = 1


class FeatureMismatchError(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass
class CureModel:
    net: NetworkParams
    baseline: bl.BaselinePartition
    orthogonalize: bool = False
    feature_names: list | None = None
    preprocessing: object | None = None
    # least-squares coefficients of the hidden output on [1, X] over the
    # training design; lets the projected term be evaluated row by row
    projection_reference: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def trainable(self) -> dict:
        arrays = self.net.named_arrays()
        arrays["rho"] = self.baseline.log_hazards
        return arrays

    def copy(self) -> "CureModel":
        return CureModel(
            self.net.copy(),
            self.baseline.copy(),
            self.orthogonalize,
            None if self.feature_names is None else list(self.feature_names),
            self.preprocessing,
            None if self.projection_reference is None else self.projection_reference.copy(),
            dict(self.metadata),
        )

    # convenience wrappers
    def eta(self, X, projection="batch"):
        return eta(self, X, projection)

    def theta(self, X, projection="batch"):
        return theta(self, X, projection)

    def cure_probability(self, X, projection="batch"):
        return cure_probability(self, X, projection)

    def survival_population(self, X, t, projection="batch"):
        return survival_population(self, X, t, projection)


def _as_matrix(model: CureModel, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.net.input_dim:
        raise FeatureMismatchError(
            f"model expects {model.net.input_dim} features, got {X.shape[1]}"
        )
    return X


def check_feature_names(model: CureModel, names):
    if model.feature_names is None:
        return
    names = list(names)
    if names != list(model.feature_names):
        missing = [c for c in model.feature_names if c not in names]
        extra = [c for c in names if c not in model.feature_names]
        raise FeatureMismatchError(
            f"feature mismatch: missing {missing}, unexpected {extra}"
        )


def predictor_forward(model: CureModel, X, training=False, rng=None, projection="batch"):
    """Unclamped predictor and the intermediates needed for backpropagation.

    ``projection`` selects how the orthogonalized model projects the hidden
    output: ``"batch"`` uses the QR of this batch's ``[1, X]``, while
    ``"reference"`` uses the coefficients stored from the training design.
    """
    X = _as_matrix(model, X)
    net = model.net
    H, cache = forward(net, X, training=training, rng=rng)
    state = {"X": X, "H": H, "cache": cache, "pp": None}
    if not model.orthogonalize:
        return H @ net.w_out + net.b_out, state
    if projection == "batch":
        pp = qr_orthonormal(with_intercept(X))
        Hp = pp.project_complement(H)
        state["pp"] = pp
    elif projection == "reference":
        if model.projection_reference is None:
            raise ValueError("model has no stored projection reference")
        Hp = H - with_intercept(X) @ model.projection_reference
    else:
        raise ValueError(f"unknown projection mode {projection!r}")
    state["Hp"] = Hp
    return X @ net.w_lin + net.b_lin + Hp @ net.w_out, state


def predictor_backward(model: CureModel, state, g):
    """Gradients of ``sum(g * eta)`` for all network parameters."""
    net = model.net
    H = state["H"]
    if model.orthogonalize:
        if state["pp"] is None:
            raise ValueError("gradients require the batch projection")
        grads = {
            "w_out": state["Hp"].T @ g,
            "b_out": np.array(0.0),
            "w_lin": state["X"].T @ g,
            "b_lin": np.array(g.sum()),
        }
        # P_perp is symmetric, so the hidden-output gradient is P_perp g w_out^T
        g_h = np.outer(state["pp"].project_complement(g[:, None])[:, 0], net.w_out)
    else:
        grads = {"w_out": H.T @ g, "b_out": np.array(g.sum())}
        g_h = np.outer(g, net.w_out)
    if net.layers:
        hidden, _ = backward(net, state["cache"], g_h)
        grads.update(hidden)
    return grads


def eta(model: CureModel, X, projection="batch"):
    """Predictor clamped to ``[-30, 30]``."""
    raw, _ = predictor_forward(model, X, projection=projection)
    return np.clip(raw, -ETA_CLAMP, ETA_CLAMP)


def theta(model: CureModel, X, projection="batch"):
    return np.exp(eta(model, X, projection))


def cure_probability(model: CureModel, X, projection="batch"):
    return np.exp(-theta(model, X, projection))


def survival_risk(model: CureModel, t):
    """``S(t) = 1 - F(t)`` of one latent risk factor."""
    return bl.survival(model.baseline, t)


def survival_population(model: CureModel, X, t, projection="batch"):
    """``S_p(t; x)``; ``t`` is a scalar or one time per row of ``X``."""
    return np.exp(-theta(model, X, projection) * bl.cdf(model.baseline, t))


def hazard_population(model: CureModel, X, t, projection="batch"):
    return theta(model, X, projection) * bl.density(model.baseline, t)


def _check_outcomes(time, event):
    time = np.asarray(time, dtype=float)
    event = np.asarray(event)
    if time.shape != event.shape:
        raise ValueError("time and event must have the same length")
    if np.any(time <= 0) or not np.all(np.isfinite(time)):
        raise ValueError("observed times must be finite and strictly positive")
    if not np.all((event == 0) | (event == 1)):
        raise ValueError("event indicators must be 0 or 1")
    return time, event.astype(float)


def _loglik_terms(model, eta_c, time, event):
    F = bl.cdf(model.baseline, time)
    logf = bl.log_density(model.baseline, time)
    return event * (eta_c + logf) - np.exp(eta_c) * F


def neg_log_likelihood(model: CureModel, X, time, event, projection="batch"):
    """Mean negative log-likelihood over the rows."""
    time, event = _check_outcomes(time, event)
    eta_c = eta(model, X, projection)
    return -float(np.mean(_loglik_terms(model, eta_c, time, event)))


def loss_and_gradients(model: CureModel, X, time, event, training=False, rng=None):
    """Mean negative log-likelihood and its gradient for every trainable array.

    Keys match :meth:`CureModel.trainable`; ``"rho"`` holds the baseline
    log-hazards.
    """
    time, event = _check_outcomes(time, event)
    n = time.size
    raw, state = predictor_forward(model, X, training=training, rng=rng)
    eta_c = np.clip(raw, -ETA_CLAMP, ETA_CLAMP)
    th = np.exp(eta_c)
    p = model.baseline
    F = bl.cdf(p, time)
    loss = -float(np.mean(event * (eta_c + bl.log_density(p, time)) - th * F))

    g_eta = -(event - th * F) / n
    g_eta = g_eta * ((raw > -ETA_CLAMP) & (raw < ETA_CLAMP))
    grads = predictor_backward(model, state, g_eta)

    e = bl.exposure(p, time)
    lam = p.hazards
    idx = bl.interval_index(p, time)
    dlogf = -e * lam
    dlogf[np.arange(n), idx] += 1.0
    dF = (1.0 - F)[:, None] * e * lam
    grads["rho"] = -(event @ dlogf - th @ dF) / n
    return loss, grads


def model_to_dict(model: CureModel) -> dict:
    linear = None
    if model.net.w_lin is not None:
        linear = {"weight": model.net.w_lin.tolist(), "bias": float(model.net.b_lin)}
    pre = model.preprocessing.to_dict() if model.preprocessing is not None else None
    ref = model.projection_reference
    return {
        "version": FORMAT_VERSION,
        "orthogonalize": bool(model.orthogonalize),
        "baseline": model.baseline.to_dict(),
        "layers": model.net.to_dict(),
        "linear_part": linear,
        "preprocessing": pre,
        "feature_names": model.feature_names,
        "projection_reference": None if ref is None else ref.tolist(),
        "metadata": model.metadata,
    }


def model_from_dict(d: dict) -> CureModel:
    from .preprocessing import Preprocessor

    if d.get("version") != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model format version {d.get('version')!r} (expected {FORMAT_VERSION})"
        )
    try:
        net = NetworkParams.from_dict(d["layers"], d.get("linear_part"))
        base = bl.BaselinePartition.from_dict(d["baseline"])
        pre = d.get("preprocessing")
        ref = d.get("projection_reference")
        return CureModel(
            net,
            base,
            bool(d["orthogonalize"]),
            d.get("feature_names"),
            Preprocessor.from_dict(pre) if pre is not None else None,
            None if ref is None else np.array(ref, dtype=float),
            d.get("metadata", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model description: {exc}") from exc


def save_model(model: CureModel, path):
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1, sort_keys=True))


def load_model(path) -> CureModel:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: corrupt model file ({exc})") from exc
    if not isinstance(d, dict):
        raise ModelFormatError(f"{path}: expected a JSON object")
    return model_from_dict(d)
