import numpy as np
import pytest

from ptcmnet.baseline import BaselinePartition, build_partition
from ptcmnet.data import Dataset
from ptcmnet.model import CureModel, neg_log_likelihood
from ptcmnet.network import init_params
from ptcmnet.simulation import min_of_exponentials


def linear_data(n, seed, intercept=-0.5, coefs=(1.0, -0.5), tau=8.0):
    """PTCM data with a linear predictor and Exp(1) risk-factor times."""
    rng = np.random.default_rng(seed)
    coefs = np.asarray(coefs, dtype=float)
    X = rng.normal(size=(n, coefs.size))
    eta = intercept + X @ coefs
    K = rng.poisson(np.exp(eta))
    t_star = min_of_exponentials(K, rng)
    event = (t_star <= tau).astype(float)
    return Dataset(X, np.minimum(t_star, tau), event)


def random_instance(rng, n, q, n_intervals, layers, orthogonalize, seed=0):
    """Small random model plus data for gradient checks."""
    X = rng.normal(size=(n, q))
    time = rng.exponential(size=n) + 0.01
    event = (rng.random(n) < 0.6).astype(float)
    event[: n_intervals + 1] = 1.0
    part = build_partition(time[event == 1], n_intervals, max_time=time.max())
    part.log_hazards[:] = rng.normal(scale=0.3, size=n_intervals)
    net = init_params(q, layers, seed=seed, linear_part=orthogonalize)
    for b in net.biases:
        b[:] = rng.normal(scale=0.1, size=b.size)
    if orthogonalize:
        net.w_lin[:] = rng.normal(scale=0.3, size=q)
        net.b_lin[...] = 0.1
    else:
        net.b_out[...] = 0.2
    return CureModel(net, part, orthogonalize), X, time, event


def numeric_gradient(model, X, time, event, h=1e-6):
    """Central differences of the mean NLL for every trainable entry."""
    out = {}
    for name, arr in model.trainable().items():
        flat = arr.reshape(-1)
        g = np.zeros(flat.size)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = neg_log_likelihood(model, X, time, event)
            flat[i] = old - h
            down = neg_log_likelihood(model, X, time, event)
            flat[i] = old
            g[i] = (up - down) / (2 * h)
        out[name] = g.reshape(arr.shape)
    return out


def relative_error(a: dict, b: dict, skip=()):
    keys = [k for k in a if k not in skip]
    va = np.concatenate([np.ravel(a[k]) for k in keys])
    vb = np.concatenate([np.ravel(b[k]) for k in keys])
    return np.linalg.norm(va - vb) / max(np.linalg.norm(va), np.linalg.norm(vb), 1e-300)


def brute_force_auc(pi):
    """TPR/FPR evaluated cut by cut with explicit loops, then trapezoids."""
    pi = [float(p) for p in pi]
    cuts = sorted(set([0.0, 1.0] + pi))
    sus_total = sum(1 - p for p in pi)
    cured_total = sum(pi)
    pts = []
    for c in cuts:
        tpr = sum((1 - p) for p in pi if p <= c) / sus_total
        fpr = sum(p for p in pi if p <= c) / cured_total
        pts.append((fpr, tpr))
    area = 0.0
    for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
        area += (x1 - x0) * (y0 + y1) / 2
    return area


@pytest.fixture
def unit_partition():
    return BaselinePartition([0.0, 10.0], [0.0])


@pytest.fixture
def two_piece():
    return BaselinePartition([0.0, 1.0, 2.0], np.log([0.5, 2.0]))


def linear_model(w, b, part=None):
    w = np.asarray(w, dtype=float)
    net = init_params(w.size, [], seed=0)
    net.w_out[:] = w
    net.b_out[...] = b
    part = part if part is not None else BaselinePartition([0.0, 10.0], [0.0])
    return CureModel(net, part, False)




# ---------------------------------------------------------------- acceptance report

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    if rep.when == "setup" and rep.passed:
        return
    number, title = mark.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    _CRITERIA[number] = (title, rep.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[number]
        line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
