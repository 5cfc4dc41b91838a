"""Command-line entry point.

Exit codes: 0 on success, 2 for invalid input, 3 for numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import baseline as bl
from . import model as cm
from .data import DataValidationError, TabularSchema, infer_schema, load_csv, write_csv
from .effects import BASE_RULES, covariate_effect, interaction_surface
from .metrics import bootstrap_metrics, evaluate
from .network import ACTIVATIONS, LayerSpec
from .optim import OPTIMIZERS, SCHEDULES, OptimizerConfig
from .orthogonal import RankDeficientError
from .preprocessing import ROUTES, Preprocessor
from .simulation import ScenarioSpec, generate_dataset, make_fit_fn, run_replications
from .training import TrainConfig, TrainingDivergedError, fit, random_search, split_indices

log = logging.getLogger("ptcmnet")

THREADS_ENV = "PTCMNET_THREADS"


def _threads_default():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _write_config(args, out_dir: Path):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(json.dumps(cfg, indent=1, sort_keys=True, default=str))
    log.info("config: %s", json.dumps(cfg, sort_keys=True, default=str))
    return cfg


def _load_frame(path, args, schema=None):
    if schema is not None:
        return load_csv(path, schema)
    raw = pd.read_csv(path, dtype=str, nrows=1000, keep_default_na=False, na_values=[""])
    inferred = infer_schema(raw, args.time_col, args.event_col)
    forced = [c for c in (args.categorical or "").split(",") if c]
    numeric = [c for c in inferred.numeric if c not in forced]
    categorical = inferred.categorical + [c for c in forced if c not in inferred.categorical]
    return load_csv(path, TabularSchema(numeric, categorical, args.time_col, args.event_col))


def _layers(args):
    units = [int(u) for u in args.layers.split(",") if u.strip()] if args.layers else []
    return [LayerSpec(u, args.activation, args.dropout) for u in units]


def _opt(args):
    return OptimizerConfig(args.optimizer, args.lr, args.schedule, args.decay_rate, args.decay_steps)


def _train(args):
    return TrainConfig(
        batch_size=args.batch_size,
        max_epochs=args.epochs,
        patience=args.patience,
        validation_fraction=args.val_fraction,
        seed=args.seed,
        orthogonalize=args.ortho,
        n_intervals=args.j,
    )


def _preprocessor(args, schema):
    return Preprocessor(
        schema,
        route=args.encoding,
        normalize=not args.no_normalize,
        drop_first=args.drop_first,
        smoothing=args.smoothing,
        variance_target=args.pca_variance,
        pca_scope=args.pca_scope,
    )


# ------------------------------------------------------------------ commands


def cmd_simulate(args):
    spec = ScenarioSpec(args.scenario, args.n, args.seed, args.tau)
    sim = generate_dataset(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(sim.dataset, out)
    if args.truth:
        truth = pd.DataFrame({k: np.asarray(v, dtype=float) for k, v in sim.truth.items()})
        truth.to_csv(args.truth, index=False, float_format="%.17g")
    log.info("wrote %d rows (event fraction %.3f) to %s", len(sim.dataset), sim.dataset.event.mean(), out)


def cmd_replicate(args):
    out = Path(args.out)
    _write_config(args, out)
    spec = ScenarioSpec(args.scenario, args.n, args.seed, args.tau)
    res = run_replications(
        spec, args.replications, make_fit_fn(orthogonalize=args.ortho),
        n_holdout=args.n_holdout, n_jobs=args.threads,
    )
    res.write_csv(out / "replications.csv")
    res.write_json(out / "results.json")
    print(json.dumps(res.summary, indent=1, sort_keys=True))


def cmd_fit(args):
    out = Path(args.out)
    _write_config(args, out)
    frame = _load_frame(args.train, args)
    rng = np.random.default_rng(np.random.SeedSequence(args.seed).spawn(1)[0])
    tr_idx, va_idx = split_indices(len(frame), args.val_fraction, rng)
    tr_frame = frame.subset(tr_idx)
    pre = _preprocessor(args, frame.schema).fit(tr_frame)
    train_ds = pre.transform(tr_frame)
    val_frame = frame.subset(va_idx) if va_idx.size else None
    val_ds = pre.transform(val_frame) if val_frame is not None else None
    result = fit(train_ds, _layers(args), _opt(args), _train(args), validation=val_ds, preprocessing=pre)
    cm.save_model(result.model, out / "model.json")
    result.write_history(out / "history.csv")
    if val_frame is not None:
        write_csv(val_frame, out / "validation.csv")
        report = evaluate(result.model, val_ds, grid_size=args.grid_size)
        report.write_json(out / "metrics.json")
        report.write_curve(out / "brier_curve.csv")
        log.info("validation AUC_cure %.5f IBS %.5f", report.auc_cure, report.ibs)
    log.info("best epoch %d of %d", result.best_epoch, result.stopped_epoch)


def _check_header(path, schema):
    header = list(pd.read_csv(path, nrows=0).columns)
    missing = [c for c in schema.covariates if c not in header]
    if missing:
        extra = [c for c in header if c not in schema.covariates + [schema.time_col, schema.event_col]]
        raise cm.FeatureMismatchError(
            f"{path}: model needs columns {missing} that are absent (unexpected: {extra})"
        )


def _prepared(model, path, args):
    if model.preprocessing is not None:
        _check_header(path, model.preprocessing.schema)
        frame = load_csv(path, model.preprocessing.schema)
        return frame, model.preprocessing.transform(frame)
    frame = _load_frame(path, args)
    ds = frame.to_dataset()
    cm.check_feature_names(model, ds.feature_names)
    return frame, ds


def cmd_predict(args):
    model = cm.load_model(args.model)
    _, ds = _prepared(model, args.data, args)
    eta = cm.eta(model, ds.X)
    out = pd.DataFrame({"eta": eta, "theta": np.exp(eta), "cure_probability": np.exp(-np.exp(eta))})
    out["S_p_observed"] = np.exp(-np.exp(eta) * bl.cdf(model.baseline, ds.time))
    for t in [float(v) for v in (args.times or "").split(",") if v]:
        out[f"S_p_{t:g}"] = np.exp(-np.exp(eta) * bl.cdf(model.baseline, t))
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    out.to_csv(args.out, index=False, float_format="%.17g")


def cmd_evaluate(args):
    out = Path(args.out)
    _write_config(args, out)
    model = cm.load_model(args.model)
    _, ds = _prepared(model, args.data, args)
    report = evaluate(model, ds, grid_size=args.grid_size)
    wanted = {m.strip() for m in args.metrics.split(",")}
    if args.bootstrap:
        report.bootstrap_sd = bootstrap_metrics(ds, model, args.bootstrap, args.seed,
                                                grid_size=args.grid_size, n_jobs=args.threads)
    d = report.to_dict()
    if "auc" not in wanted:
        d.pop("auc_cure")
    if "ibs" not in wanted:
        d.pop("ibs")
    (out / "metrics.json").write_text(json.dumps(d, indent=1, sort_keys=True))
    report.write_curve(out / "brier_curve.csv")
    print(json.dumps(d, indent=1, sort_keys=True))


def cmd_search(args):
    out = Path(args.out)
    _write_config(args, out)
    frame = _load_frame(args.train, args)
    pre = _preprocessor(args, frame.schema).fit(frame)
    ds = pre.transform(frame)
    res = random_search(ds, n_trials=args.trials, runs_per_trial=args.runs, seed=args.seed,
                        train=_train(args), lr0=args.lr, n_jobs=args.threads)
    res.write_log(out / "search_log.jsonl")
    (out / "best_config.json").write_text(
        json.dumps({"config": res.best, "mean_val_loss": res.best_loss}, indent=1, sort_keys=True)
    )
    print(json.dumps(res.best, sort_keys=True))


def cmd_effect(args):
    model = cm.load_model(args.model)
    frame, ds = _prepared(model, args.data, args)
    data = frame if model.preprocessing is not None else ds
    if args.var2:
        table = interaction_surface(model, data, args.var, args.var2, args.grid_size, args.base)
    else:
        table = covariate_effect(model, data, args.var, args.grid_size, args.base)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(args.out, index=False, float_format="%.17g")


# ------------------------------------------------------------------ parser


def _data_flags(p):
    p.add_argument("--time-col", default="time")
    p.add_argument("--event-col", default="event")
    p.add_argument("--categorical", default="", help="comma-separated columns to treat as categorical")


def _fit_flags(p):
    _data_flags(p)
    p.add_argument("--layers", default="64,64", help="hidden units per layer, e.g. 512,512; empty for linear")
    p.add_argument("--activation", default="relu", choices=ACTIVATIONS)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--optimizer", default="sgd", choices=OPTIMIZERS)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--schedule", default="inverse_time", choices=SCHEDULES)
    p.add_argument("--decay-rate", type=float, default=0.75)
    p.add_argument("--decay-steps", type=int, default=100)
    p.add_argument("--ortho", action="store_true", help="orthogonalize the network against [1, X]")
    p.add_argument("--j", type=int, default=bl.DEFAULT_INTERVALS, help="baseline intervals")
    p.add_argument("--batch-size", type=int, default=1024)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--encoding", default="onehot", choices=ROUTES)
    p.add_argument("--drop-first", action="store_true", help="drop one level per categorical")
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--smoothing", type=float, default=20.0)
    p.add_argument("--pca-variance", type=float, default=0.95)
    p.add_argument("--pca-scope", default="all", choices=("all", "numeric"))
    p.add_argument("--grid-size", type=int, default=None, help="cap on Brier grid points")


def build_parser():
    parser = argparse.ArgumentParser(prog="ptcmnet", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=_threads_default(),
                        help=f"worker cap for replications/bootstrap/search (env {THREADS_ENV})")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a scenario dataset to CSV")
    p.add_argument("--scenario", type=int, choices=(1, 2, 3, 4), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tau", type=float, default=8.0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", help="optional CSV for the true eta/theta/S/S_p")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replicate", help="replication study for one scenario")
    p.add_argument("--scenario", type=int, choices=(1, 2, 3, 4), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--n-holdout", type=int, default=None)
    p.add_argument("--replications", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tau", type=float, default=8.0)
    p.add_argument("--ortho", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser("fit", help="train a model")
    p.add_argument("--train", required=True)
    p.add_argument("--out", required=True, help="run directory")
    _fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict eta, cure probability and S_p")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--times", default="", help="comma-separated times for S_p columns")
    _data_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="AUC_cure, Brier curve and IBS")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--metrics", default="auc,ibs")
    p.add_argument("--bootstrap", type=int, default=0, help="bootstrap replicates for SDs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-size", type=int, default=None)
    _data_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("search", help="random hyperparameter search")
    p.add_argument("--train", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--runs", type=int, default=3)
    _fit_flags(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("effect", help="covariate effect curve or interaction surface")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--var", required=True)
    p.add_argument("--var2")
    p.add_argument("--grid-size", type=int, default=50)
    p.add_argument("--base", default="median", choices=BASE_RULES)
    p.add_argument("--out", required=True)
    _data_flags(p)
    p.set_defaults(func=cmd_effect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (TrainingDivergedError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (DataValidationError, RankDeficientError, cm.FeatureMismatchError, cm.ModelFormatError,
            ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
