"""Experiment protocol: per-target cross-validated grid search and reporting.

One 80/20 split plan is shared by every target; rows are filtered per target
after splitting so the train/test boundary stays comparable. Inputs are
standardized on training statistics only. Targets are left on their original
scale for trees (scale-equivariant) and standardized for SVR fitting, with
predictions mapped back before any metric is computed, so all reported
metrics are in original target units.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import data as data_mod
from .cart import RegressionTree, TreeParams, fit_tree
from .data import Dataset, Scaler, SplitPlan
from .errors import HydrocharError, TooFewRows
from .stats import MetricsReport, metrics_report, rmse
from .svr import Kernel, SvrModel, SvrParams, fit_svr

DEFAULT_TREE_DEPTHS = (4, 6, 8, 10, 12, 16, None)
DEFAULT_TREE_MIN_LEAF = (1, 2, 5, 10)
DEFAULT_SVR_C = (0.1, 1.0, 10.0, 100.0)
DEFAULT_SVR_EPSILON = (0.01, 0.1, 0.5)
DEFAULT_SVR_GAMMAS = (0.05, 0.1, 0.5)


@dataclass
class HyperGrid:
    """Candidate hyperparameters per model family."""

    tree_grid: list[TreeParams]
    svr_grid: list[SvrParams]

    def __post_init__(self):
        if not self.tree_grid and not self.svr_grid:
            raise ValueError("grid must contain at least one candidate")

    @classmethod
    def default(cls) -> "HyperGrid":
        trees = [
            TreeParams(max_depth=d, min_samples_leaf=leaf)
            for d, leaf in itertools.product(DEFAULT_TREE_DEPTHS, DEFAULT_TREE_MIN_LEAF)
        ]
        kernels = [Kernel.linear()] + [Kernel.rbf(g) for g in DEFAULT_SVR_GAMMAS]
        svrs = [
            SvrParams(c=c, epsilon=e, kernel=k)
            for c, e, k in itertools.product(DEFAULT_SVR_C, DEFAULT_SVR_EPSILON, kernels)
        ]
        return cls(tree_grid=trees, svr_grid=svrs)

    def to_json_obj(self) -> dict:
        return {
            "tree_grid": [p.to_dict() for p in self.tree_grid],
            "svr_grid": [p.to_dict() for p in self.svr_grid],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "HyperGrid":
        return cls(
            tree_grid=[TreeParams.from_dict(d) for d in obj.get("tree_grid", [])],
            svr_grid=[SvrParams.from_dict(d) for d in obj.get("svr_grid", [])],
        )


@dataclass
class TrainedTarget:
    """One fitted surrogate with its scalers, selection trace, and metrics."""

    target: str
    model_kind: str  # "dtr" | "svr"
    model: RegressionTree | SvrModel
    scaler_in: Scaler
    scaler_out: Scaler | None
    chosen_params: TreeParams | SvrParams
    cv_rmse: float
    train_metrics: MetricsReport
    test_metrics: MetricsReport
    target_mean: float
    target_std: float
    seed: int

    def predict(self, x_raw) -> np.ndarray:
        """Predict on raw (unscaled) feature rows, in original target units."""
        xs = self.scaler_in.transform(np.atleast_2d(np.asarray(x_raw, dtype=float)))
        pred = self.model.predict_batch(xs)
        if self.scaler_out is not None:
            pred = self.scaler_out.inverse_transform(pred[:, None])[:, 0]
        return pred

    def to_json_obj(self) -> dict:
        return {
            "schema_version": 1,
            "target": self.target,
            "model_kind": self.model_kind,
            "seed": self.seed,
            "params": self.chosen_params.to_dict(),
            "cv_rmse": self.cv_rmse,
            "scaler_in": self.scaler_in.to_dict(),
            "scaler_out": self.scaler_out.to_dict() if self.scaler_out is not None else None,
            "target_mean": self.target_mean,
            "target_std": self.target_std,
            "train_metrics": self.train_metrics.as_dict(),
            "test_metrics": self.test_metrics.as_dict(),
            "model": self.model.to_json_obj(),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "TrainedTarget":
        kind = obj["model_kind"]
        if kind == "dtr":
            model = RegressionTree.from_json_obj(obj["model"])
            params = TreeParams.from_dict(obj["params"])
        else:
            model = SvrModel.from_json_obj(obj["model"])
            params = SvrParams.from_dict(obj["params"])
        tm = obj["train_metrics"]
        sm = obj["test_metrics"]
        return cls(
            target=obj["target"],
            model_kind=kind,
            model=model,
            scaler_in=Scaler.from_dict(obj["scaler_in"]),
            scaler_out=Scaler.from_dict(obj["scaler_out"]) if obj.get("scaler_out") else None,
            chosen_params=params,
            cv_rmse=float(obj["cv_rmse"]),
            train_metrics=MetricsReport(**tm),
            test_metrics=MetricsReport(**sm),
            target_mean=float(obj["target_mean"]),
            target_std=float(obj["target_std"]),
            seed=int(obj.get("seed", 0)),
        )


@dataclass
class GridSearchResult:
    chosen_params: TreeParams | SvrParams
    cv_rmse: float
    candidates: list[tuple[TreeParams | SvrParams, float]]


def _fit_candidate(x_train, y_train, params, seed: int):
    """Fit one candidate on already-standardized inputs; returns a callable."""
    if isinstance(params, TreeParams):
        model = fit_tree(x_train, y_train, params)
    else:
        model = fit_svr(x_train, y_train, params, seed=seed)
    return model.predict_batch


def _cv_fold_rmse(x, y, params, trn, val, seed: int) -> float:
    scaler = Scaler.fit(x[trn])
    x_trn = scaler.transform(x[trn])
    x_val = scaler.transform(x[val])
    if isinstance(params, SvrParams):
        y_scaler = Scaler.fit(y[trn][:, None])
        y_trn = y_scaler.transform(y[trn][:, None])[:, 0]
        predict = _fit_candidate(x_trn, y_trn, params, seed)
        pred = y_scaler.inverse_transform(predict(x_val)[:, None])[:, 0]
    else:
        predict = _fit_candidate(x_trn, y[trn], params, seed)
        pred = predict(x_val)
    return rmse(y[val], pred)


def grid_search(x, y, candidates, k: int = 5, seed: int = 0, fold_ids=None) -> GridSearchResult:
    """Select the candidate with the lowest mean validation RMSE over k folds.

    Fold scalers are re-fit inside every fold on its own training part.
    ``fold_ids`` reuses an existing fold assignment (one per row of ``x``);
    otherwise rows are shuffled with ``seed`` and chunked into k folds. Ties,
    including exact duplicates, go to the earliest grid entry. A candidate
    that fails on any fold scores infinity.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidate list is empty")
    n = len(y)
    if fold_ids is None:
        if n < k:
            raise TooFewRows(f"{n} rows cannot form {k} folds")
        perm = np.random.default_rng(seed).permutation(n)
        fold_ids = np.empty(n, dtype=int)
        for fold, chunk in enumerate(np.array_split(perm, k)):
            fold_ids[chunk] = fold
    else:
        fold_ids = np.asarray(fold_ids, dtype=int)
        if len(fold_ids) != n:
            raise TooFewRows("fold assignment length does not match row count")
        k = max(k, int(fold_ids.max()) + 1)
    folds = [np.flatnonzero(fold_ids == f) for f in range(k)]
    nonempty = [f for f in folds if len(f)]
    if len(nonempty) < 2:
        raise TooFewRows("need at least 2 non-empty folds")
    scored: list[tuple[TreeParams | SvrParams, float]] = []
    for params in candidates:
        fold_scores = []
        try:
            for val in nonempty:
                trn = np.setdiff1d(np.arange(n), val)
                if len(trn) < 2:
                    raise TooFewRows("fold training part too small")
                fold_scores.append(_cv_fold_rmse(x, y, params, trn, val, seed))
            score = float(np.mean(fold_scores))
        except HydrocharError:
            score = np.inf
        scored.append((params, score))
    best_idx = min(range(len(scored)), key=lambda i: (scored[i][1], i))
    chosen, cv = scored[best_idx]
    if not np.isfinite(cv):
        raise HydrocharError("every grid candidate failed cross-validation")
    return GridSearchResult(chosen_params=chosen, cv_rmse=cv, candidates=scored)


@dataclass
class TrainResult:
    """Everything train_all produces: models, Table-style report, skips."""

    trained: dict[tuple[str, str], TrainedTarget]
    report: dict
    skips: dict[str, dict[str, str]]
    plan: SplitPlan


def _fit_final(x, y, trn, tst, params, target, kind, cv, seed) -> TrainedTarget:
    scaler_in = Scaler.fit(x[trn], columns=data_mod.FEATURE_COLUMNS)
    x_trn = scaler_in.transform(x[trn])
    scaler_out = None
    if isinstance(params, SvrParams):
        scaler_out = Scaler.fit(y[trn][:, None])
        y_fit = scaler_out.transform(y[trn][:, None])[:, 0]
        model = fit_svr(x_trn, y_fit, params, seed=seed)
    else:
        model = fit_tree(x_trn, y[trn], params)
    trained = TrainedTarget(
        target=target,
        model_kind=kind,
        model=model,
        scaler_in=scaler_in,
        scaler_out=scaler_out,
        chosen_params=params,
        cv_rmse=cv,
        train_metrics=MetricsReport(0.0, 0.0, 0.0, 0),  # placeholders, set below
        test_metrics=MetricsReport(0.0, 0.0, 0.0, 0),
        target_mean=float(np.mean(y[trn])),
        target_std=float(np.std(y[trn])),
        seed=seed,
    )
    trained.train_metrics = evaluate(trained, x[trn], y[trn])
    trained.test_metrics = evaluate(trained, x[tst], y[tst])
    return trained


def evaluate(model: TrainedTarget, x, y) -> MetricsReport:
    """Metrics of a trained target on raw rows, in original target units."""
    y = np.asarray(y, dtype=float).ravel()
    return metrics_report(y, model.predict(x))


def train_all(dataset: Dataset, grid: HyperGrid, seed: int, models=("dtr", "svr")) -> TrainResult:
    """Run the full protocol for every target and requested model family.

    Per-target failures (too few rows, constant targets, degenerate folds)
    are recorded as skips and never abort the batch.
    """
    plan = data_mod.split(dataset, test_fraction=0.2, k=5, seed=seed)
    x = dataset.feature_matrix()
    ymat = dataset.target_matrix()
    trained: dict[tuple[str, str], TrainedTarget] = {}
    skips: dict[str, dict[str, str]] = {m: {} for m in models}
    for kind in models:
        candidates = grid.tree_grid if kind == "dtr" else grid.svr_grid
        for t_idx, target in enumerate(dataset.target_names):
            if not candidates:
                skips[kind][target] = "no grid candidates for this model family"
                continue
            y = ymat[:, t_idx]
            present = ~np.isnan(y)
            keep_train = present[plan.train_indices]
            trn = plan.train_indices[keep_train]
            folds = plan.fold_assignments[keep_train]
            tst = plan.test_indices[present[plan.test_indices]]
            if len(trn) < plan.k + 1:
                skips[kind][target] = f"only {len(trn)} training rows with this target"
                continue
            if len(tst) < 2:
                skips[kind][target] = f"only {len(tst)} test rows with this target"
                continue
            if np.max(y[trn]) == np.min(y[trn]):
                skips[kind][target] = "training target is constant"
                continue
            try:
                gs = grid_search(x[trn], y[trn], candidates, k=plan.k, seed=seed, fold_ids=folds)
                trained[(kind, target)] = _fit_final(
                    x, y, trn, tst, gs.chosen_params, target, kind, gs.cv_rmse, seed
                )
            except HydrocharError as exc:
                skips[kind][target] = str(exc)
    report = _build_report(dataset, trained, skips, seed, models)
    return TrainResult(trained=trained, report=report, skips=skips, plan=plan)


def _build_report(dataset: Dataset, trained, skips, seed: int, models) -> dict:
    from . import __version__

    model_section: dict = {}
    for kind in models:
        section = {}
        for target in dataset.target_names:
            t = trained.get((kind, target))
            if t is None:
                continue
            section[target] = {
                "train": t.train_metrics.as_dict(),
                "test": t.test_metrics.as_dict(),
                "params": t.chosen_params.to_dict(),
                "cv_rmse": t.cv_rmse,
            }
        model_section[kind] = section
    return {
        "schema_version": 1,
        "tool_version": __version__,
        "seed": seed,
        "n_rows": dataset.n_rows,
        "dataset_fingerprint": dataset.fingerprint(),
        "models": model_section,
        "skips": {k: dict(v) for k, v in skips.items()},
    }
