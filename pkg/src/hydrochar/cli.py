"""Command-line front end: validate -> stats -> train -> explain -> optimize.

Artifacts are deterministic for a fixed seed: JSON is written with sorted
keys, CSV floats use shortest round-trip formatting, and no timestamps are
embedded, so repeated runs are byte-identical.

Exit codes: 0 success, 1 input/usage error, 2 internal failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, data, genetic, pipeline, shapley, stats
from .errors import HydrocharError, MissingModelFile, SingularInput, TooFewRows

SCHEMA_VERSION = 1


@dataclass
class RunConfig:
    data: Path | None
    out: Path
    seed: int
    model: str
    grid: Path | None
    application: str
    background: int

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        out = Path(getattr(args, "out", ".")).resolve()
        out.mkdir(parents=True, exist_ok=True)
        d = getattr(args, "data", None)
        return cls(
            data=Path(d).resolve() if d else None,
            out=out,
            seed=args.seed,
            model=getattr(args, "model", "both"),
            grid=Path(args.grid).resolve() if getattr(args, "grid", None) else None,
            application=getattr(args, "application", "energy"),
            background=getattr(args, "background", 64),
        )


def _provenance(seed: int) -> dict:
    return {"schema_version": SCHEMA_VERSION, "seed": seed, "tool_version": __version__}


def _provenance_comment(seed: int) -> str:
    return f"# schema_version={SCHEMA_VERSION} seed={seed} tool_version={__version__}"


def _write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _model_path(out: Path, kind: str, target: str) -> Path:
    return out / f"model_{kind}_{target}.json"


def cmd_validate(args) -> int:
    cfg = RunConfig.from_args(args)
    ds = data.load_csv(cfg.data)
    print(f"n_rows: {ds.n_rows}")
    print(f"warnings: {len(ds.warnings)}")
    for w in ds.warnings:
        print(f"  {w}")
    print("missing target cells:")
    ymat = ds.target_matrix()
    for j, t in enumerate(ds.target_names):
        absent = int(np.isnan(ymat[:, j]).sum())
        print(f"  {t}: {absent}/{ds.n_rows}")
    return 0


def cmd_stats(args) -> int:
    cfg = RunConfig.from_args(args)
    ds = data.load_csv(cfg.data)
    comment = _provenance_comment(cfg.seed)

    corr = stats.correlation_matrix(ds)
    (cfg.out / "correlation_matrix.csv").write_text(
        comment + "\n" + corr.to_csv_text(), encoding="utf-8"
    )
    _write_json(cfg.out / "correlation_matrix.json", {**_provenance(cfg.seed), **corr.to_json_obj()})

    _write_van_krevelen(ds, cfg.out / "van_krevelen.csv", comment)

    all_columns = list(ds.feature_names) + list(ds.target_names)
    try:
        factors = stats.factor_analysis(ds, all_columns)
    except (TooFewRows, SingularInput):
        # sparse targets can leave too few complete rows; fall back to inputs
        factors = stats.factor_analysis(ds, list(ds.feature_names))
    _write_json(cfg.out / "factors.json", {**_provenance(cfg.seed), **factors.to_json_obj()})
    (cfg.out / "factors.csv").write_text(comment + "\n" + factors.to_csv_text(), encoding="utf-8")
    print(f"wrote correlation_matrix.csv/.json, factors.json/.csv, van_krevelen.csv to {cfg.out}")
    return 0


def _write_van_krevelen(ds: data.Dataset, path: Path, comment: str) -> None:
    lines = [comment, "row,biomass_h_over_c,biomass_o_over_c,hydrochar_h_over_c,hydrochar_o_over_c"]
    for i, (fv, tr) in enumerate(ds.rows):
        cells = [str(i)]
        try:
            hc, oc = data.van_krevelen(fv.biomass_c, fv.biomass_h, fv.biomass_o)
            cells += [repr(hc), repr(oc)]
        except data.ZeroCarbon:
            cells += ["", ""]
        if tr.hc_c is not None and tr.hc_h is not None and tr.hc_o is not None and tr.hc_c > 0:
            hc, oc = data.van_krevelen(tr.hc_c, tr.hc_h, tr.hc_o)
            cells += [repr(hc), repr(oc)]
        else:
            cells += ["", ""]
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_grid(cfg: RunConfig) -> pipeline.HyperGrid:
    if cfg.grid is None:
        return pipeline.HyperGrid.default()
    with cfg.grid.open(encoding="utf-8") as fh:
        return pipeline.HyperGrid.from_json_obj(json.load(fh))


def cmd_train(args) -> int:
    cfg = RunConfig.from_args(args)
    ds = data.load_csv(cfg.data)
    grid = _load_grid(cfg)
    kinds = ("dtr", "svr") if cfg.model == "both" else (cfg.model,)
    result = pipeline.train_all(ds, grid, seed=cfg.seed, models=kinds)
    _write_json(cfg.out / "report.json", result.report)
    for (kind, target), trained in sorted(result.trained.items()):
        _write_json(_model_path(cfg.out, kind, target), {**_provenance(cfg.seed), **trained.to_json_obj()})
    print(f"{'model':<6}{'target':<10}{'cv_rmse':>10}{'train_r2':>10}{'test_r2':>10}")
    for (kind, target), t in sorted(result.trained.items()):
        print(f"{kind:<6}{target:<10}{t.cv_rmse:>10.4g}{t.train_metrics.r2:>10.4f}{t.test_metrics.r2:>10.4f}")
    for kind in kinds:
        for target, reason in result.skips[kind].items():
            print(f"{kind:<6}{target:<10} skipped: {reason}")
    return 0 if result.trained else 1


def _load_models(cfg: RunConfig, kind: str, targets=None) -> dict[str, pipeline.TrainedTarget]:
    models = {}
    for target in targets if targets is not None else data.TARGET_COLUMNS:
        path = _model_path(cfg.out, kind, target)
        if not path.exists():
            continue
        with path.open(encoding="utf-8") as fh:
            models[target] = pipeline.TrainedTarget.from_json_obj(json.load(fh))
    return models


def cmd_evaluate(args) -> int:
    cfg = RunConfig.from_args(args)
    ds = data.load_csv(cfg.data)
    kinds = ("dtr", "svr") if cfg.model == "both" else (cfg.model,)
    x = ds.feature_matrix()
    ymat = ds.target_matrix()
    section: dict = {}
    for kind in kinds:
        models = _load_models(cfg, kind)
        if not models:
            continue
        section[kind] = {}
        for target, model in sorted(models.items()):
            j = list(ds.target_names).index(target)
            present = ~np.isnan(ymat[:, j])
            if int(present.sum()) < 2:
                section[kind][target] = {"skipped": "fewer than 2 rows with this target"}
                continue
            m = pipeline.evaluate(model, x[present], ymat[present, j])
            section[kind][target] = m.as_dict()
    if not section:
        raise MissingModelFile(f"no model_*.json files found in {cfg.out}")
    _write_json(cfg.out / "evaluation.json", {**_provenance(cfg.seed), "models": section})
    for kind, targets in section.items():
        for target, m in targets.items():
            if "r2" in m:
                print(f"{kind:<6}{target:<10} r2={m['r2']:.4f} rmse={m['rmse']:.4g} mae={m['mae']:.4g} n={m['n']}")
    return 0


def cmd_explain(args) -> int:
    cfg = RunConfig.from_args(args)
    kind = cfg.model if cfg.model in ("dtr", "svr") else "dtr"
    path = _model_path(cfg.out, kind, args.target)
    if not path.exists():
        raise MissingModelFile(f"{path} not found; run train first")
    with path.open(encoding="utf-8") as fh:
        model = pipeline.TrainedTarget.from_json_obj(json.load(fh))
    ds = data.load_csv(cfg.data)
    plan = data.split(ds, seed=cfg.seed)
    x = ds.feature_matrix()
    train_x = x[plan.train_indices]
    rng = np.random.default_rng(cfg.seed)
    take = min(cfg.background, len(train_x))
    background = train_x[rng.choice(len(train_x), size=take, replace=False)]
    explanations = [shapley.explain(model.predict, row, background) for row in x]
    out_dir = cfg.out / f"shap_{kind}_{args.target}"
    shapley.emit_plot_data(
        explanations,
        feature_names=ds.feature_names,
        out_dir=out_dir,
        provenance=_provenance_comment(cfg.seed),
    )
    print(f"wrote beeswarm.csv, bar.csv, heatmap.csv, importance.svg to {out_dir}")
    return 0


def _resolve_profile(application: str) -> genetic.ObjectiveProfile:
    candidate = Path(application)
    if candidate.suffix == ".json" and candidate.exists():
        with candidate.open(encoding="utf-8") as fh:
            directions = json.load(fh)
        return genetic.ObjectiveProfile.from_directions(candidate.stem, directions)
    return genetic.ObjectiveProfile.builtin(application)


def cmd_optimize(args) -> int:
    cfg = RunConfig.from_args(args)
    profile = _resolve_profile(cfg.application)
    needed = [t for t, _ in profile.active()]
    models = _load_models(cfg, "dtr")
    missing = [t for t in needed if t not in models]
    if missing:
        raise MissingModelFile(f"missing trained DTR model files for {missing}; run train first")
    ds = data.load_csv(cfg.data)
    plan = data.split(ds, seed=cfg.seed)
    train_x = ds.feature_matrix()[plan.train_indices]
    bounds = tuple((float(c.min()), float(c.max())) for c in train_x.T)
    config = genetic.GaConfig(bounds=bounds, seed=cfg.seed)
    result = genetic.optimize(models, profile, config)
    rep = genetic.report(result, profile, config)
    _write_json(cfg.out / "optimum.json", rep)
    print(genetic.render_table(rep))
    return 0


def cmd_synth(args) -> int:
    cfg = RunConfig.from_args(args)
    ds = data.generate_synthetic(args.n, seed=cfg.seed, noise_sd=args.noise)
    path = cfg.out / "synthetic.csv"
    data.write_csv(ds, path)
    print(f"wrote {ds.n_rows} rows to {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--data", help="input CSV in the canonical 21-column schema")
    shared.add_argument("--out", default=".", help="output directory (created if absent)")
    shared.add_argument("--seed", type=int, default=42)
    shared.add_argument("--model", choices=("dtr", "svr", "both"), default="both")
    shared.add_argument("--grid", help="JSON file overriding the hyperparameter grids")
    shared.add_argument("--application", default="energy",
                        help="energy | soil | adsorption, or a JSON direction-map file")
    shared.add_argument("--background", type=int, default=64,
                        help="background rows for attribution")

    parser = argparse.ArgumentParser(prog="hydrochar", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[shared], help="check a CSV against the schema")
    sub.add_parser("stats", parents=[shared], help="correlation, factor, and atomic-ratio artifacts")
    sub.add_parser("train", parents=[shared], help="grid-searched training for every target")
    sub.add_parser("evaluate", parents=[shared], help="re-evaluate saved models on a dataset")
    p = sub.add_parser("explain", parents=[shared], help="Shapley artifacts for one target")
    p.add_argument("--target", required=True, choices=data.TARGET_COLUMNS)
    sub.add_parser("optimize", parents=[shared], help="GA search over the trained surrogates")
    p = sub.add_parser("synth", parents=[shared], help="write a synthetic dataset")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--noise", type=float, default=0.0)

    return parser


_COMMANDS = {
    "validate": cmd_validate,
    "stats": cmd_stats,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "explain": cmd_explain,
    "optimize": cmd_optimize,
    "synth": cmd_synth,
}

_NEEDS_DATA = {"validate", "stats", "train", "evaluate", "explain", "optimize"}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command in _NEEDS_DATA and not args.data:
        print(f"error: {args.command} requires --data", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (HydrocharError, FileNotFoundError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
