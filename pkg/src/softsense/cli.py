"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 data error, 4 model error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .bundle import ModelBundle, load_model, save_model
from .cart import export_dot
from .dataio import FEATURES, load_csv, write_csv
from .errors import SoftSenseError
from .importance import FeatureRanking, correlation_matrix, filter_rankings, rankings_csv
from .pipeline import (
    PipelineConfig,
    exit_code,
    format_test_results,
    importance_ranking,
    model_spec,
    prepare,
    pruned_tree,
    rf_importance,
    run_pipeline,
)
from .selection import FAMILIES, evaluate_on_test, forward_selection
from .synth import GeneratorConfig, generate

log = logging.getLogger("softsense")


def _feature_list(text: str) -> list[str]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    bad = [t for t in items if t not in FEATURES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown features: {', '.join(bad)}")
    return items


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", type=Path, help="process-data CSV (default: synthetic data from --seed)")
    p.add_argument("--seed", type=int, default=0, help="master seed; every stage seed derives from it")


def _add_forest_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--mtry", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None, help="worker threads for forest fitting")


def _add_ranking_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ranking", type=_feature_list,
                   help="feature order to use instead of computing forest importance, e.g. A,B,H")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="softsense", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic dataset CSV")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rows", type=int, default=None)
    p.add_argument("--config", type=Path, help="generator config JSON")

    p = sub.add_parser("importance", help="forest permutation importance, filters and correlations")
    _add_data_args(p)
    _add_forest_args(p)
    p.add_argument("--bins", type=int, default=5)
    p.add_argument("--out-dir", type=Path, required=True)

    p = sub.add_parser("select", help="forward selection along an importance ranking")
    _add_data_args(p)
    _add_forest_args(p)
    _add_ranking_arg(p)
    p.add_argument("--cp", type=float, default=0.01)
    p.add_argument("--family", choices=[*FAMILIES, "all"], default="all")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--save-model", type=Path, help="bundle the per-subset models (single family only)")

    p = sub.add_parser("evaluate", help="test-set scores using the top-k ranked features")
    _add_data_args(p)
    _add_forest_args(p)
    _add_ranking_arg(p)
    p.add_argument("--cp", type=float, default=0.01)
    p.add_argument("--top-k", type=int, default=3)
    p.add_argument("--family", choices=[*FAMILIES, "all"], default="all")
    p.add_argument("--out-dir", type=Path, required=True)

    p = sub.add_parser("predict", help="predict NT with a saved model bundle")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--mask", type=_feature_list, default=None,
                   help="comma-separated features that are available (default: all)")

    p = sub.add_parser("export-tree", help="write the pruned regression tree as Graphviz DOT")
    _add_data_args(p)
    p.add_argument("--cp", type=float, default=0.01)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("run", help="full pipeline")
    _add_data_args(p)
    _add_forest_args(p)
    p.add_argument("--cp", type=float, default=0.01)
    p.add_argument("--bins", type=int, default=5)
    p.add_argument("--top-k", type=int, default=3)
    p.add_argument("--family", choices=FAMILIES, default="linear", help="family saved as a model bundle")
    p.add_argument("--out-dir", type=Path, required=True)
    return parser


def _ranking(args, prep) -> FeatureRanking:
    if args.ranking:
        rest = [f for f in prep.data.columns if f not in args.ranking]
        order = list(args.ranking) + rest
        return FeatureRanking("rf_permutation", tuple((f, float(len(order) - i)) for i, f in enumerate(order)))
    return importance_ranking(rf_importance(prep, args.trees, args.mtry, args.jobs))


def _families(choice: str) -> tuple[str, ...]:
    return FAMILIES if choice == "all" else (choice,)


def cmd_gen(args) -> int:
    cfg = GeneratorConfig.from_json(args.config) if args.config else GeneratorConfig()
    overrides = {"seed": args.seed}
    if args.rows is not None:
        overrides["n_rows"] = args.rows
    cfg = GeneratorConfig.from_dict({**cfg.to_dict(), **overrides})
    data = generate(cfg)
    write_csv(data, args.out)
    log.info("wrote %d rows (%d flagged) to %s", data.n_rows, int(data.outlier_flag.sum()), args.out)
    return 0


def cmd_importance(args) -> int:
    prep = prepare(args.seed, args.input)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    report = rf_importance(prep, args.trees, args.mtry, args.jobs)
    (args.out_dir / "importance.csv").write_text(report.to_csv())
    (args.out_dir / "importance.json").write_text(report.to_json())
    dev = prep.development
    (args.out_dir / "corrmatrix.csv").write_text(correlation_matrix(dev).to_csv())
    filters = filter_rankings(dev, args.bins)
    (args.out_dir / "filters.csv").write_text(rankings_csv([*filters.values(), importance_ranking(report)]))
    return 0


def cmd_select(args) -> int:
    families = _families(args.family)
    if args.save_model and len(families) != 1:
        raise ValueError("--save-model needs a single --family")
    prep = prepare(args.seed, args.input)
    ranking = _ranking(args, prep)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for family in families:
        spec = model_spec(family, prep, args.trees, args.mtry, args.cp)
        report = forward_selection(prep.data, prep.split, ranking, spec, args.jobs,
                                   keep_models=bool(args.save_model))
        (args.out_dir / f"selection_{family}.csv").write_text(report.to_csv())
        (args.out_dir / f"selection_{family}.json").write_text(report.to_json())
        if args.save_model:
            save_model(ModelBundle(spec, tuple(ranking.features), prep.stats, report.models()), args.save_model)
    return 0


def cmd_evaluate(args) -> int:
    prep = prepare(args.seed, args.input)
    ranking = _ranking(args, prep)
    top = ranking.top(args.top_k)
    rows = []
    for family in _families(args.family):
        spec = model_spec(family, prep, args.trees, args.mtry, args.cp)
        rows.append((family, top, evaluate_on_test(prep.data, prep.split, top, spec, args.jobs)))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    (args.out_dir / "test_results.csv").write_text(format_test_results(rows))
    return 0


def cmd_predict(args) -> int:
    bundle = load_model(args.model)
    data = load_csv(args.input)
    available = bundle.features if args.mask is None else args.mask
    pred, subset = bundle.predict(data.columns, available)
    with args.out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "prediction", "subset"])
        label = ",".join(subset)
        for i, v in enumerate(pred):
            w.writerow([i, repr(float(v)), label])
    return 0


def cmd_export_tree(args) -> int:
    prep = prepare(args.seed, args.input)
    args.out.write_text(export_dot(pruned_tree(prep, args.cp, list(prep.data.columns))), encoding="utf-8")
    return 0


def cmd_run(args) -> int:
    result = run_pipeline(PipelineConfig(
        out_dir=args.out_dir, seed=args.seed, input=args.input, n_trees=args.trees, mtry=args.mtry,
        cp=args.cp, bins=args.bins, top_k=args.top_k, bundle_family=args.family, n_jobs=args.jobs,
    ))
    if result.status:
        print(f"run failed at stage {result.manifest.get('failed_stage')}: {result.manifest.get('error')}",
              file=sys.stderr)
    return result.status


COMMANDS = {
    "gen": cmd_gen,
    "importance": cmd_importance,
    "select": cmd_select,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "export-tree": cmd_export_tree,
    "run": cmd_run,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except argparse.ArgumentTypeError as exc:
        parser.error(str(exc))
    except (SoftSenseError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, FileNotFoundError):
            return 3
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
