"""End-to-end experiment: importance ranking, forward selection, test evaluation."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .bundle import ModelBundle, save_model
from .cart import GrowParams, export_dot, grow_tree, prune_tree
from .dataio import (
    FEATURES,
    Dataset,
    NormStats,
    SplitIndices,
    drop_flagged_outliers,
    load_csv,
    split_dataset,
    zscore_apply,
    zscore_fit,
)
from .errors import DataError, ModelError
from .forest import ForestParams, ImportanceReport, fit_forest, permutation_importance
from .importance import correlation_matrix, filter_rankings, rank_features, rankings_csv, FeatureRanking
from .selection import FAMILIES, ModelSpec, evaluate_on_test, forward_selection
from .synth import GeneratorConfig, generate

log = logging.getLogger(__name__)

STAGES = ("data", "split", "forest", "permutation", "model")


def derive_seeds(seed: int) -> dict[str, int]:
    """Per-stage seeds spawned from the single master seed."""
    states = np.random.SeedSequence(seed).generate_state(len(STAGES))
    return {name: int(s) for name, s in zip(STAGES, states)}


@dataclass
class PipelineConfig:
    out_dir: Path
    seed: int = 0
    input: Optional[Path] = None
    generator: Optional[GeneratorConfig] = None
    n_trees: int = 100
    mtry: Optional[int] = None
    cp: float = 0.01
    bins: int = 5
    top_k: int = 3
    bundle_family: str = "linear"
    n_jobs: Optional[int] = None


@dataclass
class Prepared:
    raw: Dataset
    data: Dataset  # outliers removed, normalized with training statistics
    split: SplitIndices
    stats: NormStats
    seeds: dict[str, int]
    source: str

    @property
    def train(self) -> Dataset:
        return self.data.take(self.split.train)

    @property
    def development(self) -> Dataset:
        """Training plus validation rows; everything except the test set."""
        return self.data.take(np.sort(np.concatenate([self.split.train, self.split.validation])))


def prepare(seed: int, input: Optional[Path] = None, generator: Optional[GeneratorConfig] = None) -> Prepared:
    seeds = derive_seeds(seed)
    if input is not None:
        raw = load_csv(input)
        source = str(input)
    else:
        cfg = generator or GeneratorConfig(seed=seeds["data"])
        raw = generate(cfg)
        source = f"synthetic(seed={cfg.seed}, n_rows={cfg.n_rows})"
    clean = drop_flagged_outliers(raw)
    split = split_dataset(clean.n_rows, seeds["split"])
    stats = zscore_fit(clean, split.train)
    return Prepared(raw, zscore_apply(clean, stats), split, stats, seeds, source)


def tree_params(cp: float) -> dict:
    return {"cp": cp}


def forest_params(n_trees: int, mtry: Optional[int]) -> dict:
    return {"n_trees": n_trees, "mtry": mtry}


def model_spec(family: str, prep: Prepared, n_trees=100, mtry=None, cp=0.01) -> ModelSpec:
    if family == "linear":
        return ModelSpec("linear", {}, prep.seeds["model"])
    if family == "tree":
        return ModelSpec("tree", tree_params(cp), prep.seeds["model"])
    return ModelSpec("forest", forest_params(n_trees, mtry), prep.seeds["model"])


def rf_importance(prep: Prepared, n_trees=100, mtry=None, n_jobs=None) -> ImportanceReport:
    train = prep.train
    forest = fit_forest(train, train.target,
                        ForestParams(n_trees=n_trees, mtry=mtry, seed=prep.seeds["forest"]), n_jobs=n_jobs)
    return permutation_importance(forest, train, train.target, prep.seeds["permutation"], n_jobs=n_jobs)


def importance_ranking(report: ImportanceReport) -> FeatureRanking:
    return rank_features(report.normalized, "rf_permutation")


def pruned_tree(prep: Prepared, cp: float, features=FEATURES):
    train = prep.train
    params = GrowParams(cp=cp)
    return prune_tree(grow_tree(np.arange(train.n_rows), train.select(features), train.target, params), cp)


def format_test_results(rows: list[tuple[str, list[str], object]]) -> str:
    lines = ["method,features,rmse,mae,corr,n"]
    for family, feats, m in rows:
        f = m.formatted()
        lines.append(f'{family},"{",".join(feats)}",{f["rmse"]},{f["mae"]},{f["corr"]},{m.n}')
    return "\n".join(lines) + "\n"


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, DataError):
        return 3
    if isinstance(exc, ModelError):
        return 4
    if isinstance(exc, ValueError):
        return 2
    return 1


@dataclass
class PipelineResult:
    status: int
    files: list[Path] = field(default_factory=list)
    manifest: dict = field(default_factory=dict)


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Run every stage and write its artifacts under ``config.out_dir``.

    A failing stage stops the run; files already written are kept and the
    manifest records which stage failed.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = PipelineResult(0)
    manifest = {
        "master_seed": config.seed,
        "seeds": derive_seeds(config.seed),
        "config": {
            "input": None if config.input is None else str(config.input),
            "generator": None if config.generator is None else config.generator.to_dict(),
            "n_trees": config.n_trees, "mtry": config.mtry, "cp": config.cp, "bins": config.bins,
            "top_k": config.top_k, "bundle_family": config.bundle_family,
        },
        "stages": [],
        "files": [],
        "status": "running",
    }
    result.manifest = manifest

    def write(name: str, text: str):
        path = out / name
        path.write_text(text, encoding="utf-8")
        result.files.append(path)
        manifest["files"].append(name)

    stage = "setup"
    t_start = time.perf_counter()
    try:
        stage = "load"
        prep = prepare(config.seed, config.input, config.generator)
        manifest["data"] = {
            "source": prep.source,
            "rows": prep.raw.n_rows,
            "outliers_removed": prep.raw.n_rows - prep.data.n_rows,
            "train": int(prep.split.train.size),
            "validation": int(prep.split.validation.size),
            "test": int(prep.split.test.size),
            "degenerate_columns": prep.stats.degenerate_columns,
        }
        if config.input is None:
            manifest["data"]["generator"] = (config.generator or GeneratorConfig(seed=prep.seeds["data"])).to_dict()
        manifest["stages"].append(stage)

        stage = "importance"
        report = rf_importance(prep, config.n_trees, config.mtry, config.n_jobs)
        ranking = importance_ranking(report)
        write("importance.csv", report.to_csv())
        write("importance.json", report.to_json())
        manifest["ranking"] = ranking.features
        manifest["stages"].append(stage)

        stage = "correlation"
        dev = prep.development
        write("corrmatrix.csv", correlation_matrix(dev).to_csv())
        filters = filter_rankings(dev, config.bins)
        write("filters.csv", rankings_csv([*filters.values(), ranking]))
        manifest["stages"].append(stage)

        stage = "selection"
        bundle_models = None
        for family in FAMILIES:
            spec = model_spec(family, prep, config.n_trees, config.mtry, config.cp)
            keep = family == config.bundle_family
            sel = forward_selection(prep.data, prep.split, ranking, spec, config.n_jobs, keep_models=keep)
            write(f"selection_{family}.csv", sel.to_csv())
            if keep:
                bundle_models = (spec, sel.models())
        manifest["stages"].append(stage)

        stage = "evaluation"
        top = ranking.top(config.top_k)
        full = list(prep.data.columns)
        rows = []
        for family in FAMILIES:
            spec = model_spec(family, prep, config.n_trees, config.mtry, config.cp)
            for feats in (top, full):
                rows.append((family, feats, evaluate_on_test(prep.data, prep.split, feats, spec, config.n_jobs)))
        write("test_results.csv", format_test_results(rows))
        manifest["stages"].append(stage)

        stage = "export"
        write("tree.dot", export_dot(pruned_tree(prep, config.cp, full)))
        if bundle_models is not None:
            spec, models = bundle_models
            path = out / f"model_{spec.family}.json"
            save_model(ModelBundle(spec, tuple(ranking.features), prep.stats, models), path)
            result.files.append(path)
            manifest["files"].append(path.name)
        manifest["stages"].append(stage)
        manifest["status"] = "ok"
    except Exception as exc:  # noqa: BLE001 - recorded in the manifest, mapped to an exit code
        log.error("stage %s failed: %s", stage, exc)
        manifest["status"] = "failed"
        manifest["failed_stage"] = stage
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        result.status = exit_code(exc)
    manifest["elapsed_seconds"] = round(time.perf_counter() - t_start, 3)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    result.files.append(out / "manifest.json")
    return result
