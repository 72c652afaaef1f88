"""Multi-seed experiment on the synthetic generator.

Each seed runs the same protocol as ``run``: forest importance on the
training rows, filter rankings on the development rows, a linear sweep over a
fixed A, B, H, ... order, and test-set scores for every model family.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Optional

from .cart import used_features
from .dataio import FEATURES
from .importance import FILTERS, filter_rankings, rank_features
from .pipeline import importance_ranking, model_spec, prepare, pruned_tree, rf_importance
from .selection import FAMILIES, evaluate_on_test, forward_selection
from .synth import GeneratorConfig

SWEEP_ORDER = ("A", "B", "H", "G", "C", "D", "E", "F")
PLANTED = ("A", "B", "H")


@dataclass
class SeedOutcome:
    seed: int
    rf_ranking: list[str]
    filter_last: dict[str, str]
    filter_top3: dict[str, list[str]]
    linear_rmse_a: float
    linear_rmse_ab: float
    test_rmse: dict[str, float]  # family -> test RMSE with the forest's top-3 features
    forest_planted_rmse: float
    forest_all_rmse: float
    tree_features: list[str]
    seconds: float = field(default=0.0)

    @property
    def drop(self) -> float:
        return 1.0 - self.linear_rmse_ab / self.linear_rmse_a

    @property
    def planted_gap(self) -> float:
        """Relative RMSE gap of the forest on A, B, H against the forest on all features."""
        return abs(self.forest_planted_rmse - self.forest_all_rmse) / self.forest_all_rmse

    def to_dict(self) -> dict:
        d = asdict(self)
        d["drop"] = self.drop
        d["planted_gap"] = self.planted_gap
        return d


def run_seed(seed: int, n_trees: int = 100, cp: float = 0.01, generator: Optional[GeneratorConfig] = None,
             n_jobs: Optional[int] = None) -> SeedOutcome:
    t0 = time.perf_counter()
    prep = prepare(seed, generator=generator)
    ranking = importance_ranking(rf_importance(prep, n_trees, n_jobs=n_jobs))
    filters = filter_rankings(prep.development)

    sweep = rank_features({f: float(len(SWEEP_ORDER) - i) for i, f in enumerate(SWEEP_ORDER)}, "rf_permutation")
    linear = model_spec("linear", prep)
    rows = forward_selection(prep.data, prep.split, sweep, linear).rows

    top3 = ranking.top(3)
    test = {
        fam: evaluate_on_test(prep.data, prep.split, top3, model_spec(fam, prep, n_trees, cp=cp), n_jobs).rmse
        for fam in FAMILIES
    }
    forest = model_spec("forest", prep, n_trees)
    planted = evaluate_on_test(prep.data, prep.split, list(PLANTED), forest, n_jobs).rmse
    full = evaluate_on_test(prep.data, prep.split, list(FEATURES), forest, n_jobs).rmse
    tree = pruned_tree(prep, cp, list(FEATURES))

    return SeedOutcome(
        seed=seed,
        rf_ranking=ranking.features,
        filter_last={m: filters[m].features[-1] for m in FILTERS},
        filter_top3={m: filters[m].top(3) for m in FILTERS},
        linear_rmse_a=rows[0].metrics.rmse,
        linear_rmse_ab=rows[1].metrics.rmse,
        test_rmse=test,
        forest_planted_rmse=planted,
        forest_all_rmse=full,
        tree_features=sorted(used_features(tree)),
        seconds=time.perf_counter() - t0,
    )
