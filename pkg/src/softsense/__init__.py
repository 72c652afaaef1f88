"""Soft-sensor toolkit: predict a process-quality value from plant variables and rank
which variables matter."""

from .dataio import FEATURES, Dataset, load_csv
from .forest import ForestParams, fit_forest, permutation_importance
from .linreg import fit_ols
from .cart import GrowParams, grow_tree, prune_tree
from .synth import GeneratorConfig, generate

__all__ = [
    "FEATURES", "Dataset", "load_csv", "ForestParams", "fit_forest", "permutation_importance",
    "fit_ols", "GrowParams", "grow_tree", "prune_tree", "GeneratorConfig", "generate",
]
__version__ = "0.1.0"
