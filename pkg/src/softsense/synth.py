"""Synthetic sulphonation-like process data.

Features come from a linear-Gaussian latent-factor model: each entry of
``cross_correlations`` adds one shared standard-normal factor, loaded on two
features, and every feature tops up its variance with its own noise. Columns
are standardized, NT is a linear combination plus one interaction term and
Gaussian noise, and a few rows receive a single +/-8 sd spike to act as
flagged outliers.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataio import FEATURES, Dataset

DEFAULT_COEFFICIENTS = {
    "A": -0.9, "B": 1.6, "C": 0.0, "D": 0.2,
    "E": 0.2, "F": 0.2, "G": 0.3, "H": -0.7,
}
DEFAULT_CROSS = (("A", "H", 0.8), ("B", "D", 0.4))
SPIKE = 8.0


@dataclass(frozen=True)
class GeneratorConfig:
    n_rows: int = 14252
    coefficients: dict = field(default_factory=lambda: dict(DEFAULT_COEFFICIENTS))
    cross_correlations: tuple = DEFAULT_CROSS
    interaction: float = 0.9  # weight of max(0, A) * B
    noise_sd: float = 0.4
    outlier_count: int = 23
    seed: int = 0

    def validate(self) -> None:
        if self.n_rows < 2:
            raise ValueError("n_rows must be at least 2")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")
        if not 0 <= self.outlier_count < self.n_rows:
            raise ValueError("outlier_count must be in [0, n_rows)")
        unknown = set(self.coefficients) - set(FEATURES)
        if unknown:
            raise ValueError(f"unknown features in coefficients: {sorted(unknown)}")
        load = dict.fromkeys(FEATURES, 0.0)
        for a, b, w in self.cross_correlations:
            if a not in load or b not in load or a == b:
                raise ValueError(f"bad cross-correlation pair ({a}, {b})")
            load[a] += w * w
            load[b] += w * w
        over = [f for f, v in load.items() if v >= 1.0]
        if over:
            raise ValueError(f"squared loadings sum to >= 1 for {over}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cross_correlations"] = [list(c) for c in self.cross_correlations]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        d = dict(d)
        if "cross_correlations" in d:
            d["cross_correlations"] = tuple(tuple(c) for c in d["cross_correlations"])
        if "coefficients" in d:
            d["coefficients"] = {**dict.fromkeys(FEATURES, 0.0), **d["coefficients"]}
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "GeneratorConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def generate(config: GeneratorConfig = GeneratorConfig()) -> Dataset:
    config.validate()
    n = config.n_rows
    rng = np.random.Generator(np.random.PCG64(config.seed))
    own = rng.standard_normal((n, len(FEATURES)))
    shared = rng.standard_normal((n, len(config.cross_correlations)))

    X = np.zeros((n, len(FEATURES)))
    load_sq = np.zeros(len(FEATURES))
    for k, (a, b, w) in enumerate(config.cross_correlations):
        for f in (a, b):
            j = FEATURES.index(f)
            X[:, j] += w * shared[:, k]
            load_sq[j] += w * w
    X += own * np.sqrt(1.0 - load_sq)
    X = (X - X.mean(axis=0)) / X.std(axis=0, ddof=1)

    coef = np.array([config.coefficients.get(f, 0.0) for f in FEATURES])
    a = X[:, FEATURES.index("A")]
    b = X[:, FEATURES.index("B")]
    nt = X @ coef + config.interaction * np.maximum(0.0, a) * b
    nt = nt + config.noise_sd * rng.standard_normal(n)

    flags = np.zeros(n, dtype=bool)
    if config.outlier_count:
        rows = rng.choice(n, size=config.outlier_count, replace=False)
        cols = rng.integers(0, len(FEATURES), size=config.outlier_count)
        signs = rng.choice(np.array([-1.0, 1.0]), size=config.outlier_count)
        X[rows, cols] = signs * SPIKE
        flags[rows] = True
    return Dataset({f: X[:, j].copy() for j, f in enumerate(FEATURES)}, nt, flags)
