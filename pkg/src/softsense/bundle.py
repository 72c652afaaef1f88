"""Versioned, digest-checked JSON persistence for trained soft-sensor models.

A bundle holds one model per nested prefix of a feature ranking plus the
normalization fitted on the training rows, so a loaded bundle can serve raw
process values even when some sensors are unavailable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np

from .cart import Tree
from .dataio import TARGET, NormStats
from .errors import BundleCorruptError, BundleVersionError, MissingFeatureError
from .forest import Forest
from .linreg import LinearModel
from .selection import ModelSpec, choose_subset

FORMAT_VERSION = 1
SUPPORTED_VERSIONS = (1,)

_LOADERS = {"linear": LinearModel, "tree": Tree, "forest": Forest}


@dataclass
class ModelBundle:
    spec: ModelSpec
    features: tuple[str, ...]
    normalization: NormStats
    models: dict[tuple[str, ...], Any]
    format_version: int = FORMAT_VERSION

    def route(self, available: Optional[Iterable[str]] = None) -> tuple[str, ...]:
        available = self.features if available is None else available
        return choose_subset(self.models.keys(), available)

    def predict(self, columns, available: Optional[Iterable[str]] = None) -> tuple[np.ndarray, tuple[str, ...]]:
        """Predict NT in original units from raw feature columns.

        Returns the predictions and the feature subset whose model served them.
        """
        subset = self.route(available)
        scaled = {}
        for f in subset:
            if f not in columns:
                raise MissingFeatureError(f)
            scaled[f] = self.normalization.transform(f, columns[f])
        pred = self.models[subset].predict(scaled)
        return self.normalization.inverse(TARGET, pred), subset

    def _body(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "features": list(self.features),
            "normalization": self.normalization.to_dict(),
            "payload": [
                {"subset": list(k), "model": m.to_dict()}
                for k, m in sorted(self.models.items(), key=lambda kv: len(kv[0]))
            ],
        }


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _digest(body: dict) -> str:
    return "sha256:" + hashlib.sha256(_canonical(body).encode()).hexdigest()


def save_model(bundle: ModelBundle, path) -> None:
    body = bundle._body()
    doc = {"format_version": bundle.format_version, "digest": _digest(body), "body": body}
    Path(path).write_text(_canonical(doc))


def load_model(path) -> ModelBundle:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BundleCorruptError(f"{path}: not a complete model bundle ({exc.msg})") from None
    if not isinstance(doc, dict) or not {"format_version", "digest", "body"} <= doc.keys():
        raise BundleCorruptError(f"{path}: missing bundle fields")
    version = doc["format_version"]
    if version not in SUPPORTED_VERSIONS:
        raise BundleVersionError(
            f"{path}: bundle format_version {version!r} is not supported "
            f"(supported: {', '.join(map(str, SUPPORTED_VERSIONS))})"
        )
    body = doc["body"]
    if _digest(body) != doc["digest"]:
        raise BundleCorruptError(f"{path}: digest mismatch; the file was modified or damaged")
    try:
        spec = ModelSpec.from_dict(body["spec"])
        loader = _LOADERS[spec.family]
        models = {tuple(e["subset"]): loader.from_dict(e["model"]) for e in body["payload"]}
        return ModelBundle(spec, tuple(body["features"]), NormStats.from_dict(body["normalization"]),
                           models, version)
    except (KeyError, TypeError, ValueError) as exc:
        raise BundleCorruptError(f"{path}: malformed bundle body ({exc})") from None
