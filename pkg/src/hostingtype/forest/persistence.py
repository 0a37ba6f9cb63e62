"""Model files: versioned JSON with nested tree nodes."""

from __future__ import annotations

import hashlib
import json
from typing import Optional, Sequence

from ..errors import CorruptModelError, ModelVersionError, SchemaMismatchError
from .ensemble import ForestModel, ForestParams
from .tree import Leaf, Split, TreeNode

FORMAT_VERSION = 1


def node_to_obj(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {"counts": list(node.counts)}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": node_to_obj(node.left),
        "right": node_to_obj(node.right),
    }


def node_from_obj(obj: dict, n_features: int, n_labels: int) -> TreeNode:
    if "counts" in obj:
        counts = tuple(int(c) for c in obj["counts"])
        if len(counts) != n_labels or min(counts) < 0 or sum(counts) < 1:
            raise CorruptModelError(f"bad leaf counts {counts}")
        return Leaf(counts)
    feature = obj["feature"]
    if not isinstance(feature, int) or not 0 <= feature < n_features:
        raise SchemaMismatchError(f"split feature {feature!r} outside schema of width {n_features}")
    return Split(
        feature,
        float(obj["threshold"]),
        node_from_obj(obj["left"], n_features, n_labels),
        node_from_obj(obj["right"], n_features, n_labels),
    )


def model_to_json(model: ForestModel) -> str:
    obj = {
        "format_version": FORMAT_VERSION,
        "stage": model.stage,
        "schema": list(model.schema),
        "labels": list(model.labels),
        "params": model.params.to_dict(),
        "trees": [node_to_obj(t) for t in model.trees],
        "importances": list(model.importances),
        "oob_error": model.oob_error,
        "oob_coverage": model.oob_coverage,
    }
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def model_digest(model: ForestModel) -> str:
    return hashlib.sha256(model_to_json(model).encode()).hexdigest()


def save_model(model: ForestModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model))
        fh.write("\n")


def model_from_json(text: str, expected_schema: Optional[Sequence[str]] = None) -> ForestModel:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptModelError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict) or "format_version" not in obj:
        raise CorruptModelError("model file lacks a format_version field")
    version = obj["format_version"]
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"model format version {version!r} is not supported (expected {FORMAT_VERSION})")
    try:
        schema = tuple(obj["schema"])
        labels = tuple(obj["labels"])
        if expected_schema is not None and tuple(expected_schema) != schema:
            raise SchemaMismatchError(f"model schema {list(schema)} differs from expected {list(expected_schema)}")
        importances = tuple(float(v) for v in obj["importances"])
        if len(importances) != len(schema):
            raise SchemaMismatchError("importances do not match schema length")
        trees = tuple(node_from_obj(t, len(schema), len(labels)) for t in obj["trees"])
        if not trees:
            raise CorruptModelError("model has no trees")
        params = ForestParams(**obj["params"])
        return ForestModel(
            trees=trees,
            schema=schema,
            labels=labels,
            params=params,
            importances=importances,
            stage=obj.get("stage"),
            oob_error=obj.get("oob_error"),
            oob_coverage=obj.get("oob_coverage"),
        )
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise CorruptModelError(f"malformed model file: {type(exc).__name__}: {exc}") from exc


def load_model(path, expected_schema: Optional[Sequence[str]] = None) -> ForestModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_json(fh.read(), expected_schema)
