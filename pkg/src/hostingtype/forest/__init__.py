"""From-scratch CART trees, random forests and their evaluation."""

from .dataset import Dataset
from .ensemble import ForestModel, ForestParams, predict, predict_proba, ranked_importances, train_forest
from .evaluation import (
    Confusion,
    EvalReport,
    KFoldResult,
    RocPoint,
    auc,
    evaluate,
    kfold_eval,
    metrics,
    roc_curve,
    stratified_folds,
)
from .persistence import FORMAT_VERSION, load_model, model_digest, model_to_json, save_model
from .tree import Leaf, Split, TreeNode, TreeParams, best_split, gini, train_tree

__all__ = [
    "Confusion",
    "Dataset",
    "EvalReport",
    "FORMAT_VERSION",
    "ForestModel",
    "ForestParams",
    "KFoldResult",
    "Leaf",
    "RocPoint",
    "Split",
    "TreeNode",
    "TreeParams",
    "auc",
    "best_split",
    "evaluate",
    "gini",
    "kfold_eval",
    "load_model",
    "metrics",
    "model_digest",
    "model_to_json",
    "predict",
    "predict_proba",
    "ranked_importances",
    "roc_curve",
    "save_model",
    "stratified_folds",
    "train_forest",
    "train_tree",
]
