"""Random forest over the three through-container rim statistics.

Bagged axis-aligned decision trees on small feature vectors
(positive mean, median, 75th percentile).  Each node draws a single
random feature and picks the best Gini split on it; thresholds are
actual training values with an x <= t rule, so predictions depend only
on order comparisons against training data and survive any strictly
monotone per-feature rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..detection import ContainerFeatures


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return 1.0 - float((p**2).sum())


def _majority(y: np.ndarray, n_classes: int) -> int:
    counts = np.bincount(y, minlength=n_classes)
    return int(counts.argmax())  # ties go to the smallest class id


def _build_tree(x, y, depth, max_depth, n_classes, rng):
    if depth >= max_depth or len(np.unique(y)) == 1 or len(y) < 2:
        return {"leaf": _majority(y, n_classes)}
    feature = int(rng.integers(x.shape[1]))
    values = np.unique(x[:, feature])
    if len(values) < 2:
        return {"leaf": _majority(y, n_classes)}
    best = None
    parent = _gini(np.bincount(y, minlength=n_classes))
    for threshold in values[:-1]:
        mask = x[:, feature] <= threshold
        left = np.bincount(y[mask], minlength=n_classes)
        right = np.bincount(y[~mask], minlength=n_classes)
        score = (mask.sum() * _gini(left) + (~mask).sum() * _gini(right)) / len(y)
        if best is None or score < best[0]:
            best = (score, float(threshold), mask)
    score, threshold, mask = best
    if score >= parent:  # no impurity reduction on this feature
        return {"leaf": _majority(y, n_classes)}
    return {
        "feature": feature,
        "threshold": threshold,
        "left": _build_tree(x[mask], y[mask], depth + 1, max_depth, n_classes, rng),
        "right": _build_tree(x[~mask], y[~mask], depth + 1, max_depth, n_classes, rng),
    }


def _tree_predict(tree: dict, row: np.ndarray) -> int:
    while "leaf" not in tree:
        tree = tree["left"] if row[tree["feature"]] <= tree["threshold"] else tree["right"]
    return tree["leaf"]


@dataclass(frozen=True)
class ForestModel:
    trees: tuple
    classes: tuple
    n_features: int

    def predict(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x.shape[1]}")
        votes = np.zeros((len(x), len(self.classes)), dtype=np.int64)
        for tree in self.trees:
            for i, row in enumerate(x):
                votes[i, _tree_predict(tree, row)] += 1
        return votes.argmax(axis=1)

    def predict_labels(self, x):
        return [self.classes[i] for i in self.predict(x)]

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "kind": "forest",
            "classes": list(self.classes),
            "n_features": self.n_features,
            "trees": list(self.trees),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        if d.get("kind") != "forest" or d.get("format_version") != 1:
            raise ValueError("not a version-1 forest model")
        return cls(
            trees=tuple(d["trees"]),
            classes=tuple(d["classes"]),
            n_features=int(d["n_features"]),
        )


def featurize(item) -> np.ndarray:
    """Accept ContainerFeatures or a ready-made feature vector."""
    if isinstance(item, ContainerFeatures):
        return item.vector()
    return np.asarray(item, dtype=np.float64)


def train_forest(data, trees: int = 100, depth: int = 6, seed: int = 0) -> ForestModel:
    """Fit a bagged forest on (features, label) pairs.

    data items are (ContainerFeatures | feature vector, label).
    Deterministic for a fixed seed.
    """
    data = list(data)
    if not data:
        raise ValueError("no training data")
    x = np.stack([featurize(item) for item, _ in data])
    labels = [label for _, label in data]
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise ValueError("degenerate input: need at least 2 classes")
    y = np.array([classes.index(label) for label in labels], dtype=np.int64)
    rng = np.random.default_rng(seed)
    grown = []
    for _ in range(trees):
        boot = rng.integers(len(x), size=len(x))
        grown.append(_build_tree(x[boot], y[boot], 0, depth, len(classes), rng))
    return ForestModel(trees=tuple(grown), classes=classes, n_features=x.shape[1])
