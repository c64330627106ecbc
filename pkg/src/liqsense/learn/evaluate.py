"""K-fold evaluation and classification metrics.

Folds are stratified by class.  For patch datasets the default is
region-stratified: all frames of one physical drop stay in the same
fold, so a classifier never sees its test drops during training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cnn import CnnConfig, TrainConfig, train_cnn
from .dataset import PatchDataset
from .forest import ForestModel, train_forest


@dataclass(frozen=True)
class EvalReport:
    classes: tuple
    accuracy: float
    precision: dict
    recall: dict
    confusion: np.ndarray  # rows = true class, cols = predicted
    folds: tuple = ()

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "accuracy": self.accuracy,
            "precision": dict(self.precision),
            "recall": dict(self.recall),
            "confusion": self.confusion.tolist(),
            "folds": [dict(f) for f in self.folds],
        }


def metrics(predictions, labels, classes=None, folds=()) -> EvalReport:
    """Standard accuracy / per-class precision and recall / confusion.

    precision = TP/(TP+FP), recall = TP/(TP+FN); a class never
    predicted gets precision 0 by convention.
    """
    predictions = list(predictions)
    labels = list(labels)
    if not predictions or len(predictions) != len(labels):
        raise ValueError("need equal-length, nonempty prediction and label lists")
    if classes is None:
        classes = tuple(sorted(set(labels) | set(predictions)))
    classes = tuple(classes)
    index = {c: i for i, c in enumerate(classes)}
    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for pred, true in zip(predictions, labels):
        confusion[index[true], index[pred]] += 1
    accuracy = float(np.trace(confusion)) / len(labels)
    precision, recall = {}, {}
    for c, i in index.items():
        tp = confusion[i, i]
        predicted = confusion[:, i].sum()
        actual = confusion[i, :].sum()
        precision[c] = float(tp / predicted) if predicted else 0.0
        recall[c] = float(tp / actual) if actual else 0.0
    return EvalReport(
        classes=classes,
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        confusion=confusion,
        folds=tuple(folds),
    )


def stratified_fold_assignment(y, k: int, rng, groups=None) -> np.ndarray:
    """Fold index per sample, class-stratified.

    With ``groups`` (e.g. region ids), whole groups are assigned to
    folds and stratification happens at the group level.
    """
    y = np.asarray(y)
    n = len(y)
    assignment = np.empty(n, dtype=np.int64)
    if groups is None:
        units = np.arange(n)
        unit_labels = y
    else:
        groups = np.asarray(groups)
        units, first = np.unique(groups, return_index=True)
        unit_labels = y[first]
        for g, label in zip(units, unit_labels):
            members = y[groups == g]
            if not np.all(members == label):
                raise ValueError(f"group {g} mixes classes; cannot stratify by group")
    unit_fold = {}
    for label in np.unique(unit_labels):
        members = units[unit_labels == label]
        if len(members) < k:
            kind = "samples" if groups is None else "regions"
            raise ValueError(f"class {label!r} has {len(members)} {kind}, fewer than k={k}")
        members = rng.permutation(members)
        for j, unit in enumerate(members):
            unit_fold[unit] = j % k
    if groups is None:
        for unit, fold in unit_fold.items():
            assignment[unit] = fold
    else:
        for i, g in enumerate(groups):
            assignment[i] = unit_fold[g]
    return assignment


def _kfold_run(x, y, classes, k, fold_of, fit_predict):
    predictions = np.full(len(y), -1, dtype=np.int64)
    fold_summaries = []
    for fold in range(k):
        test = fold_of == fold
        train = ~test
        pred = fit_predict(fold, x[train], y[train], x[test])
        predictions[test] = pred
        fold_summaries.append(
            {
                "fold": fold,
                "n_test": int(test.sum()),
                "accuracy": float((pred == y[test]).mean()),
            }
        )
    assert not np.any(predictions < 0), "every sample must be predicted exactly once"
    return metrics(
        [classes[i] for i in predictions],
        [classes[i] for i in y],
        classes=classes,
        folds=fold_summaries,
    )


def kfold_evaluate(
    dataset: PatchDataset,
    cnn_config: CnnConfig,
    train_config: TrainConfig,
    k: int | None = None,
    region_stratified: bool = True,
) -> EvalReport:
    """Cross-validated CNN evaluation; aggregates held-out predictions only."""
    k = train_config.folds if k is None else k
    x, y, regions = dataset.to_arrays()
    rng = np.random.default_rng(train_config.seed)
    fold_of = stratified_fold_assignment(
        y, k, rng, groups=regions if region_stratified else None
    )

    def fit_predict(fold, x_train, y_train, x_test):
        fold_config = TrainConfig(
            epochs=train_config.epochs,
            batch_size=train_config.batch_size,
            learning_rate=train_config.learning_rate,
            scheduler_factor=train_config.scheduler_factor,
            scheduler_patience=train_config.scheduler_patience,
            folds=train_config.folds,
            frames_per_region=train_config.frames_per_region,
            seed=train_config.seed + 1000 * (fold + 1),
        )
        model = train_cnn(x_train, y_train, dataset.classes, cnn_config, fold_config)
        return model.predict(x_test)

    return _kfold_run(x, y, dataset.classes, k, fold_of, fit_predict)


def kfold_evaluate_forest(
    data, k: int = 5, trees: int = 100, depth: int = 6, seed: int = 0
) -> EvalReport:
    """Cross-validated forest evaluation on (features, label) pairs."""
    from .forest import featurize

    data = list(data)
    x = np.stack([featurize(item) for item, _ in data])
    labels = [label for _, label in data]
    classes = tuple(sorted(set(labels)))
    y = np.array([classes.index(label) for label in labels], dtype=np.int64)
    rng = np.random.default_rng(seed)
    fold_of = stratified_fold_assignment(y, k, rng)

    def fit_predict(fold, x_train, y_train, x_test):
        pairs = [(row, classes[label]) for row, label in zip(x_train, y_train)]
        model: ForestModel = train_forest(pairs, trees=trees, depth=depth, seed=seed + fold)
        return np.array([classes.index(lbl) for lbl in model.predict_labels(x_test)])

    return _kfold_run(x, y, classes, k, fold_of, fit_predict)
