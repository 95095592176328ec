"""Training, cross-validation and persistence of the four-classifier ensemble.

The evaluation protocol is subject-grouped and stratified end to end: the
outer k folds group whole subjects, and inside every training portion a
grouped 80/20 split measures per-classifier accuracy to derive vote weights
(and, optionally, to pick hyper-parameters from a small documented grid).
Classifiers are then refit on the full training portion before scoring the
held-out fold, so no held-out information ever reaches a fitted parameter.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import asdict, dataclass, replace

import numpy as np

from .dataset_io import (
    Dataset,
    ScalerParams,
    apply_scaler,
    dataset_fingerprint,
    fit_scaler,
    grouped_folds,
)
from .ensemble_voting import (
    CLASSIFIER_NAMES,
    ClassifierWeights,
    Prediction,
    compute_weights,
    hard_vote,
)
from .errors import EmptyEvaluation, SchemaViolation, UnsupportedVersion
from .gbdt_core import (
    BaggedModel,
    BaggingParams,
    BoostedModel,
    DecisionTree,
    Node,
    TreeParams,
    fit_bagging,
    fit_boosted,
)
FORMAT_VERSION = 1
MODEL_FILE_SUFFIX = ".pdadsv.json"

# hyper-parameter grid searched on inner splits only (boosting modes)
DEFAULT_GRID = tuple(
    {"max_depth": d, "learning_rate": lr, "n_rounds": r}
    for d in (3, 4, 6) for lr in (0.05, 0.1) for r in (100, 200)
)

INNER_SPLIT_FOLDS = 5  # grouped 80/20: one of five subject folds held out


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @classmethod
    def from_labels(cls, y_true, y_pred) -> "ConfusionMatrix":
        y_true = np.asarray(y_true, dtype=int)
        y_pred = np.asarray(y_pred, dtype=int)
        return cls(tp=int(np.sum((y_true == 1) & (y_pred == 1))),
                   tn=int(np.sum((y_true == 0) & (y_pred == 0))),
                   fp=int(np.sum((y_true == 0) & (y_pred == 1))),
                   fn=int(np.sum((y_true == 1) & (y_pred == 0))))


def metrics(cm: ConfusionMatrix) -> dict:
    """Standard binary metrics; any zero denominator yields 0.0 so reports
    stay numeric."""
    if cm.total == 0:
        raise EmptyEvaluation("confusion matrix is empty")

    def ratio(num, den):
        return num / den if den > 0 else 0.0

    tp, tn, fp, fn = cm.tp, cm.tn, cm.fp, cm.fn
    precision = ratio(tp, tp + fp)
    sensitivity = ratio(tp, tp + fn)
    mcc_den = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    return {
        "accuracy": ratio(tp + tn, cm.total),
        "sensitivity": sensitivity,
        "specificity": ratio(tn, tn + fp),
        "precision": precision,
        "f1": ratio(2 * precision * sensitivity, precision + sensitivity)
              if (precision + sensitivity) > 0 else 0.0,
        "mcc": (tp * tn - fp * fn) / mcc_den if mcc_den > 0 else 0.0,
    }


# --------------------------------------------------------------------------
# ensemble bundle
# --------------------------------------------------------------------------

@dataclass
class EnsembleModel:
    """The deployable artifact: scaler, four classifiers, vote weights."""

    scaler: ScalerParams
    classifiers: dict                 # name -> model, in CLASSIFIER_NAMES order
    weights: ClassifierWeights
    feature_names: list
    metadata: dict
    format_version: int = FORMAT_VERSION

    def predict(self, features) -> Prediction:
        x = apply_scaler(np.asarray(features, dtype=float), self.scaler)
        votes, probs = [], []
        for name in CLASSIFIER_NAMES:
            model = self.classifiers[name]
            votes.append(model.predict_label(x))
            probs.append(model.predict_proba(x))
        return hard_vote(votes, self.weights, probs)


def _fit_four(x_train, y_train, tree_params_by_name, bagging_params):
    out = {}
    for name in CLASSIFIER_NAMES:
        if name == "bagging":
            out[name] = fit_bagging(x_train, y_train, bagging_params)
        else:
            out[name] = fit_boosted(x_train, y_train, tree_params_by_name[name], name)
    return out


def _inner_split(ds: Dataset, seed: int):
    """Grouped 80/20 split of a training portion: last of five subject folds
    is the validation side."""
    n_subjects = len(ds.subjects())
    k = min(INNER_SPLIT_FOLDS, n_subjects)
    folds = grouped_folds(ds, k, seed)
    val_idx = folds[0]
    train_idx = np.sort(np.concatenate(folds[1:]))
    return train_idx, val_idx


def _accuracy(model, X, y) -> float:
    return float(np.mean(model.predict_label_matrix(X) == y))


def _select_params(x_inner_train, y_inner_train, x_val, y_val,
                   base_params: TreeParams, grid):
    """Per-classifier grid selection on the inner split.

    Combos differing only in n_rounds share one fit: boosting is stagewise, so
    the shorter model is a prefix of the longer one and both are scored from a
    single staged pass. Ties keep the earliest combo in grid order. Bagging
    has no grid; its inner accuracy is measured at the fixed parameters.
    """
    groups = {}  # non-rounds key -> [(grid position, combo)]
    for pos, combo in enumerate(grid):
        key = tuple(sorted((k, v) for k, v in combo.items() if k != "n_rounds"))
        groups.setdefault(key, []).append((pos, combo))

    chosen, accuracies, combos = {}, {}, {}
    for name in CLASSIFIER_NAMES[:3]:
        best = None  # (acc, -position) maximized
        for members in groups.values():
            rounds = [c.get("n_rounds", base_params.n_rounds) for _, c in members]
            longest = replace(base_params, **members[int(np.argmax(rounds))][1])
            model = fit_boosted(x_inner_train, y_inner_train, longest, name)
            staged = model.staged_label_matrix(x_val, rounds)
            for (pos, combo), r in zip(members, rounds):
                acc = float(np.mean(staged[r] == y_val))
                if best is None or acc > best[0] or (acc == best[0] and pos < best[1]):
                    best = (acc, pos, replace(base_params, **combo), combo)
        accuracies[name] = best[0]
        chosen[name] = best[2]
        combos[name] = best[3]
    return chosen, accuracies, combos


def _weights_from_inner(train_ds, scaler, tree_params, bagging_params, seed, grid):
    """Inner-split accuracies per classifier, plus grid-selected params."""
    labels = train_ds.labels()
    subj_labels = {r.subject_id: r.label for r in train_ds.records}
    class_counts = [sum(1 for v in subj_labels.values() if v == c) for c in (0, 1)]
    if min(class_counts) < 2:
        warnings.warn("too few subjects per class for an inner split; "
                      "using uniform vote weights", stacklevel=2)
        params = {name: tree_params for name in CLASSIFIER_NAMES[:3]}
        return params, {n: 0.0 for n in CLASSIFIER_NAMES}, {}, compute_weights([0] * 4)

    inner_train_idx, inner_val_idx = _inner_split(train_ds, seed)
    x_all = np.array([apply_scaler(r.features, scaler) for r in train_ds.records])
    x_tr, y_tr = x_all[inner_train_idx], labels[inner_train_idx]
    x_va, y_va = x_all[inner_val_idx], labels[inner_val_idx]

    if grid:
        params, accs, combos = _select_params(x_tr, y_tr, x_va, y_va,
                                              tree_params, grid)
    else:
        params = {name: tree_params for name in CLASSIFIER_NAMES[:3]}
        combos = {}
        accs = {}
        for name in CLASSIFIER_NAMES[:3]:
            model = fit_boosted(x_tr, y_tr, params[name], name)
            accs[name] = _accuracy(model, x_va, y_va)
    bag = fit_bagging(x_tr, y_tr, bagging_params)
    accs["bagging"] = _accuracy(bag, x_va, y_va)
    weights = compute_weights([accs[n] for n in CLASSIFIER_NAMES])
    return params, accs, combos, weights


# --------------------------------------------------------------------------
# cross-validation
# --------------------------------------------------------------------------

@dataclass
class FoldResult:
    fold: int
    test_indices: list
    train_fingerprint: str
    confusion: ConfusionMatrix
    metrics: dict
    per_classifier_accuracy: dict
    inner_accuracy: dict
    weights: list
    chosen_params: dict


@dataclass
class CvReport:
    k: int
    seed: int
    folds: list
    aggregate: dict  # metric -> {"mean": .., "std": ..}

    @property
    def mean_accuracy(self) -> float:
        return self.aggregate["accuracy"]["mean"]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "aggregate": self.aggregate,
            "folds": [
                {
                    "fold": f.fold,
                    "test_indices": list(map(int, f.test_indices)),
                    "train_fingerprint": f.train_fingerprint,
                    "confusion": asdict(f.confusion),
                    "metrics": f.metrics,
                    "per_classifier_accuracy": f.per_classifier_accuracy,
                    "inner_accuracy": f.inner_accuracy,
                    "weights": f.weights,
                    "chosen_params": f.chosen_params,
                }
                for f in self.folds
            ],
        }

    def format_table(self) -> str:
        cols = ["accuracy", "sensitivity", "specificity", "f1", "mcc"]
        out = ["fold  " + "  ".join(f"{c:>11s}" for c in cols)]
        for f in self.folds:
            out.append(f"{f.fold:>4d}  " +
                       "  ".join(f"{f.metrics[c]:>11.4f}" for c in cols))
        out.append("mean  " + "  ".join(
            f"{self.aggregate[c]['mean']:>11.4f}" for c in cols))
        out.append(" std  " + "  ".join(
            f"{self.aggregate[c]['std']:>11.4f}" for c in cols))
        return "\n".join(out)


def _fold_seed(seed: int, fold: int) -> int:
    return seed * 1_000_003 + fold + 1


def cross_validate(ds: Dataset, k: int, seed: int,
                   tree_params: TreeParams | None = None,
                   bagging_params: BaggingParams | None = None,
                   grid=None) -> CvReport:
    """Subject-grouped stratified k-fold evaluation of the hard-vote ensemble."""
    tree_params = tree_params or TreeParams(seed=seed)
    bagging_params = bagging_params or BaggingParams(seed=seed)
    folds = grouped_folds(ds, k, seed)
    all_idx = np.arange(len(ds))
    results = []
    for fold_no, test_idx in enumerate(folds):
        train_idx = np.sort(np.setdiff1d(all_idx, test_idx))
        train_ds = ds.subset(train_idx)
        scaler = fit_scaler(train_ds)
        fold_seed = _fold_seed(seed, fold_no)
        f_tree = replace(tree_params, seed=fold_seed)
        f_bag = replace(bagging_params, seed=fold_seed)

        params, inner_accs, combos, weights = _weights_from_inner(
            train_ds, scaler, f_tree, f_bag, fold_seed, grid)

        x_tr = np.array([apply_scaler(r.features, scaler) for r in train_ds.records])
        y_tr = train_ds.labels()
        fitted = _fit_four(x_tr, y_tr, params, f_bag)

        test_ds = ds.subset(test_idx)
        x_te = np.array([apply_scaler(r.features, scaler) for r in test_ds.records])
        y_te = test_ds.labels()
        per_clf_pred = {
            name: fitted[name].predict_label_matrix(x_te)
            for name in CLASSIFIER_NAMES
        }
        final = np.array([
            hard_vote([int(per_clf_pred[n][i]) for n in CLASSIFIER_NAMES],
                      weights).final_label
            for i in range(len(test_ds))
        ])
        cm = ConfusionMatrix.from_labels(y_te, final)
        results.append(FoldResult(
            fold=fold_no,
            test_indices=[int(i) for i in test_idx],
            train_fingerprint=hashlib.sha256(
                np.ascontiguousarray(train_idx).tobytes()).hexdigest(),
            confusion=cm,
            metrics=metrics(cm),
            per_classifier_accuracy={
                n: float(np.mean(per_clf_pred[n] == y_te)) for n in CLASSIFIER_NAMES},
            inner_accuracy={n: float(inner_accs[n]) for n in CLASSIFIER_NAMES},
            weights=[float(w) for w in weights.values],
            chosen_params={n: dict(c) for n, c in combos.items()},
        ))

    metric_names = results[0].metrics.keys()
    aggregate = {}
    for m in metric_names:
        vals = np.array([f.metrics[m] for f in results])
        aggregate[m] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return CvReport(k=k, seed=seed, folds=results, aggregate=aggregate)


def train_final(ds: Dataset, seed: int,
                tree_params: TreeParams | None = None,
                bagging_params: BaggingParams | None = None,
                grid=None) -> EnsembleModel:
    """Fit the deployable bundle: inner split for weights, then refit all four
    classifiers on the complete dataset."""
    tree_params = tree_params or TreeParams(seed=seed)
    bagging_params = bagging_params or BaggingParams(seed=seed)
    tree_params = replace(tree_params, seed=seed)
    bagging_params = replace(bagging_params, seed=seed)
    scaler = fit_scaler(ds)
    params, inner_accs, combos, weights = _weights_from_inner(
        ds, scaler, tree_params, bagging_params, seed, grid)
    x = np.array([apply_scaler(r.features, scaler) for r in ds.records])
    y = ds.labels()
    fitted = _fit_four(x, y, params, bagging_params)
    metadata = {
        "seed": seed,
        "dataset_fingerprint": dataset_fingerprint(ds),
        "n_records": len(ds),
        "n_subjects": len(ds.subjects()),
        "inner_accuracy": {n: float(inner_accs[n]) for n in CLASSIFIER_NAMES},
        "chosen_params": {n: dict(c) for n, c in combos.items()},
        "tree_params": asdict(tree_params),
        "bagging_params": asdict(bagging_params),
    }
    return EnsembleModel(scaler=scaler, classifiers=fitted, weights=weights,
                         feature_names=list(ds.feature_names), metadata=metadata)


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------

def _tree_to_doc(tree: DecisionTree) -> dict:
    nodes = []
    for n in tree.nodes:
        if n.feature < 0:
            nodes.append({"leaf": n.leaf})
        else:
            nodes.append({"feature": n.feature, "threshold": n.threshold,
                          "left": n.left, "right": n.right})
    return {"nodes": nodes}


def _tree_from_doc(doc, path) -> DecisionTree:
    nodes = []
    for i, nd in enumerate(_require(doc, "nodes", path)):
        if "leaf" in nd:
            nodes.append(Node(feature=-1, leaf=float(nd["leaf"])))
        else:
            for key in ("feature", "threshold", "left", "right"):
                if key not in nd:
                    raise SchemaViolation(f"{path}.nodes[{i}].{key}")
            nodes.append(Node(feature=int(nd["feature"]),
                              threshold=float(nd["threshold"]),
                              left=int(nd["left"]), right=int(nd["right"])))
    return DecisionTree(nodes=nodes)


def _require(doc, key, path):
    if not isinstance(doc, dict) or key not in doc:
        raise SchemaViolation(f"{path}.{key}" if path else key)
    return doc[key]


def save_model(bundle: EnsembleModel, sink) -> None:
    """Serialize the bundle as one JSON document with full float precision."""
    models = []
    for name in CLASSIFIER_NAMES:
        model = bundle.classifiers[name]
        if name == "bagging":
            models.append({"mode": "bagging", "base_margin": 0.0,
                           "learning_rate": 1.0,
                           "trees": [_tree_to_doc(t) for t in model.trees]})
        else:
            models.append({"mode": model.mode, "base_margin": model.base_margin,
                           "learning_rate": model.learning_rate,
                           "trees": [_tree_to_doc(t) for t in model.trees]})
    doc = {
        "format_version": bundle.format_version,
        "scaler": {"mean": list(bundle.scaler.mean), "std": list(bundle.scaler.std)},
        "models": models,
        "weights": [float(w) for w in bundle.weights.values],
        "feature_names": list(bundle.feature_names),
        "metadata": bundle.metadata,
    }
    text = json.dumps(doc, indent=1)
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        with open(sink, "w", encoding="utf-8") as fh:
            fh.write(text)


def load_model(source) -> EnsembleModel:
    """Parse and validate a bundle document; raises UnsupportedVersion or
    SchemaViolation naming the first missing field."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaViolation("document") from e

    version = _require(doc, "format_version", "")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"format_version {version} unsupported, "
                                 f"expected {FORMAT_VERSION}")
    scaler_doc = _require(doc, "scaler", "")
    scaler = ScalerParams(
        mean=np.array(_require(scaler_doc, "mean", "scaler"), dtype=float),
        std=np.array(_require(scaler_doc, "std", "scaler"), dtype=float))
    models_doc = _require(doc, "models", "")
    if len(models_doc) != 4:
        raise SchemaViolation("models[4]")
    classifiers = {}
    for i, (name, mdoc) in enumerate(zip(CLASSIFIER_NAMES, models_doc)):
        path = f"models[{i}]"
        mode = _require(mdoc, "mode", path)
        if mode != name:
            raise SchemaViolation(f"{path}.mode")
        trees = [_tree_from_doc(t, f"{path}.trees[{j}]")
                 for j, t in enumerate(_require(mdoc, "trees", path))]
        if name == "bagging":
            classifiers[name] = BaggedModel(trees=trees,
                                            feature_count=len(scaler.mean))
        else:
            classifiers[name] = BoostedModel(
                mode=mode,
                base_margin=float(_require(mdoc, "base_margin", path)),
                learning_rate=float(_require(mdoc, "learning_rate", path)),
                trees=trees, feature_count=len(scaler.mean))
    weights = ClassifierWeights(np.array(_require(doc, "weights", ""), dtype=float))
    feature_names = list(_require(doc, "feature_names", ""))
    metadata = _require(doc, "metadata", "")
    return EnsembleModel(scaler=scaler, classifiers=classifiers, weights=weights,
                         feature_names=feature_names, metadata=metadata,
                         format_version=version)
