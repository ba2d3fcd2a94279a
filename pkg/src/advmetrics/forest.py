"""Random-forest meta-classifier and the evaluation procedures built on it.

Trees are grown from bootstrap samples with Gini impurity. Every tree draws
its randomness from a generator seeded by ``(seed, tree_index)``. Because of
that, the fitted forest does not depend on how many worker processes built it.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import DegenerateInput, MissingFeature, ParseError

FORMAT_VERSION = 1


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    attack_family: str
    config_id: str
    features: Mapping[str, float]
    labels: Mapping[str, int]


@dataclass(frozen=True)
class ForestHyperparams:
    n_trees: int = 100
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    features_per_split: Optional[int] = None  # None -> floor(sqrt(d))
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be positive")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be positive or None")
        if self.min_samples_split < 1:
            raise ValueError("min_samples_split must be positive")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ValueError("features_per_split must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    def split_size(self, d: int) -> int:
        k = self.features_per_split or max(1, math.isqrt(d))
        if k > d:
            raise ValueError(f"features_per_split={k} exceeds the {d} available features")
        return k


@dataclass
class Tree:
    """Array-backed binary tree. ``left[i] == -1`` marks node ``i`` as a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (n_nodes, 2) class counts reaching each node

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def leaf_index(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = self.left[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            cur = node[idx]
            go_left = X[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active[idx] = self.left[node[idx]] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        c = self.counts[self.leaf_index(X)]
        # leaf ties go to class 1
        return (c[:, 1] >= c[:, 0]).astype(np.int64)

    def to_dict(self, i: int = 0) -> dict:
        if self.left[i] < 0:
            return {"counts": [int(self.counts[i, 0]), int(self.counts[i, 1])]}
        return {
            "feature": int(self.feature[i]),
            "threshold": float(self.threshold[i]),
            "left": self.to_dict(int(self.left[i])),
            "right": self.to_dict(int(self.right[i])),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Tree":
        feature, threshold, left, right, counts = [], [], [], [], []

        def visit(node):
            i = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            counts.append([0, 0])
            if "counts" in node:
                counts[i] = [int(node["counts"][0]), int(node["counts"][1])]
                return counts[i]
            feature[i] = int(node["feature"])
            threshold[i] = float(node["threshold"])
            left[i] = len(feature)
            cl = visit(node["left"])
            right[i] = len(feature)
            cr = visit(node["right"])
            counts[i] = [cl[0] + cr[0], cl[1] + cr[1]]
            return counts[i]

        visit(doc)
        return cls(
            np.array(feature, dtype=np.int64),
            np.array(threshold, dtype=np.float64),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            np.array(counts, dtype=np.int64).reshape(-1, 2),
        )


@dataclass
class ForestModel:
    hyperparams: ForestHyperparams
    feature_names: list[str]
    trees: list[Tree]
    importances: dict[str, float]
    constant: bool = False  # all training labels were identical

    def _matrix(self, rows: Sequence[Mapping[str, float]]) -> np.ndarray:
        try:
            return np.array([[r[f] for f in self.feature_names] for r in rows], dtype=np.float64)
        except KeyError as exc:
            raise MissingFeature(f"input lacks feature {exc.args[0]!r}") from None

    def votes(self, X: np.ndarray) -> np.ndarray:
        """Number of trees voting for class 1, per row of ``X``."""
        X = np.asarray(X, dtype=np.float64).reshape(-1, len(self.feature_names))
        total = np.zeros(len(X), dtype=np.int64)
        for t in self.trees:
            total += t.predict(X)
        return total

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        # forest ties go to class 1
        return (2 * self.votes(X) >= len(self.trees)).astype(np.int64)

    def predict_many(self, rows: Sequence[Mapping[str, float]]) -> np.ndarray:
        return self.predict_matrix(self._matrix(rows))

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "hyperparams": asdict(self.hyperparams),
            "feature_names": list(self.feature_names),
            "importances": {k: float(v) for k, v in self.importances.items()},
            "constant": self.constant,
            "trees": [t.to_dict() for t in self.trees],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=False)

    @classmethod
    def from_dict(cls, doc: dict) -> "ForestModel":
        try:
            if doc.get("format_version") != FORMAT_VERSION:
                raise ParseError(f"unsupported model format {doc.get('format_version')!r}")
            model = cls(
                hyperparams=ForestHyperparams(**doc["hyperparams"]),
                feature_names=list(doc["feature_names"]),
                trees=[Tree.from_dict(t) for t in doc["trees"]],
                importances={k: float(v) for k, v in doc["importances"].items()},
                constant=bool(doc.get("constant", False)),
            )
        except ParseError:
            raise
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ParseError(f"malformed model document: {exc}") from exc
        d = len(model.feature_names)
        for t in model.trees:
            inner = t.left >= 0
            if np.any(t.feature[inner] >= d) or np.any(t.feature[inner] < 0):
                raise ParseError("tree references a feature index out of range")
        return model


def predict(model: ForestModel, features: Mapping[str, float]) -> int:
    """Majority vote of the forest on one feature map."""
    return int(model.predict_many([features])[0])


def save_model(model: ForestModel, path) -> None:
    Path(path).write_text(model.dumps() + "\n", encoding="utf-8")


def load_model(path) -> ForestModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: model document must be a JSON object")
    return ForestModel.from_dict(doc)


# --------------------------------------------------------------------------
# tree growing


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, tree_index]))


def bootstrap_indices(seed: int, tree_index: int, n: int) -> np.ndarray:
    """The bootstrap sample used by tree ``tree_index`` of a forest seeded with ``seed``."""
    return tree_rng(seed, tree_index).integers(0, n, size=n)


def _gini_sum(n0, n1):
    """n * gini(n0, n1), elementwise, 0 for empty partitions."""
    n = n0 + n1
    with np.errstate(invalid="ignore", divide="ignore"):
        out = n - (n0 * n0 + n1 * n1) / n
    return np.where(n > 0, out, 0.0)


def _best_split(X: np.ndarray, y: np.ndarray, order: np.ndarray, k: int):
    """Best (gain, feature, threshold) among the first ``k`` non-constant features of ``order``.

    ``gain`` is the impurity decrease in sample-count units. Ties are broken
    by the lowest feature index and then the lowest threshold.
    """
    n = len(y)
    n1 = int(y.sum())
    parent = float(_gini_sum(np.float64(n - n1), np.float64(n1)))
    best = None
    tried = 0
    for f in order:
        if tried == k:
            break
        col = X[:, f]
        srt = np.argsort(col, kind="stable")
        xs = col[srt]
        if xs[0] == xs[-1]:
            continue
        tried += 1
        ys = y[srt]
        n1l = np.cumsum(ys)[:-1].astype(np.float64)
        nl = np.arange(1, n, dtype=np.float64)
        n0l = nl - n1l
        n1r = n1 - n1l
        n0r = (n - nl) - n1r
        gain = parent - (_gini_sum(n0l, n1l) + _gini_sum(n0r, n1r))
        gain[xs[1:] == xs[:-1]] = -np.inf
        j = int(np.argmax(gain))
        a, b = xs[j], xs[j + 1]
        thr = a + (b - a) / 2.0
        if not a <= thr < b:
            thr = a
        cand = (float(gain[j]), int(f), float(thr))
        if best is None or cand[0] > best[0] or (
            cand[0] == best[0] and (cand[1], cand[2]) < (best[1], best[2])
        ):
            best = cand
    return best


def grow_tree(X: np.ndarray, y: np.ndarray, hp: ForestHyperparams, tree_index: int):
    """Fit one tree. Returns ``(tree, per-feature impurity decrease)``."""
    n, d = X.shape
    k = hp.split_size(d)
    rng = tree_rng(hp.seed, tree_index)
    boot = rng.integers(0, n, size=n)
    Xb, yb = X[boot], y[boot]

    feature, threshold, left, right, counts = [], [], [], [], []
    importance = np.zeros(d)

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        c1 = int(yb[idx].sum())
        counts.append((len(idx) - c1, c1))
        return len(feature) - 1

    stack = [(new_node(np.arange(n)), np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        c0, c1 = counts[node]
        if (
            c0 == 0
            or c1 == 0
            or len(idx) < hp.min_samples_split
            or (hp.max_depth is not None and depth >= hp.max_depth)
        ):
            continue
        split = _best_split(Xb[idx], yb[idx], rng.permutation(d), k)
        if split is None:
            continue
        gain, f, thr = split
        mask = Xb[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = f, thr
        importance[f] += max(gain, 0.0)
        left[node] = new_node(li)
        right[node] = new_node(ri)
        # push right first so the left subtree is numbered first
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    tree = Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(counts, dtype=np.int64).reshape(-1, 2),
    )
    return tree, importance


def _grow_chunk(args):
    X, y, hp, indices = args
    return [grow_tree(X, y, hp, i) for i in indices]


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    feature_names: Sequence[str],
    hp: ForestHyperparams = ForestHyperparams(),
    jobs: int = 1,
) -> ForestModel:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y) or len(y) == 0:
        raise ValueError("X must be (n, d) with n == len(y) > 0")
    if X.shape[1] != len(feature_names):
        raise ValueError("feature_names does not match the columns of X")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature matrix contains NaN or infinite values")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    hp.split_size(X.shape[1])

    if jobs <= 1 or hp.n_trees == 1:
        grown = [grow_tree(X, y, hp, i) for i in range(hp.n_trees)]
    else:
        chunks = [list(range(i, hp.n_trees, jobs)) for i in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_grow_chunk, [(X, y, hp, c) for c in chunks if c]))
        by_index = {}
        for c, part in zip([c for c in chunks if c], parts):
            by_index.update(zip(c, part))
        grown = [by_index[i] for i in range(hp.n_trees)]

    trees = [t for t, _ in grown]
    total = np.zeros(X.shape[1])
    for _, imp in grown:
        total += imp
    s = total.sum()
    norm = total / s if s > 0 else total
    importances = {name: float(v) for name, v in zip(feature_names, norm)}
    return ForestModel(hp, list(feature_names), trees, importances, constant=bool(np.ptp(y) == 0))


# --------------------------------------------------------------------------
# dataset-level procedures


def record_matrix(records: Sequence[SampleRecord], feature_set: Sequence[str]) -> np.ndarray:
    try:
        return np.array([[r.features[f] for f in feature_set] for r in records], dtype=np.float64)
    except KeyError as exc:
        raise MissingFeature(f"record lacks feature {exc.args[0]!r}") from None


def record_labels(records: Sequence[SampleRecord], label: str) -> np.ndarray:
    try:
        return np.array([int(r.labels[label]) for r in records], dtype=np.int64)
    except KeyError:
        raise MissingFeature(f"record lacks label {label!r}") from None


def train(
    records: Sequence[SampleRecord],
    feature_set: Sequence[str],
    label: str,
    hp: ForestHyperparams = ForestHyperparams(),
    jobs: int = 1,
) -> ForestModel:
    """Fit a forest on ``records`` using ``feature_set`` to predict ``label``.

    A training set with one class yields a constant model with ``constant=True``.
    """
    if not records:
        raise DegenerateInput("no training records")
    if not feature_set:
        raise ValueError("feature_set is empty")
    X = record_matrix(records, feature_set)
    y = record_labels(records, label)
    return fit_forest(X, y, feature_set, hp, jobs=jobs)


def pearson(x, y) -> float:
    """Sample Pearson correlation coefficient."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("pearson needs two 1-D arrays of equal length >= 2")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise DegenerateInput("zero variance")
    dx = x - x.mean()
    dy = y - y.mean()
    r = float(np.dot(dx, dy) / math.sqrt(np.dot(dx, dx) * np.dot(dy, dy)))
    return min(1.0, max(-1.0, r))


def stratified_split(
    records: Sequence[SampleRecord],
    train_fraction: float,
    label: str,
    seed: int,
    stratify: bool = True,
) -> tuple[list[SampleRecord], list[SampleRecord]]:
    """Seeded train/test partition. Both parts keep the input order.

    With ``stratify`` each class contributes ``round(fraction * size)`` records
    to the training side, and at least one record to each side.
    """
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    if not records:
        raise DegenerateInput("no records to split")
    rng = np.random.default_rng(seed)
    y = record_labels(records, label)
    in_train = np.zeros(len(records), dtype=bool)
    if stratify:
        for cls in (0, 1):
            members = np.nonzero(y == cls)[0]
            if len(members) == 0:
                continue
            if len(members) < 2:
                raise DegenerateInput(f"class {cls} of {label!r} has fewer than 2 records")
            take = min(max(int(round(train_fraction * len(members))), 1), len(members) - 1)
            in_train[rng.permutation(members)[:take]] = True
    else:
        take = min(max(int(round(train_fraction * len(records))), 1), len(records) - 1)
        in_train[rng.permutation(len(records))[:take]] = True
    train_part = [r for r, t in zip(records, in_train) if t]
    test_part = [r for r, t in zip(records, in_train) if not t]
    return train_part, test_part


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    tp: int
    fp: int
    fn: int
    tn: int
    n_test: int
    feature_set: tuple[str, ...] = ()

    @property
    def confusion(self) -> tuple[tuple[int, int], tuple[int, int]]:
        """``((tp, fn), (fp, tn))``: rows are true class 1 / 0."""
        return ((self.tp, self.fn), (self.fp, self.tn))


def evaluate(model: ForestModel, test: Sequence[SampleRecord], label: str) -> EvalReport:
    if not test:
        raise DegenerateInput("empty test set")
    pred = model.predict_matrix(record_matrix(test, model.feature_names))
    truth = record_labels(test, label)
    tp = int(np.sum((pred == 1) & (truth == 1)))
    tn = int(np.sum((pred == 0) & (truth == 0)))
    fp = int(np.sum((pred == 1) & (truth == 0)))
    fn = int(np.sum((pred == 0) & (truth == 1)))
    n = len(test)
    return EvalReport((tp + tn) / n, tp, fp, fn, tn, n, tuple(model.feature_names))


@dataclass(frozen=True)
class LooReport:
    per_attack: dict[str, EvalReport] = field(default_factory=dict)


def leave_one_attack_out(
    records: Sequence[SampleRecord],
    feature_set: Sequence[str],
    label: str,
    hp: ForestHyperparams = ForestHyperparams(),
    jobs: int = 1,
) -> LooReport:
    """Hold out each attack family in turn and test on it alone."""
    families = sorted({r.attack_family for r in records})
    if len(families) < 2:
        raise DegenerateInput("leave-one-attack-out needs at least two attack families")
    out = {}
    for fam in families:
        train_part = [r for r in records if r.attack_family != fam]
        test_part = [r for r in records if r.attack_family == fam]
        if len(set(record_labels(train_part, label).tolist())) < 2:
            raise DegenerateInput(f"training set without {fam!r} contains a single class")
        model = train(train_part, feature_set, label, hp, jobs=jobs)
        out[fam] = evaluate(model, test_part, label)
    return LooReport(out)


def rank_features(model: ForestModel) -> list[tuple[str, float]]:
    return sorted(model.importances.items(), key=lambda kv: (-kv[1], kv[0]))
