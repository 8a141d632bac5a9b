"""Least-squares gradient boosting with axis-aligned regression trees.

Trees are grown by exact greedy search: every midpoint between
consecutive distinct feature values is a candidate threshold, scored
by squared-error reduction.  Fitting is fully deterministic; no
randomness is involved anywhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ..dataset import ObservationSet
from ..errors import InvalidConfig, SchemaMismatch


@dataclass(frozen=True)
class GbtSpec:
    """Boosting hyperparameters; k is the downsampling ratio these
    settings were searched with (carried for the record, not used by fit)."""

    max_depth: int
    n_estimators: int
    learning_rate: float
    k: int = 1

    def __post_init__(self):
        if self.max_depth < 1:
            raise InvalidConfig(f"max_depth must be >= 1, got {self.max_depth}")
        if self.n_estimators < 1:
            raise InvalidConfig(f"n_estimators must be >= 1, got {self.n_estimators}")
        if not 0 < self.learning_rate:
            raise InvalidConfig(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.k < 1:
            raise InvalidConfig(f"k must be >= 1, got {self.k}")

    def as_dict(self) -> dict:
        return {"max_depth": self.max_depth, "n_estimators": self.n_estimators,
                "learning_rate": self.learning_rate, "k": self.k}


@dataclass(frozen=True)
class Leaf:
    value: float


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "Split | Leaf"
    right: "Split | Leaf"


def _best_split(X: np.ndarray, r: np.ndarray):
    """Highest squared-error-reduction split, or None when nothing helps.

    Ties resolve to the lowest feature index, then lowest threshold,
    via strict > during the scan.
    """
    n = len(r)
    total = r.sum()
    best = None
    best_gain = 0.0
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        rs = r[order]
        csum = np.cumsum(rs)
        # candidate boundaries sit between distinct consecutive values
        cut = np.flatnonzero(xs[1:] != xs[:-1]) + 1
        if len(cut) == 0:
            continue
        n_left = cut.astype(np.float64)
        s_left = csum[cut - 1]
        gain = (s_left ** 2 / n_left
                + (total - s_left) ** 2 / (n - n_left)
                - total ** 2 / n)
        k = int(np.argmax(gain))
        if gain[k] > best_gain:
            best_gain = float(gain[k])
            thr = 0.5 * (xs[cut[k] - 1] + xs[cut[k]])
            best = (f, float(thr), best_gain)
    return best


def _grow(X: np.ndarray, r: np.ndarray, depth: int, gains: np.ndarray):
    if depth == 0 or len(r) < 2 or r.min() == r.max():
        return Leaf(float(r.mean()))
    found = _best_split(X, r)
    if found is None:
        return Leaf(float(r.mean()))
    f, thr, gain = found
    gains[f] += gain
    mask = X[:, f] <= thr
    return Split(f, thr,
                 _grow(X[mask], r[mask], depth - 1, gains),
                 _grow(X[~mask], r[~mask], depth - 1, gains))


def _eval_tree(node, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X))
    idx = np.arange(len(X))
    stack = [(node, idx)]
    while stack:
        nd, rows = stack.pop()
        if isinstance(nd, Leaf):
            out[rows] = nd.value
            continue
        mask = X[rows, nd.feature] <= nd.threshold
        stack.append((nd.left, rows[mask]))
        stack.append((nd.right, rows[~mask]))
    return out


@dataclass(frozen=True)
class GbtModel:
    """A fitted boosting ensemble: base value plus shrunken tree sum."""

    spec: GbtSpec
    f0: float
    trees: tuple
    feature_importances: np.ndarray
    rmse_curve: tuple[float, ...]
    column_names: tuple[str, ...]

    def predict_rows(self, rows: np.ndarray) -> np.ndarray:
        """Raw ensemble output; may go below zero on extrapolation."""
        pred = np.full(len(rows), self.f0)
        for tree in self.trees:
            pred += self.spec.learning_rate * _eval_tree(tree, rows)
        return pred

    def to_json(self) -> str:
        def node(nd):
            if isinstance(nd, Leaf):
                return {"value": nd.value}
            return {"feature": nd.feature, "threshold": nd.threshold,
                    "left": node(nd.left), "right": node(nd.right)}
        return json.dumps({
            "kind": "gbt",
            "spec": self.spec.as_dict(),
            "f0": self.f0,
            "trees": [node(t) for t in self.trees],
            "feature_importances": self.feature_importances.tolist(),
            "rmse_curve": list(self.rmse_curve),
            "column_names": list(self.column_names),
        })

    @classmethod
    def from_json(cls, text: str) -> "GbtModel":
        def node(d):
            if "value" in d:
                return Leaf(d["value"])
            return Split(d["feature"], d["threshold"],
                         node(d["left"]), node(d["right"]))
        d = json.loads(text)
        return cls(spec=GbtSpec(**d["spec"]), f0=d["f0"],
                   trees=tuple(node(t) for t in d["trees"]),
                   feature_importances=np.asarray(d["feature_importances"]),
                   rmse_curve=tuple(d["rmse_curve"]),
                   column_names=tuple(d["column_names"]))


def fit_gbt(spec: GbtSpec, train: ObservationSet) -> GbtModel:
    """Sequential residual fitting with shrinkage.

    The first tree fits y minus the target mean; each later tree fits
    what the shrunken ensemble still misses.  Importances are each
    feature's share of the total squared-error reduction.
    """
    X = np.asarray(train.rows, dtype=np.float64)
    y = np.asarray(train.targets, dtype=np.float64)
    f0 = float(y.mean())
    pred = np.full(len(y), f0)
    gains = np.zeros(X.shape[1])
    trees = []
    curve = []
    for _ in range(spec.n_estimators):
        tree = _grow(X, y - pred, spec.max_depth, gains)
        trees.append(tree)
        pred = pred + spec.learning_rate * _eval_tree(tree, X)
        curve.append(math.sqrt(float(((y - pred) ** 2).mean())))
    total = gains.sum()
    importances = gains / total if total > 0 else gains
    return GbtModel(spec=spec, f0=f0, trees=tuple(trees),
                    feature_importances=importances,
                    rmse_curve=tuple(curve),
                    column_names=train.column_names)


def check_schema(model_columns: tuple[str, ...], obs: ObservationSet) -> None:
    if tuple(model_columns) != tuple(obs.column_names):
        raise SchemaMismatch(
            f"model expects columns {model_columns}, observations have "
            f"{obs.column_names}")
