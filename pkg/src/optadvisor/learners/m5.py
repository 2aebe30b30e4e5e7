"""M5-style model tree: SDR-grown regression tree with linear node models,
error-based pruning and root-ward smoothing of predictions."""

from __future__ import annotations

import math
from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np

from ..errors import LearnerError
from ..profile_ingest import FeatureSchema, FeatureVector
from .dataset import Dataset, query_array, require_nonempty

SMOOTHING_K = 15.0
MIN_SPLIT_INSTANCES = 4
MIN_LEAF_INSTANCES = 2
SD_STOP_FRACTION = 0.05
RIDGE_LAMBDA = 1e-8
# gains/errors closer than this (relative to the node's sd) count as equal
TIE_TOLERANCE = 1e-9
MAX_PRUNING_FACTOR = 10.0


@dataclass
class LinearModel:
    intercept: float
    coefficients: dict[str, float]

    def evaluate(self, x: dict[str, float]) -> float:
        return self.intercept + sum(c * x[name] for name, c in self.coefficients.items())

    @property
    def n_params(self) -> int:
        return 1 + len(self.coefficients)


@dataclass
class Node:
    model: LinearModel
    n: int
    # features the node model may use: those split on in the subtree grown under this node
    allowed: tuple[str, ...] = ()
    feature: str | None = None
    threshold: float | None = None
    left: Node | None = None
    right: Node | None = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def walk(self) -> Iterator[Node]:
        yield self
        if not self.is_leaf:
            yield from self.left.walk()
            yield from self.right.walk()

    def split_features(self) -> set[str]:
        return {n.feature for n in self.walk() if not n.is_leaf}


@dataclass
class M5Model:
    schema: FeatureSchema
    root: Node
    smoothing_k: float = SMOOTHING_K

    def n_leaves(self) -> int:
        return sum(1 for n in self.root.walk() if n.is_leaf)

    def predict_one(self, x: np.ndarray) -> float:
        xd = dict(zip(self.schema.names, x.tolist()))
        path = []
        node = self.root
        while not node.is_leaf:
            path.append(node)
            node = node.left if xd[node.feature] <= node.threshold else node.right
        p = node.model.evaluate(xd)
        for anc in reversed(path):
            q = anc.model.evaluate(xd)
            p = (anc.n * p + self.smoothing_k * q) / (anc.n + self.smoothing_k)
        return p

    def predict_array(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([self.predict_one(row) for row in X])


def population_sd(y: np.ndarray) -> float:
    y = np.asarray(y, dtype=float)
    # np.std of identical values can come out as ~1e-16 through the rounded mean
    if len(y) == 0 or np.all(y == y[0]):
        return 0.0
    return float(np.std(y))


def sdr(parent: np.ndarray, parts: list[np.ndarray]) -> float:
    """Standard deviation reduction of splitting ``parent`` into ``parts``."""
    n = len(parent)
    return population_sd(parent) - sum(len(p) / n * population_sd(p) for p in parts)


def _prefix_sds(ys: np.ndarray) -> np.ndarray:
    """Population sd of ys[:i+1] for every i, by Welford's update.

    Welford keeps single-element and constant prefixes at exactly zero, which
    the sum-of-squares shortcut does not; sqrt amplifies that residue enough
    to break ties between equally good splits.
    """
    out = np.empty(len(ys))
    mean = m2 = 0.0
    for i, v in enumerate(ys.tolist(), start=1):
        delta = v - mean
        mean += delta / i
        m2 += delta * (v - mean)
        out[i - 1] = math.sqrt(max(m2, 0.0) / i)
    return out


def _best_split_for_feature(x: np.ndarray, y: np.ndarray, sd: float) -> tuple[float, float] | None:
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = len(xs)
    valid = xs[:-1] < xs[1:]
    valid[: MIN_LEAF_INSTANCES - 1] = False
    valid[n - MIN_LEAF_INSTANCES:] = False
    if not valid.any():
        return None
    sd_left = _prefix_sds(ys)[:-1]
    sd_right = _prefix_sds(ys[::-1])[::-1][1:]
    nl = np.arange(1, n, dtype=float)
    gain = sd - (nl * sd_left + (n - nl) * sd_right) / n
    gain = np.where(valid, gain, -np.inf)
    best = gain.max()
    i = int(np.argmax(gain >= best - TIE_TOLERANCE * sd))  # smallest threshold among ties
    thr = (xs[i] + xs[i + 1]) / 2.0
    if not xs[i] <= thr < xs[i + 1]:
        thr = xs[i]
    return float(gain[i]), float(thr)


def _fit_linear(X: np.ndarray, y: np.ndarray, names: list[str], cols: list[int], ridge: float) -> LinearModel:
    # constant labels keep their exact value (a float mean can drift by an ulp)
    ybar = float(y[0]) if np.all(y == y[0]) else float(y.mean())
    if not cols:
        return LinearModel(ybar, {})
    A = X[:, cols]
    xbar = A.mean(axis=0)
    Ac = A - xbar
    gram = Ac.T @ Ac + ridge * np.eye(len(cols))
    beta = np.linalg.solve(gram, Ac.T @ (y - ybar))
    intercept = ybar - float(xbar @ beta)
    return LinearModel(intercept, {names[c]: float(b) for c, b in zip(cols, beta)})


def _pruning_factor(n: int, v: int) -> float:
    if n <= v:
        return MAX_PRUNING_FACTOR
    return (n + v) / (n - v)


class _Builder:
    def __init__(self, data: Dataset, ridge: float):
        self.names = list(data.schema.names)
        self.col = {name: j for j, name in enumerate(self.names)}
        self.X = data.X
        self.y = data.y
        self.ridge = ridge
        self.sd_root = population_sd(self.y)
        self.err_tol = TIE_TOLERANCE * self.sd_root
        # scan features in name order so equal gains keep the smaller name
        self.scan_order = sorted(range(len(self.names)), key=lambda j: self.names[j])

    def grow(self, idx: np.ndarray) -> Node:
        y = self.y[idx]
        node = Node(model=LinearModel(float(y.mean()), {}), n=len(idx))
        sd = population_sd(y)
        if len(idx) < MIN_SPLIT_INSTANCES or self.sd_root == 0 or sd < SD_STOP_FRACTION * self.sd_root:
            return node
        found = []
        for j in self.scan_order:
            split = _best_split_for_feature(self.X[idx, j], y, sd)
            if split is not None:
                found.append((split[0], split[1], j))
        if not found:
            return node
        top = max(f[0] for f in found)
        if top <= TIE_TOLERANCE * sd:
            return node
        # first near-best in name order wins, so ties go to the smaller feature name
        _, thr, j = next(f for f in found if f[0] >= top - TIE_TOLERANCE * sd)
        mask = self.X[idx, j] <= thr
        node.feature, node.threshold = self.names[j], thr
        node.left = self.grow(idx[mask])
        node.right = self.grow(idx[~mask])
        return node

    def fit_models(self, node: Node, idx: np.ndarray):
        if not node.is_leaf:
            mask = self.X[idx, self.col[node.feature]] <= node.threshold
            self.fit_models(node.left, idx[mask])
            self.fit_models(node.right, idx[~mask])
            node.allowed = tuple(sorted(node.split_features()))
        cols = [self.col[f] for f in node.allowed]
        node.model = _fit_linear(self.X[idx], self.y[idx], self.names, cols, self.ridge)

    def prune(self, node: Node, idx: np.ndarray) -> float:
        """Prune bottom-up; returns the estimated error of what remains of ``node``."""
        X, y = self.X[idx], self.y[idx]
        xd_rows = [dict(zip(self.names, row)) for row in X.tolist()]
        resid = np.array([yi - node.model.evaluate(xd) for yi, xd in zip(y, xd_rows)])
        model_err = float(np.mean(np.abs(resid))) * _pruning_factor(len(idx), node.model.n_params)
        if node.is_leaf:
            return model_err
        mask = X[:, self.col[node.feature]] <= node.threshold
        nl, nr = int(mask.sum()), int((~mask).sum())
        el = self.prune(node.left, idx[mask])
        er = self.prune(node.right, idx[~mask])
        subtree_err = (nl * el + nr * er) / len(idx)
        if model_err <= subtree_err + self.err_tol:
            node.feature = node.threshold = node.left = node.right = None
            return model_err
        return subtree_err


def m5_build(data: Dataset, *, smoothing_k: float = SMOOTHING_K, ridge: float = RIDGE_LAMBDA,
             prune: bool = True) -> M5Model:
    require_nonempty(data)
    if not all(math.isfinite(i.label) for i in data.instances):
        raise LearnerError("labels must be finite")
    b = _Builder(data, ridge)
    idx = np.arange(len(data))
    root = b.grow(idx)
    b.fit_models(root, idx)
    if prune:
        b.prune(root, idx)
    return M5Model(data.schema, root, smoothing_k)


def m5_predict(model: M5Model, query: FeatureVector) -> float:
    return float(model.predict_one(query_array(model.schema, query)))


def coefficient_confinement_holds(model: M5Model) -> bool:
    """Every nonzero coefficient names a feature split on within that node's subtree.

    The subtree is the one grown under the node, which ``allowed`` records;
    pruning may since have collapsed part of it. Grown leaves allow nothing.
    """
    for node in model.root.walk():
        used = {f for f, c in node.model.coefficients.items() if c != 0.0}
        scope = set(node.allowed)
        if not node.split_features() <= scope or not used <= scope:
            return False
    return True
