"""Gradient-boosted regression trees for the fused intensity regressor.

Squared-error boosting with exact greedy splits: each round fits a
depth-limited tree to the residuals ``y - F(x)``; a leaf holding rows R
stores ``sum(r_R) / (|R| + reg_lambda)`` and the ensemble adds
``learning_rate * leaf`` to the running prediction, starting from the mean
target.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ContractError, FormatError

logger = logging.getLogger(__name__)

FORMAT_HEADER = "gbt-model v1"
RESIDUAL_TOLERANCE = 1e-12


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    weight: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass
class RegressionTree:
    nodes: List[TreeNode] = field(default_factory=list)

    def depth(self) -> int:
        deepest = 0
        stack = [(0, 0)]
        while stack:
            index, level = stack.pop()
            node = self.nodes[index]
            if node.is_leaf:
                deepest = max(deepest, level)
            else:
                stack.append((node.left, level + 1))
                stack.append((node.right, level + 1))
        return deepest

    def predict(self, X: np.ndarray) -> np.ndarray:
        position = np.zeros(X.shape[0], dtype=np.int64)
        features = np.array([n.feature for n in self.nodes])
        thresholds = np.array([n.threshold for n in self.nodes])
        lefts = np.array([n.left for n in self.nodes])
        rights = np.array([n.right for n in self.nodes])
        weights = np.array([n.weight for n in self.nodes])
        rows = np.arange(X.shape[0])
        active = features[position] >= 0
        while np.any(active):
            node = position[active]
            go_left = X[rows[active], features[node]] < thresholds[node]
            position[active] = np.where(go_left, lefts[node], rights[node])
            active = features[position] >= 0
        return weights[position]


@dataclass
class GBTModel:
    trees: List[RegressionTree]
    learning_rate: float
    base_score: float
    max_depth: int
    reg_lambda: float
    n_features: int
    min_samples_leaf: int = 2

    def __post_init__(self) -> None:
        for number, tree in enumerate(self.trees):
            if tree.depth() > self.max_depth:
                raise ContractError(f"tree {number} is deeper than max_depth {self.max_depth}")
            for node in tree.nodes:
                if not node.is_leaf and node.feature >= self.n_features:
                    raise ContractError(f"tree {number} splits on feature {node.feature} of {self.n_features}")


def _check_matrix(X, y: Optional[Sequence[float]] = None) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ContractError("feature matrix must be two-dimensional")
    if not np.all(np.isfinite(X)):
        raise ContractError("feature matrix has non-finite values")
    if y is None:
        return X, None
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != X.shape[0]:
        raise ContractError(f"{X.shape[0]} feature rows but {y.shape[0]} targets")
    return X, y


class _TreeBuilder:
    """Exact greedy builder over presorted feature columns."""

    def __init__(self, X: np.ndarray, max_depth: int, reg_lambda: float, min_samples_leaf: int):
        self.X = X
        self.max_depth = max_depth
        self.reg_lambda = reg_lambda
        self.min_samples_leaf = min_samples_leaf
        self.sorted_rows = [np.argsort(X[:, f], kind="stable") for f in range(X.shape[1])]

    def best_split(self, rows: np.ndarray, residuals: np.ndarray) -> Tuple[float, int, float]:
        """Return (gain, feature, threshold); feature -1 when no split has positive gain.

        Candidates are scanned by feature then threshold in ascending order and
        only a strictly larger gain replaces the incumbent.
        """
        n = rows.shape[0]
        lam = self.reg_lambda
        member = np.zeros(self.X.shape[0], dtype=bool)
        member[rows] = True
        total = float(residuals[rows].sum())
        parent = total * total / (n + lam)
        left_counts = np.arange(1, n, dtype=np.float64)
        right_counts = n - left_counts
        size_ok = (left_counts >= self.min_samples_leaf) & (right_counts >= self.min_samples_leaf)

        best: Tuple[float, int, float] = (0.0, -1, 0.0)
        if n < 2 or not np.any(size_ok):
            return best
        for feature, order in enumerate(self.sorted_rows):
            order = order[member[order]]
            xs = self.X[order, feature]
            left_sums = np.cumsum(residuals[order])[:-1]
            right_sums = total - left_sums
            valid = size_ok & (xs[:-1] < xs[1:])
            if not np.any(valid):
                continue
            gains = left_sums**2 / (left_counts + lam) + right_sums**2 / (right_counts + lam) - parent
            gains = np.where(valid, gains, -np.inf)
            position = int(np.argmax(gains))
            if gains[position] > best[0]:
                best = (float(gains[position]), feature, float((xs[position] + xs[position + 1]) / 2.0))
        return best

    def build(self, residuals: np.ndarray) -> Tuple[RegressionTree, List[Tuple[np.ndarray, float]]]:
        tree = RegressionTree()
        leaves: List[Tuple[np.ndarray, float]] = []

        def grow(rows: np.ndarray, level: int) -> int:
            index = len(tree.nodes)
            tree.nodes.append(TreeNode())
            gain, feature, threshold = (0.0, -1, 0.0)
            if level < self.max_depth:
                gain, feature, threshold = self.best_split(rows, residuals)
            if feature < 0:
                weight = float(residuals[rows].sum() / (rows.shape[0] + self.reg_lambda))
                tree.nodes[index].weight = weight
                leaves.append((rows, weight))
                return index
            go_left = self.X[rows, feature] < threshold
            left = grow(rows[go_left], level + 1)
            right = grow(rows[~go_left], level + 1)
            tree.nodes[index] = TreeNode(feature=feature, threshold=threshold, left=left, right=right)
            return index

        grow(np.arange(self.X.shape[0]), 0)
        return tree, leaves


def gbt_train(
    X,
    y,
    max_depth: int = 2,
    learning_rate: float = 0.01,
    n_estimators: int = 400,
    reg_lambda: float = 1.0,
    min_samples_leaf: int = 2,
) -> GBTModel:
    X, y = _check_matrix(X, y)
    if X.shape[0] < 2:
        raise ContractError("boosting needs at least two training rows")
    if not np.all(np.isfinite(y)):
        raise ContractError("targets contain non-finite values")
    if max_depth < 1 or n_estimators < 0 or learning_rate <= 0.0 or reg_lambda < 0.0 or min_samples_leaf < 1:
        raise ContractError("invalid boosting parameters")

    base_score = float(np.mean(y))
    if np.ptp(y) > 0.0 and (X.shape[1] == 0 or np.all(np.ptp(X, axis=0) == 0.0)):
        logger.warning("feature matrix is constant; the model will predict the base score %.6f", base_score)

    builder = _TreeBuilder(X, max_depth, reg_lambda, min_samples_leaf)
    prediction = np.full(X.shape[0], base_score)
    trees: List[RegressionTree] = []
    for round_no in range(n_estimators):
        residuals = y - prediction
        if np.max(np.abs(residuals)) <= RESIDUAL_TOLERANCE:
            logger.info("residuals vanished after %d trees; stopping early", round_no)
            break
        tree, leaves = builder.build(residuals)
        for rows, weight in leaves:
            prediction[rows] += learning_rate * weight
        trees.append(tree)
        if (round_no + 1) % 100 == 0:
            logger.info("boosting round %d/%d train mse %.6f", round_no + 1, n_estimators, float(np.mean((y - prediction) ** 2)))

    return GBTModel(
        trees=trees,
        learning_rate=learning_rate,
        base_score=base_score,
        max_depth=max_depth,
        reg_lambda=reg_lambda,
        n_features=X.shape[1],
        min_samples_leaf=min_samples_leaf,
    )


def raw_predict(m: GBTModel, X, n_trees: Optional[int] = None) -> np.ndarray:
    """Unclamped ensemble output using the first ``n_trees`` trees (all by default)."""
    X, _ = _check_matrix(X)
    if X.shape[1] != m.n_features:
        raise ContractError(f"feature width {X.shape[1]} does not match trained width {m.n_features}")
    out = np.full(X.shape[0], m.base_score)
    for tree in m.trees[:n_trees]:
        out += m.learning_rate * tree.predict(X)
    return out


def predict_many(m: GBTModel, X, n_trees: Optional[int] = None) -> np.ndarray:
    return np.clip(raw_predict(m, X, n_trees), 0.0, 1.0)


def gbt_predict(m: GBTModel, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ContractError("gbt_predict takes a single feature vector")
    return float(predict_many(m, x.reshape(1, -1))[0])


def staged_predict(m: GBTModel, X, checkpoints: Iterable[int]) -> Dict[int, np.ndarray]:
    return {int(k): predict_many(m, X, n_trees=int(k)) for k in checkpoints}


def save_gbt(m: GBTModel, path: Union[str, Path]) -> None:
    lines = [
        FORMAT_HEADER,
        f"n_features {m.n_features}",
        f"base_score {m.base_score!r}",
        f"learning_rate {m.learning_rate!r}",
        f"max_depth {m.max_depth}",
        f"reg_lambda {m.reg_lambda!r}",
        f"min_samples_leaf {m.min_samples_leaf}",
        f"trees {len(m.trees)}",
    ]
    for number, tree in enumerate(m.trees):
        lines.append(f"tree {number}")
        for index, node in enumerate(tree.nodes):
            if node.is_leaf:
                lines.append(f"node {index} leaf {node.weight!r}")
            else:
                lines.append(f"node {index} split {node.feature} {node.threshold!r} {node.left} {node.right}")
        lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


_HEADER_FIELDS = (
    ("n_features", int),
    ("base_score", float),
    ("learning_rate", float),
    ("max_depth", int),
    ("reg_lambda", float),
    ("min_samples_leaf", int),
    ("trees", int),
)


def load_gbt(path: Union[str, Path]) -> GBTModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != FORMAT_HEADER:
        raise FormatError(f"{path} is not a '{FORMAT_HEADER}' file", 1)

    header: Dict[str, float] = {}
    for offset, (key, cast) in enumerate(_HEADER_FIELDS, start=1):
        line_no = offset + 1
        parts = lines[offset].split() if offset < len(lines) else []
        if len(parts) != 2 or parts[0] != key:
            raise FormatError(f"expected '{key} <value>'", line_no)
        try:
            header[key] = cast(parts[1])
        except ValueError as exc:
            raise FormatError(f"bad value for {key}", line_no) from exc

    trees: List[RegressionTree] = []
    tree: Optional[RegressionTree] = None
    for line_no in range(len(_HEADER_FIELDS) + 2, len(lines) + 1):
        parts = lines[line_no - 1].split()
        if not parts:
            continue
        try:
            if parts[0] == "tree" and tree is None and int(parts[1]) == len(trees):
                tree = RegressionTree()
            elif parts[0] == "end" and tree is not None:
                trees.append(tree)
                tree = None
            elif parts[0] == "node" and tree is not None and int(parts[1]) == len(tree.nodes):
                if parts[2] == "leaf" and len(parts) == 4:
                    tree.nodes.append(TreeNode(weight=float(parts[3])))
                elif parts[2] == "split" and len(parts) == 7:
                    tree.nodes.append(
                        TreeNode(
                            feature=int(parts[3]),
                            threshold=float(parts[4]),
                            left=int(parts[5]),
                            right=int(parts[6]),
                        )
                    )
                else:
                    raise FormatError(f"malformed node {' '.join(parts)!r}", line_no)
            else:
                raise FormatError(f"unexpected {' '.join(parts)!r}", line_no)
        except (ValueError, IndexError) as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"malformed line {' '.join(parts)!r}", line_no) from exc
    if tree is not None or len(trees) != header["trees"]:
        raise FormatError(f"{path}: expected {header['trees']} complete trees, found {len(trees)}")
    for tree in trees:
        if not tree.nodes:
            raise FormatError(f"{path}: tree without nodes")
        for index, node in enumerate(tree.nodes):
            if not node.is_leaf and not (index < node.left < len(tree.nodes) and index < node.right < len(tree.nodes)):
                raise FormatError(f"{path}: child index out of range")

    try:
        return GBTModel(
            trees=trees,
            learning_rate=header["learning_rate"],
            base_score=header["base_score"],
            max_depth=int(header["max_depth"]),
            reg_lambda=header["reg_lambda"],
            n_features=int(header["n_features"]),
            min_samples_leaf=int(header["min_samples_leaf"]),
        )
    except ContractError as exc:
        raise FormatError(f"{path}: {exc}") from exc
