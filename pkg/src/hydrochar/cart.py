"""Greedy variance-reduction regression trees (CART) for one continuous target."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyInput


@dataclass(frozen=True)
class TreeParams:
    """Pre-pruning controls; depth and leaf size are the working stops."""

    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    min_impurity_decrease: float = 0.0

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be None or >= 0")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.min_impurity_decrease < 0.0:
            raise ValueError("min_impurity_decrease must be >= 0")

    def to_dict(self) -> dict:
        return {
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "min_samples_leaf": self.min_samples_leaf,
            "min_impurity_decrease": self.min_impurity_decrease,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeParams":
        return cls(
            max_depth=d.get("max_depth"),
            min_samples_split=int(d.get("min_samples_split", 2)),
            min_samples_leaf=int(d.get("min_samples_leaf", 1)),
            min_impurity_decrease=float(d.get("min_impurity_decrease", 0.0)),
        )


class RegressionTree:
    """Fitted binary regression tree stored as parallel node arrays.

    Node 0 is the root. Internal nodes route ``x[feature] <= threshold`` to
    the left child; leaves predict the mean of their training targets.
    Instances are immutable after fitting and safe to share across threads.
    """

    def __init__(self, n_features: int, params: TreeParams, nodes: list[dict]):
        self.n_features = n_features
        self.params = params
        self.feature = np.array([n.get("feature", -1) for n in nodes], dtype=np.intp)
        self.threshold = np.array([n.get("threshold", 0.0) for n in nodes], dtype=float)
        self.left = np.array([n.get("left", -1) for n in nodes], dtype=np.intp)
        self.right = np.array([n.get("right", -1) for n in nodes], dtype=np.intp)
        self.value = np.array([n.get("value", 0.0) for n in nodes], dtype=float)
        self.count = np.array([n.get("count", 0) for n in nodes], dtype=np.intp)
        self.is_leaf = np.array([n["kind"] == "leaf" for n in nodes], dtype=bool)
        for arr in (self.feature, self.threshold, self.left, self.right, self.value, self.count, self.is_leaf):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.is_leaf)

    @property
    def n_leaves(self) -> int:
        return int(self.is_leaf.sum())

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=int)
        best = 0
        for i in range(self.n_nodes):
            if not self.is_leaf[i]:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
            else:
                best = max(best, int(depths[i]))
        return best

    def predict(self, x) -> float:
        x = np.asarray(x, dtype=float).ravel()
        if len(x) != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {len(x)}")
        i = 0
        while not self.is_leaf[i]:
            i = self.left[i] if x[self.feature[i]] <= self.threshold[i] else self.right[i]
        return float(self.value[i])

    def predict_batch(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {x.shape[1]}")
        node = np.zeros(x.shape[0], dtype=np.intp)
        while True:
            pending = ~self.is_leaf[node]
            if not pending.any():
                break
            cur = node[pending]
            go_left = x[pending, self.feature[cur]] <= self.threshold[cur]
            node[pending] = np.where(go_left, self.left[cur], self.right[cur])
        return self.value[node]

    def leaf_nodes(self) -> list[tuple[float, int]]:
        """(value, training sample count) for every leaf."""
        return [
            (float(self.value[i]), int(self.count[i]))
            for i in range(self.n_nodes)
            if self.is_leaf[i]
        ]

    def to_json_obj(self) -> dict:
        nodes = []
        for i in range(self.n_nodes):
            if self.is_leaf[i]:
                nodes.append({"kind": "leaf", "value": float(self.value[i]), "count": int(self.count[i])})
            else:
                nodes.append(
                    {
                        "kind": "split",
                        "feature": int(self.feature[i]),
                        "threshold": float(self.threshold[i]),
                        "left": int(self.left[i]),
                        "right": int(self.right[i]),
                    }
                )
        return {"n_features": self.n_features, "params": self.params.to_dict(), "nodes": nodes}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "RegressionTree":
        return cls(
            n_features=int(obj["n_features"]),
            params=TreeParams.from_dict(obj["params"]),
            nodes=list(obj["nodes"]),
        )


def _best_split(x: np.ndarray, y: np.ndarray, min_leaf: int):
    """Exhaustive scan over (feature, midpoint threshold) candidates.

    Returns (gain, feature, threshold) for the split minimizing total child
    SSE, or None when no candidate leaves both children with at least
    ``min_leaf`` samples. Ties prefer the lowest feature index, then the
    smallest threshold.
    """
    m = len(y)
    s_tot = float(y.sum())
    s2_tot = float(np.dot(y, y))
    parent_sse = s2_tot - s_tot * s_tot / m
    best = None
    positions = np.arange(1, m)
    for f in range(x.shape[1]):
        xf = x[:, f]
        order = np.argsort(xf, kind="stable")
        xo = xf[order]
        yo = y[order]
        valid = (xo[1:] != xo[:-1]) & (positions >= min_leaf) & (m - positions >= min_leaf)
        if not valid.any():
            continue
        cs = np.cumsum(yo)[:-1]
        cs2 = np.cumsum(yo * yo)[:-1]
        nl = positions
        nr = m - positions
        child_sse = (cs2 - cs * cs / nl) + ((s2_tot - cs2) - (s_tot - cs) ** 2 / nr)
        child_sse[~valid] = np.inf
        pos = int(np.argmin(child_sse))
        gain = parent_sse - float(child_sse[pos])
        if best is None or gain > best[0]:
            thr = 0.5 * (xo[pos] + xo[pos + 1])
            best = (gain, f, float(thr), order, pos + 1)
    return best


def fit_tree(x, y, params: TreeParams) -> RegressionTree:
    """Fit a CART regression tree by greedy SSE reduction.

    Thresholds are midpoints between consecutive distinct sorted feature
    values. A node becomes a leaf when its targets are constant, it is too
    small to split, the depth cap binds, no candidate respects the leaf-size
    floor, or the best gain falls below ``min_impurity_decrease``. The fit is
    fully deterministic.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] == 0:
        raise EmptyInput("no training rows")
    if x.shape[0] != len(y):
        raise DimensionMismatch(f"x has {x.shape[0]} rows but y has {len(y)} values")
    nodes: list[dict] = [{}]
    # Stack of (node_id, row indices, depth); children are allocated when a
    # split is committed so node ids are stable and deterministic.
    stack = [(0, np.arange(len(y)), 0)]
    while stack:
        node_id, idx, depth = stack.pop()
        ys = y[idx]
        make_leaf = (
            len(idx) < params.min_samples_split
            or (params.max_depth is not None and depth >= params.max_depth)
            or ys.max() == ys.min()
        )
        split_choice = None
        if not make_leaf:
            split_choice = _best_split(x[idx], ys, params.min_samples_leaf)
            if split_choice is None or (
                params.min_impurity_decrease > 0.0 and split_choice[0] < params.min_impurity_decrease
            ):
                make_leaf = True
        if make_leaf:
            nodes[node_id] = {"kind": "leaf", "value": float(ys.mean()), "count": len(idx)}
            continue
        _, feat, thr, order, n_left = split_choice
        left_id = len(nodes)
        right_id = left_id + 1
        nodes.append({})
        nodes.append({})
        nodes[node_id] = {"kind": "split", "feature": feat, "threshold": thr, "left": left_id, "right": right_id}
        sorted_idx = idx[order]
        stack.append((right_id, sorted_idx[n_left:], depth + 1))
        stack.append((left_id, sorted_idx[:n_left], depth + 1))
    return RegressionTree(n_features=x.shape[1], params=params, nodes=nodes)


def predict_tree(tree: RegressionTree, x) -> float:
    """Route one feature vector to its leaf (``<=`` goes left)."""
    return tree.predict(x)
