"""LambdaMART: gradient-boosted regression trees driven by LambdaRank
gradients of NDCG@k.

Per boosting round, every query group contributes pairwise lambda gradients
weighted by the NDCG@k change of swapping the pair in the current ranking;
one regression tree is fit to the lambdas (split criterion: weighted
squared-error reduction, leaf values: Newton steps) and appended with
shrinkage. Training is deterministic given the input order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    CorruptModel,
    DegenerateInput,
    LengthMismatch,
    NoTrainablePairs,
    SchemaMismatch,
    UnsupportedVersion,
)
from .features import FeatureVector

_EPS = 1e-12


@dataclass(frozen=True)
class LtrParams:
    n_trees: int = 1000
    n_leaves: int = 10
    shrinkage: float = 0.1
    min_leaf_support: int = 1
    n_threshold_candidates: int = 256
    train_metric_k: int = 10
    sigma: float = 1.0
    early_stop_rounds: int = 100
    seed: int = 42  # reserved for sampling extensions; training is deterministic

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.n_leaves < 2:
            raise ValueError("n_leaves must be >= 2")
        if not 0.0 < self.shrinkage <= 1.0:
            raise ValueError("shrinkage must be in (0, 1]")


# ---------------------------------------------------------------------------
# Lambda gradients
# ---------------------------------------------------------------------------

def _position_discounts(n: int, k: int) -> np.ndarray:
    """Discount per 1-based position: 1/log2(pos+1) up to k, 0 beyond."""
    positions = np.arange(1, n + 1, dtype=np.float64)
    discounts = 1.0 / np.log2(positions + 1.0)
    discounts[positions > k] = 0.0
    return discounts


def compute_lambdas(
    scores: Sequence[float],
    labels: Sequence[int],
    k: int,
    sigma: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Lambda gradients and Newton weights for one query group.

    For every pair with labels[i] > labels[j]:
      rho      = 1 / (1 + exp(sigma * (scores[i] - scores[j])))
      lambda_i += sigma * rho * |dNDCG@k(i,j)|      (lambda_j loses the same)
      weight   += sigma^2 * rho * (1-rho) * |dNDCG@k(i,j)|   (both sides)

    |dNDCG@k(i,j)| is the NDCG@k change from swapping i and j in the
    current score-sorted order (stable sort, gain 2^label - 1, discount
    1/log2(1+rank)). Groups with zero ideal DCG yield all-zero output.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if s.shape != y.shape or s.ndim != 1:
        raise LengthMismatch(f"scores {s.shape} vs labels {y.shape}")
    n = s.shape[0]
    lambdas = np.zeros(n)
    weights = np.zeros(n)
    if n < 2:
        return lambdas, weights

    gains = np.exp2(y) - 1.0
    discounts = _position_discounts(n, k)
    idcg = float(np.sort(gains)[::-1] @ discounts)
    if idcg <= 0.0:
        return lambdas, weights

    order = np.argsort(-s, kind="stable")
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)
    disc = discounts[pos]

    # Swapping i and j changes DCG by (g_i - g_j) * (disc_j - disc_i).
    delta = np.abs(gains[:, None] - gains[None, :]) * np.abs(disc[:, None] - disc[None, :]) / idcg
    with np.errstate(over="ignore"):
        rho = 1.0 / (1.0 + np.exp(sigma * (s[:, None] - s[None, :])))
    better = y[:, None] > y[None, :]

    lam = np.where(better, sigma * rho * delta, 0.0)
    wgt = np.where(better, sigma * sigma * rho * (1.0 - rho) * delta, 0.0)
    lambdas = lam.sum(axis=1) - lam.sum(axis=0)
    weights = wgt.sum(axis=1) + wgt.sum(axis=0)
    return lambdas, weights


# ---------------------------------------------------------------------------
# Regression trees
# ---------------------------------------------------------------------------

@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass
class RegressionTree:
    root: TreeNode

    def predict_one(self, x: Sequence[float]) -> float:
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.value

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0], dtype=np.float64)
        self._fill(self.root, X, np.arange(X.shape[0]), out)
        return out

    def _fill(self, node: TreeNode, X: np.ndarray, idx: np.ndarray, out: np.ndarray) -> None:
        if node.is_leaf:
            out[idx] = node.value
            return
        go_left = X[idx, node.feature] <= node.threshold
        self._fill(node.left, X, idx[go_left], out)
        self._fill(node.right, X, idx[~go_left], out)

    def n_leaves(self) -> int:
        def count(node: TreeNode) -> int:
            return 1 if node.is_leaf else count(node.left) + count(node.right)
        return count(self.root)

    def max_feature_index(self) -> int:
        best = -1
        stack = [self.root]
        while stack:
            node = stack.pop()
            if not node.is_leaf:
                best = max(best, node.feature)
                stack.extend((node.left, node.right))
        return best


def compute_thresholds(X: np.ndarray, n_candidates: int) -> list[np.ndarray]:
    """Per-feature split thresholds: midpoints of adjacent distinct quantile
    values of the training distribution, at most n_candidates quantiles."""
    thresholds = []
    for f in range(X.shape[1]):
        col = X[:, f]
        uniq = np.unique(col)
        if uniq.size > n_candidates:
            uniq = np.unique(np.quantile(col, np.linspace(0.0, 1.0, n_candidates)))
        if uniq.size < 2:
            thresholds.append(np.empty(0, dtype=np.float64))
        else:
            thresholds.append((uniq[:-1] + uniq[1:]) / 2.0)
    return thresholds


@dataclass(eq=False)
class _Split:
    gain: float
    feature: int
    threshold: float
    left_idx: np.ndarray
    right_idx: np.ndarray


@dataclass(eq=False)
class _GrowingLeaf:
    idx: np.ndarray
    order: int  # creation order, breaks gain ties deterministically
    best: _Split | None = None


def _leaf_value(targets: np.ndarray, weights: np.ndarray) -> float:
    return float(targets.sum() / (weights.sum() + _EPS))


def _best_split(
    X: np.ndarray,
    t: np.ndarray,
    w: np.ndarray,
    idx: np.ndarray,
    thresholds: list[np.ndarray],
    min_support: int,
) -> _Split | None:
    """Best weighted-SSE-reduction split over the precomputed thresholds.

    Gain ties are broken by (lowest feature index, lowest threshold): the
    scan goes through features and thresholds in ascending order and only a
    strictly larger gain replaces the incumbent.
    """
    if idx.size < 2 * min_support:
        return None
    wt = w[idx] * t[idx]
    total_w = w[idx].sum()
    total_wt = wt.sum()
    parent_term = total_wt * total_wt / (total_w + _EPS)

    best: _Split | None = None
    for f in range(X.shape[1]):
        cuts = thresholds[f]
        if cuts.size == 0:
            continue
        col = X[idx, f]
        # bucket b: first cut index with col <= cut; rows in buckets <= j go
        # left of cut j
        bucket = np.searchsorted(cuts, col, side="left")
        n_buckets = cuts.size + 1
        cnt = np.bincount(bucket, minlength=n_buckets)
        sw = np.bincount(bucket, weights=w[idx], minlength=n_buckets)
        swt = np.bincount(bucket, weights=wt, minlength=n_buckets)

        left_cnt = np.cumsum(cnt)[:-1]
        left_sw = np.cumsum(sw)[:-1]
        left_swt = np.cumsum(swt)[:-1]
        right_cnt = idx.size - left_cnt
        right_sw = total_w - left_sw
        right_swt = total_wt - left_swt

        valid = (left_cnt >= min_support) & (right_cnt >= min_support)
        if not valid.any():
            continue
        gain = (
            left_swt * left_swt / (left_sw + _EPS)
            + right_swt * right_swt / (right_sw + _EPS)
            - parent_term
        )
        gain = np.where(valid, gain, -np.inf)
        j = int(np.argmax(gain))
        if gain[j] > 0.0 and (best is None or gain[j] > best.gain):
            go_left = col <= cuts[j]
            best = _Split(
                gain=float(gain[j]),
                feature=f,
                threshold=float(cuts[j]),
                left_idx=idx[go_left],
                right_idx=idx[~go_left],
            )
    return best


def fit_tree(
    X: np.ndarray,
    targets: np.ndarray,
    weights: np.ndarray,
    params: LtrParams,
    thresholds: list[np.ndarray] | None = None,
) -> RegressionTree:
    """Grow one regression tree best-first up to n_leaves leaves.

    At each step the growable leaf with the largest positive gain is split;
    leaf values are Newton steps sum(targets) / (sum(weights) + eps).
    """
    X = np.asarray(X, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DegenerateInput("feature matrix must be non-empty and 2-D")
    if not (X.shape[0] == targets.shape[0] == weights.shape[0]):
        raise LengthMismatch("rows, targets and weights must align")
    if thresholds is None:
        thresholds = compute_thresholds(X, params.n_threshold_candidates)

    root_node = TreeNode()
    root_leaf = _GrowingLeaf(idx=np.arange(X.shape[0]), order=0)
    root_leaf.best = _best_split(X, targets, weights, root_leaf.idx, thresholds,
                                 params.min_leaf_support)
    node_of: dict[int, TreeNode] = {0: root_node}
    leaves: list[_GrowingLeaf] = [root_leaf]
    next_order = 1

    while len(leaves) < params.n_leaves:
        candidates = [lf for lf in leaves if lf.best is not None]
        if not candidates:
            break
        chosen = max(candidates, key=lambda lf: (lf.best.gain, -lf.order))
        split = chosen.best
        node = node_of.pop(chosen.order)
        node.feature = split.feature
        node.threshold = split.threshold
        node.left = TreeNode()
        node.right = TreeNode()
        leaves.remove(chosen)
        for child_node, child_idx in ((node.left, split.left_idx), (node.right, split.right_idx)):
            leaf = _GrowingLeaf(idx=child_idx, order=next_order)
            leaf.best = _best_split(X, targets, weights, child_idx, thresholds,
                                    params.min_leaf_support)
            node_of[next_order] = child_node
            leaves.append(leaf)
            next_order += 1

    for leaf in leaves:
        node_of[leaf.order].value = _leaf_value(targets[leaf.idx], weights[leaf.idx])
    return RegressionTree(root=root_node)


# ---------------------------------------------------------------------------
# Model, training loop, serialization
# ---------------------------------------------------------------------------

@dataclass
class LtrModel:
    schema: str
    trees: list[RegressionTree] = field(default_factory=list)
    shrinkage: float = 0.1
    feature_count: int = 0

    def predict_row(self, values: Sequence[float]) -> float:
        if len(values) != self.feature_count:
            raise SchemaMismatch(
                f"model expects {self.feature_count} features, got {len(values)}"
            )
        return self.shrinkage * sum(tree.predict_one(values) for tree in self.trees)

    def predict(self, vector: FeatureVector) -> float:
        if vector.schema != self.schema:
            raise SchemaMismatch(f"model schema {self.schema!r} != vector schema {vector.schema!r}")
        return self.predict_row(vector.values)

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or (self.feature_count and X.shape[1] != self.feature_count):
            raise SchemaMismatch(f"matrix shape {X.shape} does not match feature_count")
        out = np.zeros(X.shape[0])
        for tree in self.trees:
            out += tree.predict_matrix(X)
        return self.shrinkage * out


@dataclass
class GroupedData:
    """Feature vectors flattened to arrays with per-group slices."""
    X: np.ndarray
    y: np.ndarray
    slices: list[tuple[str, slice]]
    schema: str
    doc_ids: list[str]

    @classmethod
    def from_groups(cls, groups: Mapping[str, Sequence[FeatureVector]]) -> "GroupedData":
        if not groups:
            raise NoTrainablePairs("no groups supplied")
        schema: str | None = None
        width: int | None = None
        rows, labels, doc_ids, slices = [], [], [], []
        start = 0
        for key, vectors in groups.items():
            for vec in vectors:
                if schema is None:
                    schema, width = vec.schema, len(vec.values)
                elif vec.schema != schema or len(vec.values) != width:
                    raise SchemaMismatch(
                        f"group {key!r}: schema {vec.schema!r} != {schema!r}"
                    )
                rows.append(vec.values)
                labels.append(vec.label)
                doc_ids.append(vec.doc_id)
            slices.append((key, slice(start, start + len(vectors))))
            start += len(vectors)
        return cls(
            X=np.asarray(rows, dtype=np.float64),
            y=np.asarray(labels, dtype=np.float64),
            slices=slices,
            schema=schema or "",
            doc_ids=doc_ids,
        )

    def has_labeled_pair(self) -> bool:
        return any(np.unique(self.y[sl]).size > 1 for _, sl in self.slices)


def _mean_ndcg(scores: np.ndarray, data: GroupedData, k: int) -> float:
    """Mean NDCG@k over groups with nonzero ideal DCG (others excluded)."""
    from .evaluation import ndcg_at_k

    values = []
    for _, sl in data.slices:
        y = data.y[sl]
        if not np.any(y > 0):
            continue
        order = np.argsort(-scores[sl], kind="stable")
        values.append(ndcg_at_k([int(v) for v in y[order]], k))
    return float(np.mean(values)) if values else 0.0


@dataclass
class TrainingLog:
    rounds: list[dict] = field(default_factory=list)
    best_round: int = 0
    best_metric: float = float("-inf")


def train(
    train_groups: Mapping[str, Sequence[FeatureVector]],
    valid_groups: Mapping[str, Sequence[FeatureVector]] | None = None,
    params: LtrParams = LtrParams(),
    log: TrainingLog | None = None,
) -> LtrModel:
    """Boost `n_trees` rounds of lambda-gradient trees; with a validation
    set, roll back to the best round once `early_stop_rounds` rounds pass
    without improvement."""
    data = GroupedData.from_groups(train_groups)
    if not data.has_labeled_pair():
        raise NoTrainablePairs("every group has uniform labels")
    valid = GroupedData.from_groups(valid_groups) if valid_groups else None
    if valid is not None and valid.schema != data.schema:
        raise SchemaMismatch(f"valid schema {valid.schema!r} != train schema {data.schema!r}")

    thresholds = compute_thresholds(data.X, params.n_threshold_candidates)
    model = LtrModel(schema=data.schema, shrinkage=params.shrinkage,
                     feature_count=data.X.shape[1])
    scores = np.zeros(data.X.shape[0])
    valid_scores = np.zeros(valid.X.shape[0]) if valid is not None else None

    best_round = 0
    best_metric = float("-inf")
    stale = 0
    for round_no in range(1, params.n_trees + 1):
        lambdas = np.zeros_like(scores)
        weights = np.zeros_like(scores)
        for _, sl in data.slices:
            lam, wgt = compute_lambdas(scores[sl], data.y[sl],
                                       params.train_metric_k, params.sigma)
            lambdas[sl] = lam
            weights[sl] = wgt
        tree = fit_tree(data.X, lambdas, weights, params, thresholds)
        model.trees.append(tree)
        scores += params.shrinkage * tree.predict_matrix(data.X)

        entry = {"round": round_no,
                 "train_ndcg": _mean_ndcg(scores, data, params.train_metric_k)}
        if valid is not None:
            valid_scores += params.shrinkage * tree.predict_matrix(valid.X)
            metric = _mean_ndcg(valid_scores, valid, params.train_metric_k)
            entry["valid_ndcg"] = metric
            if metric > best_metric:
                best_metric = metric
                best_round = round_no
                stale = 0
            else:
                stale += 1
            if log is not None:
                log.rounds.append(entry)
            if stale >= params.early_stop_rounds:
                break
        elif log is not None:
            log.rounds.append(entry)

    if valid is not None and best_round > 0:
        model.trees = model.trees[:best_round]
        if log is not None:
            log.best_round = best_round
            log.best_metric = best_metric
    return model


def predict(model: LtrModel, vector: FeatureVector) -> float:
    return model.predict(vector)


# ---------------------------------------------------------------------------
# Text serialization: header line + one s-expression tree per line
# ---------------------------------------------------------------------------

def _node_to_sexpr(node: TreeNode) -> str:
    if node.is_leaf:
        return f"(l {node.value!r})"
    return (f"(s {node.feature} {node.threshold!r} "
            f"{_node_to_sexpr(node.left)} {_node_to_sexpr(node.right)})")


def _tokenize_sexpr(text: str) -> list[str]:
    return text.replace("(", " ( ").replace(")", " ) ").split()


def _parse_node(tokens: list[str], pos: int) -> tuple[TreeNode, int]:
    if pos >= len(tokens) or tokens[pos] != "(":
        raise CorruptModel(f"expected '(' at token {pos}")
    pos += 1
    if pos >= len(tokens):
        raise CorruptModel("truncated tree expression")
    tag = tokens[pos]
    pos += 1
    try:
        if tag == "l":
            node = TreeNode(value=float(tokens[pos]))
            pos += 1
        elif tag == "s":
            feature = int(tokens[pos])
            threshold = float(tokens[pos + 1])
            left, pos = _parse_node(tokens, pos + 2)
            right, pos = _parse_node(tokens, pos)
            node = TreeNode(feature=feature, threshold=threshold, left=left, right=right)
        else:
            raise CorruptModel(f"unknown node tag {tag!r}")
    except (IndexError, ValueError) as exc:
        raise CorruptModel(f"bad tree expression: {exc}") from None
    if pos >= len(tokens) or tokens[pos] != ")":
        raise CorruptModel(f"expected ')' at token {pos}")
    return node, pos + 1


def save_model(model: LtrModel, sink: IO[str]) -> None:
    sink.write(
        f"lambdamart v1 features={model.feature_count} trees={len(model.trees)} "
        f"shrinkage={model.shrinkage!r} schema={model.schema}\n"
    )
    for tree in model.trees:
        sink.write(_node_to_sexpr(tree.root) + "\n")


def load_model(source: Iterable[str]) -> LtrModel:
    lines = iter(source)
    try:
        header = next(lines).strip()
    except StopIteration:
        raise CorruptModel("empty model file") from None
    parts = header.split()
    if len(parts) < 2 or parts[0] != "lambdamart":
        raise CorruptModel(f"bad header {header!r}")
    if parts[1] != "v1":
        raise UnsupportedVersion(f"unsupported model version {parts[1]!r}")
    fields = {}
    for part in parts[2:]:
        if "=" not in part:
            raise CorruptModel(f"bad header field {part!r}")
        key, value = part.split("=", 1)
        fields[key] = value
    try:
        feature_count = int(fields["features"])
        n_trees = int(fields["trees"])
        shrinkage = float(fields["shrinkage"])
        schema = fields["schema"]
    except (KeyError, ValueError) as exc:
        raise CorruptModel(f"bad header: {exc}") from None

    trees = []
    for _ in range(n_trees):
        try:
            line = next(lines).strip()
        except StopIteration:
            raise CorruptModel(f"expected {n_trees} trees, found {len(trees)}") from None
        tokens = _tokenize_sexpr(line)
        node, end = _parse_node(tokens, 0)
        if end != len(tokens):
            raise CorruptModel("trailing tokens after tree expression")
        trees.append(RegressionTree(root=node))
    model = LtrModel(schema=schema, trees=trees, shrinkage=shrinkage,
                     feature_count=feature_count)
    for tree in trees:
        if tree.max_feature_index() >= feature_count:
            raise CorruptModel("tree references feature beyond feature_count")
    return model
