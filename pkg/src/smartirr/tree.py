"""From-scratch C4.5-style decision tree.

Binary gain-ratio splits on numeric attributes, pessimistic-error pruning
with the upper binomial confidence limit, probability leaves with Laplace
smoothing, and a versioned JSON model format that bundles the normalization
stats so a saved model is self-contained.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .dataprep import (
    ATTRIBUTES,
    CLASS_VALUES,
    DataError,
    Dataset,
    Instance,
    NormStats,
    apply_norm,
    apply_norm_dataset,
    denorm_value,
    fit_norm_stats,
)

MODEL_FORMAT = "smartirr-tree"
MODEL_VERSION = 1

_EPS = 1e-12


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Leaf:
    counts: tuple[float, ...]  # per class, ordered by class_values

    def __post_init__(self) -> None:
        object.__setattr__(self, "counts", tuple(float(c) for c in self.counts))
        if sum(self.counts) <= 0:
            raise DataError("leaf must cover at least one instance")


@dataclass(frozen=True)
class Split:
    attribute: int
    threshold: float  # left: x <= threshold, right: x > threshold
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Leaf | Split


@dataclass(frozen=True)
class TreeModel:
    root: TreeNode
    norm: NormStats
    class_values: tuple[int, int] = CLASS_VALUES
    min_leaf: int = 2
    confidence: float = 0.25
    attributes: tuple[str, ...] = ATTRIBUTES

    def __post_init__(self) -> None:
        if self.min_leaf < 1:
            raise DataError("min_leaf must be >= 1")
        if not 0 < self.confidence <= 1:
            raise DataError("confidence must be in (0, 1]; 1 disables pruning")


def entropy(class_counts) -> float:
    """Shannon entropy in bits of a class-count vector."""
    total = 0.0
    for c in class_counts:
        if c < 0:
            raise ValueError("counts must be nonnegative")
        total += c
    if total <= 0:
        raise ValueError("counts must sum to a positive total")
    h = 0.0
    for c in class_counts:
        if c > 0:
            p = c / total
            h -= p * math.log2(p)
    return h


@dataclass(frozen=True)
class SplitCandidate:
    threshold: float
    gain: float
    gain_ratio: float


def _class_counts(labels: list[int], class_values) -> list[int]:
    counts = [0] * len(class_values)
    index = {c: i for i, c in enumerate(class_values)}
    for y in labels:
        counts[index[y]] += 1
    return counts


def _best_threshold(values: list[float], labels: list[int], class_values, min_count: int = 1) -> SplitCandidate | None:
    """Best midpoint threshold for one attribute.

    Candidates are midpoints between consecutive distinct sorted values whose
    sides both hold >= min_count instances.  Among positive-gain candidates,
    only those with gain >= the mean positive gain compete (C4.5's guard
    against gain-ratio instability); the winner maximizes gain ratio, ties
    resolved toward the lowest threshold.
    """
    n = len(values)
    pairs = sorted(zip(values, labels))
    parent = _class_counts(labels, class_values)
    parent_h = entropy(parent)
    index = {c: i for i, c in enumerate(class_values)}

    candidates: list[SplitCandidate] = []
    left = [0] * len(class_values)
    for i in range(n - 1):
        left[index[pairs[i][1]]] += 1
        if pairs[i][0] == pairs[i + 1][0]:
            continue
        n_left = i + 1
        n_right = n - n_left
        if n_left < min_count or n_right < min_count:
            continue
        right = [p - l for p, l in zip(parent, left)]
        gain = parent_h - (n_left / n) * entropy(left) - (n_right / n) * entropy(right)
        if gain <= _EPS:
            continue
        split_info = entropy([n_left, n_right])
        threshold = (pairs[i][0] + pairs[i + 1][0]) / 2
        candidates.append(SplitCandidate(threshold, gain, gain / split_info))

    if not candidates:
        return None
    mean_gain = sum(c.gain for c in candidates) / len(candidates)
    best: SplitCandidate | None = None
    for c in candidates:
        if c.gain + _EPS < mean_gain:
            continue
        if best is None or c.gain_ratio > best.gain_ratio + _EPS:
            best = c
    return best


def best_split(d: Dataset, attribute_index: int) -> SplitCandidate | None:
    """Best binary split of a labeled dataset on one numeric attribute."""
    if len(d) < 2:
        raise DataError("need at least 2 instances to split")
    values = []
    for inst in d.instances:
        v = inst.features[attribute_index]
        if v is None:
            raise DataError("clean the dataset before splitting")
        values.append(v)
    return _best_threshold(values, d.labels(), d.class_values)


def _grow(rows: list[tuple[tuple[float, ...], int]], class_values, min_leaf: int) -> TreeNode:
    labels = [y for _, y in rows]
    counts = _class_counts(labels, class_values)
    n = len(rows)
    if max(counts) == n or n < 2 * min_leaf:
        return Leaf(tuple(counts))

    arity = len(rows[0][0])
    chosen: tuple[int, SplitCandidate] | None = None
    for a in range(arity):
        cand = _best_threshold([x[a] for x, _ in rows], labels, class_values, min_count=min_leaf)
        if cand is None:
            continue
        if chosen is None or cand.gain_ratio > chosen[1].gain_ratio + _EPS:
            chosen = (a, cand)
    if chosen is None:
        return Leaf(tuple(counts))

    a, cand = chosen
    left_rows = [(x, y) for x, y in rows if x[a] <= cand.threshold]
    right_rows = [(x, y) for x, y in rows if x[a] > cand.threshold]
    return Split(a, cand.threshold, _grow(left_rows, class_values, min_leaf), _grow(right_rows, class_values, min_leaf))


def build_tree(d: Dataset, min_leaf: int = 2, confidence: float = 0.25, norm_method: str = "zscore") -> TreeModel:
    """Fit normalization stats, grow the tree, then prune (confidence=1 skips)."""
    if len(d) == 0:
        raise DataError("cannot train on an empty dataset")
    labels = d.labels()  # raises if any label missing
    for inst in d.instances:
        if not inst.complete:
            raise DataError("clean the dataset before training")
    if len(d) >= 2:
        stats = fit_norm_stats(d, norm_method)
    else:
        identity = (0.0, 1.0)
        stats = NormStats(norm_method, tuple(identity for _ in range(d.arity)))
    normed = apply_norm_dataset(d, stats)
    rows = [(inst.features, y) for inst, y in zip(normed.instances, labels)]
    root = _grow(rows, d.class_values, min_leaf)
    root = prune_tree(root, confidence)
    return TreeModel(root, stats, d.class_values, min_leaf, confidence, d.attributes)


# -- pruning ------------------------------------------------------------------


def pessimistic_error_limit(errors: float, n: float, confidence: float) -> float:
    """Upper confidence limit U_CF of the binomial error rate.

    The rate p solving P(X <= errors | n, p) = confidence; for zero errors
    the closed form 1 - confidence**(1/n).
    """
    if n <= 0:
        raise ValueError("n must be positive")
    if confidence >= 1:
        return 0.0
    if errors >= n:
        return 1.0
    if errors == 0:
        return 1.0 - confidence ** (1.0 / n)
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = (lo + hi) / 2
        if _binomial_cdf(errors, n, mid) > confidence:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def _binomial_cdf(e: float, n: float, p: float) -> float:
    if p <= 0:
        return 1.0
    if p >= 1:
        return 0.0
    log_p = math.log(p)
    log_q = math.log1p(-p)
    terms = []
    for i in range(int(math.floor(e)) + 1):
        terms.append(
            math.lgamma(n + 1) - math.lgamma(i + 1) - math.lgamma(n - i + 1) + i * log_p + (n - i) * log_q
        )
    top = max(terms)
    return math.exp(top) * sum(math.exp(t - top) for t in terms)


def node_counts(node: TreeNode) -> tuple[float, ...]:
    if isinstance(node, Leaf):
        return node.counts
    left = node_counts(node.left)
    right = node_counts(node.right)
    return tuple(a + b for a, b in zip(left, right))


def _subtree_error_estimate(node: TreeNode, confidence: float) -> float:
    if isinstance(node, Leaf):
        n = sum(node.counts)
        e = n - max(node.counts)
        return n * pessimistic_error_limit(e, n, confidence)
    return _subtree_error_estimate(node.left, confidence) + _subtree_error_estimate(node.right, confidence)


def prune_tree(root: TreeNode, confidence: float) -> TreeNode:
    """Bottom-up subtree replacement; confidence >= 1 returns the tree as is."""
    if confidence >= 1:
        return root
    return _prune(root, confidence)


def _prune(node: TreeNode, confidence: float) -> TreeNode:
    if isinstance(node, Leaf):
        return node
    pruned = Split(node.attribute, node.threshold, _prune(node.left, confidence), _prune(node.right, confidence))
    counts = node_counts(pruned)
    n = sum(counts)
    e = n - max(counts)
    as_leaf = n * pessimistic_error_limit(e, n, confidence)
    as_subtree = _subtree_error_estimate(pruned, confidence)
    if as_leaf <= as_subtree + _EPS:
        return Leaf(counts)
    return pruned


# -- prediction ---------------------------------------------------------------


def predict(model: TreeModel, inst: Instance) -> tuple[int, tuple[float, ...]]:
    """Class and Laplace-smoothed probability distribution for one instance."""
    if len(inst.features) != len(model.norm.params):
        raise DataError("instance arity does not match the model")
    if not inst.complete:
        raise DataError("instance has missing features; clean upstream")
    x = apply_norm(inst, model.norm).features
    node = model.root
    while isinstance(node, Split):
        node = node.left if x[node.attribute] <= node.threshold else node.right
    total = sum(node.counts)
    probs = tuple((c + 1) / (total + 2) for c in node.counts)
    best_i = 0
    for i, c in enumerate(node.counts):
        if c > node.counts[best_i]:
            best_i = i  # ties keep the earlier class: 0, the safe default
    return model.class_values[best_i], probs


def tree_size(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return 1
    return 1 + tree_size(node.left) + tree_size(node.right)


def leaf_count(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return 1
    return leaf_count(node.left) + leaf_count(node.right)


def render_tree(model: TreeModel) -> str:
    """Human-readable tree with thresholds shown in raw sensor units."""
    lines: list[str] = []

    def walk(node: TreeNode, prefix: str) -> None:
        if isinstance(node, Leaf):
            counts = "/".join(f"{c:g}" for c in node.counts)
            best_i = max(range(len(node.counts)), key=lambda i: (node.counts[i], -i))
            lines.append(f"{prefix}-> class {model.class_values[best_i]} ({counts})")
            return
        name = model.attributes[node.attribute]
        raw = denorm_value(node.threshold, model.norm, node.attribute)
        lines.append(f"{prefix}{name} <= {raw:.3f}")
        walk(node.left, prefix + "|   ")
        lines.append(f"{prefix}{name} > {raw:.3f}")
        walk(node.right, prefix + "|   ")

    walk(model.root, "")
    return "\n".join(lines)


# -- model (de)serialization ---------------------------------------------------


def _node_to_json(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {"kind": "leaf", "counts": list(node.counts)}
    return {
        "kind": "split",
        "attribute": node.attribute,
        "threshold": node.threshold,
        "left": _node_to_json(node.left),
        "right": _node_to_json(node.right),
    }


def _node_from_json(obj: dict, arity: int) -> TreeNode:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ModelFormatError("malformed node")
    if obj["kind"] == "leaf":
        try:
            return Leaf(tuple(float(c) for c in obj["counts"]))
        except (KeyError, TypeError, ValueError, DataError) as exc:
            raise ModelFormatError(f"malformed leaf: {exc}") from None
    if obj["kind"] == "split":
        try:
            attribute = int(obj["attribute"])
            threshold = float(obj["threshold"])
            left = _node_from_json(obj["left"], arity)
            right = _node_from_json(obj["right"], arity)
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"malformed split: {exc}") from None
        if not 0 <= attribute < arity:
            raise ModelFormatError(f"split attribute {attribute} out of range")
        return Split(attribute, threshold, left, right)
    raise ModelFormatError(f"unknown node kind {obj['kind']!r}")


def serialize_model(model: TreeModel) -> str:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "hyperparameters": {"min_leaf": model.min_leaf, "confidence": model.confidence},
        "class_values": list(model.class_values),
        "attributes": list(model.attributes),
        "norm": model.norm.to_json(),
        "root": _node_to_json(model.root),
    }
    return json.dumps(doc, indent=2) + "\n"


def deserialize_model(text: str | bytes) -> TreeModel:
    if isinstance(text, bytes):
        text = text.decode("utf-8", "replace")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not a valid model document: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not a decision-model document")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {doc.get('version')!r}")
    try:
        norm = NormStats.from_json(doc["norm"])
        hp = doc["hyperparameters"]
        attributes = tuple(doc["attributes"])
        class_values = tuple(int(c) for c in doc["class_values"])
        root = _node_from_json(doc["root"], len(attributes))
        return TreeModel(root, norm, class_values, int(hp["min_leaf"]), float(hp["confidence"]), attributes)
    except (KeyError, TypeError, ValueError, DataError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"malformed model document: {exc}") from None


def save_model(model: TreeModel, path: str | Path) -> None:
    Path(path).write_text(serialize_model(model))


def load_model(path: str | Path) -> TreeModel:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ModelFormatError(f"cannot read model file: {exc}") from None
    return deserialize_model(text)
