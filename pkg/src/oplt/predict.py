"""Top-k prediction by uniform-cost search over path products."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Sequence

from .data import SparseVector
from .tree import LabelTree


@dataclass
class Prediction:
    items: list[tuple[int, float]] = field(default_factory=list)

    @property
    def labels(self) -> list[int]:
        return [j for j, _ in self.items]

    def __len__(self) -> int:
        return len(self.items)


def predict_topk(tree: LabelTree, classifiers: Sequence, x: SparseVector, k: int) -> Prediction:
    """The ``k`` labels with the highest product of node probabilities on their path.

    Queue entries are keyed by (-score, kind, id): at equal score internal
    nodes are expanded before any leaf is emitted, and leaves then pop in
    ascending label order, which matches sorting all labels by
    (-score, label).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not tree.label_to_leaf:
        return Prediction()
    children, label = tree.children, tree.label
    root = tree.root
    heap = []

    def push(v: int, score: float) -> None:
        lab = label[v]
        if lab is not None:
            heapq.heappush(heap, (-score, 1, lab, v))
        else:
            heapq.heappush(heap, (-score, 0, v, v))

    push(root, classifiers[root].predict(x))
    out: list[tuple[int, float]] = []
    while heap and len(out) < k:
        neg, _, _, v = heapq.heappop(heap)
        score = -neg
        if label[v] is not None:
            out.append((label[v], score))
            continue
        for c in children[v]:
            push(c, score * classifiers[c].predict(x))
    return Prediction(out)


def marginals_from_node_probs(tree: LabelTree, node_probs: Sequence[float]) -> dict[int, float]:
    """Multiply node probabilities root-to-leaf for every labeled node."""
    out = {}
    stack = [(tree.root, node_probs[tree.root])]
    while stack:
        v, s = stack.pop()
        if tree.label[v] is not None:
            out[tree.label[v]] = s
        for c in tree.children[v]:
            stack.append((c, s * node_probs[c]))
    return out


def predict_marginals_bruteforce(tree: LabelTree, classifiers: Sequence, x: SparseVector) -> dict[int, float]:
    probs = [c.predict(x) for c in classifiers]
    return marginals_from_node_probs(tree, probs)


def topk_from_marginals(marginals: dict[int, float], k: int) -> Prediction:
    ranked = sorted(marginals.items(), key=lambda item: (-item[1], item[0]))
    return Prediction(ranked[:k])


def predict_class(tree: LabelTree, classifiers: Sequence, x: SparseVector) -> int | None:
    pred = predict_topk(tree, classifiers, x, 1)
    return pred.items[0][0] if pred.items else None


def path_error_bound(tree: LabelTree, eta: Sequence[float], eta_hat: Sequence[float]) -> dict[int, float]:
    """Per label, the sum over its path of parent marginal times node error.

    ``eta`` and ``eta_hat`` hold true and estimated node conditionals; the
    root's parent marginal is 1. The absolute error of every label marginal
    is at most this value.
    """
    out = {}
    stack = [(tree.root, 1.0, 0.0)]
    while stack:
        v, parent_marginal, acc = stack.pop()
        acc += parent_marginal * abs(eta[v] - eta_hat[v])
        if tree.label[v] is not None:
            out[tree.label[v]] = acc
        marginal = parent_marginal * eta[v]
        for c in tree.children[v]:
            stack.append((c, marginal, acc))
    return out
