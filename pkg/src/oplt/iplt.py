"""Incremental PLT training over a fixed tree, and offline tree builders."""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .data import Example, SparseVector
from .learner import Classifier, LearnerConfig
from .tree import LabelTree, UnknownLabelError, assign_to_nodes

UpdateHook = Callable[[int, Example, int], None]


class IpltTrainer:
    """Fresh direct classifier per node, updated one example at a time.

    ``iplt_train`` is a left fold of :meth:`fit_one`, so a trainer that has
    consumed a prefix holds exactly ``iplt_train(tree, prefix)``.
    """

    def __init__(self, tree: LabelTree, config: LearnerConfig, on_update: UpdateHook | None = None):
        self.tree = tree
        self.config = config
        self.classifiers = [Classifier(config) for _ in range(tree.num_nodes)]
        self.num_updates = 0
        self.on_update = on_update

    def fit_one(self, ex: Example) -> None:
        pos, neg = assign_to_nodes(self.tree, ex.labels)
        clfs, hook, x = self.classifiers, self.on_update, ex.features
        for v in pos:
            clfs[v].update(x, 1)
            if hook is not None:
                hook(v, ex, 1)
        for v in neg:
            clfs[v].update(x, 0)
            if hook is not None:
                hook(v, ex, 0)
        self.num_updates += len(pos) + len(neg)


def check_labels_known(tree: LabelTree, data: Iterable[Example]) -> None:
    for ex in data:
        for j in ex.labels:
            if j not in tree.label_to_leaf:
                raise UnknownLabelError(j)


def iplt_train(
    tree: LabelTree,
    config: LearnerConfig,
    data: Sequence[Example],
    passes: int = 1,
    on_update: UpdateHook | None = None,
    pass_seed: int | None = None,
) -> list[Classifier]:
    """Train one classifier per node of a fixed tree.

    Every pass replays ``data`` in the given order unless ``pass_seed`` is
    set, in which case passes after the first use a seeded permutation.
    """
    if passes < 1:
        raise ValueError("passes must be >= 1")
    data = list(data)
    check_labels_known(tree, data)
    trainer = IpltTrainer(tree, config, on_update)
    rng = np.random.default_rng(pass_seed) if pass_seed is not None else None
    for p in range(passes):
        order = data if rng is None or p == 0 else [data[i] for i in rng.permutation(len(data))]
        for ex in order:
            trainer.fit_one(ex)
    return trainer.classifiers


def count_updates(tree: LabelTree, data: Iterable[Example]) -> int:
    total = 0
    for ex in data:
        pos, neg = assign_to_nodes(tree, ex.labels)
        total += len(pos) + len(neg)
    return total


# -- tree builders ------------------------------------------------------------


def _attach_preleaf(tree: LabelTree, node: int, labels: Sequence[int]) -> None:
    for j in labels:
        tree.set_label(tree.add_node(node), j)


def build_balanced_tree(labels: Sequence[int], b: int = 2, b_max: int = 100, seed: int | None = 0) -> LabelTree:
    """Complete ``b``-ary tree over ceil(m / b_max) pre-leaves.

    Labels are shuffled by ``seed`` (``None`` keeps the given order) and
    split into pre-leaf groups whose sizes differ by at most one.
    """
    if b < 2 or b_max < b:
        raise ValueError("need b >= 2 and b_max >= b")
    labels = list(dict.fromkeys(int(j) for j in labels))
    tree = LabelTree()
    if not labels:
        return tree
    if seed is not None:
        labels = [labels[i] for i in np.random.default_rng(seed).permutation(len(labels))]
    groups = [g.tolist() for g in np.array_split(np.array(labels, dtype=np.int64), math.ceil(len(labels) / b_max))]

    def build(node: int, parts: list[list[int]]) -> None:
        if len(parts) == 1:
            _attach_preleaf(tree, node, parts[0])
            return
        for chunk in np.array_split(np.arange(len(parts)), min(b, len(parts))):
            build(tree.add_node(node), [parts[i] for i in chunk])

    build(tree.root, groups)
    return tree


def label_representations(data: Iterable[Example], labels: Sequence[int] | None = None):
    """Per-label mean of unit-normalized example features, re-normalized.

    Returns ``(labels, matrix)`` with one CSR row per label; labels without
    positive examples get a zero row.
    """
    rows, cols, vals = [], [], []
    ex_labels: list[tuple[int, ...]] = []
    n = 0
    for ex in data:
        x = ex.features.normalized()
        rows.append(np.full(len(x), n, dtype=np.int64))
        cols.append(x.indices)
        vals.append(x.values.astype(np.float64))
        ex_labels.append(ex.labels)
        n += 1
    seen = sorted({j for ls in ex_labels for j in ls})
    if labels is None:
        labels = seen
    labels = list(labels)
    col_of = {j: i for i, j in enumerate(labels)}
    d = 1 + max((int(c.max()) for c in cols if len(c)), default=0)
    X = sp.csr_matrix(
        (np.concatenate(vals) if vals else [], (np.concatenate(rows) if rows else [], np.concatenate(cols) if cols else [])),
        shape=(n, d),
    )
    yr, yc = [], []
    for i, ls in enumerate(ex_labels):
        for j in ls:
            if j in col_of:
                yr.append(i)
                yc.append(col_of[j])
    Y = sp.csr_matrix((np.ones(len(yr)), (yr, yc)), shape=(n, len(labels)))
    counts = np.asarray(Y.sum(axis=0)).ravel()
    R = sp.csr_matrix(Y.T @ X)
    R = sp.diags(1.0 / np.maximum(counts, 1.0)) @ R
    norms = np.sqrt(np.asarray(R.multiply(R).sum(axis=1)).ravel())
    R = sp.csr_matrix(sp.diags(np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 0.0)) @ R)
    return labels, R


def _balanced_two_means(R, rng: np.random.Generator, max_iter: int = 25) -> np.ndarray:
    """Boolean mask of rows assigned to the first cluster (ceil(n/2) rows)."""
    n = R.shape[0]
    half = (n + 1) // 2
    i, j = rng.choice(n, size=2, replace=False)
    c0 = R[i].toarray().ravel()
    c1 = R[j].toarray().ravel()
    ids = np.arange(n)
    assign = None
    for _ in range(max_iter):
        margin = R @ c0 - R @ c1
        # sort by margin descending, ties by row index
        order = np.lexsort((ids, -margin))
        new = np.zeros(n, dtype=bool)
        new[order[:half]] = True
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        c0 = np.asarray(R[assign].sum(axis=0)).ravel()
        c1 = np.asarray(R[~assign].sum(axis=0)).ravel()
        n0, n1 = np.linalg.norm(c0), np.linalg.norm(c1)
        if n0 > 0:
            c0 /= n0
        if n1 > 0:
            c1 /= n1
    return assign


def build_kmeans_tree(labels: Sequence[int], reps, b_max: int = 100, seed: int = 0) -> LabelTree:
    """Recursive balanced spherical 2-means until a cluster fits one pre-leaf.

    ``reps`` is a (len(labels), d) matrix of label representations, e.g.
    from :func:`label_representations`.
    """
    labels = list(labels)
    tree = LabelTree()
    if not labels:
        return tree
    rng = np.random.default_rng(seed)
    R = sp.csr_matrix(reps)
    stack = [(tree.root, np.arange(len(labels)))]
    while stack:
        node, rows = stack.pop()
        if len(rows) <= b_max:
            _attach_preleaf(tree, node, [labels[i] for i in rows])
            continue
        first = _balanced_two_means(R[rows], rng)
        left, right = tree.add_node(node), tree.add_node(node)
        # right pushed first so the left subtree gets the lower node ids
        stack.append((right, rows[~first]))
        stack.append((left, rows[first]))
    return tree


def build_kmeans_tree_from_data(data: Sequence[Example], b_max: int = 100, seed: int = 0) -> LabelTree:
    labels, reps = label_representations(data)
    return build_kmeans_tree(labels, reps, b_max=b_max, seed=seed)
