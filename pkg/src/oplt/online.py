"""Online probabilistic label trees: the tree grows while classifiers train.

Every node carries a regular classifier used for prediction and, while the
tree policy may still extend the tree at that node, an auxiliary classifier
that receives only the node's positive updates. New nodes are initialized
from the auxiliary classifier of the node they are attached to, which keeps
the regular classifiers identical to incremental training on the current
tree (see ``properness.py``).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .data import Example
from .iplt import build_kmeans_tree_from_data
from .learner import Classifier, LearnerConfig, inverse_of
from .tree import LabelTree, assign_to_nodes


class PolicyKind(str, Enum):
    RANDOM = "random"
    BEST_GREEDY = "best-greedy"


class AuxRetention(str, Enum):
    ALL = "all"
    PRUNE = "prune"


@dataclass(frozen=True)
class PolicyConfig:
    kind: PolicyKind = PolicyKind.BEST_GREEDY
    alpha: float = 0.75
    b: int = 2
    b_max: int = 100
    rng_seed: int = 0
    aux: AuxRetention = AuxRetention.ALL

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        object.__setattr__(self, "aux", AuxRetention(self.aux))
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.b < 2:
            raise ValueError("b must be >= 2")
        if self.b_max < self.b:
            raise ValueError("b_max must be >= b")


@dataclass
class Counters:
    regular_updates: int = 0
    aux_updates: int = 0
    examples_seen: int = 0
    policy_visits: int = 0
    nodes_created: int = 0

    @property
    def total_updates(self) -> int:
        return self.regular_updates + self.aux_updates


@dataclass
class Selection:
    node: int
    insert: bool
    visits: int


class OpltModel:
    """Tree, regular classifiers, auxiliary classifiers and configuration.

    ``regular[v]`` and ``auxiliary[v]`` are indexed by node id; a pruned
    auxiliary slot holds ``None``. A model without a policy config is a
    fixed-tree (incremental) model and is never extended.
    """

    def __init__(
        self,
        learner: LearnerConfig,
        policy: PolicyConfig | None = None,
        normalize: bool = True,
        tree: LabelTree | None = None,
    ):
        self.learner = learner
        self.policy = policy
        self.normalize = normalize
        self.tree = tree if tree is not None else LabelTree()
        self.regular: list = [Classifier(learner) for _ in range(self.tree.num_nodes)]
        self.auxiliary: list = [Classifier(learner) for _ in range(self.tree.num_nodes)]
        self.rng = random.Random(policy.rng_seed if policy else 0)
        self.counters = Counters()
        self._cache: tuple[int, int] | None = None
        self._example_visits = 0
        self._touched: set[int] = set()

    # -- helpers --------------------------------------------------------------

    def _aux(self, v: int) -> Classifier:
        a = self.auxiliary[v]
        if a is None:
            raise LookupError(f"node {v} has no auxiliary classifier (pruned)")
        return a

    def prepare(self, ex: Example) -> Example:
        return ex.normalized() if self.normalize else ex

    def snapshot(self) -> tuple[LabelTree, list]:
        """Copy of the tree and regular classifiers usable for prediction."""
        regs = [c.copy() if not c.is_inverse else inverse_of(c.base) for c in self.regular]
        return self.tree.copy(), regs

    def strip_aux(self) -> None:
        self.auxiliary = [None] * self.tree.num_nodes

    # -- tree extension -------------------------------------------------------

    def insert_node(self, v: int) -> int:
        """Add ``v'`` as the only child of ``v``, taking over its label or children."""
        aux_v = self._aux(v)
        t = self.tree
        new = t.add_node(v)
        if t.label[v] is not None:
            t.move_label(v, new)
        else:
            t.push_down_children(v, new)
        self.regular.append(aux_v.copy())
        self.auxiliary.append(aux_v.copy())
        self.counters.nodes_created += 1
        self._touched.update((v, new))
        return new

    def add_leaf(self, label: int, v: int) -> int:
        """Attach a new leaf for ``label`` under ``v``."""
        if label in self.tree.label_to_leaf:
            raise ValueError(f"label {label} already in tree")
        aux_v = self._aux(v)
        t = self.tree
        leaf = t.add_node(v)
        t.set_label(leaf, label)
        self.regular.append(inverse_of(aux_v))
        self.auxiliary.append(Classifier(self.learner))
        self.counters.nodes_created += 1
        self._touched.update((v, leaf))
        return leaf

    def policy_select(self, x: Example, step: int) -> Selection:
        """Node to extend and whether an extra node must be inserted first.

        The descent runs once per stream position; further new labels of the
        same example reuse the saved node so they end up close together.
        """
        t, pol = self.tree, self.policy
        children, is_leaf = t.children, t.is_leaf
        visits = 0
        if self._cache is not None and self._cache[0] == step:
            v = self._cache[1]
        else:
            v = t.root
            visits = 1
            while len(children[v]) == pol.b and not all(is_leaf(c) for c in children[v]):
                if pol.kind is PolicyKind.RANDOM:
                    v = children[v][self.rng.randrange(len(children[v]))]
                else:
                    v = self._best_child(v, x)
                visits += 1
        leaf_children = [c for c in children[v] if is_leaf(c)]
        if len(leaf_children) == 1:
            v = leaf_children[0]
            visits += 1
        self._cache = (step, v)
        insert = len(children[v]) == pol.b_max or is_leaf(v)
        return Selection(v, insert, visits)

    def _best_child(self, v: int, x: Example) -> int:
        t, alpha = self.tree, self.policy.alpha
        counts = t.num_labels_below
        balance = math.log(counts[v]) - math.log(len(t.children[v]))
        best, best_score = -1, -math.inf
        for c in t.children[v]:
            eta = self.regular[c].predict(x.features) if alpha < 1.0 else 0.0
            score = (1.0 - alpha) * eta + alpha * balance / counts[c]
            if score > best_score or (score == best_score and c < best):
                best, best_score = c, score
        return best

    def update_tree(self, x: Example, step: int) -> list[int]:
        """Add leaves for the unseen labels of ``x`` in ascending label order."""
        t = self.tree
        new_labels = [j for j in x.labels if j not in t.label_to_leaf]
        for j in new_labels:
            if not t.label_to_leaf:
                t.set_label(t.root, j)
                self._touched.add(t.root)
                continue
            sel = self.policy_select(x, step)
            self.counters.policy_visits += sel.visits
            self._example_visits += sel.visits
            v = sel.node
            if sel.insert:
                self.insert_node(v)
            self.add_leaf(j, v)
        if self.policy.aux is AuxRetention.PRUNE:
            self._prune(self._touched)
        self._touched.clear()
        return new_labels

    def _selectable(self, v: int) -> bool:
        # A node the policies can never pick again: a pass-through internal
        # node (not all leaves, arity b) or a leaf below a pre-leaf with at
        # least two children. Both states are permanent.
        t = self.tree
        ch = t.children[v]
        if ch:
            return not (len(ch) == self.policy.b and not all(t.is_leaf(c) for c in ch))
        p = t.parent[v]
        if p is None:
            return True
        sib = t.children[p]
        return not (len(sib) >= 2 and all(t.is_leaf(c) for c in sib))

    def _prune(self, nodes: Iterable[int]) -> None:
        t = self.tree
        check = set()
        for v in nodes:
            check.add(v)
            check.update(t.children[v])
            if t.parent[v] is not None:
                check.add(t.parent[v])
        for v in sorted(check):
            if self.auxiliary[v] is not None and not self._selectable(v):
                self.auxiliary[v] = None

    def prune_all(self) -> None:
        self._prune(range(self.tree.num_nodes))

    # -- training -------------------------------------------------------------

    def update_classifiers(self, x: Example) -> tuple[list[int], list[int]]:
        pos, neg = assign_to_nodes(self.tree, x.labels)
        reg, aux, f = self.regular, self.auxiliary, x.features
        n_aux = 0
        for v in pos:
            reg[v].update(f, 1)
            a = aux[v]
            if a is not None:
                a.update(f, 1)
                n_aux += 1
        for v in neg:
            reg[v].update(f, 0)
        self.counters.regular_updates += len(pos) + len(neg)
        self.counters.aux_updates += n_aux
        return pos, neg

    def learn_one(self, x: Example) -> None:
        """Process one (already prepared) example: extend the tree, then update."""
        step = self.counters.examples_seen
        self._example_visits = 0
        if self.policy is not None:
            if any(j not in self.tree.label_to_leaf for j in x.labels):
                self.update_tree(x, step)
        self.update_classifiers(x)
        self.counters.examples_seen += 1

    def train_stream(self, stream: Iterable[Example], passes: int = 1, prepare: bool = False, callback=None) -> None:
        if passes < 1:
            raise ValueError("passes must be >= 1")
        data = stream if passes == 1 else list(stream)
        for _ in range(passes):
            for ex in data:
                if prepare:
                    ex = self.prepare(ex)
                self.learn_one(ex)
                if callback is not None:
                    callback(self, ex)

    @property
    def last_example_visits(self) -> int:
        return self._example_visits


def init_model(learner: LearnerConfig, policy: PolicyConfig, normalize: bool = True) -> OpltModel:
    """Lone unlabeled root with a regular and an auxiliary classifier."""
    return OpltModel(learner, policy, normalize)


def train_stream(model: OpltModel, stream: Iterable[Example], passes: int = 1) -> OpltModel:
    model.train_stream(stream, passes)
    return model


def warm_start(
    data: Sequence[Example],
    fraction: float,
    learner: LearnerConfig,
    policy: PolicyConfig,
    normalize: bool = True,
    tree_seed: int = 0,
) -> tuple[OpltModel, int]:
    """Model built from a 2-means tree and trained on the first ``fraction`` of ``data``.

    Returns the model and the number of prefix examples consumed; training
    continues online on ``data[consumed:]``. ``data`` must already be
    prepared (normalized if the model normalizes).
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be in (0, 1)")
    k = math.ceil(fraction * len(data))
    prefix = list(data[:k])
    if not any(ex.labels for ex in prefix):
        return init_model(learner, policy, normalize), 0
    tree = build_kmeans_tree_from_data(prefix, b_max=policy.b_max, seed=tree_seed)
    model = OpltModel(learner, policy, normalize, tree=tree)
    for ex in prefix:
        model.learn_one(ex)
    if policy.aux is AuxRetention.PRUNE:
        model.prune_all()
    return model, k
