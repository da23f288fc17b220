"""Rooted, leaf-labeled label trees and positive/negative node assignment."""

from __future__ import annotations

from typing import Iterable


class UnknownLabelError(KeyError):
    pass


class LabelTree:
    """Tree with dense node ids assigned in creation order.

    ``num_labels_below[v]`` counts labels in the subtree of ``v`` (|L_v|) and
    is kept current by every mutation, so policies can read it in O(1).
    """

    def __init__(self):
        self.parent: list[int | None] = [None]
        self.children: list[list[int]] = [[]]
        self.label: list[int | None] = [None]
        self.num_labels_below: list[int] = [0]
        self.label_to_leaf: dict[int, int] = {}
        self.root = 0

    def __len__(self) -> int:
        return len(self.parent)

    @property
    def num_nodes(self) -> int:
        return len(self.parent)

    @property
    def num_labels(self) -> int:
        return len(self.label_to_leaf)

    def is_leaf(self, v: int) -> bool:
        return not self.children[v]

    def leaf_of(self, label: int) -> int:
        try:
            return self.label_to_leaf[label]
        except KeyError:
            raise UnknownLabelError(label) from None

    # -- mutation -----------------------------------------------------------

    def add_node(self, parent: int | None) -> int:
        v = len(self.parent)
        self.parent.append(parent)
        self.children.append([])
        self.label.append(None)
        self.num_labels_below.append(0)
        if parent is not None:
            self.children[parent].append(v)
        return v

    def _bump(self, v: int | None, delta: int) -> None:
        while v is not None:
            self.num_labels_below[v] += delta
            v = self.parent[v]

    def set_label(self, v: int, label: int) -> None:
        if label in self.label_to_leaf:
            raise ValueError(f"label {label} already in tree")
        if self.label[v] is not None:
            raise ValueError(f"node {v} already labeled")
        self.label[v] = label
        self.label_to_leaf[label] = v
        self._bump(v, 1)

    def move_label(self, src: int, dst: int) -> None:
        """Move the label of ``src`` to ``dst`` where ``dst`` is a child of ``src``."""
        label = self.label[src]
        if label is None:
            raise ValueError(f"node {src} has no label")
        if self.parent[dst] != src:
            raise ValueError("label can only move to a child")
        self.label[src] = None
        self.label[dst] = label
        self.label_to_leaf[label] = dst
        self.num_labels_below[dst] += 1

    def push_down_children(self, v: int, new: int) -> None:
        """Re-parent all children of ``v`` except ``new`` under ``new``."""
        moved = [c for c in self.children[v] if c != new]
        for c in moved:
            self.parent[c] = new
        self.children[new] = moved + [c for c in self.children[new] if c not in moved]
        self.children[v] = [new]
        self.num_labels_below[new] += sum(self.num_labels_below[c] for c in moved)

    # -- queries ------------------------------------------------------------

    def path_to_root(self, v: int) -> list[int]:
        path = []
        while v is not None:
            path.append(v)
            v = self.parent[v]
        return path

    def depth(self) -> int:
        """Number of nodes on the longest root-to-leaf path."""
        best = 0
        stack = [(self.root, 1)]
        while stack:
            v, d = stack.pop()
            if d > best:
                best = d
            for c in self.children[v]:
                stack.append((c, d + 1))
        return best

    def leaves(self) -> list[int]:
        return [v for v in range(len(self)) if not self.children[v]]

    def labels(self) -> list[int]:
        return sorted(self.label_to_leaf)

    def copy(self) -> "LabelTree":
        t = LabelTree.__new__(LabelTree)
        t.parent = list(self.parent)
        t.children = [list(c) for c in self.children]
        t.label = list(self.label)
        t.num_labels_below = list(self.num_labels_below)
        t.label_to_leaf = dict(self.label_to_leaf)
        t.root = self.root
        return t

    def structure(self) -> tuple:
        return (tuple(self.parent), tuple(tuple(c) for c in self.children), tuple(self.label))

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelTree):
            return NotImplemented
        return self.root == other.root and self.structure() == other.structure()

    def dump(self) -> str:
        """One line per node: ``id parent label`` with ``-`` for none."""
        lines = []
        for v in range(len(self)):
            p = self.parent[v]
            lab = self.label[v]
            lines.append(f"{v} {'-' if p is None else p} {'-' if lab is None else lab}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_dump(cls, text: str) -> "LabelTree":
        rows = [ln.split() for ln in text.splitlines() if ln.strip()]
        t = cls.__new__(cls)
        n = len(rows)
        t.parent = [None] * n
        t.children = [[] for _ in range(n)]
        t.label = [None] * n
        t.num_labels_below = [0] * n
        t.label_to_leaf = {}
        t.root = 0
        for v, p, lab in rows:
            v = int(v)
            if p != "-":
                t.parent[v] = int(p)
                t.children[int(p)].append(v)
            else:
                t.root = v
            if lab != "-":
                t.label[v] = int(lab)
                t.label_to_leaf[int(lab)] = v
        t.recount()
        return t

    def recount(self) -> None:
        counts = [0] * len(self)
        for v in self._postorder():
            counts[v] = (self.label[v] is not None) + sum(counts[c] for c in self.children[v])
        self.num_labels_below = counts

    def _postorder(self) -> list[int]:
        order, stack = [], [self.root]
        while stack:
            v = stack.pop()
            order.append(v)
            stack.extend(self.children[v])
        return order[::-1]

    # -- checks -------------------------------------------------------------

    def validate(self) -> list[str]:
        """All invariant violations; an empty list means the tree is valid."""
        out = []
        n = len(self)
        if not (len(self.children) == len(self.label) == len(self.num_labels_below) == n):
            return ["node arrays have different lengths"]
        roots = [v for v in range(n) if self.parent[v] is None]
        if roots != [self.root]:
            out.append(f"expected single root {self.root}, found {roots}")
        for v in range(n):
            p = self.parent[v]
            if p is not None and not (0 <= p < n and v in self.children[p]):
                out.append(f"node {v}: parent {p} does not list it as a child")
            for c in self.children[v]:
                if not (0 <= c < n) or self.parent[c] != v:
                    out.append(f"node {v}: child {c} has parent {self.parent[c] if 0 <= c < n else None}")
            if len(set(self.children[v])) != len(self.children[v]):
                out.append(f"node {v}: duplicate children")
            if self.label[v] is not None and self.children[v]:
                out.append(f"node {v}: labeled node has children")
        seen = set()
        stack = [self.root]
        while stack:
            v = stack.pop()
            if v in seen:
                out.append(f"cycle or shared subtree at node {v}")
                continue
            seen.add(v)
            stack.extend(c for c in self.children[v] if 0 <= c < n)
        if len(seen) != n:
            out.append(f"{n - len(seen)} nodes unreachable from root")
        labeled = {self.label[v]: v for v in range(n) if self.label[v] is not None}
        if labeled != self.label_to_leaf:
            out.append("label_to_leaf does not match node labels")
        if sum(lab is not None for lab in self.label) != len(labeled):
            out.append("a label is assigned to more than one node")
        if not out:
            expected = list(self.num_labels_below)
            self.recount()
            if expected != self.num_labels_below:
                out.append("cached subtree label counts are stale")
                self.num_labels_below = expected
        return out


def assign_to_nodes(tree: LabelTree, labels: Iterable[int]) -> tuple[list[int], list[int]]:
    """Positive and negative nodes of one example, in discovery order.

    Leaf-to-root walks that stop at the first node already positive; the
    root starts out negative so an example without labels updates it.
    """
    positive: dict[int, None] = {}
    negative: dict[int, None] = {tree.root: None}
    parent, children = tree.parent, tree.children
    for j in labels:
        v = tree.leaf_of(j)
        while v is not None and v not in positive:
            positive[v] = None
            negative.pop(v, None)
            for c in children[v]:
                if c not in positive:
                    negative[c] = None
            v = parent[v]
    return list(positive), list(negative)


def subtree_labels(tree: LabelTree, v: int) -> set[int]:
    out = set()
    stack = [v]
    while stack:
        u = stack.pop()
        if tree.label[u] is not None:
            out.add(tree.label[u])
        stack.extend(tree.children[u])
    return out


def tree_from_parents(parents: list[int | None], labels: dict[int, int]) -> LabelTree:
    """Build a tree from a parent list (node 0 is the root) and node -> label map."""
    t = LabelTree()
    for v in range(1, len(parents)):
        t.add_node(parents[v])
    for v, lab in labels.items():
        t.set_label(v, lab)
    return t
