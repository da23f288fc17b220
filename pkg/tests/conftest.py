from __future__ import annotations

import pytest

from oplt.tree import tree_from_parents

# r=0, a=1, b=2, leaves 3..6 carry labels 1..4
T4_PARENTS = [None, 0, 0, 1, 1, 2, 2]
T4_LABELS = {3: 1, 4: 2, 5: 3, 6: 4}
R, A, B, L1, L2, L3, L4 = range(7)


def make_t4():
    return tree_from_parents(T4_PARENTS, T4_LABELS)


class Fixed:
    """Classifier stub with a constant output."""

    is_inverse = False

    def __init__(self, p: float):
        self.p = p

    def predict(self, x) -> float:
        return self.p


@pytest.fixture
def t4():
    return make_t4()


def random_tree(rng, num_labels: int, max_arity: int = 4, chain_prob: float = 0.1):
    """Random leaf-labeled tree; label ids are a random sample of 0..3m."""
    from oplt.tree import LabelTree

    t = LabelTree()
    frontier = [t.root]
    while len(frontier) < num_labels:
        v = frontier.pop(int(rng.integers(len(frontier))))
        k = 1 if rng.random() < chain_prob else int(rng.integers(2, max_arity + 1))
        k = min(k, num_labels - len(frontier)) or 1
        for _ in range(k):
            frontier.append(t.add_node(v))
    labels = rng.choice(3 * num_labels + 1, size=len(frontier), replace=False)
    for v, j in zip(frontier, labels.tolist()):
        t.set_label(v, int(j))
    return t


def brute_force_assign(tree, labels):
    """P = nodes with a label of ``labels`` below them; N = their zero children, or the root."""
    from oplt.tree import subtree_labels

    labels = set(labels)
    z = {v: bool(subtree_labels(tree, v) & labels) for v in range(tree.num_nodes)}
    pos = {v for v, zv in z.items() if zv}
    neg = {v for v, zv in z.items() if not zv and tree.parent[v] is not None and z[tree.parent[v]]}
    if not z[tree.root]:
        neg.add(tree.root)
    return pos, neg


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
