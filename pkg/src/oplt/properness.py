"""Executable check that online training matches incremental retraining.

For each checked prefix ``t`` the online model's tree is copied and a fresh
set of classifiers is trained on it over the first ``t`` examples; every
regular classifier must match exactly. Because incremental training on a
fixed tree is a left fold, the reference is rebuilt from scratch only when
the tree changes and otherwise advanced by one example
(``full_replay=True`` retrains from scratch at every prefix instead).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .data import Example
from .iplt import IpltTrainer, iplt_train
from .learner import LearnerConfig, first_difference, same_state
from .online import OpltModel, PolicyConfig, init_model
from .tree import assign_to_nodes


@dataclass
class Mismatch:
    prefix: int
    node: int
    feature: int
    online: float
    reference: float

    def __str__(self) -> str:
        what = "update_count" if self.feature == -1 else f"feature {self.feature}"
        return f"prefix {self.prefix}, node {self.node}, {what}: online={self.online!r} reference={self.reference!r}"


@dataclass
class PropernessReport:
    passed: bool = True
    prefixes_checked: int = 0
    max_update_ratio: float = 0.0
    max_visits_over_depth: int = 0
    max_nodes_per_new_label: float = 0.0
    mismatch: Mismatch | None = None
    violations: list[str] = field(default_factory=list)

    def fail(self, msg: str) -> None:
        self.passed = False
        if len(self.violations) < 20:
            self.violations.append(msg)


class _SkipOneAuxUpdate(OpltModel):
    """Fault injection: one auxiliary update goes missing.

    The victim is the most recent update of the first trained auxiliary
    classifier that the tree extension reads, so the fault always becomes
    visible in the classifiers of the nodes created from it.
    """

    _skipped = False

    def update_classifiers(self, x):
        if not self._skipped:
            pos, _ = assign_to_nodes(self.tree, x.labels)
            self._before = {v: self.auxiliary[v].copy() for v in pos if self.auxiliary[v] is not None}
        return super().update_classifiers(x)

    def _aux(self, v):
        a = super()._aux(v)
        if not self._skipped and a.update_count > 0 and v in getattr(self, "_before", {}):
            # roll back the last update, as if it had never been applied
            a = self.auxiliary[v] = self._before[v]
            self._skipped = True
        return a


def compare_classifiers(model: OpltModel, reference: Sequence, prefix: int) -> Mismatch | None:
    if len(reference) != len(model.regular):
        return Mismatch(prefix, -1, -1, float(len(model.regular)), float(len(reference)))
    for v, (a, b) in enumerate(zip(model.regular, reference)):
        if not same_state(a, b):
            feat, va, vb = first_difference(a, b)
            return Mismatch(prefix, v, feat, va, vb)
    return None


def check_properness(
    examples: Iterable[Example],
    learner: LearnerConfig,
    policy: PolicyConfig,
    prefixes: Iterable[int] | None = None,
    normalize: bool = False,
    full_replay: bool = False,
    fault: str | None = None,
    stop_on_mismatch: bool = True,
) -> PropernessReport:
    """Run the online learner over ``examples`` and verify it prefix by prefix.

    Besides classifier equality, checks label completeness, the update-count
    ratio against the reference (at most 2), policy node visits per example
    (at most the tree depth) and nodes created per new label (at most 2).
    """
    model = init_model(learner, policy, normalize)
    if fault == "skip-aux":
        model.__class__ = _SkipOneAuxUpdate
    elif fault is not None:
        raise ValueError(f"unknown fault {fault!r}")
    report = PropernessReport()
    want = None if prefixes is None else set(prefixes)
    seen: list[Example] = []
    labels_so_far: set[int] = set()
    trainer: IpltTrainer | None = None

    for t, raw in enumerate(examples, start=1):
        x = model.prepare(raw)
        seen.append(x)
        new = [j for j in x.labels if j not in model.tree.label_to_leaf]
        nodes_before = model.tree.num_nodes
        model.learn_one(x)
        labels_so_far.update(x.labels)

        if set(model.tree.label_to_leaf) != labels_so_far:
            report.fail(f"prefix {t}: tree labels differ from observed labels")
        if new:
            per_label = (model.tree.num_nodes - nodes_before) / len(new)
            report.max_nodes_per_new_label = max(report.max_nodes_per_new_label, per_label)
            if per_label > 2:
                report.fail(f"prefix {t}: {per_label} nodes per new label")
            depth = model.tree.depth()
            report.max_visits_over_depth = max(report.max_visits_over_depth, model.last_example_visits - depth)
            if model.last_example_visits > depth:
                report.fail(f"prefix {t}: policy visited {model.last_example_visits} nodes, depth {depth}")

        if trainer is None or new:
            trainer = IpltTrainer(model.tree.copy(), learner)
            for ex in seen:
                trainer.fit_one(ex)
        else:
            trainer.fit_one(x)

        ratio = model.counters.total_updates / trainer.num_updates
        report.max_update_ratio = max(report.max_update_ratio, ratio)
        if ratio > 2.0:
            report.fail(f"prefix {t}: update ratio {ratio:.3f} > 2")

        if want is not None and t not in want:
            continue
        report.prefixes_checked += 1
        reference = iplt_train(model.tree.copy(), learner, seen) if full_replay else trainer.classifiers
        problems = model.tree.validate()
        if problems:
            report.fail(f"prefix {t}: invalid tree: {problems[0]}")
        mm = compare_classifiers(model, reference, t)
        if mm is not None:
            report.passed = False
            if report.mismatch is None:
                report.mismatch = mm
            if stop_on_mismatch:
                break
    return report
