"""Precision@k, propensity-scored precision@k, accuracy and progressive validation."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .predict import Prediction, predict_class


def _labels(predicted) -> list[int]:
    return predicted.labels if isinstance(predicted, Prediction) else list(predicted)


def precision_at_k(predicted, truth: Iterable[int], k: int) -> float:
    if k <= 0:
        raise ValueError("k must be positive")
    truth = set(truth)
    hits = sum(1 for j in _labels(predicted)[:k] if j in truth)
    return hits / k


@dataclass
class PropensityModel:
    """Inverse propensities q_j = 1 + C (N_j + B)^-A, C = (ln N - 1)(B + 1)^A."""

    A: float
    B: float
    N: int
    counts: dict[int, int] = field(default_factory=dict)

    @property
    def C(self) -> float:
        return (math.log(self.N) - 1.0) * (self.B + 1.0) ** self.A

    def q(self, label: int) -> float:
        return 1.0 + self.C * (self.counts.get(label, 0) + self.B) ** (-self.A)

    @classmethod
    def from_label_sets(cls, label_sets: Iterable[Iterable[int]], A: float, B: float) -> "PropensityModel":
        counts: Counter = Counter()
        n = 0
        for ls in label_sets:
            n += 1
            counts.update(set(ls))
        return cls(A, B, n, dict(counts))


def psp_at_k(predicted, truth: Iterable[int], k: int, p: PropensityModel) -> float:
    if k <= 0:
        raise ValueError("k must be positive")
    truth = set(truth)
    return sum(p.q(j) for j in _labels(predicted)[:k] if j in truth) / k


def accuracy(predicted: Sequence[int | None], truth: Sequence[int]) -> float:
    if not truth:
        return 0.0
    return sum(p == t for p, t in zip(predicted, truth)) / len(truth)


def entropy_reduction(acc_algo: float, acc_const: float) -> float | None:
    """log2(acc_algo) - log2(acc_const) in bits; None when either accuracy is zero."""
    if acc_algo <= 0 or acc_const <= 0:
        return None
    return math.log2(acc_algo) - math.log2(acc_const)


class MostFrequentPredictor:
    """Predicts the most frequent label seen so far (ties: lowest id)."""

    def __init__(self):
        self.counts: Counter = Counter()
        self.best: int | None = None

    def predict(self) -> int | None:
        return self.best

    def observe(self, label: int) -> None:
        self.counts[label] += 1
        c = self.counts[label]
        if self.best is None:
            self.best = label
            return
        cb = self.counts[self.best]
        if c > cb or (c == cb and label < self.best):
            self.best = label


@dataclass
class ProgressPoint:
    t: int
    accuracy: float
    const_accuracy: float
    bits: float | None


def progressive_validate(model, stream: Iterable, checkpoints: Iterable[int] = (), final: bool = True) -> list[ProgressPoint]:
    """Test-then-train over a multi-class stream.

    Each example is first classified by the current model and by the
    running most-frequent-label predictor, then used for training. A point
    is emitted at every checkpoint ``t`` (examples processed so far) and,
    if ``final``, after the last example.
    """
    # a range stays lazy so open-ended schedules cost nothing
    checks = checkpoints if isinstance(checkpoints, range) else set(int(c) for c in checkpoints)
    hits = const_hits = t = 0
    const = MostFrequentPredictor()
    out: list[ProgressPoint] = []

    def point() -> ProgressPoint:
        acc, cacc = hits / t, const_hits / t
        return ProgressPoint(t, acc, cacc, entropy_reduction(acc, cacc))

    for ex in stream:
        if len(ex.labels) != 1:
            raise ValueError(f"example {t} has {len(ex.labels)} labels; multi-class mode needs exactly one")
        ex = model.prepare(ex)
        (y,) = ex.labels
        if model.tree.label_to_leaf:
            pred = predict_class(model.tree, model.regular, ex.features)
        else:
            pred = None
        hits += pred == y
        const_hits += const.predict() == y
        const.observe(y)
        model.learn_one(ex)
        t += 1
        if t in checks:
            out.append(point())
    if final and t and (not out or out[-1].t != t):
        out.append(point())
    return out


def format_curve(points: Sequence[ProgressPoint]) -> str:
    lines = ["t,accuracy,bits"]
    for p in points:
        bits = "" if p.bits is None else repr(p.bits)
        lines.append(f"{p.t},{p.accuracy!r},{bits}")
    return "\n".join(lines) + "\n"
