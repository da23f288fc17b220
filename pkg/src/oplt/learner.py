"""Online logistic node classifiers trained with AdaGrad.

``Classifier`` owns a weight store. ``InverseClassifier`` owns nothing and
answers with ``1 - p`` of its base while flipping every update target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SparseVector
from .weights import WeightStore, same_entries


@dataclass(frozen=True)
class LearnerConfig:
    learning_rate: float = 1.0
    adagrad_epsilon: float = 0.01
    use_bias: bool = True

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not self.adagrad_epsilon > 0:
            raise ValueError("adagrad_epsilon must be > 0")


class Classifier:
    """Direct logistic model; all weights start at zero."""

    __slots__ = ("config", "store", "update_count")
    is_inverse = False

    def __init__(self, config: LearnerConfig, store: WeightStore | None = None, update_count: int = 0):
        self.config = config
        self.store = store if store is not None else WeightStore()
        self.update_count = update_count

    def predict(self, x: SparseVector) -> float:
        return self.store.predict(x.indices, x.values, self.config.use_bias)

    def update(self, x: SparseVector, target: int) -> None:
        c = self.config
        self.store.update(x.indices, x.values, target, c.learning_rate, c.adagrad_epsilon, c.use_bias)
        self.update_count += 1

    def copy(self) -> "Classifier":
        return Classifier(self.config, self.store.copy(), self.update_count)

    def effective_state(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Sorted (keys, weights, accums) of the function this model computes."""
        return self.store.sorted_arrays()

    @property
    def base(self) -> "Classifier":
        return self


class InverseClassifier:
    """Predicts ``1 - base.predict(x)``; a target t update becomes 1 - t on the base."""

    __slots__ = ("base",)
    is_inverse = True

    def __init__(self, base: Classifier):
        if base.is_inverse:
            raise TypeError("base of an inverse classifier must be direct")
        self.base = base

    @property
    def config(self) -> LearnerConfig:
        return self.base.config

    @property
    def update_count(self) -> int:
        return self.base.update_count

    def predict(self, x: SparseVector) -> float:
        return 1.0 - self.base.predict(x)

    def update(self, x: SparseVector, target: int) -> None:
        self.base.update(x, 1 - target)

    def copy(self):
        raise TypeError("inverse classifiers are never copied")

    def effective_state(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # a direct model trained with flipped targets ends at exactly -w
        keys, w, g = self.base.store.sorted_arrays()
        return keys, -w, g


def new_classifier(config: LearnerConfig) -> Classifier:
    return Classifier(config)


def copy_classifier(c) -> Classifier:
    if c.is_inverse:
        raise TypeError("cannot copy an inverse classifier")
    return c.copy()


def inverse_of(c: Classifier) -> InverseClassifier:
    """Inverse wrapper over a private copy of ``c``, decoupled from later updates."""
    if c.is_inverse:
        raise TypeError("inverse_of expects a direct classifier")
    return InverseClassifier(c.copy())


def same_state(a, b) -> bool:
    """Exact equality of the functions two classifiers compute, plus update counts."""
    if a.update_count != b.update_count:
        return False
    sa = -1.0 if a.is_inverse else 1.0
    sb = -1.0 if b.is_inverse else 1.0
    return same_entries(a.base.store, b.base.store, sa, sb)


def first_difference(a, b) -> tuple[int, float, float] | None:
    """(feature, value_a, value_b) of the first differing weight or accumulator."""
    ka, wa, ga = a.effective_state()
    kb, wb, gb = b.effective_state()
    da = {int(k): (float(x), float(y)) for k, x, y in zip(ka, wa, ga)}
    db = {int(k): (float(x), float(y)) for k, x, y in zip(kb, wb, gb)}
    for k in sorted(set(da) | set(db)):
        va, vb = da.get(k, (0.0, 0.0)), db.get(k, (0.0, 0.0))
        if va[0] != vb[0]:
            return k, va[0], vb[0]
        if va[1] != vb[1]:
            return k, va[1], vb[1]
    if a.update_count != b.update_count:
        return -1, float(a.update_count), float(b.update_count)
    return None
