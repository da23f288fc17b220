"""Growable sparse weight storage on a Robin Hood open-addressing table.

Keys are feature ids (int64, non-negative) plus the reserved ``BIAS_KEY``.
Each slot holds a weight and the AdaGrad sum of squared gradients. The
table has power-of-two capacity, Fibonacci hashing, linear probing with
displacement-minimizing (Robin Hood) insertion, a 0.9 max load factor and
doubling growth. No deletion: the learners only ever add coordinates.

The numeric kernels are compiled with numba. ``fastmath`` stays off because
bitwise reproducibility of updates is part of the contract.
"""

from __future__ import annotations

import numpy as np
from numba import njit

EMPTY = -1
BIAS_KEY = -2
MAX_LOAD = 0.9
MIN_CAPACITY = 8

_FIB = np.uint64(11400714819323198485)


@njit(cache=True)
def _home(key, bits):
    h = np.uint64(key) * _FIB
    return np.int64(h >> np.uint64(64 - bits))


@njit(cache=True)
def _find(keys, bits, key):
    mask = len(keys) - 1
    i = _home(key, bits)
    d = 0
    while True:
        k = keys[i]
        if k == EMPTY:
            return -1
        if k == key:
            return i
        if ((i - _home(k, bits)) & mask) < d:
            return -1
        i = (i + 1) & mask
        d += 1


@njit(cache=True)
def _insert_new(keys, w, g, bits, key, wval, gval):
    # caller guarantees key is absent and a free slot exists
    mask = len(keys) - 1
    i = _home(key, bits)
    d = 0
    placed = -1
    cur_k = key
    cur_w = wval
    cur_g = gval
    while True:
        k = keys[i]
        if k == EMPTY:
            keys[i] = cur_k
            w[i] = cur_w
            g[i] = cur_g
            return i if placed < 0 else placed
        kd = (i - _home(k, bits)) & mask
        if kd < d:
            keys[i], cur_k = cur_k, k
            tw = w[i]
            w[i] = cur_w
            cur_w = tw
            tg = g[i]
            g[i] = cur_g
            cur_g = tg
            if placed < 0:
                placed = i
            d = kd
        i = (i + 1) & mask
        d += 1


@njit(cache=True)
def _rehash(keys, w, g, new_keys, new_w, new_g, new_bits):
    for i in range(len(keys)):
        if keys[i] != EMPTY:
            _insert_new(new_keys, new_w, new_g, new_bits, keys[i], w[i], g[i])


@njit(cache=True)
def _margin(keys, w, bits, idx, val, use_bias):
    z = 0.0
    for n in range(len(idx)):
        s = _find(keys, bits, idx[n])
        if s >= 0:
            z += w[s] * np.float64(val[n])
    if use_bias:
        s = _find(keys, bits, BIAS_KEY)
        if s >= 0:
            z += w[s]
    return z


@njit(cache=True)
def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


@njit(cache=True)
def _predict(keys, w, bits, idx, val, use_bias):
    return _sigmoid(_margin(keys, w, bits, idx, val, use_bias))


@njit(cache=True)
def _step(keys, w, g, bits, key, grad, lr, eps):
    s = _find(keys, bits, key)
    inserted = 0
    if s < 0:
        s = _insert_new(keys, w, g, bits, key, 0.0, 0.0)
        inserted = 1
    g[s] += grad * grad
    w[s] -= lr * grad / np.sqrt(g[s] + eps)
    return inserted


@njit(cache=True)
def _update(keys, w, g, bits, idx, val, target, lr, eps, use_bias):
    """One AdaGrad step on the logistic loss; returns the number of new keys.

    The residual sigma(z) - target is evaluated as -sigma(-z) for target 1
    and sigma(z) for target 0. Both are one formula applied to +-z, so a
    store whose weights are the exact negation of another's, updated with
    the flipped target, stays the exact negation.
    """
    z = _margin(keys, w, bits, idx, val, use_bias)
    if target == 1:
        r = -(1.0 / (1.0 + np.exp(z)))
    else:
        r = 1.0 / (1.0 + np.exp(-z))
    added = 0
    for n in range(len(idx)):
        added += _step(keys, w, g, bits, idx[n], r * np.float64(val[n]), lr, eps)
    if use_bias:
        added += _step(keys, w, g, bits, BIAS_KEY, r, lr, eps)
    return added


@njit(cache=True)
def _same_entries(ka, wa, ga, sa, kb, wb, gb, bits_b, sb):
    for i in range(len(ka)):
        k = ka[i]
        if k == EMPTY:
            continue
        j = _find(kb, bits_b, k)
        if j < 0 or sa * wa[i] != sb * wb[j] or ga[i] != gb[j]:
            return False
    return True


def same_entries(a: "WeightStore", b: "WeightStore", sign_a: float = 1.0, sign_b: float = 1.0) -> bool:
    """Exact equality of two stores, with weights scaled by +-1 first."""
    if a.size != b.size:
        return False
    return _same_entries(a.keys, a.w, a.g, sign_a, b.keys, b.w, b.g, b.bits, sign_b)


class WeightStore:
    """Map feature id -> (weight, grad_sq_accum); absent keys read as (0, 0)."""

    __slots__ = ("keys", "w", "g", "bits", "size")

    def __init__(self, capacity: int = MIN_CAPACITY):
        cap = MIN_CAPACITY
        while cap < capacity:
            cap *= 2
        self.bits = cap.bit_length() - 1
        self.keys = np.full(cap, EMPTY, dtype=np.int64)
        self.w = np.zeros(cap, dtype=np.float64)
        self.g = np.zeros(cap, dtype=np.float64)
        self.size = 0

    @property
    def capacity(self) -> int:
        return len(self.keys)

    def __len__(self) -> int:
        return self.size

    def reserve(self, extra: int) -> None:
        """Grow so that ``extra`` more keys fit under the load limit."""
        need = self.size + extra
        cap = self.capacity
        if need <= MAX_LOAD * cap:
            return
        while need > MAX_LOAD * cap:
            cap *= 2
        keys = np.full(cap, EMPTY, dtype=np.int64)
        w = np.zeros(cap, dtype=np.float64)
        g = np.zeros(cap, dtype=np.float64)
        bits = cap.bit_length() - 1
        _rehash(self.keys, self.w, self.g, keys, w, g, bits)
        self.keys, self.w, self.g, self.bits = keys, w, g, bits

    def get(self, key: int) -> tuple[float, float]:
        s = _find(self.keys, self.bits, np.int64(key))
        if s < 0:
            return 0.0, 0.0
        return float(self.w[s]), float(self.g[s])

    def __contains__(self, key: int) -> bool:
        return _find(self.keys, self.bits, np.int64(key)) >= 0

    def set(self, key: int, weight: float, accum: float) -> None:
        if accum < 0:
            raise ValueError("grad_sq_accum must be non-negative")
        s = _find(self.keys, self.bits, np.int64(key))
        if s < 0:
            self.reserve(1)
            _insert_new(self.keys, self.w, self.g, self.bits, np.int64(key), weight, accum)
            self.size += 1
        else:
            self.w[s] = weight
            self.g[s] = accum

    def margin(self, idx: np.ndarray, val: np.ndarray, use_bias: bool) -> float:
        return _margin(self.keys, self.w, self.bits, idx, val, use_bias)

    def predict(self, idx: np.ndarray, val: np.ndarray, use_bias: bool) -> float:
        return _predict(self.keys, self.w, self.bits, idx, val, use_bias)

    def update(self, idx, val, target: int, lr: float, eps: float, use_bias: bool) -> None:
        if self.size + len(idx) + 1 > MAX_LOAD * len(self.keys):
            self.reserve(len(idx) + 1)
        self.size += _update(self.keys, self.w, self.g, self.bits, idx, val, target, lr, eps, use_bias)

    def copy(self) -> "WeightStore":
        new = WeightStore.__new__(WeightStore)
        new.keys = self.keys.copy()
        new.w = self.w.copy()
        new.g = self.g.copy()
        new.bits = self.bits
        new.size = self.size
        return new

    def sorted_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(keys, weights, accums) in ascending key order, bias first."""
        occ = self.keys != EMPTY
        keys = self.keys[occ]
        order = np.argsort(keys, kind="stable")
        return keys[order], self.w[occ][order], self.g[occ][order]

    @classmethod
    def from_arrays(cls, keys, weights, accums) -> "WeightStore":
        n = len(keys)
        store = cls(max(MIN_CAPACITY, int(n / MAX_LOAD) + 1))
        for k, wv, gv in zip(np.asarray(keys, dtype=np.int64), weights, accums):
            if _find(store.keys, store.bits, k) >= 0:
                raise ValueError(f"duplicate key {int(k)}")
            _insert_new(store.keys, store.w, store.g, store.bits, k, float(wv), float(gv))
        store.size = n
        return store

    def max_displacement(self) -> int:
        mask = self.capacity - 1
        best = 0
        for i, k in enumerate(self.keys.tolist()):
            if k != EMPTY:
                best = max(best, (i - int(_home(np.int64(k), self.bits))) & mask)
        return best
