"""Seeded synthetic multi-label streams for checks and demos."""

from __future__ import annotations

import numpy as np

from .data import Example, SparseVector


def synthetic_stream(
    seed: int,
    num_examples: int = 200,
    num_labels: int = 30,
    num_features: int = 50,
    min_labels: int = 1,
    max_labels: int = 4,
    nnz: int = 8,
    zipf: float = 1.1,
) -> list[Example]:
    """Examples whose features are noisy mixtures of per-label prototypes.

    Label frequencies follow a Zipf-like law, so new labels keep arriving
    throughout the stream.
    """
    rng = np.random.default_rng(seed)
    nnz = min(nnz, num_features)
    protos = [rng.choice(num_features, size=nnz, replace=False) for _ in range(num_labels)]
    weights = 1.0 / np.arange(1, num_labels + 1) ** zipf
    weights /= weights.sum()
    perm = rng.permutation(num_labels)
    out = []
    for _ in range(num_examples):
        k = int(rng.integers(min_labels, max_labels + 1))
        k = min(k, num_labels)
        labels = perm[rng.choice(num_labels, size=k, replace=False, p=weights)] if k else []
        feats: dict[int, float] = {}
        for j in labels:
            for f in protos[j][: max(1, nnz // 2 + int(rng.integers(0, nnz // 2 + 1)))]:
                feats[int(f)] = feats.get(int(f), 0.0) + float(rng.uniform(0.5, 1.5))
        for f in rng.choice(num_features, size=2, replace=False):
            feats[int(f)] = feats.get(int(f), 0.0) + float(rng.uniform(0.0, 0.5))
        out.append(Example(SparseVector.from_pairs(feats.items()), tuple(int(j) for j in labels)))
    return out


def multiclass_stream(seed: int, num_examples: int, num_classes: int, num_features: int = 20, noise: float = 0.3) -> list[Example]:
    """Single-label stream with Gaussian class centroids in a dense space."""
    rng = np.random.default_rng(seed)
    centroids = rng.normal(size=(num_classes, num_features))
    out = []
    for _ in range(num_examples):
        y = int(rng.integers(num_classes))
        x = centroids[y] + noise * rng.normal(size=num_features)
        out.append(Example(SparseVector.from_dense(x), (y,)))
    return out
