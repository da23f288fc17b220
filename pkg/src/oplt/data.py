"""Sparse examples and the XMLC-repository text format.

A data file starts with a header line ``N d m`` followed by one example per
line::

    3,7 0:1.0 5:0.5

The label list may be empty, in which case the line starts with a space.
"""

from __future__ import annotations

import io
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Iterator, TextIO

import numpy as np


class DataFormatError(ValueError):
    """Raised for malformed header or example lines."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class SparseVector:
    """Canonical sparse vector: strictly increasing ids, no explicit zeros."""

    indices: np.ndarray  # int64
    values: np.ndarray  # float32

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]]) -> "SparseVector":
        pairs = list(pairs)
        seen = set()
        for fid, _ in pairs:
            if fid < 0:
                raise ValueError(f"negative feature id {fid}")
            if fid in seen:
                raise ValueError(f"duplicate feature id {fid}")
            seen.add(fid)
        pairs.sort(key=lambda p: p[0])
        idx = np.fromiter((p[0] for p in pairs), dtype=np.int64, count=len(pairs))
        val = np.fromiter((p[1] for p in pairs), dtype=np.float32, count=len(pairs))
        keep = val != 0
        if not keep.all():
            idx, val = idx[keep], val[keep]
        return cls(idx, val)

    @classmethod
    def from_dense(cls, dense) -> "SparseVector":
        dense = np.asarray(dense, dtype=np.float32)
        nz = np.flatnonzero(dense)
        return cls(nz.astype(np.int64), dense[nz])

    @classmethod
    def empty(cls) -> "SparseVector":
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.float32))

    def __len__(self) -> int:
        return len(self.indices)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return np.array_equal(self.indices, other.indices) and np.array_equal(
            self.values, other.values
        )

    def items(self) -> list[tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.values.tolist()))

    def normalized(self) -> "SparseVector":
        norm = math.sqrt(float(np.dot(self.values.astype(np.float64), self.values)))
        if norm == 0.0:
            return self
        vals = (self.values.astype(np.float64) / norm).astype(np.float32)
        keep = vals != 0
        if keep.all():
            return SparseVector(self.indices, vals)
        return SparseVector(self.indices[keep], vals[keep])

    def is_canonical(self) -> bool:
        return bool(np.all(np.diff(self.indices) > 0) and np.all(self.values != 0))


@dataclass(frozen=True)
class Example:
    features: SparseVector
    labels: tuple[int, ...] = field(default=())

    def __post_init__(self):
        # labels kept sorted and unique so every traversal order is deterministic
        labels = tuple(sorted(set(int(j) for j in self.labels)))
        if labels and labels[0] < 0:
            raise ValueError(f"negative label id {labels[0]}")
        object.__setattr__(self, "labels", labels)

    def normalized(self) -> "Example":
        return Example(self.features.normalized(), self.labels)


@dataclass(frozen=True)
class DatasetHeader:
    num_examples: int
    num_features: int
    num_labels: int


def parse_header(line: str, lineno: int = 1) -> DatasetHeader:
    tokens = line.split()
    if len(tokens) != 3:
        raise DataFormatError(f"header needs 3 counts, got {len(tokens)}", lineno)
    try:
        n, d, m = (int(t) for t in tokens)
    except ValueError:
        raise DataFormatError(f"non-integer header token in {line.strip()!r}", lineno)
    if min(n, d, m) < 0:
        raise DataFormatError("negative count in header", lineno)
    return DatasetHeader(n, d, m)


def parse_example(line: str, lineno: int | None = None) -> Example:
    line = line.rstrip("\r\n")
    labels_tok, _, rest = line.partition(" ")
    labels: list[int] = []
    if labels_tok:
        for tok in labels_tok.split(","):
            if ":" in tok:
                # no label list at all: the first token is a feature
                rest = line
                labels = []
                break
            try:
                lab = int(tok)
            except ValueError:
                raise DataFormatError(f"bad label {tok!r}", lineno)
            if lab < 0:
                raise DataFormatError(f"negative label id {lab}", lineno)
            labels.append(lab)
    pairs = []
    for tok in rest.split():
        fid_s, sep, val_s = tok.partition(":")
        if not sep:
            raise DataFormatError(f"feature token {tok!r} lacks ':'", lineno)
        try:
            fid = int(fid_s)
        except ValueError:
            raise DataFormatError(f"bad feature id {fid_s!r}", lineno)
        try:
            val = float(val_s)
        except ValueError:
            raise DataFormatError(f"unparsable value {val_s!r}", lineno)
        pairs.append((fid, val))
    try:
        features = SparseVector.from_pairs(pairs)
    except ValueError as exc:
        raise DataFormatError(str(exc), lineno)
    return Example(features, tuple(labels))


def format_value(v: float) -> str:
    return str(np.float32(v))


def format_example(ex: Example) -> str:
    labels = ",".join(str(j) for j in ex.labels)
    feats = " ".join(
        f"{i}:{format_value(v)}" for i, v in zip(ex.features.indices.tolist(), ex.features.values)
    )
    return f"{labels} {feats}" if feats else labels + " "


def _open_lines(source) -> tuple[Iterator[str], TextIO | None]:
    if isinstance(source, (str, os.PathLike)):
        fh = open(source, "r", encoding="utf-8")
        return iter(fh), fh
    if isinstance(source, io.IOBase) or hasattr(source, "readline"):
        return iter(source), None
    return iter(source), None


def iter_examples(source) -> Iterator[Example]:
    """Stream examples in file order, holding one line at a time."""
    lines, fh = _open_lines(source)
    try:
        try:
            first = next(lines)
        except StopIteration:
            raise DataFormatError("missing header line", 1)
        header = parse_header(first, 1)
        count = 0
        for lineno, line in enumerate(lines, start=2):
            if not line.strip() and not line.startswith(" "):
                continue
            yield parse_example(line, lineno)
            count += 1
        if count != header.num_examples:
            warnings.warn(
                f"header declares {header.num_examples} examples, found {count}",
                stacklevel=2,
            )
    finally:
        if fh is not None:
            fh.close()


def read_header(source) -> DatasetHeader:
    lines, fh = _open_lines(source)
    try:
        return parse_header(next(lines), 1)
    finally:
        if fh is not None:
            fh.close()


def stream_dataset(source, shuffle_seed: int | None = None) -> Iterator[Example]:
    """Yield the dataset's examples, optionally as a seeded permutation.

    Without a seed this is a pure streaming reader. With a seed the whole
    file is buffered and yielded in the order of
    ``np.random.default_rng(shuffle_seed).permutation(n)``.
    """
    if shuffle_seed is None:
        yield from iter_examples(source)
        return
    examples = list(iter_examples(source))
    order = np.random.default_rng(shuffle_seed).permutation(len(examples))
    for i in order:
        yield examples[i]


def read_dataset(source, shuffle_seed: int | None = None) -> list[Example]:
    return list(stream_dataset(source, shuffle_seed))


def write_dataset(path, examples: list[Example], num_features: int | None = None) -> None:
    labels = {j for ex in examples for j in ex.labels}
    if num_features is None:
        num_features = 1 + max((int(ex.features.indices[-1]) for ex in examples if len(ex.features)), default=0)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(examples)} {num_features} {max(len(labels), 1)}\n")
        for ex in examples:
            fh.write(format_example(ex) + "\n")
