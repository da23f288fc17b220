"""Binary model files.

Layout (little-endian): 8-byte magic, u32 version, then tagged sections
``tag[4] | u64 length | payload``: CONF (JSON), TREE, REGU, AUXI, RNG_.
Weight entries are written in ascending key order so equal models give
equal bytes.
"""

from __future__ import annotations

import io
import json
import struct

import numpy as np

from .learner import Classifier, InverseClassifier, LearnerConfig
from .online import Counters, OpltModel, PolicyConfig
from .tree import LabelTree
from .weights import WeightStore

MAGIC = b"OPLTMODL"
VERSION = 1


class ModelFormatError(ValueError):
    pass


def _section(tag: bytes, payload: bytes) -> bytes:
    return tag + struct.pack("<Q", len(payload)) + payload


def _store_bytes(c: Classifier) -> bytes:
    keys, w, g = c.store.sorted_arrays()
    return (
        struct.pack("<QQ", c.update_count, len(keys))
        + keys.astype("<i8").tobytes()
        + w.astype("<f8").tobytes()
        + g.astype("<f8").tobytes()
    )


def _config_json(model: OpltModel) -> bytes:
    lc = model.learner
    pc = model.policy
    doc = {
        "learner": {
            "learning_rate": lc.learning_rate,
            "adagrad_epsilon": lc.adagrad_epsilon,
            "use_bias": lc.use_bias,
        },
        "policy": None
        if pc is None
        else {
            "kind": pc.kind.value,
            "alpha": pc.alpha,
            "b": pc.b,
            "b_max": pc.b_max,
            "rng_seed": pc.rng_seed,
            "aux": pc.aux.value,
        },
        "normalize": model.normalize,
        "counters": vars(model.counters),
    }
    return json.dumps(doc, sort_keys=True).encode()


def dumps(model: OpltModel) -> bytes:
    t = model.tree
    tree = io.BytesIO()
    tree.write(struct.pack("<QQ", t.num_nodes, t.root))
    for v in range(t.num_nodes):
        p = t.parent[v]
        lab = t.label[v]
        ch = t.children[v]
        tree.write(struct.pack("<qqI", -1 if p is None else p, -1 if lab is None else lab, len(ch)))
        tree.write(np.asarray(ch, dtype="<i8").tobytes())
    reg = io.BytesIO()
    for c in model.regular:
        reg.write(struct.pack("<B", 1 if c.is_inverse else 0))
        reg.write(_store_bytes(c.base))
    aux = io.BytesIO()
    for a in model.auxiliary:
        if a is None:
            aux.write(b"\x00")
        else:
            aux.write(b"\x01" + _store_bytes(a))
    version, state, gauss = model.rng.getstate()
    rng = struct.pack("<iI", version, len(state)) + np.asarray(state, dtype="<u4").tobytes()
    rng += struct.pack("<B", gauss is not None) + struct.pack("<d", gauss or 0.0)
    return (
        MAGIC
        + struct.pack("<I", VERSION)
        + _section(b"CONF", _config_json(model))
        + _section(b"TREE", tree.getvalue())
        + _section(b"REGU", reg.getvalue())
        + _section(b"AUXI", aux.getvalue())
        + _section(b"RNG_", rng)
    )


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ModelFormatError("truncated model file")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, dtype: str, n: int) -> np.ndarray:
        return np.frombuffer(self.take(np.dtype(dtype).itemsize * n), dtype=dtype).astype(dtype[1:])


def _read_store(r: _Reader, config: LearnerConfig) -> Classifier:
    count, n = r.unpack("<QQ")
    keys = r.array("<i8", n)
    w = r.array("<f8", n)
    g = r.array("<f8", n)
    return Classifier(config, WeightStore.from_arrays(keys, w, g), count)


def loads(data: bytes) -> OpltModel:
    if data[:8] != MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    r = _Reader(data)
    r.take(8)
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise ModelFormatError(f"unsupported model version {version}, expected {VERSION}")
    sections = {}
    while r.pos < len(data):
        tag = r.take(4)
        (length,) = r.unpack("<Q")
        sections[tag] = _Reader(r.take(length))
    for tag in (b"CONF", b"TREE", b"REGU", b"AUXI", b"RNG_"):
        if tag not in sections:
            raise ModelFormatError(f"missing section {tag.decode()}")

    doc = json.loads(sections[b"CONF"].data.decode())
    learner = LearnerConfig(**doc["learner"])
    policy = PolicyConfig(**doc["policy"]) if doc["policy"] is not None else None

    tr = sections[b"TREE"]
    n, root = tr.unpack("<QQ")
    tree = LabelTree.__new__(LabelTree)
    tree.parent, tree.children, tree.label = [], [], []
    tree.label_to_leaf = {}
    tree.root = root
    for v in range(n):
        p, lab, nch = tr.unpack("<qqI")
        tree.parent.append(None if p < 0 else p)
        tree.label.append(None if lab < 0 else lab)
        tree.children.append(tr.array("<i8", nch).tolist())
        if lab >= 0:
            tree.label_to_leaf[lab] = v
    tree.recount()
    problems = tree.validate()
    if problems:
        raise ModelFormatError("corrupt tree: " + "; ".join(problems[:3]))

    model = OpltModel(learner, policy, doc["normalize"], tree=tree)
    rr = sections[b"REGU"]
    regular = []
    for _ in range(n):
        (kind,) = rr.unpack("<B")
        c = _read_store(rr, learner)
        regular.append(InverseClassifier(c) if kind == 1 else c)
    ar = sections[b"AUXI"]
    auxiliary = []
    for _ in range(n):
        (present,) = ar.unpack("<B")
        auxiliary.append(_read_store(ar, learner) if present else None)
    model.regular, model.auxiliary = regular, auxiliary
    model.counters = Counters(**doc["counters"])

    rg = sections[b"RNG_"]
    rversion, nstate = rg.unpack("<iI")
    state = tuple(int(s) for s in rg.array("<u4", nstate))
    has_gauss, gauss = rg.unpack("<Bd")
    model.rng.setstate((rversion, state, gauss if has_gauss else None))
    return model


def save_model(model: OpltModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(model))


def load_model(path) -> OpltModel:
    with open(path, "rb") as fh:
        return loads(fh.read())


def models_equal(a: OpltModel, b: OpltModel) -> bool:
    """Bitwise equality of tree, classifiers, configs, counters and RNG state."""
    return dumps(a) == dumps(b)
