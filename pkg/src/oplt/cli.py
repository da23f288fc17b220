"""Command-line entry points: train, test, progressive, properness-check.

Exit codes: 0 success, 1 data/validation or properness failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import DataFormatError, read_dataset, stream_dataset
from .iplt import IpltTrainer, build_balanced_tree, build_kmeans_tree_from_data
from .learner import LearnerConfig
from .metrics import PropensityModel, format_curve, precision_at_k, progressive_validate, psp_at_k
from .model_io import ModelFormatError, load_model, save_model
from .online import AuxRetention, OpltModel, PolicyConfig, PolicyKind, init_model, warm_start
from .predict import predict_topk
from .properness import check_properness
from .synthetic import synthetic_stream

log = logging.getLogger("oplt")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    train: Path | None = None
    test: Path | None = None
    model: Path | None = None
    output: Path | None = None
    mode: str = "oplt"
    policy: str = "best-greedy"
    alpha: float = 0.75
    b: int = 2
    b_max: int = 100
    aux: str = "all"
    lr: float = 1.0
    eps: float = 0.01
    bias: bool = True
    normalize: bool = True
    passes: int = 1
    warm_start: float | None = None
    tree: str = "kmeans"
    seed: int = 0
    shuffle: bool = False
    k: list[int] = field(default_factory=lambda: [1, 3, 5])
    psp_a: float | None = None
    psp_b: float | None = None
    strip_aux: bool = False
    checkpoint_start: int = 10000
    checkpoint_step: int = 5000
    synthetic_streams: int = 0
    synthetic_examples: int = 200
    synthetic_labels: int = 30
    synthetic_features: int = 50
    prefixes: str = "all"
    alpha_sweep: list[float] | None = None
    inject_fault: str | None = None

    def validate(self) -> None:
        need = {
            "train": ["train", "model"],
            "test": ["test", "model"],
            "progressive": ["train"],
            "properness-check": [],
        }[self.command]
        for name in need:
            if getattr(self, name) is None:
                raise UsageError(f"{self.command} requires --{name.replace('_', '-')}")
        if self.command == "properness-check" and self.train is None and self.synthetic_streams <= 0:
            raise UsageError("properness-check needs --train or --synthetic-streams N")
        if self.passes < 1:
            raise UsageError("--passes must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise UsageError("--alpha must be in [0, 1]")
        if self.b < 2 or self.b_max < self.b:
            raise UsageError("need --b >= 2 and --b-max >= --b")
        if self.lr <= 0 or self.eps <= 0:
            raise UsageError("--lr and --eps must be positive")
        if self.warm_start is not None and not 0.0 < self.warm_start < 1.0:
            raise UsageError("--warm-start must be in (0, 1)")
        if self.warm_start is not None and self.mode != "oplt":
            raise UsageError("--warm-start applies to --mode oplt only")
        if any(k < 1 for k in self.k):
            raise UsageError("--k values must be >= 1")
        if (self.psp_a is None) != (self.psp_b is None):
            raise UsageError("--psp-a and --psp-b go together")
        if self.checkpoint_step < 1:
            raise UsageError("--checkpoint-step must be >= 1")

    def learner(self) -> LearnerConfig:
        return LearnerConfig(self.lr, self.eps, self.bias)

    def policy_config(self, alpha: float | None = None) -> PolicyConfig:
        return PolicyConfig(
            PolicyKind(self.policy),
            self.alpha if alpha is None else alpha,
            self.b,
            self.b_max,
            self.seed,
            AuxRetention(self.aux),
        )


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oplt", description="Online and incremental probabilistic label trees.")
    sub = p.add_subparsers(dest="command", required=True)

    def model_flags(sp):
        g = sp.add_argument_group("model")
        g.add_argument("--mode", choices=["iplt", "oplt"], default="oplt", help="iplt: fixed offline tree; oplt: tree grown online (default: oplt)")
        g.add_argument("--policy", choices=[k.value for k in PolicyKind], default="best-greedy", help="tree extension policy (default: best-greedy)")
        g.add_argument("--alpha", type=float, default=0.75, help="balance trade-off of best-greedy (default: 0.75)")
        g.add_argument("--b", type=int, default=2, help="arity of internal nodes (default: 2)")
        g.add_argument("--b-max", type=int, default=100, help="arity of pre-leaf nodes (default: 100; 10 suits few-shot multi-class streams)")
        g.add_argument("--aux", choices=[a.value for a in AuxRetention], default="all", help="keep auxiliary classifiers at all nodes or prune unreachable ones (default: all)")
        g.add_argument("--lr", type=float, default=1.0, help="learning rate (default: 1)")
        g.add_argument("--eps", type=float, default=0.01, help="AdaGrad epsilon (default: 0.01)")
        g.add_argument("--bias", action=argparse.BooleanOptionalAction, default=True, help="bias term in node models (default: on)")
        g.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True, help="L2-normalize each example (default: on)")
        g.add_argument("--passes", type=int, default=1, help="passes over the training data (default: 1)")
        g.add_argument("--warm-start", type=float, default=None, metavar="FRACTION", help="build a 2-means tree on this leading fraction first (e.g. 0.10)")
        g.add_argument("--tree", choices=["kmeans", "balanced"], default="kmeans", help="offline tree for --mode iplt (default: kmeans)")
        g.add_argument("--seed", type=int, default=0, help="seed for the policy, tree building and shuffling (default: 0)")
        g.add_argument("--shuffle", action="store_true", help="reshuffle the training data with --seed before every pass")

    tr = sub.add_parser("train", help="train a model and write it to --model")
    tr.add_argument("--train", type=Path, required=False, help="training data file")
    tr.add_argument("--model", type=Path, help="output model path")
    tr.add_argument("--strip-aux", action="store_true", help="drop auxiliary classifiers (prediction-only model)")
    model_flags(tr)

    te = sub.add_parser("test", help="evaluate a model on a test file")
    te.add_argument("--test", type=Path, help="test data file")
    te.add_argument("--model", type=Path, help="model path")
    te.add_argument("--train", type=Path, help="data used for label frequencies in PSP@k (default: the test file)")
    te.add_argument("--output", type=Path, help="report CSV path (default: stdout)")
    te.add_argument("--k", type=_int_list, default=[1, 3, 5], help="comma-separated k values (default: 1,3,5)")
    te.add_argument("--psp-a", type=float, help="propensity A (Wiki10/AmazonCat 0.55, WikiLSHTC 0.5, Amazon 0.6)")
    te.add_argument("--psp-b", type=float, help="propensity B (Wiki10/AmazonCat 1.5, WikiLSHTC 0.4, Amazon 2.6)")

    pr = sub.add_parser("progressive", help="test-then-train over a multi-class stream")
    pr.add_argument("--train", type=Path, help="stream file")
    pr.add_argument("--output", type=Path, help="CSV path t,accuracy,bits (default: stdout)")
    pr.add_argument("--model", type=Path, help="optionally save the final model here")
    pr.add_argument("--checkpoint-start", type=int, default=10000, help="first checkpoint (default: 10000)")
    pr.add_argument("--checkpoint-step", type=int, default=5000, help="checkpoint spacing (default: 5000)")
    model_flags(pr)

    pc = sub.add_parser("properness-check", help="verify online training against incremental retraining")
    pc.add_argument("--train", type=Path, help="stream file to check")
    pc.add_argument("--synthetic-streams", type=int, default=0, help="number of seeded synthetic streams (seeds seed..seed+N-1)")
    pc.add_argument("--synthetic-examples", type=int, default=200)
    pc.add_argument("--synthetic-labels", type=int, default=30)
    pc.add_argument("--synthetic-features", type=int, default=50)
    pc.add_argument("--prefixes", default="all", help="'all' or comma-separated prefix lengths")
    pc.add_argument("--alpha-sweep", type=_float_list, default=None, help="comma-separated alphas to check in turn")
    pc.add_argument("--inject-fault", choices=["skip-aux"], default=None, help="self-test: drop one auxiliary update")
    pc.add_argument("--output", type=Path, help="report path (default: stdout)")
    model_flags(pc)
    pc.set_defaults(normalize=False)
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    fields = RunConfig.__dataclass_fields__
    return RunConfig(**{k: v for k, v in vars(ns).items() if k in fields})


def _emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _tree_stats(model: OpltModel) -> str:
    t = model.tree
    return f"nodes={t.num_nodes} labels={t.num_labels} depth={t.depth()}"


def pass_orders(data: list, passes: int, shuffle_seed: int | None) -> list[list]:
    """Example order of every pass; a seed reshuffles the data before each pass."""
    if shuffle_seed is None:
        return [data] * passes
    rng = np.random.default_rng(shuffle_seed)
    return [[data[i] for i in rng.permutation(len(data))] for _ in range(passes)]


def fit(cfg: RunConfig, data: list) -> OpltModel:
    """Train the model described by ``cfg`` on in-memory raw examples."""
    learner = cfg.learner()
    if cfg.normalize:
        data = [ex.normalized() for ex in data]
    orders = pass_orders(data, cfg.passes, cfg.seed if cfg.shuffle else None)
    if cfg.mode == "iplt":
        labels = sorted({j for ex in data for j in ex.labels})
        if cfg.tree == "balanced":
            tree = build_balanced_tree(labels, cfg.b, cfg.b_max, cfg.seed)
        else:
            tree = build_kmeans_tree_from_data(data, cfg.b_max, cfg.seed)
        model = OpltModel(learner, None, cfg.normalize, tree=tree)
        trainer = IpltTrainer(tree, learner)
        for order in orders:
            for ex in order:
                trainer.fit_one(ex)
        model.regular = trainer.classifiers
        model.strip_aux()
        return model
    policy = cfg.policy_config()
    if cfg.warm_start is not None:
        model, used = warm_start(orders[0], cfg.warm_start, learner, policy, cfg.normalize, cfg.seed)
        model.train_stream(orders[0][used:])
    else:
        model = init_model(learner, policy, cfg.normalize)
        model.train_stream(orders[0])
    for order in orders[1:]:
        model.train_stream(order)
    return model


def cmd_train(cfg: RunConfig) -> OpltModel:
    wall0, cpu0 = time.perf_counter(), time.process_time()
    model = fit(cfg, read_dataset(cfg.train))
    if cfg.strip_aux:
        model.strip_aux()
    wall, cpu = time.perf_counter() - wall0, time.process_time() - cpu0
    save_model(model, cfg.model)
    print(f"train: wall={wall:.2f}s cpu={cpu:.2f}s {_tree_stats(model)}")
    return model


def evaluate(model: OpltModel, examples, ks: list[int], propensity: PropensityModel | None = None) -> list[tuple[str, float]]:
    kmax = max(ks)
    sums_p = {k: 0.0 for k in ks}
    sums_psp = {k: 0.0 for k in ks}
    n = 0
    t0 = time.perf_counter()
    for ex in examples:
        ex = model.prepare(ex)
        pred = predict_topk(model.tree, model.regular, ex.features, kmax).labels
        for k in ks:
            sums_p[k] += precision_at_k(pred, ex.labels, k)
            if propensity is not None:
                sums_psp[k] += psp_at_k(pred, ex.labels, k, propensity)
        n += 1
    elapsed = time.perf_counter() - t0
    rows = [(f"P@{k}", sums_p[k] / max(n, 1)) for k in ks]
    if propensity is not None:
        rows += [(f"PSP@{k}", sums_psp[k] / max(n, 1)) for k in ks]
    # timing goes to stderr so the report itself stays byte-reproducible
    print(f"test: examples={n} pred_ms_per_example={1000.0 * elapsed / max(n, 1):.4f}", file=sys.stderr)
    return rows


def format_report(rows) -> str:
    return "metric,value\n" + "".join(f"{m},{v:.6f}\n" for m, v in rows)


def cmd_test(cfg: RunConfig) -> list:
    model = load_model(cfg.model)
    test = read_dataset(cfg.test)
    propensity = None
    if cfg.psp_a is not None:
        source = read_dataset(cfg.train) if cfg.train is not None else test
        propensity = PropensityModel.from_label_sets((ex.labels for ex in source), cfg.psp_a, cfg.psp_b)
    rows = evaluate(model, test, cfg.k, propensity)
    _emit(format_report(rows), cfg.output)
    return rows


def cmd_progressive(cfg: RunConfig):
    learner = cfg.learner()
    model = init_model(learner, cfg.policy_config(), cfg.normalize)
    stream = stream_dataset(cfg.train, cfg.seed if cfg.shuffle else None)
    checkpoints = range(cfg.checkpoint_start, 10**12, cfg.checkpoint_step)
    points = progressive_validate(model, stream, checkpoints)
    _emit(format_curve(points), cfg.output)
    if cfg.model is not None:
        save_model(model, cfg.model)
    return points


def cmd_properness_check(cfg: RunConfig) -> bool:
    learner = cfg.learner()
    alphas = cfg.alpha_sweep if cfg.alpha_sweep else [cfg.alpha]
    prefixes = None if cfg.prefixes == "all" else _int_list(cfg.prefixes)
    if cfg.train is not None:
        streams = [("file", read_dataset(cfg.train, cfg.seed if cfg.shuffle else None))]
    else:
        streams = [
            (
                f"synthetic seed={s}",
                synthetic_stream(s, cfg.synthetic_examples, cfg.synthetic_labels, cfg.synthetic_features),
            )
            for s in range(cfg.seed, cfg.seed + cfg.synthetic_streams)
        ]
    lines = []
    ok = True
    for alpha in alphas:
        for name, data in streams:
            rep = check_properness(
                data, learner, cfg.policy_config(alpha), prefixes, cfg.normalize, fault=cfg.inject_fault
            )
            ok &= rep.passed
            status = "PASS" if rep.passed else "FAIL"
            line = f"{status} {name} alpha={alpha} prefixes={rep.prefixes_checked} update_ratio={rep.max_update_ratio:.4f}"
            if rep.mismatch is not None:
                line += f" first_mismatch=({rep.mismatch})"
            for v in rep.violations[:3]:
                line += f" violation=({v})"
            lines.append(line)
    lines.append("PASS" if ok else "FAIL")
    _emit("\n".join(lines) + "\n", cfg.output)
    return ok


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    ns = parser.parse_args(argv)
    cfg = config_from_args(ns)
    try:
        cfg.validate()
    except UsageError as exc:
        parser.error(str(exc))
    try:
        if cfg.command == "train":
            cmd_train(cfg)
        elif cfg.command == "test":
            cmd_test(cfg)
        elif cfg.command == "progressive":
            cmd_progressive(cfg)
        elif cfg.command == "properness-check":
            return 0 if cmd_properness_check(cfg) else 1
    except (DataFormatError, ModelFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
