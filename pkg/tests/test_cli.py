from __future__ import annotations

from collections import Counter

import pytest

from oplt.cli import RunConfig, UsageError, build_parser, config_from_args, main
from oplt.data import Example, SparseVector, write_dataset
from oplt.iplt import build_balanced_tree
from oplt.learner import LearnerConfig
from oplt.model_io import load_model, save_model
from oplt.online import OpltModel
from oplt.synthetic import multiclass_stream, synthetic_stream


@pytest.fixture
def files(tmp_path):
    train = tmp_path / "train.txt"
    write_dataset(train, synthetic_stream(1, 150), 50)
    multi = tmp_path / "multi.txt"
    write_dataset(multi, multiclass_stream(2, 300, 3), 20)
    return tmp_path, train, multi


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def parse_report(text):
    lines = text.strip().splitlines()
    assert lines[0] == "metric,value"
    return {m: float(v) for m, v in (ln.split(",") for ln in lines[1:])}


def test_defaults_mirror_documented_setup():
    ns = build_parser().parse_args(["train", "--train", "x", "--model", "m"])
    cfg = config_from_args(ns)
    assert (cfg.lr, cfg.eps, cfg.alpha, cfg.b, cfg.b_max, cfg.passes, cfg.k) == (1.0, 0.01, 0.75, 2, 100, 1, [1, 3, 5])
    assert cfg.bias and cfg.normalize


def test_help_lists_flags(capsys):
    with pytest.raises(SystemExit) as info:
        main(["train", "--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    for flag in ["--alpha", "--b-max", "--lr", "--eps", "--warm-start", "--passes", "--aux", "--strip-aux"]:
        assert flag in out


@pytest.mark.parametrize(
    "argv",
    [
        ["test", "--test", "t.txt"],
        ["train", "--train", "t.txt"],
        ["train", "--train", "t.txt", "--model", "m", "--alpha", "2"],
        ["train", "--train", "t.txt", "--model", "m", "--mode", "iplt", "--warm-start", "0.1"],
        ["test", "--test", "t", "--model", "m", "--psp-a", "0.5"],
        ["properness-check"],
        ["bogus"],
    ],
)
def test_usage_errors_exit_2(argv, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2
    # validation happens before any file is touched
    assert not (tmp_path / "m").exists()


def test_validate_directly():
    with pytest.raises(UsageError):
        RunConfig("train", train=None).validate()


def test_train_and_test_oplt(files, capsys):
    tmp, train, _ = files
    model = tmp / "m.bin"
    code, out, _ = run(["train", "--train", train, "--model", model, "--b-max", "5"], capsys)
    assert code == 0
    assert "wall=" in out and "cpu=" in out and "nodes=" in out and "depth=" in out and "labels=" in out
    code, out, err = run(["test", "--test", train, "--model", model, "--psp-a", "0.55", "--psp-b", "1.5"], capsys)
    assert code == 0
    rep = parse_report(out)
    assert set(rep) == {"P@1", "P@3", "P@5", "PSP@1", "PSP@3", "PSP@5"}
    assert rep["P@1"] > 0.5
    assert "pred_ms_per_example" in err
    _, again, _ = run(["test", "--test", train, "--model", model, "--psp-a", "0.55", "--psp-b", "1.5"], capsys)
    assert again == out


def test_perfect_memorization(tmp_path, capsys):
    data = [Example(SparseVector.from_pairs([(j, 1.0)]), (j,)) for j in range(4)] * 20
    path = tmp_path / "toy.txt"
    write_dataset(path, data)
    model = tmp_path / "m.bin"
    assert run(["train", "--train", path, "--model", model, "--passes", "3"], capsys)[0] == 0
    _, out, _ = run(["test", "--test", path, "--model", model, "--k", "1"], capsys)
    assert parse_report(out)["P@1"] == 1.0


def test_fresh_model_predicts_lowest_labels(tmp_path, capsys):
    data = synthetic_stream(3, 100, num_labels=8)
    labels = sorted({j for ex in data for j in ex.labels})
    tree = build_balanced_tree(labels, 2, 2, seed=None)
    model = OpltModel(LearnerConfig(), None, True, tree=tree)
    model.strip_aux()
    save_model(model, tmp_path / "fresh.bin")
    path = tmp_path / "d.txt"
    write_dataset(path, data)
    _, out, _ = run(["test", "--test", path, "--model", tmp_path / "fresh.bin", "--k", "1,3"], capsys)
    rep = parse_report(out)
    counts = Counter(j for ex in data for j in ex.labels)
    low = labels[:3]
    assert rep["P@1"] == pytest.approx(round(counts[low[0]] / len(data), 6))
    assert rep["P@3"] == pytest.approx(round(sum(counts[j] for j in low) / (3 * len(data)), 6))


@pytest.mark.parametrize("extra", [["--mode", "iplt"], ["--mode", "iplt", "--tree", "balanced"], ["--warm-start", "0.1", "--passes", "2"], ["--strip-aux"], ["--aux", "prune", "--policy", "random"]])
def test_train_variants(files, capsys, extra):
    tmp, train, _ = files
    model = tmp / "v.bin"
    assert run(["train", "--train", train, "--model", model, "--b-max", "4", *extra], capsys)[0] == 0
    m = load_model(model)
    assert m.tree.validate() == []
    assert m.tree.num_labels > 0


def test_progressive_is_reproducible(files, capsys):
    tmp, _, multi = files
    argv = ["progressive", "--train", multi, "--checkpoint-start", "100", "--checkpoint-step", "100", "--b-max", "10"]
    code, first, _ = run(argv, capsys)
    assert code == 0
    assert first.splitlines()[0] == "t,accuracy,bits"
    assert [ln.split(",")[0] for ln in first.splitlines()[1:]] == ["100", "200", "300"]
    _, second, _ = run(argv, capsys)
    assert first == second
    out = tmp / "curve.csv"
    run(argv + ["--output", out], capsys)
    assert out.read_text() == first


def test_progressive_tiny_stream_memorizes(tmp_path, capsys):
    data = [Example(SparseVector.from_pairs([(j, 1.0)]), (j,)) for j in range(3)] * 30
    path = tmp_path / "tiny.txt"
    write_dataset(path, data)
    out = tmp_path / "c.csv"
    run(["progressive", "--train", path, "--checkpoint-start", "90", "--checkpoint-step", "10", "--output", out, "--b-max", "10"], capsys)
    t, acc, _ = out.read_text().splitlines()[1].split(",")
    assert int(t) == 90
    assert float(acc) > 0.9


def test_properness_check_pass_and_fault(capsys):
    code, out, _ = run(["properness-check", "--synthetic-streams", "2", "--b-max", "3"], capsys)
    assert code == 0 and out.strip().endswith("PASS")
    code, out, _ = run(["properness-check", "--synthetic-streams", "1", "--inject-fault", "skip-aux", "--b-max", "3"], capsys)
    assert code == 1
    assert "first_mismatch=(prefix" in out and "node" in out and "feature" in out


def test_properness_check_alpha_sweep_and_file(files, capsys):
    _, train, _ = files
    code, out, _ = run(["properness-check", "--train", train, "--alpha-sweep", "0,0.25,0.5,0.75,1", "--b-max", "2", "--prefixes", "1,50,150"], capsys)
    assert code == 0
    assert out.count("PASS file") == 5


def test_malformed_data_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("1 2 2\n1 0:x\n")
    code, _, err = run(["train", "--train", bad, "--model", tmp_path / "m.bin"], capsys)
    assert code == 1 and "line 2" in err


def test_missing_model_exit_1(files, capsys):
    tmp, train, _ = files
    code, _, err = run(["test", "--test", train, "--model", tmp / "missing.bin"], capsys)
    assert code == 1 and "error" in err


def test_pass_orders_reshuffle_each_pass():
    from oplt.cli import pass_orders

    data = list(range(20))
    assert pass_orders(data, 2, None) == [data, data]
    a = pass_orders(data, 3, 7)
    assert a == pass_orders(data, 3, 7)
    assert a[0] != a[1] and sorted(a[1]) == data
