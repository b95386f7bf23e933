import csv
import shutil
import subprocess
import sys

import pytest

from tabguide import cli

from conftest import bundled

TRAIN = ["--hidden-dim", "16", "--embed-dim", "8", "--epochs", "3", "--learning-rate", "3e-3"]


def run(*argv):
    return cli.main([str(a) for a in argv])


def rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Full pipeline on 20 generated problems plus fig1; returns the work dir."""
    d = tmp_path_factory.mktemp("run")
    assert run("generate", "--out", d / "probs", "--count", 20, "--include-fig1") == 0
    assert run("prove", "--problems", d / "probs", "--out", d / "proofs") == 0
    assert run("check", "--problems", d / "probs", "--proofs", d / "proofs") == 0
    assert run("extract", "--problems", d / "probs", "--proofs", d / "proofs", "--out", d / "c") == 0
    assert run("split", "--corpus", d / "c") == 0
    assert run("train", "--corpus", d / "c", "--out", d / "m.ckpt", *TRAIN) == 0
    assert run("decode", "--corpus", d / "c", "--model", d / "m.ckpt", "--out", d / "pred.tsv", "--k", 10) == 0
    assert run("evaluate", "--corpus", d / "c", "--predictions", d / "pred.tsv", "--out", d / "rep") == 0
    return d


def test_pipeline_outputs(pipeline):
    d = pipeline
    stats = rows(d / "proofs" / "stats.csv")
    assert len(stats) == 21 and all(r["solved"] == "1" for r in stats)
    assert "seconds" not in stats[0] and rows(d / "proofs" / "timing.csv")[0].keys() == {"problem", "seconds"}
    for name in ("train", "valid", "test"):
        assert (d / "c" / f"{name}.src").exists()
    cfg = {(r["k"]): float(r["accuracy"]) for r in rows(d / "rep" / "accuracy_by_config.csv")}
    assert set(cfg) == {"1", "10"} and cfg["10"] >= cfg["1"]
    assert rows(d / "rep" / "accuracy_by_length.csv")
    assert (d / "rep" / "conjecture_validity.csv").read_text() == "verdict,count,share\n"


def test_pipeline_deterministic(pipeline, tmp_path):
    d, e = pipeline, tmp_path
    assert run("generate", "--out", e / "probs", "--count", 20, "--include-fig1") == 0
    assert run("prove", "--problems", e / "probs", "--out", e / "proofs") == 0
    assert run("extract", "--problems", e / "probs", "--proofs", e / "proofs", "--out", e / "c") == 0
    assert run("split", "--corpus", e / "c") == 0
    assert run("train", "--corpus", e / "c", "--out", e / "m.ckpt", *TRAIN) == 0
    assert run("decode", "--corpus", e / "c", "--model", e / "m.ckpt", "--out", e / "pred.tsv", "--k", 10) == 0
    assert run("evaluate", "--corpus", e / "c", "--predictions", e / "pred.tsv", "--out", e / "rep") == 0
    for rel in ["proofs/stats.csv", "c/all.src", "c/all.meta", "c/train.tgt", "c/vocab.src",
                "c/split.json", "m.ckpt", "m.ckpt.losses.csv", "pred.tsv", "rep/accuracy_by_config.csv"]:
        assert (d / rel).read_bytes() == (e / rel).read_bytes(), rel
    for f in (d / "proofs").glob("*.proof"):
        assert f.read_bytes() == (e / "proofs" / f.name).read_bytes()


def test_jobs_same_output(pipeline, tmp_path):
    assert run("prove", "--problems", pipeline / "probs", "--out", tmp_path / "p", "--jobs", 2) == 0
    assert (tmp_path / "p" / "stats.csv").read_bytes() == (pipeline / "proofs" / "stats.csv").read_bytes()


def test_conjecture_and_baseline(pipeline, tmp_path):
    d = pipeline
    assert run("extract", "--problems", d / "probs", "--proofs", d / "proofs", "--out", tmp_path / "cj",
               "--task", "conjecture") == 0
    assert run("split", "--corpus", tmp_path / "cj") == 0
    assert run("train", "--corpus", tmp_path / "cj", "--out", tmp_path / "cj.ckpt", *TRAIN) == 0
    assert run("decode", "--corpus", tmp_path / "cj", "--model", tmp_path / "cj.ckpt",
               "--out", tmp_path / "cj.tsv", "--k", 3, "--max-len", 20, "--length-norm") == 0
    assert run("conjecture", "--corpus", tmp_path / "cj", "--predictions", tmp_path / "cj.tsv",
               "--out", tmp_path / "cjr") == 0
    v = rows(tmp_path / "cjr" / "conjecture_validity.csv")
    assert [r["verdict"] for r in v] == ["exact-match", "well-formed-mismatch", "malformed"]
    assert run("baseline", "--corpus", d / "c", "--out", tmp_path / "b") == 0
    assert (tmp_path / "b" / "baseline.model").exists()
    assert {r["k"] for r in rows(tmp_path / "b" / "accuracy_by_config.csv")} == {"1", "10"}


def test_guided_prove(pipeline, tmp_path, capsys):
    assert run("guided-prove", "--problems", pipeline / "probs", "--model", pipeline / "m.ckpt",
               "--out", tmp_path, "--node-budget", 5000) == 0
    out = rows(tmp_path / "guided.csv")
    assert len(out) == 21
    base = sum(int(r["input_solved"]) for r in out)
    guided = sum(int(r["guided_solved"]) for r in out)
    text = capsys.readouterr().out
    assert guided >= base or "WARNING" in text


def test_missing_upstream_artifact(tmp_path, capsys):
    assert run("train", "--corpus", tmp_path, "--out", tmp_path / "m") == 2
    assert "tabguide split" in capsys.readouterr().err
    assert run("split", "--corpus", tmp_path) == 2
    assert "tabguide extract" in capsys.readouterr().err


def test_vocab_mismatch_is_data_error(pipeline, tmp_path):
    shutil.copytree(pipeline / "c", tmp_path / "c")
    (tmp_path / "c" / "vocab.tgt").write_text((pipeline / "c" / "vocab.tgt").read_text() + "extra\n")
    assert run("decode", "--corpus", tmp_path / "c", "--model", pipeline / "m.ckpt",
               "--out", tmp_path / "p.tsv") == 2


def test_parse_errors_do_not_abort_batch(tmp_path):
    (tmp_path / "in").mkdir()
    (tmp_path / "in" / "bad.p").write_text("cnf(a,axiom,p(")
    (tmp_path / "in" / "fig1.p").write_text(bundled("fig1.p"))
    (tmp_path / "in" / "sat1.p").write_text(bundled("sat1.p"))
    assert run("prove", "--problems", tmp_path / "in", "--out", tmp_path / "out") == 2
    st = {r["problem"]: r for r in rows(tmp_path / "out" / "stats.csv")}
    assert st["bad"]["status"] == "parse_error"
    assert st["fig1"]["solved"] == "1"
    assert st["sat1"]["solved"] == "0" and st["sat1"]["status"] == "no_proof"


def test_empty_problem_dir(tmp_path, caplog):
    (tmp_path / "in").mkdir()
    assert run("prove", "--problems", tmp_path / "in", "--out", tmp_path / "out") == 0
    assert (tmp_path / "out" / "stats.csv").read_text().count("\n") == 1
    assert "no .p files" in caplog.text


def test_rejected_proof_is_data_error(tmp_path):
    (tmp_path / "in").mkdir()
    (tmp_path / "in" / "fig1.p").write_text(bundled("fig1.p"))
    assert run("prove", "--problems", tmp_path / "in", "--out", tmp_path / "out") == 0
    f = sorted((tmp_path / "out").glob("*.proof"))[0]
    f.write_text(f.read_text().replace("ext c2 1", "ext c2 0"))
    assert run("check", "--problems", tmp_path / "in", "--proofs", tmp_path / "out") == 2


def test_usage_errors(tmp_path):
    assert run() == 1
    assert run("prove", "--problems", tmp_path) == 1
    assert run("nosuch") == 1
    assert run("prove", "--problems", tmp_path, "--out", tmp_path, "--max-depth", "x") == 1


def test_config_file(tmp_path):
    (tmp_path / "in").mkdir()
    (tmp_path / "in" / "fig1.p").write_text(bundled("fig1.p"))
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# prove settings\nproblems={tmp_path / 'in'}\nout={tmp_path / 'out'}\nmax-depth=2\n")
    args = cli.parse_args(["prove", "--config", str(cfg)])
    assert args.max_depth == 2 and args.out == str(tmp_path / "out")
    args = cli.parse_args(["prove", "--config", str(cfg), "--max-depth", "7"])
    assert args.max_depth == 7  # flags win
    assert run("prove", "--config", cfg) == 0
    assert rows(tmp_path / "out" / "stats.csv")[0]["status"] == "depth_exhausted"
    (tmp_path / "bad.cfg").write_text("max_depth_typo=3\n")
    assert run("prove", "--config", tmp_path / "bad.cfg") == 1
    (tmp_path / "bad2.cfg").write_text("ordering=guided\n")
    assert run("prove", "--config", tmp_path / "bad2.cfg") == 1


def test_config_keys_biject_with_flags():
    parser = cli.build_parser()
    for name in cli.COMMAND_NAMES:
        sub = cli._subparser(parser, name)
        flags = [a.option_strings[-1] for a in sub._actions
                 if a.option_strings and a.dest not in ("help", "config")]
        keys = [f[2:] for f in flags]
        assert all(f.startswith("--") for f in flags)
        assert len(set(keys)) == len(keys)


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["prove", "--help"])
    text = capsys.readouterr().out
    for flag in ("--max-depth", "--node-budget", "--time-budget", "--jobs", "--ordering", "--max-proofs"):
        assert flag in text
    assert "(default: 10)" in text


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "tabguide", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "guided-prove" in out.stdout


def test_corpus_stats(tmp_path, capsys):
    (tmp_path / "a.proof").write_text("v1\n")
    (tmp_path / "x.lits.src").write_text("a\n")
    assert run("corpus-stats", "--data", tmp_path) == 0
    assert "proofs: 1" in capsys.readouterr().out
    assert run("corpus-stats", "--data", tmp_path / "none") == 2


def test_train_with_selection(pipeline, tmp_path, capsys):
    d = pipeline
    ckpt = tmp_path / "sel.ckpt"
    assert run("train", "--corpus", d / "c", "--out", ckpt, *TRAIN, "--select-every", 1) == 0
    assert "selected epoch" in capsys.readouterr().out and ckpt.exists()
    # the loss log still covers every epoch that was trained
    assert len(rows(str(ckpt) + ".losses.csv")) == 3


def test_generate_large_library(tmp_path):
    assert run("generate", "--out", tmp_path / "p", "--count", 3, "--library", "large") == 0
    text = (tmp_path / "p" / "gen0000.p").read_text()
    assert run("generate", "--out", tmp_path / "q", "--count", 3) == 0
    assert text != (tmp_path / "q" / "gen0000.p").read_text()
    assert run("generate", "--out", tmp_path / "r", "--library", "huge") == 1
