"""Command-line pipeline: generate, prove, check, extract, split, train,
decode, evaluate, conjecture, baseline, guided-prove, corpus-stats.

Every option can also come from a ``key=value`` config file (``--config``);
keys are the long option names without dashes and explicit flags win.
Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import baseline as bl
from . import datagen as dg
from . import evalkit as ev
from . import seqmodel as sm
from .fol import ParseError, parse_tptp_cnf, print_matrix, skolem_detector
from .tableau import (
    ClauseOrdering, InvariantViolation, ProofError, SearchLimits, check_proof,
    dumps_proof, loads_proof, prove_all,
)

log = logging.getLogger("tabguide")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# ---------------------------------------------------------------- helpers


def _need(path: Path, producer: str) -> Path:
    if not path.exists():
        raise DataError(f"{path} not found; produce it with `tabguide {producer}`")
    return path


def _problems(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise DataError(f"problem directory {d} does not exist")
    return sorted(p for p in d.iterdir() if p.suffix == ".p")


def _read_problem(path: Path):
    return parse_tptp_cnf(path.read_text(encoding="utf-8"), path.stem)


def _write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _limits(a) -> SearchLimits:
    return SearchLimits(max_depth=a.max_depth, node_budget=a.node_budget, time_budget=a.time_budget)


def _detector(a):
    return skolem_detector(a.skolem_prefixes.split(","))


def _load_proofs(problems_dir, proofs_dir) -> list[tuple[str, object]]:
    """[(proof id, checked ProofTree)] sorted by proof id."""
    pdir = _need(Path(proofs_dir), "prove")
    matrices = {}
    out = []
    for f in sorted(pdir.glob("*.proof")):
        proof = loads_proof(f.read_text(encoding="utf-8"))
        name = proof.problem
        if name not in matrices:
            src = Path(problems_dir) / f"{name}.p"
            if not src.exists():
                raise DataError(f"{f}: problem file {src} is missing")
            matrices[name] = _read_problem(src)
        res = check_proof(matrices[name], proof)
        if not res:
            raise DataError(f"{f}: {res}")
        out.append((f.stem, proof))
    return out


def _corpus_info(corpus: Path) -> dict:
    return json.loads(_need(corpus / "corpus.json", "extract").read_text())


# ---------------------------------------------------------------- commands


def cmd_generate(a):
    from .generate import generate_problems
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    for m in generate_problems(a.count, seed=a.seed, library=a.library):
        (out / f"{m.name}.p").write_text(print_matrix(m), encoding="utf-8")
    if a.include_fig1:
        from importlib.resources import files
        (out / "fig1.p").write_text(files("tabguide.data").joinpath("fig1.p").read_text(), encoding="utf-8")
    print(f"wrote {a.count} problems to {out}")


def _prove_one(job):
    path, limits, ordering_args, max_proofs, regularity, occurs = job
    try:
        m = _read_problem(Path(path))
    except (ParseError, OSError) as e:
        return Path(path).stem, None, str(e), None
    ordering = ClauseOrdering(*ordering_args)
    proofs, st = prove_all(m, limits, ordering, max_proofs, regularity=regularity, occurs_check=occurs)
    return m.name, [dumps_proof(p) for p in proofs], None, st


def cmd_prove(a):
    files = _problems(a.problems)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    if not files:
        log.warning("no .p files in %s", a.problems)
    jobs = [(str(f), _limits(a), (a.ordering, a.seed), a.max_proofs, not a.no_regularity,
             not a.no_occurs_check) for f in files]
    if a.jobs > 1:
        with ProcessPoolExecutor(a.jobs) as ex:
            results = list(ex.map(_prove_one, jobs))
    else:
        results = [_prove_one(j) for j in jobs]
    stats, times, parse_errors = [], [], 0
    for name, proofs, err, st in sorted(results, key=lambda r: r[0]):
        if err is not None:
            parse_errors += 1
            print(f"{name}: parse error: {err}", file=sys.stderr)
            stats.append((name, 0, "parse_error", 0, 0, 0))
            continue
        for j, text in enumerate(proofs):
            (out / f"{name}.{j}.proof").write_text(text, encoding="utf-8")
        stats.append((name, int(bool(proofs)), st.status, st.depth, st.inferences, len(proofs)))
        times.append((name, f"{st.seconds:.6f}"))
    _write_csv(out / "stats.csv", ("problem", "solved", "status", "depth", "inferences", "proofs"), stats)
    _write_csv(out / "timing.csv", ("problem", "seconds"), times)
    solved = sum(r[1] for r in stats)
    print(f"solved {solved}/{len(stats)} problems")
    return EXIT_DATA if parse_errors else EXIT_OK


def cmd_check(a):
    pdir = _need(Path(a.proofs), "prove")
    bad = 0
    for f in sorted(pdir.glob("*.proof")):
        proof = loads_proof(f.read_text(encoding="utf-8"))
        src = Path(a.problems) / f"{proof.problem}.p"
        if not src.exists():
            raise DataError(f"{f}: problem file {src} is missing")
        res = check_proof(_read_problem(src), proof)
        print(f"{f.name}: {res}")
        bad += not res
    return EXIT_DATA if bad else EXIT_OK


def cmd_extract(a):
    proofs = _load_proofs(a.problems, a.proofs)
    det = _detector(a)
    examples = []
    for pid, p in proofs:
        if a.task == "conjecture":
            examples += dg.extract_conjecturing_examples(p, pid, det)
        else:
            examples += dg.extract_clause_choice_examples(p, a.kind, a.steps, pid, det)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    examples = dg.sort_examples(examples)
    dg.write_corpus(examples, out / "all")
    info = {"task": a.task, "kind": "literals" if a.task == "conjecture" else a.kind,
            "steps": a.steps if a.task == "clause" else 0, "proofs": [pid for pid, _ in proofs]}
    (out / "corpus.json").write_text(json.dumps(info, indent=1, sort_keys=True) + "\n")
    print(f"{len(examples)} examples from {len(proofs)} proofs")


def cmd_split(a):
    corpus = Path(a.corpus)
    info = _corpus_info(corpus)
    examples = dg.read_corpus(_need(corpus / "all.src", "extract").with_suffix(""))
    split = dg.split_by_proofs(info["proofs"], a.seed)
    parts = {"train": [], "valid": [], "test": []}
    for e in examples:
        parts[split.part_of(e.proof)].append(e)
    for name, exs in parts.items():
        dg.write_corpus(exs, corpus / name)
    dg.Vocabulary.build(e.source for e in parts["train"]).save(corpus / "vocab.src")
    dg.Vocabulary.build(e.target for e in parts["train"]).save(corpus / "vocab.tgt")
    (corpus / "split.json").write_text(json.dumps(
        {"seed": a.seed, "train": split.train, "valid": split.valid, "test": split.test},
        indent=1) + "\n")
    print("proofs train/valid/test: %d/%d/%d; examples %d/%d/%d" % (
        *split.sizes(), *(len(parts[k]) for k in ("train", "valid", "test"))))


def _vocabs(corpus: Path):
    return (dg.Vocabulary.load(_need(corpus / "vocab.src", "split")),
            dg.Vocabulary.load(_need(corpus / "vocab.tgt", "split")))


def cmd_train(a):
    corpus = Path(a.corpus)
    sv, tv = _vocabs(corpus)
    examples = dg.read_corpus(_need(corpus / "train.src", "split").with_suffix(""))
    if not examples:
        raise DataError(f"{corpus}/train.src is empty")
    cfg = sm.ModelConfig(len(sv), len(tv), a.embed_dim, a.hidden_dim, a.layers, a.attention, a.seed)
    model = sm.init_model(cfg, sv, tv)
    tc = sm.TrainConfig(a.optimizer, a.learning_rate, a.batch_size, a.epochs, a.clip_norm, a.seed)
    data = sm.encode_examples(examples, sv, tv)

    def show(ep, loss):
        log.info("epoch %d loss %.5f", ep, loss)

    if a.select_every:
        valid = dg.read_corpus(_need(corpus / "valid.src", "split").with_suffix(""))
        if not valid:
            raise DataError(f"{corpus}/valid.src is empty; --select-every needs validation data")

        def exact(m):
            hits = sum(tuple(tv.decode(sm.greedy_decode(m, sv.encode(e.source), len(e.target) + 1)
                                       .output(tv.eos))) == tuple(e.target) for e in valid)
            return hits / len(valid)

        model, epoch, res, _ = sm.train_with_selection(model, data, tc, exact, a.select_every, show)
        print(f"selected epoch {epoch}")
    else:
        res = sm.train(model, data, tc, callback=show)
    sm.save_checkpoint(model, a.out)
    _write_csv(Path(str(a.out) + ".losses.csv"), ("epoch", "loss"),
               [(i, repr(l)) for i, l in enumerate(res.losses)])
    print(f"final loss {res.losses[-1] if res.losses else float('nan'):.5f}")


def cmd_decode(a):
    corpus = Path(a.corpus)
    sv, tv = _vocabs(corpus)
    model = sm.load_checkpoint(_need(Path(a.model), "train"))
    model.require_vocab(sv, tv)
    examples = dg.read_corpus(_need(corpus / f"{a.split}.src", "split").with_suffix(""))
    rows = []
    for n, e in enumerate(examples):
        hyps = sm.beam_decode(model, sv.encode(e.source), a.k, a.max_len, a.length_norm)
        for rank, h in enumerate(hyps):
            rows.append((n, rank, repr(h.score), int(h.complete), " ".join(tv.decode(h.output(tv.eos)))))
    with open(a.out, "w", encoding="utf-8", newline="") as f:
        f.write(f"# split={a.split} k={a.k}\n")
        for r in rows:
            f.write("\t".join(map(str, r)) + "\n")
    print(f"decoded {len(examples)} examples")


def read_predictions(path) -> tuple[dict, dict]:
    """Returns ({example index: [(tokens, score)]}, header fields)."""
    out: dict[int, list] = {}
    meta = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if line.startswith("#"):
                meta.update(kv.split("=", 1) for kv in line[1:].split())
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise DataError(f"{path}: malformed prediction line {line!r}")
            out.setdefault(int(parts[0]), []).append((tuple(parts[4].split()), float(parts[2])))
    return out, meta


def _records(corpus: Path, predictions, reference: str):
    info = _corpus_info(corpus)
    preds, meta = read_predictions(_need(Path(predictions), "decode"))
    split = meta.get("split", "test")
    k = int(meta.get("k", 1))
    examples = dg.read_corpus(_need(corpus / f"{split}.src", "split").with_suffix(""))
    ref_src = examples if reference == "split" else dg.read_corpus(corpus / "all")
    index = ev.index_from_examples(ref_src)
    recs = []
    for n, e in enumerate(examples):
        refs = index.get((e.source_kind, e.source, len(e.target)), set())
        recs.append(ev.PredictionRecord(e, preds.get(n, []), refs, k))
    return info, recs, k


def cmd_evaluate(a):
    corpora = a.corpus.split(",")
    predictions = a.predictions.split(",")
    if len(corpora) != len(predictions):
        raise UsageError("--corpus and --predictions need the same number of entries")
    config_groups, length_groups, verdicts = {}, {}, []
    for corpus, pred in zip(corpora, predictions):
        info, recs, k = _records(Path(corpus), pred, a.reference)
        kind = "conjecture" if info["task"] == "conjecture" else info["kind"]
        i = info["steps"]
        for kk in sorted({1, k}):
            config_groups[(kind, kk, i)] = [r.at(kk) for r in recs]
        if i in (0, 1):
            length_groups[kind] = [r.at(1) for r in recs]
        if info["task"] == "conjecture":
            verdicts += [ev.classify_conjecture(r.decoded[0][0] if r.decoded else (), r.example.target)
                         for r in recs]
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in ev.report(config_groups, length_groups, verdicts, "csv").items():
        (out / name).write_text(text, encoding="utf-8")
    print(ev.step_grid(config_groups), end="")
    for (kind, k, i), recs in sorted(config_groups.items()):
        print(f"{kind} k={k} i={i}: {float(ev.predictive_accuracy(recs).accuracy):.2f}"
              if recs else f"{kind} k={k} i={i}: no data")


def cmd_conjecture(a):
    info, recs, _ = _records(Path(a.corpus), a.predictions, "all")
    if info["task"] != "conjecture":
        raise UsageError("corpus was not extracted with --task conjecture")
    verdicts = [ev.classify_conjecture(r.decoded[0][0] if r.decoded else (), r.example.target)
                for r in recs]
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    text = ev.report(verdicts=verdicts)["conjecture_validity.csv"]
    (out / "conjecture_validity.csv").write_text(text, encoding="utf-8")
    print(text, end="")


def _literal_path(tokens):
    lits = [dg.detokenize(part) for part in dg.split_path(tokens)]
    if any(l is None for l in lits):
        raise DataError(f"malformed literal path {' '.join(tokens)!r}")
    return lits


def cmd_baseline(a):
    corpus = Path(a.corpus)
    info = _corpus_info(corpus)
    if info["task"] != "clause" or info["kind"] != "literals" or info["steps"] != 1:
        raise UsageError("the baseline needs a literal-path corpus with --steps 1")
    train_ex = dg.read_corpus(_need(corpus / "train.src", "split").with_suffix(""))
    test_ex = dg.read_corpus(corpus / "test")

    def fv(e):
        return bl.hash_features(bl.featurize_path(_literal_path(e.source), a.decay), a.seed)

    model = bl.train_multilabel([(fv(e), e.target[0]) for e in train_ex], a.epochs,
                                a.learning_rate, seed=a.seed)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    bl.save_model(model, out / "baseline.model")
    index = ev.index_from_examples(dg.read_corpus(corpus / "all"))
    recs = [ev.PredictionRecord(e, [((lab,), 0.0) for lab in bl.predict_topk(model, fv(e), a.k)],
                                index.get(("literals", e.source, 1), set()), a.k) for e in test_ex]
    groups = {("baseline", kk, 1): [r.at(kk) for r in recs] for kk in sorted({1, a.k})}
    files = ev.report(groups, {"baseline": [r.at(1) for r in recs]})
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8")
    print(f"train accuracy {model.train_accuracy:.2f}; test accuracy@1 "
          f"{float(ev.predictive_accuracy(groups[('baseline', 1, 1)]).accuracy):.2f}")


def _guided_one(job):
    path, limits, ckpt, prefixes = job
    from .tableau import prove
    m = _read_problem(Path(path))
    p0, s0 = prove(m, limits, ClauseOrdering("input"))
    model = sm.load_checkpoint(ckpt)
    scorer = sm.clause_scorer(model, skolem_detector(prefixes.split(",")))
    p1, s1 = prove(m, limits, ClauseOrdering("guided", scorer=scorer))
    return m.name, int(p0 is not None), s0.inferences, int(p1 is not None), s1.inferences, s1.guided_failures


def cmd_guided_prove(a):
    files = _problems(a.problems)
    _need(Path(a.model), "train")
    jobs = [(str(f), _limits(a), a.model, a.skolem_prefixes) for f in files]
    if a.jobs > 1:
        with ProcessPoolExecutor(a.jobs) as ex:
            rows = list(ex.map(_guided_one, jobs))
    else:
        rows = [_guided_one(j) for j in jobs]
    rows.sort()
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "guided.csv", ("problem", "input_solved", "input_inferences",
                                    "guided_solved", "guided_inferences", "scorer_failures"), rows)
    base, guided = sum(r[1] for r in rows), sum(r[3] for r in rows)
    print(f"input order solved {base}/{len(rows)}, guided solved {guided}/{len(rows)}")
    if guided < base:
        print(f"WARNING: guided ordering solved {base - guided} fewer problems within the same budget")


def cmd_corpus_stats(a):
    st = dg.load_external_corpus(a.data)
    print(f"proofs: {st.proofs}")
    for kind, n in sorted(st.pairs.items()):
        print(f"pairs ({kind}): {n}")


# ---------------------------------------------------------------- parser

def _add_limits(p):
    p.add_argument("--max-depth", type=int, default=10, help="largest path-length limit")
    p.add_argument("--node-budget", type=int, default=200_000, help="inference budget per problem")
    p.add_argument("--time-budget", type=float, default=60.0, help="seconds per problem")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")


def _add_skolem(p):
    p.add_argument("--skolem-prefixes", default="esk,skolem,sk", help="comma-separated Skolem name prefixes")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="tabguide", description=__doc__.split("\n\n")[0],
                                     formatter_class=fmt)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help, formatter_class=fmt)
        p.add_argument("--config", help="key=value file supplying defaults for this command")
        p.set_defaults(func=func)
        return p

    p = add("generate", cmd_generate, "write generated unsatisfiable problems")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=20, help="number of problems")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("--library", choices=("small", "large"), default="small",
                   help="axiom library preset the problems draw from")
    p.add_argument("--include-fig1", action="store_true", help="also write the bundled fig1.p")

    p = add("prove", cmd_prove, "prove every .p file of a directory")
    p.add_argument("--problems", required=True, help="directory of TPTP-CNF files")
    p.add_argument("--out", required=True, help="proof output directory")
    _add_limits(p)
    p.add_argument("--ordering", choices=("input", "random"), default="input", help="clause ordering")
    p.add_argument("--seed", type=int, default=0, help="seed for random ordering")
    p.add_argument("--max-proofs", type=int, default=3, help="distinct proofs kept per problem")
    p.add_argument("--no-regularity", action="store_true", help="disable regularity pruning")
    p.add_argument("--no-occurs-check", action="store_true", help="unify without occurs check")

    p = add("check", cmd_check, "verify proof files against their problems")
    p.add_argument("--problems", required=True, help="directory of TPTP-CNF files")
    p.add_argument("--proofs", required=True, help="directory of .proof files")

    p = add("extract", cmd_extract, "extract path examples from checked proofs")
    p.add_argument("--problems", required=True, help="directory of TPTP-CNF files")
    p.add_argument("--proofs", required=True, help="directory of .proof files")
    p.add_argument("--out", required=True, help="corpus directory")
    p.add_argument("--task", choices=("clause", "conjecture"), default="clause", help="prediction task")
    p.add_argument("--kind", choices=("literals", "clauses"), default="literals", help="source path type")
    p.add_argument("--steps", type=int, choices=(1, 2, 3), default=1, help="clause choices per target")
    _add_skolem(p)

    p = add("split", cmd_split, "split a corpus 0.6/0.1/0.3 by proof and build vocabularies")
    p.add_argument("--corpus", required=True, help="corpus directory from extract")
    p.add_argument("--seed", type=int, default=0, help="split seed")

    p = add("train", cmd_train, "train the encoder-decoder on a split corpus")
    p.add_argument("--corpus", required=True, help="corpus directory from split")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--embed-dim", type=int, default=64, help="embedding size")
    p.add_argument("--hidden-dim", type=int, default=128, help="GRU state size")
    p.add_argument("--layers", type=int, default=1, help="GRU layers per side")
    p.add_argument("--attention", choices=sm.ATTENTION_MODES, default="multiplicative", help="attention")
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam", help="optimizer")
    p.add_argument("--learning-rate", type=float, default=1e-3, help="step size")
    p.add_argument("--batch-size", type=int, default=32, help="examples per step")
    p.add_argument("--epochs", type=int, default=10, help="passes over the training split")
    p.add_argument("--clip-norm", type=float, default=5.0, help="global gradient norm limit")
    p.add_argument("--seed", type=int, default=0, help="init and shuffle seed")
    p.add_argument("--select-every", type=int, default=0,
                   help="keep the best checkpoint by validation exact match, checked every N epochs (0: off)")

    p = add("decode", cmd_decode, "beam-decode a corpus split")
    p.add_argument("--corpus", required=True, help="corpus directory from split")
    p.add_argument("--model", required=True, help="checkpoint from train")
    p.add_argument("--out", required=True, help="predictions file")
    p.add_argument("--split", choices=("train", "valid", "test"), default="test", help="split to decode")
    p.add_argument("--k", type=int, default=10, help="beam width")
    p.add_argument("--max-len", type=int, default=40, help="maximum decoded tokens")
    p.add_argument("--length-norm", action="store_true", help="rank by per-token score")

    p = add("evaluate", cmd_evaluate, "score predictions and write the accuracy tables")
    p.add_argument("--corpus", required=True, help="corpus directories, comma-separated")
    p.add_argument("--predictions", required=True, help="prediction files, comma-separated")
    p.add_argument("--out", required=True, help="directory for the CSV tables")
    p.add_argument("--reference", choices=("all", "split"), default="all",
                   help="reference continuations from all proofs or the decoded split only")

    p = add("conjecture", cmd_conjecture, "classify conjectured literals")
    p.add_argument("--corpus", required=True, help="conjecturing corpus directory")
    p.add_argument("--predictions", required=True, help="prediction file")
    p.add_argument("--out", required=True, help="output directory")

    p = add("baseline", cmd_baseline, "train and score the feature-based multilabel baseline")
    p.add_argument("--corpus", required=True, help="literal-path corpus (steps 1) from split")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--decay", type=float, default=bl.DEFAULT_DECAY, help="path decay factor")
    p.add_argument("--epochs", type=int, default=300, help="gradient steps")
    p.add_argument("--learning-rate", type=float, default=0.5, help="step size")
    p.add_argument("--k", type=int, default=10, help="labels predicted per path")
    p.add_argument("--seed", type=int, default=0, help="feature hashing seed")

    p = add("guided-prove", cmd_guided_prove, "compare model-guided and input clause ordering")
    p.add_argument("--problems", required=True, help="directory of TPTP-CNF files")
    p.add_argument("--model", required=True, help="checkpoint trained on literal paths, steps 1")
    p.add_argument("--out", required=True, help="output directory")
    _add_limits(p)
    _add_skolem(p)

    p = add("corpus-stats", cmd_corpus_stats, "count proofs and pairs in a user-supplied corpus")
    p.add_argument("--data", required=True, help="corpus root directory")
    return parser


def _subparser(parser, command):
    for action in parser._subparsers._group_actions:
        return action.choices[command]


def read_config(path) -> dict[str, str]:
    out = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _config_defaults(sub, path) -> dict:
    opts = {a.option_strings[-1][2:]: a for a in sub._actions
            if a.option_strings and a.option_strings[-1].startswith("--")
            and a.dest not in ("help", "config")}
    cfg = read_config(path)
    unknown = sorted(set(cfg) - set(opts))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    defaults = {}
    for key, value in cfg.items():
        action = opts[key]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[action.dest] = value.lower() in ("1", "true", "yes", "on")
            continue
        try:
            defaults[action.dest] = (action.type or str)(value)
        except ValueError:
            raise UsageError(f"config key {key}: bad value {value!r}") from None
        if action.choices and defaults[action.dest] not in action.choices:
            raise UsageError(f"config key {key}: {value!r} not in {tuple(action.choices)}")
    return defaults


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    if "--config" not in argv:
        return parser.parse_args(argv)
    # first pass: find the command and config file with required flags relaxed
    cmd = next((a for a in argv if a in COMMAND_NAMES), None)
    if cmd is None:
        return parser.parse_args(argv)
    sub = _subparser(parser, cmd)
    required = [a for a in sub._actions if a.required and a.option_strings]
    for a in required:
        a.required = False
    first = parser.parse_args(argv)
    if first.config is None:
        raise UsageError("--config needs a file")
    try:
        sub.set_defaults(**_config_defaults(sub, first.config))
    except OSError as e:
        raise UsageError(f"cannot read config file: {e}") from None
    args = parser.parse_args(argv)
    missing = [a.option_strings[-1] for a in required if getattr(args, a.dest) is None]
    if missing:
        raise UsageError(f"missing required options: {', '.join(missing)}")
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except UsageError as e:
        print(f"tabguide: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args) or EXIT_OK
    except UsageError as e:
        print(f"tabguide: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantViolation as e:
        print(f"tabguide: internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except (DataError, OSError, ValueError, ProofError, ParseError) as e:
        print(f"tabguide: data error: {e}", file=sys.stderr)
        return EXIT_DATA


COMMAND_NAMES = ("generate", "prove", "check", "extract", "split", "train", "decode", "evaluate",
                 "conjecture", "baseline", "guided-prove", "corpus-stats")


if __name__ == "__main__":
    sys.exit(main())
