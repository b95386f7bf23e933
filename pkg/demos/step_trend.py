"""How accuracy falls as the model predicts more clause choices at once.

Generates problems from the large axiom library, proves each up to three
times, and trains one literal-path model per horizon i = 1, 2, 3 with the
checkpoint chosen by validation accuracy. Prints top-1 and top-10 test
accuracy beside the uniform and majority-label baselines.

    python demos/step_trend.py [--problems 300] [--epochs 20] [--seed 0]

The acceptance suite runs the same experiment at 600 problems and 40
epochs on three seeds.
"""

import argparse
import time
from collections import Counter

from tabguide import seqmodel as sm
from tabguide.datagen import Vocabulary, extract_clause_choice_examples, sort_examples, split_by_proofs
from tabguide.evalkit import PredictionRecord, index_from_examples, predictive_accuracy
from tabguide.generate import generate_problems
from tabguide.tableau import SearchLimits, prove_all

ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
ap.add_argument("--problems", type=int, default=300)
ap.add_argument("--epochs", type=int, default=20)
ap.add_argument("--seed", type=int, default=0)
args = ap.parse_args()

t0 = time.time()
proofs = []
for m in generate_problems(args.problems, seed=0, library="large"):
    found, _ = prove_all(m, SearchLimits(max_depth=10), max_proofs=3)
    proofs += [(f"{m.name}.{j}", p) for j, p in enumerate(found)]
print(f"{len(proofs)} proofs of {args.problems} problems in {time.time() - t0:.0f}s")

split = split_by_proofs([pid for pid, _ in proofs], args.seed)
print(f"{'i':>2} {'examples':>9} {'refs/src':>9} {'epoch':>6} {'acc@1':>6} {'acc@10':>7}"
      f" {'uniform':>8} {'majority':>9}")
for i in (1, 2, 3):
    examples = sort_examples(e for pid, p in proofs
                             for e in extract_clause_choice_examples(p, "literals", i, pid))
    index = index_from_examples(examples)
    part = {name: [e for e in examples if split.part_of(e.proof) == name]
            for name in ("train", "valid", "test")}
    sv = Vocabulary.build(e.source for e in part["train"])
    tv = Vocabulary.build(e.target for e in part["train"])

    def greedy_ok(model, e):
        out = sm.greedy_decode(model, sv.encode(e.source), i + 1).output(tv.eos)
        return tuple(tv.decode(out)) in index[("literals", e.source, i)]

    model = sm.init_model(sm.ModelConfig(len(sv), len(tv), 32, 64, seed=args.seed), sv, tv)
    model, epoch, _, _ = sm.train_with_selection(
        model, sm.encode_examples(part["train"], sv, tv),
        sm.TrainConfig(learning_rate=3e-3, epochs=args.epochs, shuffle_seed=args.seed),
        lambda m: sum(greedy_ok(m, e) for e in part["valid"]) / len(part["valid"]), every=5)

    recs = []
    for e in part["test"]:
        hyps = sm.beam_decode(model, sv.encode(e.source), k=10, max_len=i + 1)
        recs.append(PredictionRecord(e, [(tuple(tv.decode(h.output(tv.eos))), h.score) for h in hyps],
                                     index[("literals", e.source, i)], 10))
    refs = sum(map(len, index.values())) / len(index)
    line = (f"{i:>2} {len(examples):>9} {refs:>9.2f} {epoch:>6} "
            f"{float(predictive_accuracy([r.at(1) for r in recs]).accuracy):>6.3f} "
            f"{float(predictive_accuracy(recs).accuracy):>7.3f}")
    if i == 1:
        labels = Counter(e.target[0] for e in part["train"])
        top = labels.most_common(1)[0][0]
        majority = sum((top,) in index[("literals", e.source, 1)] for e in part["test"]) / len(part["test"])
        line += f" {1 / len(labels):>8.3f} {majority:>9.3f}"
    print(line)
