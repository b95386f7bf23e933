"""Walk through the bundled five-clause example.

Proves it, prints the closed tableau, checks it independently, and shows the
path-to-clause training pairs that one proof yields for one and two steps.

    python demos/fig1_walkthrough.py
"""

from importlib.resources import files

from tabguide.datagen import extract_clause_choice_examples, extract_conjecturing_examples
from tabguide.fol import parse_tptp_cnf, print_clause, print_literal
from tabguide.tableau import SearchLimits, check_proof, prove


def show(node, depth=0):
    how = {"ext": f"extend with {node.clause}", "red": f"reduce against depth {node.ancestor}",
           "conn": "connected", "open": "OPEN"}[node.closure]
    print("  " * depth + f"{print_literal(node.literal):<12} {how}")
    for ch in node.children:
        show(ch, depth + 1)


text = files("tabguide.data").joinpath("fig1.p").read_text()
matrix = parse_tptp_cnf(text, "fig1")
print("Input clauses:")
for c in matrix.clauses:
    print(f"  {c.name}: {print_clause(c)}")

proof, stats = prove(matrix, SearchLimits(max_depth=10))
print(f"\nProof found at depth bound {stats.depth} after {stats.inferences} inferences.")
print(f"Start clause {proof.start_clause}; expansion order {proof.expansions()}")
for root in proof.roots:
    show(root, 1)

verdict = check_proof(matrix, proof)
print(f"\nIndependent check: {'accepted' if verdict.ok else verdict.reason}")

for i in (1, 2):
    print(f"\nTraining pairs predicting the next {i} clause choice(s):")
    for e in extract_clause_choice_examples(proof, "literals", i):
        print(f"  {' '.join(e.source):<40} -> {' '.join(e.target)}")

print("\nConjecturing pairs (path -> literal to prove next):")
for e in extract_conjecturing_examples(proof):
    print(f"  {' '.join(e.source):<40} -> {' '.join(e.target)}")
