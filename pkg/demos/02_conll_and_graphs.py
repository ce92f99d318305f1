"""Reading CoNLL-2009 data and turning trees into message-passing graphs.

Run from the repository root:  python3 demos/02_conll_and_graphs.py
"""

import numpy as np

from syngcn import fixtures
from syngcn.conll import build_lexicon, parse_conll, write_conll
from syngcn.syngraph import build_graph, drop_relation, edge_dropout, label_name

print("== a labeled sentence ==")
text = fixtures.figure_sentence()
print(text)
sentences = parse_conll(text.splitlines(keepends=True))
sent = sentences[0]
print("predicates (1-based):", sent.predicates)
for p, row in zip(sent.predicates, sent.roles):
    args = {sent.tokens[i].form: r for i, r in enumerate(row) if r != "_"}
    print(f"  {sent.tokens[p - 1].form}: {args}")
print("round-trips byte-identical:", write_conll(sentences) == text)

print("\n== the syntactic graph ==")
lexicon = build_lexicon(sentences)
graph = build_graph(sent, lexicon)
print(f"{len(sent)} tokens -> {len(graph)} edges (3n-2 = {3 * len(sent) - 2})")
for e in graph.edges:
    src, dst = sent.tokens[e.src].form, sent.tokens[e.dst].form
    print(f"  {src:>8} -> {dst:<8} [{label_name(e.label_id, lexicon)}]")

print("\n== edge dropout (training-time) ==")
rng = np.random.default_rng(7)
for beta in (0.0, 0.3, 1.0):
    kept = len(edge_dropout(graph, beta, rng))
    print(f"  beta={beta}: kept {kept}/{len(graph)} edges")

print("\n== relation removal (test-time ablation) ==")
without = drop_relation(graph, lexicon.lookup("deprel", "OBJ"))
print(f"  dropping OBJ leaves {len(without)} edges "
      f"(self-loops are never dropped)")

print("\n== label space ==")
r = lexicon.num_deprels
print(f"{r} relation types (incl. the reserved unknown) -> "
      f"{graph.num_labels} extended labels (self + plain + primed)")
