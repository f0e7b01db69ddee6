"""Labelling sequences with the graph-constrained minimum-distance decoder.

The decoder fills a (vertex x position) trellis where each step costs the
k-nearest distance from the element to the vertex's exemplars, restricted to
graph edges. On small instances the result provably equals exhaustive
enumeration over all feasible paths.
"""

import time

from sknn import (
    Element,
    MetricSpec,
    Sequence,
    WindowConfig,
    apply_context_window,
    brute_force_decode,
    build_model,
    evaluate_labelling,
    fit_metric,
    generate_chunking_corpus,
    label_sequence,
)
from sknn.decoder import Decoder

corpus = generate_chunking_corpus(300, seed=0)
train = corpus.with_sequences(corpus.sequences[:250])
test = corpus.with_sequences(corpus.sequences[250:])

windowed_train = apply_context_window(train, WindowConfig(2, 2))
windowed_test = apply_context_window(test, WindowConfig(2, 2))

metric = fit_metric(windowed_train, MetricSpec("mvdm"))
model = build_model(windowed_train, metric)
print(f"model: {len(model.vertex_label)} label vertices, {len(model.edges)} edges, "
      f"{sum(len(v) for v in model.exemplars.values())} exemplars")

# decode one sentence and compare with the enumeration oracle
probe_src = windowed_test.sequences[0]
probe = Sequence([Element(e.values) for e in probe_src.elements])
result = label_sequence(model, metric, probe, k=3)
oracle = brute_force_decode(model, metric, probe, k=3)
print("\none sentence:")
print("  gold:     ", [windowed_test.labels.name(e.label) for e in probe_src.elements])
print("  predicted:", [model.labels.name(l) for l in result.labels])
print(f"  cost {result.total_cost:.4f} (oracle {oracle.total_cost:.4f}), "
      f"{result.ndist_evals} n_dist evaluations")

# decode the whole held-out block
decoder = Decoder(model, metric, k=3)
t0 = time.monotonic()
pred, gold = [], []
for seq in windowed_test.sequences:
    out = decoder.label(Sequence([Element(e.values) for e in seq.elements]))
    pred.append([model.labels.name(l) for l in out.labels])
    gold.append([windowed_test.labels.name(e.label) for e in seq.elements])
report = evaluate_labelling(pred, gold)
print(f"\nheld-out block ({len(pred)} sentences, {time.monotonic()-t0:.2f}s):")
print(f"  token accuracy: {report.token_accuracy:.4f}")
print(f"  chunk F1:       {report.chunk_f1:.4f}")
worst = sorted(report.per_label.items(), key=lambda kv: kv[1].recall)[:3]
print("  hardest labels:", [(n, round(s.recall, 3)) for n, s in worst])
