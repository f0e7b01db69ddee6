"""Building the transition graph from labelled sequences.

Every training sequence contributes a walk entry -> label vertices -> exit;
each vertex stores the training elements carrying its label, and an edge
exists exactly where two labels were seen consecutively.
"""

import io

from sknn import (
    Dataset,
    Element,
    FeatureKind,
    FeatureSpec,
    MetricSpec,
    NameTable,
    Schema,
    Sequence,
    build_model,
    fit_metric,
    load_model_with_metric,
    save_model,
    validate_model,
    vertex_exemplars,
)
from sknn.model import Model

labels = NameTable(["DET", "NOUN", "VERB"])
schema = Schema([FeatureSpec("word", FeatureKind.TEXT)])

sentences = [
    [("the", "DET"), ("cat", "NOUN"), ("sleeps", "VERB")],
    [("a", "DET"), ("dog", "NOUN"), ("runs", "VERB")],
    [("dogs", "NOUN"), ("run", "VERB")],
]
dataset = Dataset(
    schema,
    [
        Sequence([Element((w,), labels.id(t)) for w, t in sent])
        for sent in sentences
    ],
    labels=labels,
)

model = build_model(dataset)

print("vertices:")
for v in model.label_vertices:
    exemplars = [e.values[0] for e in vertex_exemplars(model, v)]
    print(f"  {v}: {model.label_name(v):<6} exemplars={exemplars}")

print("\nedges:")
for a, b in sorted(model.edges):
    left = "init" if a == model.v_init else model.label_name(a)
    right = "end" if b == model.v_end else model.label_name(b)
    print(f"  {left} -> {right}")

# the constructed graph always satisfies its own edge conditions
print("\nviolations on own data:", validate_model(model, dataset))

# injecting a defect is caught: NOUN -> DET never occurs in the data
broken = Model(
    schema=model.schema,
    labels=model.labels,
    vertex_label=model.vertex_label,
    edges=set(model.edges) | {(model.vertex_of_label(labels.id("NOUN")), model.vertex_of_label(labels.id("DET")))},
    exemplars=model.exemplars,
)
print("violations after injecting NOUN->DET:", [str(v) for v in validate_model(broken, dataset)])

# round trip through the binary model format
metric = fit_metric(dataset, MetricSpec("overlap"))
model = build_model(dataset, metric)
buf = io.BytesIO()
save_model(model, buf, metric=metric)
buf.seek(0)
loaded, loaded_metric = load_model_with_metric(buf)
print("\nround trip: edges equal:", loaded.edges == model.edges)
print("round trip: fingerprint equal:", loaded_metric.fingerprint == metric.fingerprint)
