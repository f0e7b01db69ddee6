"""The four distance kernels and the k-nearest aggregation.

Overlap counts mismatching features; weighted Overlap scales each feature by
its information gain (or gain ratio); MVDM compares label-conditional value
probabilities; normalized Euclidean works on z-scored numeric features. All
element distances are normalized so decoder costs stay comparable across
window sizes.
"""

from sknn import (
    Dataset,
    Element,
    FeatureKind,
    FeatureSpec,
    MetricSpec,
    NameTable,
    Schema,
    Sequence,
    distance,
    fit_metric,
    information_gain,
    information_gain_ratio,
    mvdm_value_distance,
    n_dist,
)

labels = NameTable(["FRUIT", "TOOL"])
schema = Schema(
    [
        FeatureSpec("word", FeatureKind.TEXT),
        FeatureSpec("shape", FeatureKind.SYMBOL, alphabet={"round", "long"}),
    ]
)
rows = [
    (("apple", "round"), "FRUIT"),
    (("apple", "round"), "FRUIT"),
    (("pear", "round"), "FRUIT"),
    (("banana", "long"), "FRUIT"),
    (("hammer", "long"), "TOOL"),
    (("saw", "long"), "TOOL"),
    (("saw", "long"), "TOOL"),
    (("drill", "long"), "TOOL"),
]
dataset = Dataset(
    schema,
    [Sequence([Element(v, labels.id(l)) for v, l in rows])],
    labels=labels,
)

apple = Element(("apple", "round"))
saw = Element(("saw", "long"))
pear = Element(("pear", "round"))

print("plain overlap:")
overlap = fit_metric(dataset, MetricSpec("overlap"))
print(f"  d(apple, saw)  = {distance(overlap, apple, saw):.3f}   (both features differ)")
print(f"  d(apple, pear) = {distance(overlap, apple, pear):.3f}   (only the word differs)")

print("\nfeature informativeness:")
for f in range(schema.arity):
    print(
        f"  {schema.names[f]:<6} IG={information_gain(dataset, f):.3f} bits,"
        f" IGR={information_gain_ratio(dataset, f):.3f}"
    )

weighted = fit_metric(dataset, MetricSpec("weighted-overlap", "information-gain"))
print("\nIG-weighted overlap:")
print(f"  weights = {dict(zip(schema.names, weighted.weights.round(3)))}")
print(f"  d(apple, saw)  = {distance(weighted, apple, saw):.3f}")

mvdm = fit_metric(dataset, MetricSpec("mvdm"))
print("\nMVDM value distances (word feature, range [0, 2]):")
for v1, v2 in [("apple", "pear"), ("apple", "saw"), ("banana", "saw")]:
    print(f"  delta({v1}, {v2}) = {mvdm_value_distance(mvdm, 0, v1, v2):.3f}")
print("  'banana' and 'saw' share P(TOOL|v)=0/1 splits:",
      dict(zip(labels.names(), mvdm.mvdm_tables[0]['banana'].round(2))),
      dict(zip(labels.names(), mvdm.mvdm_tables[0]['saw'].round(2))))

print("\nk-nearest aggregated distance (the decoder's step cost):")
exemplars = [Element(v, None) for v, _ in rows]
for k in (1, 3):
    print(f"  n_dist(apple, all exemplars, k={k}) = {n_dist(apple, exemplars, k, overlap):.3f}")
print(f"  inverse-rank weighting, k=3: "
      f"{n_dist(apple, exemplars, 3, overlap, weighting='inverse-rank'):.3f}")

# numeric features: z-scored Euclidean
xy = Schema([FeatureSpec("x", FeatureKind.REAL), FeatureSpec("y", FeatureKind.REAL)])
points = Dataset(xy, [Sequence([Element((0.0, 0.0)), Element((4.0, 0.0)), Element((2.0, 2.0))])])
euclid = fit_metric(points, MetricSpec("normalized-euclidean"))
print("\nnormalized Euclidean:")
print(f"  norm stats: {[(round(m,2), round(s,2)) for m, s in euclid.norm_stats]}")
print(f"  d((0,0), (4,0)) = {distance(euclid, Element((0.0, 0.0)), Element((4.0, 0.0))):.3f}")
