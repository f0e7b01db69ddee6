"""Clustering, per-class structure mining and classifier assembly."""

import numpy as np
import pytest

import sknn.induction as induction_module
from sknn.data import generate_trajectories
from sknn.dataset import (
    Dataset,
    Element,
    FeatureKind,
    FeatureSpec,
    NameTable,
    Schema,
    Sequence,
)
from sknn.decoder import Decoder
from sknn.errors import (
    ClusterCountExceedsElements,
    DistanceMatrixTooLarge,
    EmptySubgraphSet,
)
from sknn.induction import (
    ClusteringConfig,
    assemble_classifier,
    cluster_exemplars,
    induce_classifier,
    induce_structure,
)
from sknn.metrics import MetricSpec, fit_metric

TEXT_SCHEMA = Schema([FeatureSpec("f", FeatureKind.TEXT)])
XY_SCHEMA = Schema([FeatureSpec("x", FeatureKind.REAL), FeatureSpec("y", FeatureKind.REAL)])


def text_elements(values):
    return [Element((v,)) for v in values]


def text_metric(values):
    ds = Dataset(TEXT_SCHEMA, [Sequence(text_elements(values))])
    return fit_metric(ds, MetricSpec("overlap"))


def xy_metric(points):
    ds = Dataset(XY_SCHEMA, [Sequence([Element((float(x), float(y))) for x, y in points])])
    return fit_metric(ds, MetricSpec("normalized-euclidean"))


def test_single_cluster():
    elements = text_elements(["a", "b", "c"])
    metric = text_metric(["a", "b", "c"])
    out = cluster_exemplars(elements, metric, ClusteringConfig(cluster_count=1, seed=0))
    assert list(out.element_to_cluster) == [0, 0, 0]


def test_duplicate_groups_split_cleanly():
    values = ["a", "a", "a", "b", "b", "b"]
    out = cluster_exemplars(
        text_elements(values), text_metric(values), ClusteringConfig(cluster_count=2, seed=1)
    )
    a_cluster = {out.element_to_cluster[i] for i in range(3)}
    b_cluster = {out.element_to_cluster[i] for i in range(3, 6)}
    assert len(a_cluster) == 1 and len(b_cluster) == 1
    assert a_cluster != b_cluster


def test_well_separated_centers_full_purity():
    rng = np.random.default_rng(0)
    sigma = 0.5
    centers = [(0.0, 0.0), (20.0, 0.0), (0.0, 20.0)]  # separation 40 sigma
    points, truth = [], []
    for ci, (cx, cy) in enumerate(centers):
        for _ in range(10):
            points.append((cx + rng.normal(0, sigma), cy + rng.normal(0, sigma)))
            truth.append(ci)
    metric = xy_metric(points)
    elements = [Element((float(x), float(y))) for x, y in points]
    for seed in (0, 1, 7):
        out = cluster_exemplars(
            elements, metric, ClusteringConfig(cluster_count=3, seed=seed)
        )
        # purity 1.0: every cluster maps to exactly one ground-truth center
        mapping = {}
        for got, want in zip(out.element_to_cluster, truth):
            mapping.setdefault(got, set()).add(want)
        assert all(len(v) == 1 for v in mapping.values())
        assert len(mapping) == 3


def test_cluster_count_exceeds_elements():
    with pytest.raises(ClusterCountExceedsElements):
        cluster_exemplars(
            text_elements(["a"]), text_metric(["a", "b"]), ClusteringConfig(cluster_count=2)
        )


def test_deterministic_given_seed():
    values = ["a", "b", "c", "d", "a", "b"]
    elements = text_elements(values)
    metric = text_metric(values)
    cfg = ClusteringConfig(cluster_count=3, seed=42)
    a = cluster_exemplars(elements, metric, cfg)
    b = cluster_exemplars(elements, metric, cfg)
    assert list(a.element_to_cluster) == list(b.element_to_cluster)
    assert a.medoids == b.medoids


def test_k_equals_n_singleton_clusters():
    values = ["a", "b", "c", "d"]
    out = cluster_exemplars(
        text_elements(values), text_metric(values), ClusteringConfig(cluster_count=4, seed=3)
    )
    assert sorted(out.element_to_cluster) == [0, 1, 2, 3]


def test_agglomerative_threshold():
    points = [(0.0, 0.0), (0.1, 0.0), (10.0, 0.0), (10.1, 0.0)]
    metric = xy_metric(points)
    elements = [Element((x, y)) for x, y in points]
    cfg = ClusteringConfig(
        method="agglomerative", linkage="average", distance_threshold=0.5, seed=0
    )
    out = cluster_exemplars(elements, metric, cfg)
    assert out.element_to_cluster[0] == out.element_to_cluster[1]
    assert out.element_to_cluster[2] == out.element_to_cluster[3]
    assert out.element_to_cluster[0] != out.element_to_cluster[2]
    assert out.medoids is None


def test_agglomerative_limit(monkeypatch):
    monkeypatch.setattr(induction_module, "MATERIALIZE_LIMIT", 3)
    values = ["a", "b", "c", "d"]
    cfg = ClusteringConfig(method="agglomerative", distance_threshold=0.5)
    with pytest.raises(DistanceMatrixTooLarge):
        cluster_exemplars(text_elements(values), text_metric(values), cfg)


def test_kmedoids_lazy_path_matches_materialized(monkeypatch):
    values = ["a", "b", "c", "a", "b", "c", "d", "d"]
    elements = text_elements(values)
    metric = text_metric(values)
    cfg = ClusteringConfig(cluster_count=3, seed=5)
    dense = cluster_exemplars(elements, metric, cfg)
    monkeypatch.setattr(induction_module, "MATERIALIZE_LIMIT", 2)
    lazy = cluster_exemplars(elements, metric, cfg)
    assert list(dense.element_to_cluster) == list(lazy.element_to_cluster)
    assert dense.medoids == lazy.medoids


def test_config_validation():
    with pytest.raises(ValueError):
        ClusteringConfig(method="nope")
    with pytest.raises(ValueError):
        ClusteringConfig(cluster_count=0)
    with pytest.raises(ValueError):
        ClusteringConfig(method="agglomerative", distance_threshold=None)
    with pytest.raises(ValueError):
        ClusteringConfig(method="agglomerative", distance_threshold=1.0, linkage="nope")


# -- structure induction ---------------------------------------------------------


def one_class_sequences(runs, class_id=0):
    return [Sequence(text_elements(run), class_id=class_id) for run in runs]


def test_induce_single_vertex_self_loop():
    seqs = one_class_sequences([["a", "b"], ["a"]])
    metric = text_metric(["a", "b"])
    sub = induce_structure(seqs, metric, ClusteringConfig(cluster_count=1, seed=0))
    assert sub.n_vertices == 1
    assert sub.edges == {(0, 0)}  # some sequence has length >= 2
    assert sub.entry == {0} and sub.exit == {0}


def test_induce_single_vertex_no_loop_for_singletons():
    seqs = one_class_sequences([["a"], ["b"]])
    metric = text_metric(["a", "b"])
    sub = induce_structure(seqs, metric, ClusteringConfig(cluster_count=1, seed=0))
    assert sub.edges == set()


def test_induce_alternating_duplicates():
    seqs = one_class_sequences([["a", "b", "a", "b"], ["a", "b"]])
    metric = text_metric(["a", "b"])
    sub = induce_structure(seqs, metric, ClusteringConfig(cluster_count=2, seed=0))
    a_cluster = sub.assignment.element_to_cluster[0]
    b_cluster = 1 - a_cluster
    assert sub.edges == {(a_cluster, b_cluster), (b_cluster, a_cluster)}
    assert sub.entry == {a_cluster}
    assert sub.exit == {b_cluster}


def test_induce_rejects_mixed_classes():
    seqs = [
        Sequence(text_elements(["a"]), class_id=0),
        Sequence(text_elements(["b"]), class_id=1),
    ]
    with pytest.raises(ValueError):
        induce_structure(seqs, text_metric(["a", "b"]), ClusteringConfig())


def test_induced_edges_match_trajectory_template():
    # station-hopping walks: the sequence dwells at three well-separated
    # centers in a fixed visit order, so clusters must recover the stations
    # and the edge set must equal the station-transition template
    rng = np.random.default_rng(2)
    centers = [(0.0, 0.0), (50.0, 0.0), (0.0, 50.0)]
    stations = []
    sequences = []
    for _ in range(6):
        pts, truth_ids = [], []
        for si, (cx, cy) in enumerate(centers):
            for _ in range(5):
                pts.append((cx + rng.normal(0, 0.5), cy + rng.normal(0, 0.5)))
                truth_ids.append(si)
        stations.append(truth_ids)
        sequences.append(
            Sequence([Element((float(x), float(y))) for x, y in pts], class_id=0)
        )
    metric = xy_metric([e.values for s in sequences for e in s.elements])
    sub = induce_structure(sequences, metric, ClusteringConfig(cluster_count=3, seed=0))
    assign = sub.assignment.element_to_cluster
    flat_truth = [s for ids in stations for s in ids]
    station_to_cluster = {}
    for got, want in zip(assign, flat_truth):
        station_to_cluster.setdefault(want, set()).add(got)
    assert all(len(v) == 1 for v in station_to_cluster.values())
    remap = {s: next(iter(v)) for s, v in station_to_cluster.items()}
    template = {(0, 0), (0, 1), (1, 1), (1, 2), (2, 2)}
    expected = {(remap[a], remap[b]) for a, b in template}
    assert sub.edges == expected
    assert sub.entry == {remap[0]}
    assert sub.exit == {remap[2]}


def test_exemplar_conservation():
    seqs = one_class_sequences([["a", "b", "c"], ["b", "c"]])
    metric = text_metric(["a", "b", "c"])
    sub = induce_structure(seqs, metric, ClusteringConfig(cluster_count=2, seed=0))
    got = sorted(e.values[0] for cluster in sub.exemplars for e in cluster)
    assert got == ["a", "b", "b", "c", "c"]


# -- assembly ----------------------------------------------------------------------


def test_assemble_single_subgraph():
    seqs = one_class_sequences([["a", "b"]])
    metric = text_metric(["a", "b"])
    sub = induce_structure(seqs, metric, ClusteringConfig(cluster_count=2, seed=0))
    model = assemble_classifier({0: sub}, metric=metric)
    assert len(model.vertex_label) == 2
    assert any(a == model.v_init for a, _ in model.edges)
    assert any(b == model.v_end for _, b in model.edges)
    assert model.vertex_class is not None


def test_assemble_two_singleton_subgraphs_disjoint():
    metric = text_metric(["a", "x"])
    sub_a = induce_structure(
        one_class_sequences([["a"]], class_id=0), metric, ClusteringConfig(seed=0),
        class_name="A",
    )
    sub_b = induce_structure(
        one_class_sequences([["x"]], class_id=1), metric, ClusteringConfig(seed=0),
        class_name="B",
    )
    model = assemble_classifier({0: sub_a, 1: sub_b}, metric=metric)
    assert len(model.vertices) == 4
    for a, b in model.edges:
        if a not in (model.v_init,) and b not in (model.v_end,):
            assert model.vertex_class[a] == model.vertex_class[b]
    assert sorted(model.labels.names()) == ["A#0", "B#0"]


def test_assemble_empty_rejected():
    with pytest.raises(EmptySubgraphSet):
        assemble_classifier({}, metric=text_metric(["a"]))


def test_assembled_model_disjointness_property():
    dataset, _ = generate_trajectories(3, 6, 0.3, seed=4, n_points=12)
    metric = fit_metric(dataset, MetricSpec("normalized-euclidean"))
    model = induce_classifier(dataset, metric, ClusteringConfig(cluster_count=3, seed=0))
    for a, b in model.edges:
        if a != model.v_init and b != model.v_end:
            assert model.vertex_class[a] == model.vertex_class[b]
    # exemplar conservation across the whole model
    total = sum(len(v) for v in model.exemplars.values())
    assert total == dataset.n_elements


def test_assembled_model_decodes_within_one_class():
    dataset, _ = generate_trajectories(3, 6, 0.2, seed=5, n_points=10)
    metric = fit_metric(dataset, MetricSpec("normalized-euclidean"))
    model = induce_classifier(dataset, metric, ClusteringConfig(cluster_count=2, seed=0))
    decoder = Decoder(model, metric, k=1)
    for seq in dataset.sequences[::4]:
        result = decoder.classify(Sequence([Element(e.values) for e in seq.elements]))
        assert {model.vertex_class[v] for v in result.decode.path} == {result.class_id}
