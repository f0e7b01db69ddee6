"""Trellis decoding against trivial cases and the enumeration oracle."""

import math

import numpy as np
import pytest

from sknn.dataset import (
    Dataset,
    Element,
    FeatureKind,
    FeatureSpec,
    NameTable,
    Schema,
    Sequence,
)
from sknn.decoder import (
    Decoder,
    brute_force_decode,
    classify_sequence,
    label_sequence,
)
from sknn.errors import (
    InstanceTooLarge,
    MetricMismatch,
    NoFeasiblePath,
    UnclassifiableSequence,
)
from sknn.metrics import MetricSpec, distance, fit_metric
from sknn.model import build_model

from conftest import random_decode_instance

TEXT_SCHEMA = Schema([FeatureSpec("f", FeatureKind.TEXT)])


def chain_dataset(*label_runs):
    """Build a dataset from (value, label-name) rows, one sequence per run."""
    names = sorted({l for run in label_runs for _, l in run})
    labels = NameTable(names)
    seqs = [
        Sequence([Element((v,), labels.id(l)) for v, l in run]) for run in label_runs
    ]
    return Dataset(TEXT_SCHEMA, seqs, labels=labels)


def test_single_vertex_loop_model():
    ds = chain_dataset([("a", "X"), ("b", "X"), ("c", "X")])
    metric = fit_metric(ds, MetricSpec("overlap"))
    model = build_model(ds, metric)
    probe = Sequence([Element(("a",)), Element(("zz",))])
    result = label_sequence(model, metric, probe, k=1)
    assert [model.labels.name(l) for l in result.labels] == ["X", "X"]
    vx = model.vertex_of_label(model.labels.id("X"))
    from sknn.metrics import n_dist

    expected = n_dist(probe.elements[0], model.exemplars[vx], 1, metric) + n_dist(
        probe.elements[1], model.exemplars[vx], 1, metric
    )
    assert result.total_cost == pytest.approx(expected)


def test_forced_chain_ignores_costs():
    ds = chain_dataset([("a", "X"), ("b", "Y")])
    metric = fit_metric(ds, MetricSpec("overlap"))
    model = build_model(ds, metric)
    # elements nothing like the exemplars: the only feasible path still wins
    probe = Sequence([Element(("q",)), Element(("r",))])
    result = label_sequence(model, metric, probe, k=1)
    assert [model.labels.name(l) for l in result.labels] == ["X", "Y"]


def test_no_feasible_path_lengths():
    ds = chain_dataset([("a", "X"), ("b", "Y")])
    metric = fit_metric(ds, MetricSpec("overlap"))
    model = build_model(ds, metric)
    with pytest.raises(NoFeasiblePath):
        label_sequence(model, metric, Sequence([Element(("a",))]), k=1)
    with pytest.raises(NoFeasiblePath):
        label_sequence(
            model, metric, Sequence([Element(("a",))] * 3), k=1
        )
    with pytest.raises(NoFeasiblePath):
        brute_force_decode(model, metric, Sequence([Element(("a",))]), k=1)


def test_metric_fingerprint_enforced():
    ds = chain_dataset([("a", "X"), ("b", "Y")])
    metric = fit_metric(ds, MetricSpec("overlap"))
    other = fit_metric(ds, MetricSpec("mvdm"))
    model = build_model(ds, metric)
    with pytest.raises(MetricMismatch):
        label_sequence(model, other, Sequence([Element(("a",)), Element(("b",))]), k=1)


def test_trellis_shape_and_boundaries():
    ds = chain_dataset([("a", "X"), ("b", "Y")])
    metric = fit_metric(ds, MetricSpec("overlap"))
    model = build_model(ds, metric)
    probe = Sequence([Element(("a",)), Element(("b",))])
    result = label_sequence(model, metric, probe, k=1)
    trellis = result.trellis
    vx = model.vertex_of_label(model.labels.id("X"))
    vy = model.vertex_of_label(model.labels.id("Y"))
    # position 0 is finite only for successors of the entry vertex
    assert math.isfinite(trellis.cost[vx, 0])
    assert math.isinf(trellis.cost[vy, 0])
    assert np.all(trellis.pred[:, 0] == model.v_init)
    # prefix costs along the returned path never decrease
    prefix = [trellis.cost[v, i] for i, v in enumerate(result.path)]
    assert all(b >= a - 1e-12 for a, b in zip(prefix, prefix[1:]))
    assert prefix[-1] == pytest.approx(result.total_cost)


def test_ndist_evaluation_count():
    ds = chain_dataset(
        [("a", "X"), ("b", "Y"), ("c", "Z")], [("a", "X"), ("c", "Z")]
    )
    metric = fit_metric(ds, MetricSpec("overlap"))
    model = build_model(ds, metric)
    probe = Sequence([Element(("a",)), Element(("b",)), Element(("c",))])
    result = label_sequence(model, metric, probe, k=1)
    assert result.ndist_evals == len(probe) * len(model.label_vertices)
    assert result.ndist_evals <= len(probe) * len(model.vertices)


def test_deterministic_output():
    ds = chain_dataset([("a", "X"), ("b", "Y"), ("a", "X"), ("c", "Z")])
    metric = fit_metric(ds, MetricSpec("mvdm"))
    model = build_model(ds, metric)
    probe = Sequence([Element(("a",)), Element(("b",)), Element(("a",)), Element(("c",))])
    r1 = label_sequence(model, metric, probe, k=2)
    r2 = label_sequence(model, metric, probe, k=2)
    assert r1.labels == r2.labels
    assert r1.path == r2.path
    assert r1.total_cost == r2.total_cost


def test_tie_breaks_toward_smallest_vertex_id():
    # two labels, both reachable from init and to end, identical exemplars:
    # every path ties, so the decoder must pick vertex ids (X first)
    ds = chain_dataset([("a", "X")], [("a", "Y")])
    metric = fit_metric(ds, MetricSpec("overlap"))
    model = build_model(ds, metric)
    probe = Sequence([Element(("a",))])
    result = label_sequence(model, metric, probe, k=1)
    bf = brute_force_decode(model, metric, probe, k=1)
    assert result.total_cost == pytest.approx(bf.total_cost)
    assert result.path[0] == min(model.label_vertices)


# -- oracle equivalence ---------------------------------------------------------


def independent_enumerator(model, metric, seq, k):
    """Second, independently coded enumerator: pure-python DFS over scalar
    pairwise distances with its own k-smallest mean."""

    def emission(pos, v):
        exs = model.exemplars[v]
        if not exs:
            return math.inf
        dists = sorted(distance(metric, seq.elements[pos], e) for e in exs)
        take = dists[: min(k, len(dists))]
        return sum(take) / len(take)

    best = [math.inf, None]

    def go(pos, v, acc):
        acc = acc + emission(pos, v)
        if pos == len(seq.elements) - 1:
            if (v, model.v_end) in model.edges and acc < best[0]:
                best[0], best[1] = acc, None
            return
        for nxt in sorted(b for a, b in model.edges if a == v and b != model.v_end):
            go(pos + 1, nxt, acc)

    for first in sorted(b for a, b in model.edges if a == model.v_init and b != model.v_end):
        go(0, first, 0.0)
    return best[0]


def test_oracle_equivalence_randomized(rng):
    checked = 0
    feasible = 0
    while checked < 120:
        model, metric, probe, k = random_decode_instance(rng)
        checked += 1
        try:
            bf = brute_force_decode(model, metric, probe, k)
        except NoFeasiblePath:
            with pytest.raises(NoFeasiblePath):
                label_sequence(model, metric, probe, k)
            continue
        feasible += 1
        result = label_sequence(model, metric, probe, k)
        assert result.total_cost == pytest.approx(bf.total_cost, abs=1e-9)
        # path validity
        assert (model.v_init, result.path[0]) in model.edges
        assert (result.path[-1], model.v_end) in model.edges
        for a, b in zip(result.path, result.path[1:]):
            assert (a, b) in model.edges
    assert feasible >= 40


def test_brute_force_cross_checked_by_independent_enumerator(rng):
    done = 0
    while done < 40:
        model, metric, probe, k = random_decode_instance(rng)
        try:
            bf = brute_force_decode(model, metric, probe, k)
        except NoFeasiblePath:
            assert math.isinf(independent_enumerator(model, metric, probe, k))
            continue
        done += 1
        assert bf.total_cost == pytest.approx(
            independent_enumerator(model, metric, probe, k), abs=1e-9
        )


def test_brute_force_guard():
    runs = [[(c, f"L{i}") for i, c in enumerate("abcdefgh")]]
    ds = chain_dataset(*runs)
    metric = fit_metric(ds, MetricSpec("overlap"))
    model = build_model(ds, metric)
    probe = Sequence([Element(("a",))] * 9)
    with pytest.raises(InstanceTooLarge):
        brute_force_decode(model, metric, probe, k=1)


# -- classification ----------------------------------------------------------------


def two_class_model(seq_a, seq_b, kernel="overlap"):
    from sknn.induction import ClusteringConfig, induce_classifier

    classes = NameTable(["A", "B"])
    ds = Dataset(
        TEXT_SCHEMA,
        [Sequence(seq_a, class_id=0), Sequence(seq_b, class_id=1)],
        classes=classes,
    )
    metric = fit_metric(ds, MetricSpec(kernel))
    model = induce_classifier(ds, metric, ClusteringConfig(cluster_count=1, seed=0))
    return model, metric


def test_classify_zero_distance_class_wins():
    model, metric = two_class_model(
        [Element(("a",)), Element(("b",))], [Element(("x",)), Element(("y",))]
    )
    probe = Sequence([Element(("a",)), Element(("b",))])
    result = classify_sequence(model, metric, probe, k=1)
    assert model.classes.name(result.class_id) == "A"
    assert result.total_cost == pytest.approx(0.0)
    assert result.per_class_costs[result.class_id] <= result.per_class_costs[1]
    assert result.class_id == min(
        result.per_class_costs, key=lambda c: (result.per_class_costs[c], c)
    )


def test_classify_feasibility_forcing():
    # class A admits only length-1 sequences, class B only length-2
    from sknn.induction import ClusteringConfig, induce_classifier

    classes = NameTable(["A", "B"])
    ds = Dataset(
        TEXT_SCHEMA,
        [
            Sequence([Element(("a",))], class_id=0),
            Sequence([Element(("x",)), Element(("y",))], class_id=1),
        ],
        classes=classes,
    )
    metric = fit_metric(ds, MetricSpec("overlap"))
    model = induce_classifier(ds, metric, ClusteringConfig(cluster_count=1, seed=0))
    # class A's subgraph has no self-loop, so only class B admits length 2
    probe = Sequence([Element(("a",)), Element(("a",))])
    result = classify_sequence(model, metric, probe, k=1)
    assert model.classes.name(result.class_id) == "B"
    assert math.isinf(result.per_class_costs[0])


def test_classify_unclassifiable():
    model, metric = two_class_model([Element(("a",))], [Element(("x",))])
    probe = Sequence([Element(("a",))] * 3)
    # single-vertex subgraphs without self-loops admit only length-1 paths
    with pytest.raises(UnclassifiableSequence):
        classify_sequence(model, metric, probe, k=1)


def test_classify_requires_class_structure():
    ds = chain_dataset([("a", "X"), ("b", "Y")])
    metric = fit_metric(ds, MetricSpec("overlap"))
    model = build_model(ds, metric)
    with pytest.raises(ValueError):
        classify_sequence(model, metric, Sequence([Element(("a",))]), k=1)


def test_classify_path_stays_in_one_subgraph():
    model, metric = two_class_model(
        [Element(("a",)), Element(("b",)), Element(("a",))],
        [Element(("x",)), Element(("y",))],
    )
    probe = Sequence([Element(("a",)), Element(("b",))])
    result = classify_sequence(model, metric, probe, k=1)
    path_classes = {model.vertex_class[v] for v in result.decode.path}
    assert path_classes == {result.class_id}


def test_decoder_reuse_across_sequences():
    ds = chain_dataset([("a", "X"), ("b", "Y"), ("c", "Z")])
    metric = fit_metric(ds, MetricSpec("overlap"))
    model = build_model(ds, metric)
    decoder = Decoder(model, metric, k=1)
    probes = [
        Sequence([Element(("a",)), Element(("b",)), Element(("c",))]),
        Sequence([Element(("q",)), Element(("q",)), Element(("q",))]),
    ]
    for probe in probes:
        got = decoder.label(probe)
        ref = label_sequence(model, metric, probe, k=1)
        assert got.labels == ref.labels
        assert got.total_cost == pytest.approx(ref.total_cost)
