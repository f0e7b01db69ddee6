"""Shared fixtures and randomized-instance helpers."""

from __future__ import annotations

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
from sknn.metrics import MetricSpec, fit_metric
from sknn.model import Model, build_model

SYMBOLS = ["a", "b", "c", "d"]
NUMBERS = [0.0, 1.0, 2.5, -1.0]


def mixed_schema() -> Schema:
    return Schema(
        [
            FeatureSpec("sym", FeatureKind.SYMBOL, alphabet=set(SYMBOLS)),
            FeatureSpec("num", FeatureKind.REAL),
        ]
    )


def random_element(rng, label=None) -> Element:
    return Element(
        (SYMBOLS[rng.integers(len(SYMBOLS))], NUMBERS[rng.integers(len(NUMBERS))]),
        label=label,
    )


def random_labelled_dataset(
    rng, max_labels: int = 5, max_sequences: int = 8, max_len: int = 6
) -> Dataset:
    n_labels = int(rng.integers(1, max_labels + 1))
    labels = NameTable(f"L{i}" for i in range(n_labels))
    sequences = []
    for _ in range(int(rng.integers(1, max_sequences + 1))):
        length = int(rng.integers(1, max_len + 1))
        sequences.append(
            Sequence([random_element(rng, int(rng.integers(n_labels))) for _ in range(length)])
        )
    return Dataset(mixed_schema(), sequences, labels=labels)


def random_metric_spec(rng) -> MetricSpec:
    kernel = ["overlap", "weighted-overlap", "mvdm", "normalized-euclidean"][
        rng.integers(4)
    ]
    if kernel == "weighted-overlap":
        weighting = ["information-gain", "information-gain-ratio"][rng.integers(2)]
        return MetricSpec(kernel, weighting)
    return MetricSpec(kernel)


def random_decode_instance(rng, max_exemplars: int = 20):
    """(model, metric, probe sequence, k) with a coherent graph and exemplars.

    Occasionally adds extra label-to-label edges beyond the data-induced ones
    to vary the graph shapes the decoder sees.
    """
    dataset = random_labelled_dataset(rng)
    # cap exemplar totals per vertex by trimming sequences if needed
    metric = fit_metric(dataset, random_metric_spec(rng))
    model = build_model(dataset, metric)
    if rng.random() < 0.5 and len(model.label_vertices) > 1:
        lv = model.label_vertices
        extra = {
            (lv[rng.integers(len(lv))], lv[rng.integers(len(lv))])
            for _ in range(int(rng.integers(1, 4)))
        }
        model = Model(
            schema=model.schema,
            labels=model.labels,
            vertex_label=model.vertex_label,
            edges=set(model.edges) | extra,
            exemplars=model.exemplars,
            classes=model.classes,
            metric_fingerprint=model.metric_fingerprint,
        )
    probe_len = int(rng.integers(1, 7))
    probe = Sequence([random_element(rng) for _ in range(probe_len)])
    k = int(rng.integers(1, 4))
    return model, metric, probe, k


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
