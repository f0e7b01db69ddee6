"""Graph-structure mining for class-only sequences.

Each class starts as a single vertex holding all its elements; clustering
splits that vertex into one vertex per cluster, and edges follow the
consecutive cluster ids observed in the training sequences. Per-class
subgraphs are then united under one shared entry/exit pair, keeping the
subgraphs disjoint so a decoded path can never mix classes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence as TSequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from .dataset import Dataset, Element, NameTable, Sequence
from .errors import (
    ClusterCountExceedsElements,
    DistanceMatrixTooLarge,
    EmptySubgraphSet,
)
from .metrics import FittedMetric, MetricEngine, pairwise_distances
from .model import V_END, V_INIT, Model

#: Above this element count the full distance matrix is not materialized.
MATERIALIZE_LIMIT = 20_000

LINKAGES = ("single", "complete", "average")


@dataclass(frozen=True)
class ClusteringConfig:
    method: str = "k-medoids"  # or "agglomerative"
    cluster_count: int = 1
    linkage: str = "average"
    distance_threshold: Optional[float] = None
    seed: int = 0
    max_iterations: int = 100

    def __post_init__(self):
        if self.method not in ("k-medoids", "agglomerative"):
            raise ValueError(f"unknown clustering method {self.method!r}")
        if self.cluster_count < 1:
            raise ValueError("cluster_count must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.method == "agglomerative":
            if self.linkage not in LINKAGES:
                raise ValueError(f"unknown linkage {self.linkage!r}")
            if self.distance_threshold is None or self.distance_threshold <= 0:
                raise ValueError("agglomerative clustering needs a positive threshold")


@dataclass
class ClusterAssignment:
    element_to_cluster: np.ndarray  # dense cluster index per element
    medoids: Optional[list[int]] = None  # element indices, k-medoids only

    @property
    def n_clusters(self) -> int:
        return int(self.element_to_cluster.max()) + 1 if len(self.element_to_cluster) else 0


def _lazy_rows(metric: FittedMetric, elements: TSequence[Element]):
    engine = MetricEngine(metric)
    block = engine.encode(elements)

    def row(i: int) -> np.ndarray:
        probe = [col[i : i + 1] for col in block]
        return engine.distances(probe, block)

    return row


def _kmedoids(row, n: int, k: int, seed: int, max_iterations: int) -> tuple[np.ndarray, list[int]]:
    """Seeded farthest-first build plus alternating refinement.

    ``row(i)`` returns distances from element i to all elements; ties are
    broken toward smaller indices, so results are deterministic given seed.
    """
    rng = np.random.default_rng(seed)
    first = int(rng.integers(n))
    medoids = [first]
    chosen = np.zeros(n, dtype=bool)
    chosen[first] = True
    mind = row(first).copy()
    while len(medoids) < k:
        cand = np.where(chosen, -np.inf, mind)
        nxt = int(cand.argmax())
        chosen[nxt] = True
        medoids.append(nxt)
        np.minimum(mind, row(nxt), out=mind)

    assign = np.zeros(n, dtype=np.int64)
    for _ in range(max_iterations):
        med_rows = np.vstack([row(m) for m in medoids])
        assign = med_rows.argmin(axis=0)
        for ci, m in enumerate(medoids):
            assign[m] = ci  # a medoid always anchors its own cluster
        new_medoids = []
        for ci in range(k):
            idx = np.where(assign == ci)[0]
            sums = np.array([row(i)[idx].sum() for i in idx])
            new_medoids.append(int(idx[sums.argmin()]))
        if new_medoids == medoids:
            break
        medoids = new_medoids
    med_rows = np.vstack([row(m) for m in medoids])
    assign = med_rows.argmin(axis=0)
    for ci, m in enumerate(medoids):
        assign[m] = ci
    return assign, medoids


def cluster_exemplars(
    elements: TSequence[Element], metric: FittedMetric, cfg: ClusteringConfig
) -> ClusterAssignment:
    """Partition elements under the fitted metric.

    k-medoids needs only the distance function; agglomerative linkage runs on
    the materialized matrix and refuses inputs past the memory cliff.
    """
    n = len(elements)
    if n == 0:
        raise ValueError("cannot cluster an empty element list")

    if cfg.method == "k-medoids":
        k = cfg.cluster_count
        if k > n:
            raise ClusterCountExceedsElements(f"{k} clusters requested for {n} elements")
        if n <= MATERIALIZE_LIMIT:
            matrix = pairwise_distances(metric, elements)
            row = lambda i: matrix[i]
        else:
            row = _lazy_rows(metric, elements)
        assign, medoids = _kmedoids(row, n, k, cfg.seed, cfg.max_iterations)
        return ClusterAssignment(assign, medoids)

    if n > MATERIALIZE_LIMIT:
        raise DistanceMatrixTooLarge(
            f"agglomerative clustering materializes an {n}x{n} matrix; limit is {MATERIALIZE_LIMIT}"
        )
    matrix = pairwise_distances(metric, elements)
    if n == 1:
        return ClusterAssignment(np.zeros(1, dtype=np.int64))
    z = linkage(squareform(matrix, checks=False), method=cfg.linkage)
    raw = fcluster(z, t=cfg.distance_threshold, criterion="distance")
    remap: dict[int, int] = {}
    dense = np.empty(n, dtype=np.int64)
    for i, c in enumerate(raw):
        if c not in remap:
            remap[c] = len(remap)
        dense[i] = remap[c]
    return ClusterAssignment(dense)


@dataclass
class Subgraph:
    """Per-class structure fragment produced by :func:`induce_structure`."""

    class_id: int
    class_name: str
    exemplars: list[list[Element]]  # per cluster
    edges: set[tuple[int, int]]  # cluster-id pairs
    entry: set[int]
    exit: set[int]
    assignment: Optional[ClusterAssignment] = field(repr=False, default=None)

    @property
    def n_vertices(self) -> int:
        return len(self.exemplars)


def induce_structure(
    sequences: list[Sequence],
    metric: FittedMetric,
    cfg: ClusteringConfig,
    class_name: Optional[str] = None,
) -> Subgraph:
    """Cluster one class's elements and derive its transition structure.

    Edges connect clusters exactly where consecutive training elements fall
    in the corresponding clusters; entry/exit sets come from first/last
    elements.
    """
    if not sequences:
        raise ValueError("induce_structure needs at least one sequence")
    class_ids = {s.class_id for s in sequences}
    if len(class_ids) != 1:
        raise ValueError(f"sequences span multiple classes: {sorted(class_ids)}")
    class_id = class_ids.pop()
    if class_id is None:
        class_id = 0

    flat: list[Element] = []
    bounds: list[tuple[int, int]] = []
    for seq in sequences:
        start = len(flat)
        flat.extend(seq.elements)
        bounds.append((start, len(flat)))

    assignment = cluster_exemplars(flat, metric, cfg)
    k = assignment.n_clusters

    exemplars: list[list[Element]] = [[] for _ in range(k)]
    for el, c in zip(flat, assignment.element_to_cluster):
        exemplars[c].append(el)

    edges: set[tuple[int, int]] = set()
    entry: set[int] = set()
    exit_: set[int] = set()
    for start, end in bounds:
        ids = assignment.element_to_cluster[start:end]
        entry.add(int(ids[0]))
        exit_.add(int(ids[-1]))
        for a, b in zip(ids, ids[1:]):
            edges.add((int(a), int(b)))

    return Subgraph(
        class_id=class_id,
        class_name=class_name if class_name is not None else f"C{class_id}",
        exemplars=exemplars,
        edges=edges,
        entry=entry,
        exit=exit_,
        assignment=assignment,
    )


def assemble_classifier(
    subgraphs: dict[int, Subgraph],
    metric: Optional[FittedMetric] = None,
    classes: Optional[NameTable] = None,
) -> Model:
    """Union the per-class subgraphs under one shared entry/exit pair.

    No edge crosses subgraphs; vertex labels are synthetic "<class>#<i>"
    names since class-only data carries no label alphabet.
    """
    if not subgraphs:
        raise EmptySubgraphSet("at least one class subgraph is required")
    if metric is None:
        raise ValueError("assemble_classifier needs the fitted metric (schema source)")

    labels = NameTable()
    vertex_label: dict[int, int] = {}
    vertex_class: dict[int, int] = {}
    edges: set[tuple[int, int]] = set()
    exemplars: dict[int, list[Element]] = {V_INIT: [], V_END: []}

    next_vertex = 2
    for class_id in sorted(subgraphs):
        sub = subgraphs[class_id]
        base = next_vertex
        for ci in range(sub.n_vertices):
            v = base + ci
            vertex_label[v] = labels.add(f"{sub.class_name}#{ci}")
            vertex_class[v] = class_id
            exemplars[v] = list(sub.exemplars[ci])
        next_vertex += sub.n_vertices
        for a, b in sub.edges:
            edges.add((base + a, base + b))
        for c in sub.entry:
            edges.add((V_INIT, base + c))
        for c in sub.exit:
            edges.add((base + c, V_END))

    if classes is not None:
        class_table = classes
    else:
        names = {cid: sub.class_name for cid, sub in subgraphs.items()}
        class_table = NameTable(
            names.get(i, f"C{i}") for i in range(max(subgraphs) + 1)
        )
    return Model(
        schema=metric.schema,
        labels=labels,
        vertex_label=vertex_label,
        edges=edges,
        exemplars=exemplars,
        vertex_class=vertex_class,
        classes=class_table,
        metric_fingerprint=metric.fingerprint,
    )


def induce_classifier(
    dataset: Dataset, metric: FittedMetric, cfg: ClusteringConfig
) -> Model:
    """Group a class-annotated dataset by class, induce each subgraph and
    assemble the classifier model."""
    groups: dict[int, list[Sequence]] = {}
    for seq in dataset.sequences:
        if seq.class_id is None:
            raise ValueError("every sequence needs a class for structure induction")
        groups.setdefault(seq.class_id, []).append(seq)
    subgraphs = {
        cid: induce_structure(seqs, metric, cfg, class_name=dataset.classes.name(cid))
        for cid, seqs in sorted(groups.items())
    }
    return assemble_classifier(subgraphs, metric=metric, classes=dataset.classes)
