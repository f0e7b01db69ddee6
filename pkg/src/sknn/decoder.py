"""Minimum-total-distance decoding over the transition graph.

The decoder fills a (vertex x position) trellis where stepping onto vertex v
at position i costs the k-nearest aggregated distance from the i-th element
to v's exemplars, restricted to graph edges: position 0 is limited to
successors of the entry vertex, transitions to existing edges, and the final
position to predecessors of the exit vertex. Infeasibility is an explicit
error, never a silent fallback to unconstrained decoding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import Sequence
from .errors import (
    InstanceTooLarge,
    MetricMismatch,
    NoFeasiblePath,
    SchemaMismatch,
    UnclassifiableSequence,
)
from .metrics import FittedMetric, MetricEngine, n_dist
from .model import Model

#: Enumeration guard for the brute-force oracle.
BRUTE_FORCE_LIMIT = 10**7


@dataclass
class Trellis:
    """Cost and predecessor matrices indexed [vertex, position]."""

    cost: np.ndarray
    pred: np.ndarray


@dataclass
class DecodeResult:
    labels: list[int]
    path: list[int]
    total_cost: float
    ndist_evals: int = 0
    trellis: Optional[Trellis] = None


@dataclass
class ClassifyResult:
    class_id: int
    total_cost: float
    per_class_costs: dict[int, float]
    decode: Optional[DecodeResult] = None


class Decoder:
    """Read-only decoding context: encoded exemplars plus edge structure.

    Building one per (model, metric, k) amortizes exemplar encoding across
    many sequences; decoding itself is thread-safe.
    """

    def __init__(
        self,
        model: Model,
        metric: FittedMetric,
        k: int,
        weighting: str = "uniform",
        check_elements: bool = True,
    ):
        if k < 1:
            raise ValueError("k must be >= 1")
        if model.metric_fingerprint and model.metric_fingerprint != metric.fingerprint:
            raise MetricMismatch(
                "model was built with a different fitted metric "
                f"({model.metric_fingerprint[:12]}... != {metric.fingerprint[:12]}...)"
            )
        if not model.schema.compatible(metric.schema):
            raise SchemaMismatch("model and metric schemas are incompatible")
        self.model = model
        self.metric = metric
        self.k = k
        self.weighting = weighting
        self.check_elements = check_elements
        self.engine = MetricEngine(metric)

        self.reachable = self._reachable_label_vertices()
        self.index_of = {v: i for i, v in enumerate(self.reachable)}
        self.blocks = [self.engine.encode(model.exemplars[v]) for v in self.reachable]
        self.block_sizes = [len(model.exemplars[v]) for v in self.reachable]

        r = len(self.reachable)
        self.trans = np.full((r, r), math.inf)
        for a, b in model.edges:
            ia = self.index_of.get(a)
            ib = self.index_of.get(b)
            if ia is not None and ib is not None:
                self.trans[ia, ib] = 0.0
        self.init_ok = np.array(
            [(model.v_init, v) in model.edges for v in self.reachable], dtype=bool
        )
        self.end_ok = np.array(
            [(v, model.v_end) in model.edges for v in self.reachable], dtype=bool
        )

    def _reachable_label_vertices(self) -> list[int]:
        succ: dict[int, list[int]] = {}
        for a, b in self.model.edges:
            succ.setdefault(a, []).append(b)
        seen = set()
        frontier = [self.model.v_init]
        while frontier:
            v = frontier.pop()
            for nxt in succ.get(v, ()):
                if nxt != self.model.v_end and nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return sorted(seen)

    # -- emissions ----------------------------------------------------------

    def emissions(self, seq: Sequence) -> np.ndarray:
        """(position x reachable-vertex) matrix of k-nearest aggregated
        distances; exactly len(seq) * len(reachable) evaluations."""
        out = np.empty((len(seq), len(self.reachable)))
        for i, el in enumerate(seq.elements):
            if self.check_elements:
                self.model.schema.check_element(el)
            probe = self.engine.encode([el])
            for j, block in enumerate(self.blocks):
                if self.block_sizes[j] == 0:
                    out[i, j] = math.inf
                    continue
                dists = self.engine.distances(probe, block)
                out[i, j] = self.engine.aggregate(dists, self.k, self.weighting)
        return out

    # -- dynamic programming -------------------------------------------------

    def _run_dp(self, emissions: np.ndarray, active: np.ndarray):
        """Viterbi over the vertex subset ``active`` (bool mask over reachable).

        Returns (cost, pred, end_index, total) in reachable-index space, or
        None when no feasible path exists. Ties pick the smallest vertex id
        (reachable list is sorted, argmin picks the first).
        """
        t_len, r = emissions.shape
        cost = np.full((r, t_len), math.inf)
        pred = np.full((r, t_len), -1, dtype=np.int64)

        start = self.init_ok & active
        cost[start, 0] = emissions[0, start]

        trans = np.where(active[:, None] & active[None, :], self.trans, math.inf)
        for i in range(1, t_len):
            scores = cost[:, i - 1][:, None] + trans
            best = scores.min(axis=0)
            pred[:, i] = scores.argmin(axis=0)
            cost[:, i] = best + emissions[i]

        final = np.where(self.end_ok & active, cost[:, t_len - 1], math.inf)
        end_idx = int(final.argmin())
        total = float(final[end_idx])
        if math.isinf(total):
            return None
        return cost, pred, end_idx, total

    def _extract(self, pred: np.ndarray, end_idx: int, t_len: int) -> list[int]:
        idxs = [end_idx]
        for i in range(t_len - 1, 0, -1):
            idxs.append(int(pred[idxs[-1], i]))
        idxs.reverse()
        return [self.reachable[j] for j in idxs]

    def _full_trellis(self, cost: np.ndarray, pred: np.ndarray) -> Trellis:
        n_vertices = max(self.model.vertices) + 1
        t_len = cost.shape[1]
        full_cost = np.full((n_vertices, t_len), math.inf)
        full_pred = np.full((n_vertices, t_len), self.model.v_init, dtype=np.int64)
        for j, v in enumerate(self.reachable):
            full_cost[v] = cost[j]
            for i in range(1, t_len):
                p = pred[j, i]
                full_pred[v, i] = self.reachable[p] if p >= 0 else self.model.v_init
        return Trellis(full_cost, full_pred)

    # -- public operations ----------------------------------------------------

    def label(self, seq: Sequence) -> DecodeResult:
        emissions = self.emissions(seq)
        evals = emissions.size
        active = np.ones(len(self.reachable), dtype=bool)
        hit = self._run_dp(emissions, active)
        if hit is None:
            raise NoFeasiblePath(
                f"no edge-respecting path of length {len(seq)} exists in the model"
            )
        cost, pred, end_idx, total = hit
        path = self._extract(pred, end_idx, len(seq))
        labels = [self.model.vertex_label[v] for v in path]
        return DecodeResult(
            labels=labels,
            path=path,
            total_cost=total,
            ndist_evals=evals,
            trellis=self._full_trellis(cost, pred),
        )

    def classify(self, seq: Sequence) -> ClassifyResult:
        if self.model.vertex_class is None:
            raise ValueError("model carries no class structure; assemble one first")
        emissions = self.emissions(seq)
        evals = emissions.size
        class_ids = sorted(set(self.model.vertex_class.values()))
        per_class: dict[int, float] = {}
        best: Optional[tuple[int, tuple]] = None
        for c in class_ids:
            active = np.array(
                [self.model.vertex_class.get(v) == c for v in self.reachable], dtype=bool
            )
            hit = self._run_dp(emissions, active)
            if hit is None:
                per_class[c] = math.inf
                continue
            per_class[c] = hit[3]
            if best is None or hit[3] < best[1][3]:
                best = (c, hit)
        if best is None:
            raise UnclassifiableSequence(
                "no class subgraph admits a path of the required length"
            )
        c, (cost, pred, end_idx, total) = best
        path = self._extract(pred, end_idx, len(seq))
        decode = DecodeResult(
            labels=[self.model.vertex_label[v] for v in path],
            path=path,
            total_cost=total,
            ndist_evals=evals,
            trellis=self._full_trellis(cost, pred),
        )
        return ClassifyResult(
            class_id=c, total_cost=total, per_class_costs=per_class, decode=decode
        )


def label_sequence(
    model: Model, metric: FittedMetric, seq: Sequence, k: int, weighting: str = "uniform"
) -> DecodeResult:
    """Minimum-cost edge-respecting labelling of one sequence."""
    return Decoder(model, metric, k, weighting=weighting).label(seq)


def classify_sequence(
    model: Model, metric: FittedMetric, seq: Sequence, k: int, weighting: str = "uniform"
) -> ClassifyResult:
    """Whole-sequence classification over the union of class subgraphs.

    The winning class is the argmin of per-class decode costs; by subgraph
    disjointness it equals the class of every vertex on the union-optimal path.
    """
    return Decoder(model, metric, k, weighting=weighting).classify(seq)


def brute_force_decode(
    model: Model, metric: FittedMetric, seq: Sequence, k: int, weighting: str = "uniform"
) -> DecodeResult:
    """Exhaustive-enumeration oracle for the decoder.

    Walks every edge-respecting path of the required length using the scalar
    distance implementation, entirely independent of the trellis code path.
    """
    label_vertices = model.label_vertices
    if len(label_vertices) ** len(seq) > BRUTE_FORCE_LIMIT:
        raise InstanceTooLarge(
            f"{len(label_vertices)}^{len(seq)} paths exceed the enumeration guard"
        )
    if model.metric_fingerprint and model.metric_fingerprint != metric.fingerprint:
        raise MetricMismatch("model was built with a different fitted metric")

    succ: dict[int, list[int]] = {}
    for a, b in model.edges:
        if b != model.v_end:
            succ.setdefault(a, []).append(b)
    for vs in succ.values():
        vs.sort()

    t_len = len(seq)
    memo: dict[tuple[int, int], float] = {}

    def emission(pos: int, v: int) -> float:
        key = (pos, v)
        if key not in memo:
            memo[key] = n_dist(
                seq.elements[pos], model.exemplars[v], k, metric, weighting
            )
        return memo[key]

    best_cost = math.inf
    best_path: Optional[list[int]] = None
    path: list[int] = []

    def walk(pos: int, v: int, cost: float):
        nonlocal best_cost, best_path
        cost += emission(pos, v)
        if math.isinf(cost):
            return
        path.append(v)
        if pos == t_len - 1:
            if (v, model.v_end) in model.edges and cost < best_cost:
                best_cost = cost
                best_path = list(path)
        else:
            for nxt in succ.get(v, ()):
                walk(pos + 1, nxt, cost)
        path.pop()

    for v in succ.get(model.v_init, ()):
        walk(0, v, 0.0)

    if best_path is None:
        raise NoFeasiblePath(
            f"no edge-respecting path of length {t_len} exists in the model"
        )
    return DecodeResult(
        labels=[model.vertex_label[v] for v in best_path],
        path=best_path,
        total_cost=best_cost,
        ndist_evals=len(memo),
    )
