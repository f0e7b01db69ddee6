"""Fitted distance functions over elements.

Four kernels ship: plain Overlap, Overlap weighted by information gain or
gain ratio, MVDM (value difference via label-conditional probabilities) and
normalized Euclidean over z-scored numeric features. A per-feature kernel
override table allows mixing kernels across features of one schema.

All distances are normalized to keep decoder costs comparable across window
sizes: Overlap and MVDM element distances live in [0, 1]; normalized
Euclidean divides by sqrt(arity).
"""

from __future__ import annotations

import hashlib
import math
import threading
from dataclasses import dataclass, field
from typing import Optional, Sequence as TSequence

import numpy as np

from .dataset import Dataset, Element, FeatureKind, NameTable, Schema
from .errors import (
    EmptyDataset,
    MissingLabels,
    NumericFeatureUnsupported,
    SchemaMismatch,
)

KERNELS = ("overlap", "weighted-overlap", "mvdm", "normalized-euclidean")
WEIGHTINGS = ("information-gain", "information-gain-ratio")
FEATURE_KERNELS = ("overlap", "mvdm", "euclidean")

#: Number of quantile bins used when estimating IG weights for numeric features.
NUMERIC_IG_BINS = 10


@dataclass(frozen=True)
class MetricSpec:
    """Kernel choice plus fitting options.

    ``feature_kernels`` optionally overrides the kernel per feature index,
    composing mixed-type distances as a weighted sum of per-feature terms.
    """

    kernel: str = "overlap"
    weighting: Optional[str] = None
    k_smoothing: float = 0.0
    feature_kernels: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if (self.kernel == "weighted-overlap") != (self.weighting is not None):
            raise ValueError("weighting must be given iff kernel is weighted-overlap")
        if self.weighting is not None and self.weighting not in WEIGHTINGS:
            raise ValueError(f"unknown weighting {self.weighting!r}")
        if self.k_smoothing < 0:
            raise ValueError("k_smoothing must be nonnegative")
        for idx, kern in self.feature_kernels:
            if kern not in FEATURE_KERNELS:
                raise ValueError(f"unknown per-feature kernel {kern!r} for feature {idx}")


@dataclass
class FittedMetric:
    """A metric spec plus everything learned from training data.

    Treated as immutable after :func:`fit_metric`; safe for concurrent use.
    """

    spec: MetricSpec
    schema: Schema
    label_names: list[str] = field(default_factory=list)
    weights: Optional[np.ndarray] = None
    mvdm_tables: Optional[list[Optional[dict]]] = None
    norm_stats: Optional[list[Optional[tuple[float, float]]]] = None
    fingerprint: str = ""
    # persistence conveniences, not fitted state (excluded from the fingerprint)
    default_k: Optional[int] = None
    default_resample: Optional[int] = None

    @property
    def n_labels(self) -> int:
        return len(self.label_names)


def resolve_feature_kernels(spec: MetricSpec, schema: Schema) -> list[str]:
    """Effective kernel per feature after defaults and overrides."""
    eff: list[str] = []
    for f in schema.features:
        if spec.kernel == "mvdm":
            eff.append("mvdm")
        elif spec.kernel == "normalized-euclidean":
            eff.append("euclidean" if f.kind.numeric else "overlap")
        else:
            eff.append("overlap")
    for idx, kern in spec.feature_kernels:
        if not 0 <= idx < schema.arity:
            raise ValueError(f"feature kernel override index {idx} out of range")
        if kern == "euclidean" and not schema.features[idx].kind.numeric:
            raise ValueError(f"euclidean override on non-numeric feature {idx}")
        eff[idx] = kern
    return eff


# ---------------------------------------------------------------------------
# Entropy machinery.
# ---------------------------------------------------------------------------


def _entropy(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def _discrete_ig(values: list, labels: list[int], n_labels: int) -> tuple[float, float]:
    """(information gain, split information), both in bits."""
    label_counts = np.bincount(labels, minlength=n_labels)
    h_label = _entropy(label_counts)

    by_value: dict = {}
    for v, l in zip(values, labels):
        row = by_value.get(v)
        if row is None:
            row = np.zeros(n_labels)
            by_value[v] = row
        row[l] += 1

    total = len(values)
    h_cond = 0.0
    split_info = 0.0
    for row in by_value.values():
        p_v = row.sum() / total
        h_cond += p_v * _entropy(row)
        split_info -= p_v * math.log2(p_v)
    ig = max(0.0, h_label - h_cond)
    return ig, split_info


def _element_labels(dataset: Dataset) -> list[int]:
    labels = []
    for el in dataset.iter_elements():
        if el.label is None:
            raise MissingLabels("operation requires element-level labels")
        labels.append(el.label)
    return labels


def _bin_numeric(column: list[float], n_bins: int = NUMERIC_IG_BINS) -> list[int]:
    arr = np.asarray(column, dtype=float)
    edges = np.unique(np.quantile(arr, np.linspace(0, 1, n_bins + 1)[1:-1]))
    return np.searchsorted(edges, arr, side="right").tolist()


def information_gain(dataset: Dataset, feature_index: int) -> float:
    """Entropy of the label distribution removed by knowing the feature (bits).

    Discrete features only; real/integer features raise
    :class:`NumericFeatureUnsupported` (weight fitting bins them instead).
    """
    kind = dataset.schema.features[feature_index].kind
    if kind in (FeatureKind.REAL, FeatureKind.INTEGER):
        raise NumericFeatureUnsupported(
            f"information gain needs a discrete feature, got {kind.value}"
        )
    labels = _element_labels(dataset)
    values = [el.values[feature_index] for el in dataset.iter_elements()]
    ig, _ = _discrete_ig(values, labels, len(dataset.labels))
    return ig


def information_gain_ratio(dataset: Dataset, feature_index: int) -> float:
    """Information gain normalized by the feature's own entropy.

    A constant feature has zero split information; its ratio is defined as 0.
    """
    kind = dataset.schema.features[feature_index].kind
    if kind in (FeatureKind.REAL, FeatureKind.INTEGER):
        raise NumericFeatureUnsupported(
            f"gain ratio needs a discrete feature, got {kind.value}"
        )
    labels = _element_labels(dataset)
    values = [el.values[feature_index] for el in dataset.iter_elements()]
    ig, split = _discrete_ig(values, labels, len(dataset.labels))
    if split <= 0.0:
        return 0.0
    return min(1.0, ig / split)


# ---------------------------------------------------------------------------
# Fitting.
# ---------------------------------------------------------------------------


def fit_metric(dataset: Dataset, spec: MetricSpec) -> FittedMetric:
    """Learn all state the distance function needs from training data only.

    Raises :class:`MissingLabels` when the spec needs label statistics (MVDM
    tables, IG/IGR weights) and elements are unlabelled. If every IG weight
    comes out zero (labels carry no information), uniform weights substitute.
    """
    if not dataset.sequences or dataset.n_elements == 0:
        raise EmptyDataset("cannot fit a metric on an empty dataset")
    schema = dataset.schema
    eff = resolve_feature_kernels(spec, schema)

    weights = None
    if spec.kernel == "weighted-overlap":
        labels = _element_labels(dataset)
        weights = np.zeros(schema.arity)
        for f, fspec in enumerate(schema.features):
            values = [el.values[f] for el in dataset.iter_elements()]
            if fspec.kind in (FeatureKind.REAL, FeatureKind.INTEGER):
                values = _bin_numeric(values)
            ig, split = _discrete_ig(values, labels, len(dataset.labels))
            if spec.weighting == "information-gain":
                weights[f] = ig
            else:
                weights[f] = 0.0 if split <= 0.0 else min(1.0, ig / split)
        if not weights.any():
            weights = np.ones(schema.arity)

    mvdm_tables = None
    if "mvdm" in eff:
        labels = _element_labels(dataset)
        n_labels = len(dataset.labels)
        alpha = spec.k_smoothing
        mvdm_tables = [None] * schema.arity
        for f in range(schema.arity):
            if eff[f] != "mvdm":
                continue
            counts: dict = {}
            for el, l in zip(dataset.iter_elements(), labels):
                v = el.values[f]
                row = counts.get(v)
                if row is None:
                    row = np.zeros(n_labels)
                    counts[v] = row
                row[l] += 1
            table = {}
            for v, row in counts.items():
                table[v] = (row + alpha) / (row.sum() + alpha * n_labels)
            mvdm_tables[f] = table

    norm_stats = None
    if "euclidean" in eff:
        pad_flags = schema.pad_flags()
        norm_stats = [None] * schema.arity
        for f in range(schema.arity):
            if eff[f] != "euclidean":
                continue
            column = []
            flag_idx = pad_flags.get(f)
            for el in dataset.iter_elements():
                if flag_idx is not None and el.values[flag_idx]:
                    continue  # padded cell; excluded from the statistics
                column.append(float(el.values[f]))
            if not column:
                norm_stats[f] = (0.0, 1.0)
                continue
            arr = np.asarray(column)
            std = float(arr.std())
            norm_stats[f] = (float(arr.mean()), std if std > 0 else 1.0)

    metric = FittedMetric(
        spec=spec,
        schema=schema,
        label_names=dataset.labels.names(),
        weights=weights,
        mvdm_tables=mvdm_tables,
        norm_stats=norm_stats,
    )
    metric.fingerprint = compute_fingerprint(metric)
    return metric


# ---------------------------------------------------------------------------
# Scalar distances.
# ---------------------------------------------------------------------------


def mvdm_value_distance(metric: FittedMetric, feature_index: int, v1, v2) -> float:
    """L1 gap between label-conditional probability vectors, in [0, 2].

    Values never seen in training use the uniform vector.
    """
    if metric.mvdm_tables is None or metric.mvdm_tables[feature_index] is None:
        raise ValueError(f"feature {feature_index} has no fitted MVDM table")
    table = metric.mvdm_tables[feature_index]
    n = metric.n_labels
    uniform = np.full(n, 1.0 / n) if n else np.zeros(0)
    p1 = table.get(v1, uniform)
    p2 = table.get(v2, uniform)
    return float(np.abs(p1 - p2).sum())


def _z_value(metric: FittedMetric, f: int, element: Element, pad_flags: dict) -> float:
    flag_idx = pad_flags.get(f)
    if flag_idx is not None and element.values[flag_idx]:
        return 0.0  # padded cell sits at the normalized mean
    mean, std = metric.norm_stats[f]
    return (float(element.values[f]) - mean) / std


def distance(metric: FittedMetric, e1: Element, e2: Element) -> float:
    """Normalized element distance under the fitted metric.

    Symmetric and nonnegative; zero for identical elements under the
    equality-based kernels.
    """
    arity = metric.schema.arity
    if len(e1.values) != arity or len(e2.values) != arity:
        raise SchemaMismatch(
            f"element arity ({len(e1.values)}, {len(e2.values)}) != schema arity {arity}"
        )
    eff = resolve_feature_kernels(metric.spec, metric.schema)
    pad_flags = metric.schema.pad_flags()

    if metric.spec.kernel == "normalized-euclidean" and not metric.spec.feature_kernels:
        acc = 0.0
        for f in range(arity):
            if eff[f] == "euclidean":
                d = _z_value(metric, f, e1, pad_flags) - _z_value(metric, f, e2, pad_flags)
                acc += d * d
            else:
                acc += 0.0 if e1.values[f] == e2.values[f] else 1.0
        return math.sqrt(acc) / math.sqrt(arity)

    w = metric.weights if metric.weights is not None else np.ones(arity)
    total = 0.0
    for f in range(arity):
        if eff[f] == "overlap":
            term = 0.0 if e1.values[f] == e2.values[f] else 1.0
        elif eff[f] == "mvdm":
            term = 0.5 * mvdm_value_distance(metric, f, e1.values[f], e2.values[f])
        else:
            term = abs(_z_value(metric, f, e1, pad_flags) - _z_value(metric, f, e2, pad_flags))
        total += w[f] * term
    return total / float(w.sum())


def n_dist(
    probe: Element,
    exemplars: TSequence[Element],
    k: int,
    metric: FittedMetric,
    weighting: str = "uniform",
) -> float:
    """Aggregated distance from ``probe`` to its k nearest exemplars.

    Uniform mean of the min(k, len(exemplars)) smallest distances by default;
    ``weighting="inverse-rank"`` weights the i-th nearest by 1/i instead. An
    empty exemplar set yields +inf (the vertex is unreachable).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not exemplars:
        return math.inf
    dists = sorted(distance(metric, probe, e) for e in exemplars)[: min(k, len(exemplars))]
    if weighting == "uniform":
        return sum(dists) / len(dists)
    if weighting == "inverse-rank":
        w = [1.0 / (i + 1) for i in range(len(dists))]
        return sum(d * wi for d, wi in zip(dists, w)) / sum(w)
    raise ValueError(f"unknown n_dist weighting {weighting!r}")


# ---------------------------------------------------------------------------
# Vectorized engine (decoder / clustering inner loops).
# ---------------------------------------------------------------------------


class MetricEngine:
    """Encodes elements into per-feature arrays and evaluates one-vs-many
    distances; numerically identical to the scalar :func:`distance`."""

    def __init__(self, metric: FittedMetric):
        self.metric = metric
        self.schema = metric.schema
        self.arity = metric.schema.arity
        self.eff = resolve_feature_kernels(metric.spec, metric.schema)
        self.pure_euclidean = (
            metric.spec.kernel == "normalized-euclidean" and not metric.spec.feature_kernels
        )
        self.weights = (
            metric.weights if metric.weights is not None else np.ones(self.arity)
        )
        self.wsum = float(self.weights.sum())
        self.pad_flags = metric.schema.pad_flags()
        self._lock = threading.Lock()
        self._vocab: list[Optional[dict]] = [None] * self.arity
        self._prob: list[Optional[np.ndarray]] = [None] * self.arity
        self._dvec_cache: dict[tuple[int, int], np.ndarray] = {}
        for f in range(self.arity):
            if self.eff[f] == "overlap":
                self._vocab[f] = {}
            elif self.eff[f] == "mvdm":
                table = metric.mvdm_tables[f]
                keys = sorted(table)
                self._vocab[f] = {v: i for i, v in enumerate(keys)}
                n = metric.n_labels
                rows = [table[v] for v in keys]
                rows.append(np.full(n, 1.0 / n) if n else np.zeros(0))  # unseen row
                self._prob[f] = np.vstack(rows) if rows else np.zeros((1, 0))

    def _code(self, f: int, value) -> int:
        vocab = self._vocab[f]
        code = vocab.get(value)
        if code is None:
            if self.eff[f] == "mvdm":
                return len(vocab)  # uniform "unseen" row
            with self._lock:
                code = vocab.get(value)
                if code is None:
                    code = len(vocab)
                    vocab[value] = code
        return code

    def encode(self, elements: TSequence[Element]) -> list[np.ndarray]:
        """Per-feature column arrays: int codes or z-scored floats."""
        cols: list[np.ndarray] = []
        for f in range(self.arity):
            if self.eff[f] == "euclidean":
                mean, std = self.metric.norm_stats[f]
                vals = np.array([float(e.values[f]) for e in elements])
                z = (vals - mean) / std
                flag_idx = self.pad_flags.get(f)
                if flag_idx is not None:
                    padded = np.array([bool(e.values[flag_idx]) for e in elements])
                    z[padded] = 0.0
                cols.append(z)
            else:
                cols.append(
                    np.array([self._code(f, e.values[f]) for e in elements], dtype=np.int64)
                )
        return cols

    def _mvdm_dvec(self, f: int, code: int) -> np.ndarray:
        key = (f, code)
        vec = self._dvec_cache.get(key)
        if vec is None:
            prob = self._prob[f]
            vec = 0.5 * np.abs(prob - prob[code]).sum(axis=1)
            self._dvec_cache[key] = vec
        return vec

    def distances(self, probe: list[np.ndarray], block: list[np.ndarray]) -> np.ndarray:
        """Distances from a single encoded probe (arrays of length 1) to every
        element of an encoded block."""
        n = len(block[0]) if self.arity else 0
        if self.arity == 0 or n == 0:
            return np.zeros(n)
        if self.pure_euclidean:
            acc = np.zeros(n)
            for f in range(self.arity):
                if self.eff[f] == "euclidean":
                    d = block[f] - probe[f][0]
                    acc += d * d
                else:
                    acc += block[f] != probe[f][0]
            return np.sqrt(acc) / math.sqrt(self.arity)
        acc = np.zeros(n)
        for f in range(self.arity):
            w = self.weights[f]
            if w == 0.0:
                continue
            if self.eff[f] == "overlap":
                acc += w * (block[f] != probe[f][0])
            elif self.eff[f] == "mvdm":
                acc += w * self._mvdm_dvec(f, int(probe[f][0]))[block[f]]
            else:
                acc += w * np.abs(block[f] - probe[f][0])
        return acc / self.wsum

    def aggregate(self, dists: np.ndarray, k: int, weighting: str = "uniform") -> float:
        """k-nearest aggregation matching :func:`n_dist`."""
        if dists.size == 0:
            return math.inf
        kk = min(k, dists.size)
        if kk < dists.size:
            smallest = np.partition(dists, kk - 1)[:kk]
        else:
            smallest = dists
        if weighting == "uniform":
            return float(smallest.mean())
        smallest = np.sort(smallest)
        w = 1.0 / np.arange(1, kk + 1)
        return float((smallest * w).sum() / w.sum())


def pairwise_distances(metric: FittedMetric, elements: TSequence[Element]) -> np.ndarray:
    """Full symmetric distance matrix (quadratic memory; callers guard size)."""
    engine = MetricEngine(metric)
    block = engine.encode(elements)
    n = len(elements)
    out = np.zeros((n, n))
    for i in range(n):
        probe = [col[i : i + 1] for col in block]
        out[i] = engine.distances(probe, block)
    # exact symmetry regardless of accumulation order
    return (out + out.T) / 2.0


# ---------------------------------------------------------------------------
# Serialization and fingerprinting.
# ---------------------------------------------------------------------------

_FEATURE_KERNEL_CODES = {k: i for i, k in enumerate(FEATURE_KERNELS)}
_WEIGHTING_CODES = {None: 0, "information-gain": 1, "information-gain-ratio": 2}


def _encode_table_value(w, kind: FeatureKind, value):
    from .model import _encode_value

    _encode_value(w, kind, value)


def _state_payload(metric: FittedMetric) -> bytes:
    from .model import _Writer

    w = _Writer()
    w.str16(metric.spec.kernel)
    w.u8(_WEIGHTING_CODES[metric.spec.weighting])
    w.f64(metric.spec.k_smoothing)
    w.u32(len(metric.spec.feature_kernels))
    for idx, kern in metric.spec.feature_kernels:
        w.u16(idx)
        w.u8(_FEATURE_KERNEL_CODES[kern])
    w.u32(len(metric.label_names))
    for name in metric.label_names:
        w.str16(name)
    if metric.weights is None:
        w.u8(0)
    else:
        w.u8(1)
        w.u32(len(metric.weights))
        for v in metric.weights:
            w.f64(float(v))
    if metric.mvdm_tables is None:
        w.u8(0)
    else:
        w.u8(1)
        for f, table in enumerate(metric.mvdm_tables):
            if table is None:
                w.u8(0)
                continue
            w.u8(1)
            w.u32(len(table))
            kind = metric.schema.features[f].kind
            for v in sorted(table):
                _encode_table_value(w, kind, v)
                for p in table[v]:
                    w.f64(float(p))
    if metric.norm_stats is None:
        w.u8(0)
    else:
        w.u8(1)
        for stats in metric.norm_stats:
            if stats is None:
                w.u8(0)
            else:
                w.u8(1)
                w.f64(stats[0])
                w.f64(stats[1])
    return w.getvalue()


def compute_fingerprint(metric: FittedMetric) -> str:
    """Digest binding spec, schema and fitted state; stable across runs."""
    from .model import _encode_schema

    h = hashlib.sha256()
    h.update(_encode_schema(metric.schema))
    h.update(_state_payload(metric))
    return h.hexdigest()


def encode_metric_state(metric: FittedMetric) -> bytes:
    from .model import _Writer

    w = _Writer()
    if metric.default_k is None:
        w.u8(0)
    else:
        w.u8(1)
        w.u32(metric.default_k)
    if metric.default_resample is None:
        w.u8(0)
    else:
        w.u8(1)
        w.u32(metric.default_resample)
    return w.getvalue() + _state_payload(metric)


def decode_metric_state(data: bytes, schema: Schema, labels: Optional[NameTable] = None) -> FittedMetric:
    from .model import _Reader, _decode_value

    r = _Reader(data)
    default_k = r.u32() if r.u8() else None
    default_resample = r.u32() if r.u8() else None
    kernel = r.str16()
    weighting = {v: k for k, v in _WEIGHTING_CODES.items()}[r.u8()]
    k_smoothing = r.f64()
    overrides = tuple((r.u16(), FEATURE_KERNELS[r.u8()]) for _ in range(r.u32()))
    label_names = [r.str16() for _ in range(r.u32())]
    spec = MetricSpec(kernel, weighting, k_smoothing, overrides)

    weights = None
    if r.u8():
        weights = np.array([r.f64() for _ in range(r.u32())])
    mvdm_tables = None
    if r.u8():
        mvdm_tables = []
        for f in range(schema.arity):
            if not r.u8():
                mvdm_tables.append(None)
                continue
            n_values = r.u32()
            kind = schema.features[f].kind
            table = {}
            for _ in range(n_values):
                v = _decode_value(r, kind)
                table[v] = np.array([r.f64() for _ in range(len(label_names))])
            mvdm_tables.append(table)
    norm_stats = None
    if r.u8():
        norm_stats = []
        for _ in range(schema.arity):
            norm_stats.append((r.f64(), r.f64()) if r.u8() else None)

    metric = FittedMetric(
        spec=spec,
        schema=schema,
        label_names=label_names,
        weights=weights,
        mvdm_tables=mvdm_tables,
        norm_stats=norm_stats,
        default_k=default_k,
        default_resample=default_resample,
    )
    metric.fingerprint = compute_fingerprint(metric)
    return metric


def describe_metric(metric: FittedMetric) -> str:
    """Tab-separated dump of weights, MVDM tables and normalization stats."""
    lines = [f"kernel\t{metric.spec.kernel}"]
    if metric.spec.weighting:
        lines.append(f"weighting\t{metric.spec.weighting}")
    names = metric.schema.names
    if metric.weights is not None:
        lines.append("section\tweights")
        for name, w in zip(names, metric.weights):
            lines.append(f"{name}\t{w:.6f}")
    if metric.mvdm_tables is not None:
        lines.append("section\tmvdm")
        header = "\t".join(metric.label_names)
        lines.append(f"feature\tvalue\t{header}")
        for name, table in zip(names, metric.mvdm_tables):
            if table is None:
                continue
            for v in sorted(table):
                probs = "\t".join(f"{p:.6f}" for p in table[v])
                lines.append(f"{name}\t{v}\t{probs}")
    if metric.norm_stats is not None:
        lines.append("section\tnormalization")
        for name, stats in zip(names, metric.norm_stats):
            if stats is not None:
                lines.append(f"{name}\t{stats[0]:.6f}\t{stats[1]:.6f}")
    return "\n".join(lines) + "\n"
