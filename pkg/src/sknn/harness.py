"""Evaluation metrics, the experiment pipeline and run manifests.

An experiment executes ingest -> window -> fit metric -> build or induce ->
decode -> evaluate, and emits a machine-readable manifest (config and data
digests, model digest, accuracies) that is byte-identical across reruns of
the same config and seed. Test sequences are decoded by a worker pool over
the immutable model; SKNN_THREADS caps the worker count.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import (
    SplitConfig,
    apply_context_window,
    generate_chunking_corpus,
    generate_tagged_text,
    generate_trajectories,
    read_conll,
    read_points,
    resample_trajectories,
    split_dataset,
)
from .dataset import Dataset, Element, Sequence, WindowConfig, dataset_digest
from .decoder import Decoder
from .errors import ConfigError, ShapeMismatch
from .induction import ClusteringConfig, induce_classifier
from .metrics import MetricSpec, fit_metric
from .model import build_model, model_digest


@dataclass
class LabelScore:
    precision: float
    recall: float
    support: int


@dataclass
class Timing:
    wall_seconds: float = 0.0
    ndist_evals: int = 0


@dataclass
class Report:
    token_accuracy: Optional[float] = None
    sequence_accuracy: Optional[float] = None
    per_label: dict[str, LabelScore] = field(default_factory=dict)
    confusion: Optional[np.ndarray] = None
    confusion_names: list[str] = field(default_factory=list)
    chunk_f1: Optional[float] = None
    timing: Timing = field(default_factory=Timing)
    manifest: dict = field(default_factory=dict)


def evaluate_labelling(pred: list[list], gold: list[list]) -> Report:
    """Token accuracy, per-label precision/recall and a confusion matrix.

    ``pred`` and ``gold`` are parallel lists of per-sequence label lists
    (names or ids); shapes must match exactly.
    """
    if len(pred) != len(gold):
        raise ShapeMismatch(f"{len(pred)} predicted sequences vs {len(gold)} gold")
    for i, (p, g) in enumerate(zip(pred, gold)):
        if len(p) != len(g):
            raise ShapeMismatch(f"sequence {i}: {len(p)} predictions vs {len(g)} gold")

    flat_pred = [l for seq in pred for l in seq]
    flat_gold = [l for seq in gold for l in seq]
    names = sorted({str(l) for l in flat_pred} | {str(l) for l in flat_gold})
    index = {n: i for i, n in enumerate(names)}
    confusion = np.zeros((len(names), len(names)), dtype=np.int64)
    correct = 0
    for p, g in zip(flat_pred, flat_gold):
        confusion[index[str(g)], index[str(p)]] += 1
        if p == g:
            correct += 1

    per_label = {}
    for n, i in index.items():
        tp = int(confusion[i, i])
        pred_n = int(confusion[:, i].sum())
        gold_n = int(confusion[i, :].sum())
        per_label[n] = LabelScore(
            precision=tp / pred_n if pred_n else 0.0,
            recall=tp / gold_n if gold_n else 0.0,
            support=gold_n,
        )

    report = Report(
        token_accuracy=correct / len(flat_gold) if flat_gold else 0.0,
        per_label=per_label,
        confusion=confusion,
        confusion_names=names,
    )
    if any(str(l).startswith(("B-", "I-")) for l in flat_gold):
        report.chunk_f1 = _chunk_f1(pred, gold)
    return report


def _spans(labels: list) -> set[tuple[int, int, str]]:
    """Chunk spans from BIO tags, conlleval-style."""
    spans = set()
    start, kind = None, None
    for i, raw in enumerate(list(labels) + ["O"]):
        tag = str(raw)
        boundary = tag == "O" or tag.startswith("B-") or (
            tag.startswith("I-") and kind is not None and tag[2:] != kind
        ) or (tag.startswith("I-") and kind is None)
        if kind is not None and boundary:
            spans.add((start, i, kind))
            start, kind = None, None
        if tag.startswith("B-") or (tag.startswith("I-") and kind is None):
            start, kind = i, tag[2:]
    return spans


def _chunk_f1(pred: list[list], gold: list[list]) -> float:
    tp = fp = fn = 0
    offset = 0
    for p, g in zip(pred, gold):
        ps = {(a + offset, b + offset, k) for a, b, k in _spans(p)}
        gs = {(a + offset, b + offset, k) for a, b, k in _spans(g)}
        tp += len(ps & gs)
        fp += len(ps - gs)
        fn += len(gs - ps)
        offset += len(p) + 1
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def evaluate_classification(pred: list, gold: list) -> Report:
    """Exact-match sequence accuracy plus a confusion matrix."""
    if len(pred) != len(gold):
        raise ShapeMismatch(f"{len(pred)} predictions vs {len(gold)} gold classes")
    names = sorted({str(c) for c in pred} | {str(c) for c in gold})
    index = {n: i for i, n in enumerate(names)}
    confusion = np.zeros((len(names), len(names)), dtype=np.int64)
    correct = 0
    for p, g in zip(pred, gold):
        confusion[index[str(g)], index[str(p)]] += 1
        if p == g:
            correct += 1
    return Report(
        sequence_accuracy=correct / len(gold) if gold else 0.0,
        confusion=confusion,
        confusion_names=names,
    )


# ---------------------------------------------------------------------------
# Experiment configuration.
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    task: str = "label"  # "label" or "classify"
    data_format: str = "conll"  # conll | points | synthetic-chunking | synthetic-trajectories
    train_path: Optional[str] = None
    test_path: Optional[str] = None
    metric: MetricSpec = field(default_factory=MetricSpec)
    window: WindowConfig = field(default_factory=WindowConfig)
    k: int = 1
    clustering: Optional[ClusteringConfig] = None
    seed: int = 0
    resample: Optional[int] = 32
    test_fraction: Optional[float] = None
    limit_train: Optional[int] = None
    limit_test: Optional[int] = None
    ndist_weighting: str = "uniform"
    synthetic: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.task not in ("label", "classify"):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.task == "classify" and self.clustering is None:
            raise ConfigError("classification on class-only data needs a clustering config")
        if self.task == "label" and self.clustering is not None:
            raise ConfigError("clustering applies only to the classification task")
        if self.k < 1:
            raise ConfigError("k must be >= 1")

    def describe(self) -> dict:
        """JSON-friendly canonical form (digested into the manifest)."""
        return {
            "task": self.task,
            "format": self.data_format,
            "train": self.train_path,
            "test": self.test_path,
            "metric": metric_name(self.metric),
            "k_smoothing": self.metric.k_smoothing,
            "feature_kernels": list(map(list, self.metric.feature_kernels)),
            "window": [self.window.before, self.window.after, self.window.pad_token],
            "k": self.k,
            "clustering": None
            if self.clustering is None
            else {
                "method": self.clustering.method,
                "cluster_count": self.clustering.cluster_count,
                "linkage": self.clustering.linkage,
                "threshold": self.clustering.distance_threshold,
                "seed": self.clustering.seed,
                "max_iterations": self.clustering.max_iterations,
            },
            "seed": self.seed,
            "resample": self.resample,
            "test_fraction": self.test_fraction,
            "limit_train": self.limit_train,
            "limit_test": self.limit_test,
            "ndist_weighting": self.ndist_weighting,
            "synthetic": dict(sorted(self.synthetic.items())),
        }


def metric_name(spec: MetricSpec) -> str:
    if spec.kernel == "weighted-overlap":
        short = "ig" if spec.weighting == "information-gain" else "igr"
        return f"weighted-overlap({short})"
    return spec.kernel


_METRIC_ALIASES = {
    "overlap": ("overlap", None),
    "mvdm": ("mvdm", None),
    "euclidean": ("normalized-euclidean", None),
    "normalized-euclidean": ("normalized-euclidean", None),
    "ig-overlap": ("weighted-overlap", "information-gain"),
    "igr-overlap": ("weighted-overlap", "information-gain-ratio"),
    "weighted-overlap(ig)": ("weighted-overlap", "information-gain"),
    "weighted-overlap(igr)": ("weighted-overlap", "information-gain-ratio"),
}


def parse_metric_spec(name: str, smoothing: float = 0.0) -> MetricSpec:
    key = name.strip().lower()
    if key not in _METRIC_ALIASES:
        raise ConfigError(
            f"unknown metric {name!r}; choose from {sorted(_METRIC_ALIASES)}"
        )
    kernel, weighting = _METRIC_ALIASES[key]
    return MetricSpec(kernel=kernel, weighting=weighting, k_smoothing=smoothing)


def _threads() -> int:
    raw = os.environ.get("SKNN_THREADS", "").strip()
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# Pipeline.
# ---------------------------------------------------------------------------


def _tag_stage(exc: Exception, stage: str) -> Exception:
    if not getattr(exc, "stage", None):
        exc.stage = stage
        exc.args = (f"[{stage}] {exc.args[0] if exc.args else ''}",) + exc.args[1:]
    return exc


def _ingest(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    if cfg.data_format == "conll":
        train = read_conll(cfg.train_path)
        test = read_conll(cfg.test_path) if cfg.test_path else None
    elif cfg.data_format == "points":
        train = read_points(cfg.train_path)
        test = read_points(cfg.test_path) if cfg.test_path else None
    elif cfg.data_format == "synthetic-chunking":
        sentences = int(
            cfg.synthetic.get(
                "sentences", (cfg.limit_train or 1000) + (cfg.limit_test or 200)
            )
        )
        corpus = generate_chunking_corpus(sentences, seed=cfg.seed)
        n_train = cfg.limit_train or (len(corpus.sequences) * 4 // 5)
        train = corpus.with_sequences(corpus.sequences[:n_train])
        test = corpus.with_sequences(
            corpus.sequences[n_train : n_train + (cfg.limit_test or len(corpus.sequences))]
        )
    elif cfg.data_format == "synthetic-tagged":
        params = dict(cfg.synthetic)
        params.setdefault("seed", cfg.seed)
        train, _ = generate_tagged_text(**params)
        test = None
    elif cfg.data_format == "synthetic-trajectories":
        params = dict(cfg.synthetic)
        params.setdefault("seed", cfg.seed)
        train_per_class = int(params.pop("train_per_class", 10))
        test_per_class = int(params.pop("test_per_class", 5))
        params["per_class"] = train_per_class + test_per_class
        full, _ = generate_trajectories(**params)
        by_class: dict[int, list[Sequence]] = {}
        for seq in full.sequences:
            by_class.setdefault(seq.class_id, []).append(seq)
        train_seqs, test_seqs = [], []
        for cid in sorted(by_class):
            train_seqs.extend(by_class[cid][:train_per_class])
            test_seqs.extend(by_class[cid][train_per_class:])
        train = full.with_sequences(train_seqs)
        test = full.with_sequences(test_seqs)
    else:
        raise ConfigError(f"unknown data format {cfg.data_format!r}")

    if test is None:
        fraction = cfg.test_fraction if cfg.test_fraction is not None else 0.2
        train, test = split_dataset(train, SplitConfig(fraction, cfg.seed))
    if cfg.limit_train is not None:
        train = train.with_sequences(train.sequences[: cfg.limit_train])
    if cfg.limit_test is not None:
        test = test.with_sequences(test.sequences[: cfg.limit_test])

    if cfg.data_format in ("points", "synthetic-trajectories") and cfg.resample:
        train = resample_trajectories(train, cfg.resample)
        test = resample_trajectories(test, cfg.resample)
    return train, test


def _decode_all(decoder: Decoder, sequences: list[Sequence], classify: bool):
    def one(seq: Sequence):
        probe = Sequence([Element(e.values) for e in seq.elements])
        return decoder.classify(probe) if classify else decoder.label(probe)

    workers = _threads()
    if workers == 1 or len(sequences) < 2:
        return [one(s) for s in sequences]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, sequences))


def run_experiment(cfg: ExperimentConfig) -> Report:
    """Execute the full pipeline and return a report with manifest attached."""
    cfg.validate()
    t0 = time.monotonic()
    try:
        train, test = _ingest(cfg)
    except Exception as exc:
        raise _tag_stage(exc, "ingest")
    try:
        if cfg.window.before or cfg.window.after:
            train = apply_context_window(train, cfg.window)
            test = apply_context_window(test, cfg.window)
    except Exception as exc:
        raise _tag_stage(exc, "window")
    try:
        metric = fit_metric(train, cfg.metric)
    except Exception as exc:
        raise _tag_stage(exc, "fit")
    try:
        if cfg.task == "label":
            model = build_model(train, metric)
        else:
            model = induce_classifier(train, metric, cfg.clustering)
    except Exception as exc:
        raise _tag_stage(exc, "build")
    try:
        decoder = Decoder(model, metric, cfg.k, weighting=cfg.ndist_weighting)
        results = _decode_all(decoder, test.sequences, classify=cfg.task == "classify")
    except Exception as exc:
        raise _tag_stage(exc, "decode")
    try:
        if cfg.task == "label":
            pred = [[model.labels.name(l) for l in r.labels] for r in results]
            gold = [[test.labels.name(e.label) for e in s.elements] for s in test.sequences]
            report = evaluate_labelling(pred, gold)
            ndist = sum(r.ndist_evals for r in results)
        else:
            pred = [model.classes.name(r.class_id) for r in results]
            gold = [test.classes.name(s.class_id) for s in test.sequences]
            report = evaluate_classification(pred, gold)
            ndist = sum(r.decode.ndist_evals for r in results)
    except Exception as exc:
        raise _tag_stage(exc, "evaluate")

    report.timing = Timing(wall_seconds=time.monotonic() - t0, ndist_evals=ndist)
    config = cfg.describe()
    results_block = {
        "token_accuracy": report.token_accuracy,
        "sequence_accuracy": report.sequence_accuracy,
        "chunk_f1": report.chunk_f1,
    }
    report.manifest = {
        "config": config,
        "config_digest": hashlib.sha256(
            json.dumps(config, sort_keys=True).encode()
        ).hexdigest(),
        "train_digest": dataset_digest(train),
        "test_digest": dataset_digest(test),
        "model_digest": model_digest(model, metric=metric),
        "metric_fingerprint": metric.fingerprint,
        "ndist_evals": ndist,
        "results": results_block,
    }
    return report


# ---------------------------------------------------------------------------
# Config files and grids.
# ---------------------------------------------------------------------------


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` grammar: comments start with '#', values are
    quoted strings, booleans, ints, floats or comma-separated lists."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"config line {lineno}: empty key")
        out[key] = _parse_value(value.strip())
    return out


def _parse_scalar(token: str):
    token = token.strip()
    if len(token) >= 2 and token[0] == '"' and token[-1] == '"':
        return token[1:-1]
    low = token.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        pass
    return token


def _parse_value(value: str):
    if "," in value:
        return [_parse_scalar(t) for t in value.split(",") if t.strip()]
    return _parse_scalar(value)


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build a single-run config from parsed key/value pairs."""
    known = {
        "task", "format", "train", "test", "metric", "metrics", "window", "windows",
        "k", "seed", "pad_token", "smoothing", "ndist_weighting", "clustering",
        "cluster_count", "linkage", "threshold", "max_iterations", "resample",
        "test_fraction", "limit_train", "limit_test", "manifest_out", "sentences",
        "classes", "train_per_class", "test_per_class", "noise_sigma", "n_points",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    task = raw.get("task", "label")
    smoothing = float(raw.get("smoothing", 0.0))
    metric = parse_metric_spec(str(raw.get("metric", "overlap")), smoothing)
    window = WindowConfig(
        before=int(raw.get("window", 0)),
        after=int(raw.get("window", 0)),
        pad_token=str(raw.get("pad_token", "<PAD>")),
    )
    clustering = None
    if task == "classify":
        clustering = ClusteringConfig(
            method=str(raw.get("clustering", "k-medoids")),
            cluster_count=int(raw.get("cluster_count", 1)),
            linkage=str(raw.get("linkage", "average")),
            distance_threshold=(
                float(raw["threshold"]) if "threshold" in raw else None
            ),
            seed=int(raw.get("seed", 0)),
            max_iterations=int(raw.get("max_iterations", 100)),
        )
    synthetic = {
        k: raw[k]
        for k in ("sentences", "classes", "train_per_class", "test_per_class",
                  "noise_sigma", "n_points")
        if k in raw
    }
    if "classes" in synthetic:
        synthetic["n_classes"] = int(synthetic.pop("classes"))
    cfg = ExperimentConfig(
        task=task,
        data_format=str(raw.get("format", "conll")),
        train_path=raw.get("train"),
        test_path=raw.get("test"),
        metric=metric,
        window=window,
        k=int(raw.get("k", 1)),
        clustering=clustering,
        seed=int(raw.get("seed", 0)),
        resample=int(raw["resample"]) if "resample" in raw else 32,
        test_fraction=float(raw["test_fraction"]) if "test_fraction" in raw else None,
        limit_train=int(raw["limit_train"]) if "limit_train" in raw else None,
        limit_test=int(raw["limit_test"]) if "limit_test" in raw else None,
        ndist_weighting=str(raw.get("ndist_weighting", "uniform")),
        synthetic=synthetic,
    )
    cfg.validate()
    return cfg


def _as_list(value) -> list:
    return value if isinstance(value, list) else [value]


def run_grid(raw: dict) -> tuple[list[tuple[str, int, Report]], list[str]]:
    """Run the metric x window grid described by a parsed config.

    Returns (rows, manifest JSON lines); rows are (metric name, window size,
    report) in deterministic grid order.
    """
    metric_names = [str(m) for m in _as_list(raw.get("metrics", raw.get("metric", "overlap")))]
    windows = [int(w) for w in _as_list(raw.get("windows", raw.get("window", 0)))]
    rows: list[tuple[str, int, Report]] = []
    lines: list[str] = []
    for window in windows:
        for name in metric_names:
            single = dict(raw)
            single.pop("metrics", None)
            single.pop("windows", None)
            single.pop("manifest_out", None)
            single["metric"] = name
            single["window"] = window
            cfg = config_from_dict(single)
            report = run_experiment(cfg)
            rows.append((metric_name(cfg.metric), window, report))
            lines.append(json.dumps(report.manifest, sort_keys=True))
    return rows, lines


def format_grid_table(rows: list[tuple[str, int, Report]]) -> str:
    """Human-readable accuracy table, one row per grid cell."""
    header = f"{'window':>6}  {'metric':<28}  {'accuracy':>8}  {'chunk F1':>8}"
    out = [header, "-" * len(header)]
    for name, window, report in rows:
        acc = (
            report.token_accuracy
            if report.token_accuracy is not None
            else report.sequence_accuracy
        )
        f1 = f"{report.chunk_f1:.4f}" if report.chunk_f1 is not None else "-"
        out.append(f"{window:>6}  {name:<28}  {acc:>8.4f}  {f1:>8}")
    return "\n".join(out)
