"""Corpus ingestion, context-window expansion, splitting and generators.

Readers accept paths (plain or .gz) or open file objects. The chunking
format is one token per line, ``word pos chunk`` whitespace-separated, with
blank lines separating sentences; trajectories are one record per line,
``classId: x1 y1 x2 y2 ...``.
"""

from __future__ import annotations

import gzip
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Optional

import numpy as np

from .dataset import (
    Dataset,
    Element,
    FeatureKind,
    FeatureSpec,
    NameTable,
    Schema,
    Sequence,
    WindowConfig,
)
from .errors import (
    DegenerateSplit,
    EmptyCorpus,
    MalformedLine,
    MalformedRecord,
    NonFiniteCoordinate,
    WindowAlreadyApplied,
)

__all__ = [
    "WindowConfig",
    "SplitConfig",
    "read_conll",
    "write_conll",
    "read_points",
    "write_points",
    "resample_trajectories",
    "apply_context_window",
    "split_dataset",
    "generate_synthetic",
    "generate_trajectories",
    "generate_tagged_text",
    "generate_chunking_corpus",
    "TRAJECTORY_SHAPE_SCALE",
]


@dataclass(frozen=True)
class SplitConfig:
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")


def _open_lines(source) -> tuple[Iterable[str], Optional[IO]]:
    if isinstance(source, (str, Path)):
        path = str(source)
        fh = gzip.open(path, "rt", encoding="utf-8") if path.endswith(".gz") else open(
            path, "r", encoding="utf-8"
        )
        return fh, fh
    return source, None


def read_conll(source) -> Dataset:
    """Read a chunking corpus: features (word: text, pos: symbol), element
    label = chunk tag, one sequence per sentence."""
    lines, fh = _open_lines(source)
    labels = NameTable()
    pos_alphabet: set[str] = set()
    sequences: list[Sequence] = []
    current: list[Element] = []
    try:
        for lineno, raw in enumerate(lines, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                if current:
                    sequences.append(Sequence(current))
                    current = []
                continue
            cols = line.split()
            if len(cols) != 3:
                raise MalformedLine(lineno, f"expected 3 columns, got {len(cols)}")
            word, pos, chunk = cols
            pos_alphabet.add(pos)
            current.append(Element((word, pos), label=labels.add(chunk)))
    finally:
        if fh is not None:
            fh.close()
    if current:
        sequences.append(Sequence(current))
    if not sequences:
        raise EmptyCorpus("no sentences found")
    schema = Schema(
        [
            FeatureSpec("word", FeatureKind.TEXT),
            FeatureSpec("pos", FeatureKind.SYMBOL, alphabet=pos_alphabet),
        ]
    )
    return Dataset(schema, sequences, labels=labels)


def write_conll(dataset: Dataset, sink) -> None:
    """Inverse of :func:`read_conll` for well-formed chunking datasets."""
    if dataset.schema.arity != 2:
        raise ValueError("write_conll expects the (word, pos) schema")
    own = isinstance(sink, (str, Path))
    fh = open(sink, "w", encoding="utf-8") if own else sink
    try:
        for seq in dataset.sequences:
            for el in seq.elements:
                if el.label is None:
                    raise ValueError("write_conll needs labelled elements")
                fh.write(f"{el.values[0]} {el.values[1]} {dataset.labels.name(el.label)}\n")
            fh.write("\n")
    finally:
        if own:
            fh.close()


def read_points(source) -> Dataset:
    """Read trajectories: features (x: real, y: real), class per sequence,
    elements unlabelled."""
    lines, fh = _open_lines(source)
    classes = NameTable()
    sequences: list[Sequence] = []
    try:
        for lineno, raw in enumerate(lines, start=1):
            line = raw.strip()
            if not line:
                continue
            head, sep, rest = line.partition(":")
            if not sep or not head.strip():
                raise MalformedRecord(lineno, "expected 'classId: x1 y1 x2 y2 ...'")
            tokens = rest.split()
            if not tokens or len(tokens) % 2 != 0:
                raise MalformedRecord(lineno, f"odd coordinate count ({len(tokens)})")
            try:
                coords = [float(t) for t in tokens]
            except ValueError as exc:
                raise MalformedRecord(lineno, str(exc)) from None
            if not all(math.isfinite(c) for c in coords):
                raise NonFiniteCoordinate(f"record at line {lineno} has non-finite coordinates")
            class_id = classes.add(head.strip())
            elements = [
                Element((coords[i], coords[i + 1])) for i in range(0, len(coords), 2)
            ]
            sequences.append(Sequence(elements, class_id=class_id))
    finally:
        if fh is not None:
            fh.close()
    if not sequences:
        raise EmptyCorpus("no trajectory records found")
    schema = Schema(
        [FeatureSpec("x", FeatureKind.REAL), FeatureSpec("y", FeatureKind.REAL)]
    )
    return Dataset(schema, sequences, classes=classes)


def write_points(dataset: Dataset, sink) -> None:
    own = isinstance(sink, (str, Path))
    fh = open(sink, "w", encoding="utf-8") if own else sink
    try:
        for seq in dataset.sequences:
            name = dataset.classes.name(seq.class_id) if seq.class_id is not None else "?"
            coords = " ".join(
                f"{el.values[0]:.10g} {el.values[1]:.10g}" for el in seq.elements
            )
            fh.write(f"{name}: {coords}\n")
    finally:
        if own:
            fh.close()


def resample_trajectories(dataset: Dataset, n_points: int = 32) -> Dataset:
    """Arc-length uniform resampling of 2-D trajectories.

    Decouples shape from writing speed before distance computation; raw
    variable-rate samples would conflate the two.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    out: list[Sequence] = []
    for seq in dataset.sequences:
        pts = np.array([[float(e.values[0]), float(e.values[1])] for e in seq.elements])
        if len(pts) == 1:
            pts = np.repeat(pts, 2, axis=0)
        steps = np.hypot(*np.diff(pts, axis=0).T)
        cum = np.concatenate([[0.0], np.cumsum(steps)])
        if cum[-1] == 0.0:
            resampled = np.repeat(pts[:1], n_points, axis=0)
        else:
            t = np.linspace(0.0, cum[-1], n_points)
            resampled = np.column_stack(
                [np.interp(t, cum, pts[:, 0]), np.interp(t, cum, pts[:, 1])]
            )
        out.append(
            Sequence(
                [Element((float(x), float(y))) for x, y in resampled],
                class_id=seq.class_id,
            )
        )
    return dataset.with_sequences(out)


# ---------------------------------------------------------------------------
# Context windows.
# ---------------------------------------------------------------------------


def apply_context_window(dataset: Dataset, cfg: WindowConfig) -> Dataset:
    """Append neighbouring elements' features to every element.

    Appended columns follow the base features in the fixed order
    (-before ... -1, +1 ... +after) per base feature. Out-of-range symbol and
    text cells take the pad token; numeric cells take 0 plus a boolean is-pad
    companion feature so padding cannot poison z-scored distances. A second
    application is rejected.
    """
    if dataset.schema.window is not None:
        raise WindowAlreadyApplied("context window was already applied to this schema")

    base = dataset.schema.features
    offsets = cfg.offsets
    feats = [
        FeatureSpec(f.name, f.kind, set(f.alphabet) if f.alphabet is not None else None)
        for f in base
    ]
    # (base feature index, offset, windowed value column, pad-flag column or None)
    plan: list[tuple[int, int, int, Optional[int]]] = []
    for f_idx, f in enumerate(base):
        for off in offsets:
            col = len(feats)
            name = f"{f.name}@{off:+d}"
            if f.kind in (FeatureKind.TEXT, FeatureKind.SYMBOL):
                alphabet = None
                if f.kind == FeatureKind.SYMBOL:
                    alphabet = set(f.alphabet or ()) | {cfg.pad_token}
                feats.append(FeatureSpec(name, f.kind, alphabet))
                plan.append((f_idx, off, col, None))
            else:
                feats.append(FeatureSpec(name, f.kind))
                feats.append(FeatureSpec(f"{name}:pad", FeatureKind.BOOLEAN, pad_flag_of=col))
                plan.append((f_idx, off, col, col + 1))

    pad_value = {
        FeatureKind.REAL: 0.0,
        FeatureKind.INTEGER: 0,
        FeatureKind.BOOLEAN: False,
    }

    sequences: list[Sequence] = []
    for seq in dataset.sequences:
        n = len(seq.elements)
        new_elements = []
        for i, el in enumerate(seq.elements):
            values = list(el.values)
            for f_idx, off, _col, flag_col in plan:
                j = i + off
                in_range = 0 <= j < n
                kind = base[f_idx].kind
                if kind in (FeatureKind.TEXT, FeatureKind.SYMBOL):
                    values.append(seq.elements[j].values[f_idx] if in_range else cfg.pad_token)
                else:
                    values.append(
                        seq.elements[j].values[f_idx] if in_range else pad_value[kind]
                    )
                    values.append(not in_range)
            new_elements.append(Element(tuple(values), label=el.label))
        sequences.append(Sequence(new_elements, class_id=seq.class_id))

    schema = Schema(feats, window=cfg)
    return Dataset(schema, sequences, labels=dataset.labels, classes=dataset.classes)


def split_dataset(dataset: Dataset, cfg: SplitConfig) -> tuple[Dataset, Dataset]:
    """Seeded sequence-level partition; both sides are always nonempty."""
    n = len(dataset.sequences)
    if n < 2:
        raise DegenerateSplit("need at least two sequences to split")
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(n)
    n_test = min(max(int(round(n * cfg.test_fraction)), 1), n - 1)
    test_idx = set(perm[:n_test].tolist())
    train = [s for i, s in enumerate(dataset.sequences) if i not in test_idx]
    test = [s for i, s in enumerate(dataset.sequences) if i in test_idx]
    return dataset.with_sequences(train), dataset.with_sequences(test)


# ---------------------------------------------------------------------------
# Synthetic generators (desk-scale fixtures with known ground truth).
# ---------------------------------------------------------------------------

#: Extent of one generated trajectory shape; noise levels are quoted
#: relative to this.
TRAJECTORY_SHAPE_SCALE = 10.0


def generate_trajectories(
    n_classes: int = 3,
    per_class: int = 10,
    noise_sigma: float = 0.0,
    seed: int = 0,
    n_waypoints: int = 4,
    n_points: int = 24,
):
    """Noisy walks along per-class waypoint polylines.

    Returns (dataset, truth) where truth records each class's template
    polyline and the polyline-segment index of every emitted point, usable
    as clustering ground truth.
    """
    rng = np.random.default_rng(seed)
    templates = []
    base_paths = []
    segment_ids = []
    for c in range(n_classes):
        anchor = np.array([c * 3.0 * TRAJECTORY_SHAPE_SCALE, 0.0])
        waypoints = anchor + rng.uniform(0, TRAJECTORY_SHAPE_SCALE, size=(n_waypoints, 2))
        templates.append(waypoints)
        steps = np.hypot(*np.diff(waypoints, axis=0).T)
        cum = np.concatenate([[0.0], np.cumsum(steps)])
        t = np.linspace(0.0, cum[-1], n_points)
        path = np.column_stack(
            [np.interp(t, cum, waypoints[:, 0]), np.interp(t, cum, waypoints[:, 1])]
        )
        base_paths.append(path)
        segment_ids.append(np.minimum(np.searchsorted(cum, t, side="right") - 1, len(steps) - 1))

    classes = NameTable(str(c) for c in range(n_classes))
    sequences = []
    for c in range(n_classes):
        for _ in range(per_class):
            pts = base_paths[c] + rng.normal(0.0, noise_sigma, size=base_paths[c].shape)
            sequences.append(
                Sequence(
                    [Element((float(x), float(y))) for x, y in pts],
                    class_id=c,
                )
            )
    schema = Schema(
        [FeatureSpec("x", FeatureKind.REAL), FeatureSpec("y", FeatureKind.REAL)]
    )
    dataset = Dataset(schema, sequences, classes=classes)
    truth = {
        "templates": templates,
        "segment_ids": segment_ids,
        "scale": TRAJECTORY_SHAPE_SCALE,
    }
    return dataset, truth


def generate_tagged_text(
    n_labels: int = 3,
    vocab: int = 4,
    n_sequences: int = 30,
    seed: int = 0,
    min_len: int = 3,
    max_len: int = 8,
):
    """Label-deterministic word sequences: each label owns a private vocabulary,
    so the word feature fully determines the label."""
    rng = np.random.default_rng(seed)
    labels = NameTable(f"L{i}" for i in range(n_labels))
    word_label = {}
    sequences = []
    for _ in range(n_sequences):
        length = int(rng.integers(min_len, max_len + 1))
        label = int(rng.integers(n_labels))
        elements = []
        for _ in range(length):
            word = f"w{label}_{int(rng.integers(vocab))}"
            word_label[word] = label
            elements.append(Element((word,), label=label))
            label = int(rng.integers(n_labels))
        sequences.append(Sequence(elements))
    schema = Schema([FeatureSpec("word", FeatureKind.TEXT)])
    dataset = Dataset(schema, sequences, labels=labels)
    return dataset, {"word_label": word_label}


def generate_synthetic(kind: str, **params) -> Dataset:
    """Dispatcher over the named generators, returning the dataset only."""
    if kind == "trajectories":
        return generate_trajectories(**params)[0]
    if kind == "tagged_text":
        return generate_tagged_text(**params)[0]
    raise ValueError(f"unknown synthetic kind {kind!r}")


# ---------------------------------------------------------------------------
# Synthetic chunking corpus.
#
# A small phrase grammar over synthetic word forms, engineered so that a
# meaningful share of tokens is ambiguous given only the current element
# (same word+pos under different chunk tags in different contexts) while the
# neighbouring elements disambiguate. Context windows therefore help, as on
# real chunking data.
# ---------------------------------------------------------------------------


def _vocab(*ranges: tuple[int, int]) -> list[str]:
    out: list[str] = []
    for a, b in ranges:
        out.extend(f"w{i:03d}" for i in range(a, b))
    return out


_POS_WORDS = {
    "NN": _vocab((0, 80), (300, 320), (335, 345)),
    "VBD": _vocab((80, 130), (300, 320)),
    "NNS": _vocab((130, 180), (320, 335)),
    "VBZ": _vocab((180, 220), (320, 335)),
    "JJ": _vocab((220, 255), (335, 345)),
    "VB": _vocab((255, 285)),
    "RB": _vocab((285, 295), (345, 350)),
    "MD": _vocab((410, 414)),
    "DT": _vocab((420, 425)),
    "PRP": _vocab((430, 436)),
    "CC": _vocab((440, 442)),
    "IN_PP": _vocab((400, 406)),
    "IN_SBAR": _vocab((404, 410)),
}

_NP_SUBJECT = [
    (("DT", "NN"), 4.0),
    (("PRP",), 3.0),
    (("NN",), 2.0),
    (("DT", "JJ", "NN"), 2.0),
    (("NNS",), 2.0),
    (("DT", "NNS"), 1.0),
    (("JJ", "NNS"), 1.0),
]
_NP_OBJECT = [
    (("DT", "NN"), 4.0),
    (("NN",), 2.0),
    (("DT", "JJ", "NN"), 2.0),
    (("NNS",), 2.0),
    (("PRP",), 1.0),
    (("JJ", "NNS"), 1.0),
]
_NP_AFTER_PP = [
    (("DT", "NN"), 3.0),
    (("DT", "JJ", "NN"), 1.0),
    (("NNS",), 1.0),
]
_NP_SBAR_SUBJECT = [
    (("PRP",), 3.0),
    (("DT", "NN"), 1.0),
]
_VP = [
    (("VBD",), 4.0),
    (("VBZ",), 2.0),
    (("MD", "VB"), 1.0),
    (("MD", "RB", "VB"), 1.0),
]

_CHUNK_EXPANSIONS = {
    "NP": _NP_SUBJECT,
    "NP_OBJ": _NP_OBJECT,
    "NP_PP": _NP_AFTER_PP,
    "NP_SBAR": _NP_SBAR_SUBJECT,
    "VP": _VP,
    "PP": [(("IN_PP",), 1.0)],
    "SBAR": [(("IN_SBAR",), 1.0)],
    "ADVP": [(("RB",), 1.0)],
}

_CHUNK_TYPE = {
    "NP": "NP",
    "NP_OBJ": "NP",
    "NP_PP": "NP",
    "NP_SBAR": "NP",
    "VP": "VP",
    "PP": "PP",
    "SBAR": "SBAR",
    "ADVP": "ADVP",
}

_TEMPLATES = [
    (("NP", "VP", "NP_OBJ", "."), 3.0),
    (("NP", "VP", "PP", "NP_PP", "."), 2.0),
    (("NP", "VP", "NP_OBJ", "NP_OBJ", "."), 1.5),
    (("NP", "VP", "SBAR", "NP_SBAR", "VP", "."), 1.5),
    (("NP", "VP", "ADVP", "."), 1.5),
    (("ADVP", ",", "NP", "VP", "NP_OBJ", "."), 1.0),
    (("NP", "VP", "CC", "NP", "VP", "."), 1.0),
]


def _zipf_probs(n: int, exponent: float = 0.9) -> np.ndarray:
    w = 1.0 / np.arange(2, n + 2) ** exponent
    return w / w.sum()


def _weighted_choice(rng, items):
    weights = np.array([w for _, w in items])
    i = rng.choice(len(items), p=weights / weights.sum())
    return items[i][0]


def generate_chunking_corpus(
    n_sentences: int,
    seed: int = 0,
    word_noise: float = 0.06,
    pos_noise: float = 0.04,
    label_noise: float = 0.02,
) -> Dataset:
    """Deterministic synthetic chunking corpus (word, pos) -> BIO chunk tags.

    ``word_noise`` substitutes a random out-of-context word form and
    ``pos_noise`` mislabels the POS feature, imitating tagger errors;
    ``label_noise`` flips gold tags so the corpus is not perfectly separable.
    """
    rng = np.random.default_rng(seed)
    zipf = {pos: _zipf_probs(len(words)) for pos, words in _POS_WORDS.items()}
    all_words = sorted({w for words in _POS_WORDS.values() for w in words})
    all_pos = sorted({p if not p.startswith("IN_") else "IN" for p in _POS_WORDS})

    labels = NameTable()
    pos_alphabet: set[str] = set()
    sequences = []
    for _ in range(n_sentences):
        template = _weighted_choice(rng, _TEMPLATES)
        elements = []
        for chunk in template:
            if chunk in (".", ","):
                pos_alphabet.add(chunk)
                elements.append(Element((chunk, chunk), label=labels.add("O")))
                continue
            if chunk == "CC":
                word = _POS_WORDS["CC"][int(rng.choice(2))]
                pos_alphabet.add("CC")
                elements.append(Element((word, "CC"), label=labels.add("O")))
                continue
            pos_seq = _weighted_choice(rng, _CHUNK_EXPANSIONS[chunk])
            base = _CHUNK_TYPE[chunk]
            for j, pos_slot in enumerate(pos_seq):
                words = _POS_WORDS[pos_slot]
                word = words[int(rng.choice(len(words), p=zipf[pos_slot]))]
                pos = "IN" if pos_slot.startswith("IN_") else pos_slot
                if rng.random() < word_noise:
                    word = all_words[int(rng.integers(len(all_words)))]
                if rng.random() < pos_noise:
                    pos = all_pos[int(rng.integers(len(all_pos)))]
                pos_alphabet.add(pos)
                tag = ("B-" if j == 0 else "I-") + base
                elements.append(Element((word, pos), label=labels.add(tag)))
        sequences.append(Sequence(elements))

    if label_noise > 0:
        n_labels = len(labels)
        for seq in sequences:
            for el in seq.elements:
                if rng.random() < label_noise:
                    el.label = (el.label + 1 + int(rng.integers(n_labels - 1))) % n_labels

    schema = Schema(
        [
            FeatureSpec("word", FeatureKind.TEXT),
            FeatureSpec("pos", FeatureKind.SYMBOL, alphabet=pos_alphabet),
        ]
    )
    return Dataset(schema, sequences, labels=labels)
