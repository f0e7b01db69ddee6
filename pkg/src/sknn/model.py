"""Transition-graph model: construction from labelled sequences, validation
against the defining edge conditions, and versioned binary persistence.

The graph has two distinguished vertices (entry and exit) plus one vertex per
label seen in training; each label vertex stores the training elements that
carry its label. An edge (x, y) exists exactly when two consecutive training
elements carry labels x and y; entry/exit edges mirror first/last labels.
"""

from __future__ import annotations

import hashlib
import io
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Optional

from .dataset import (
    Dataset,
    Element,
    FeatureKind,
    FeatureSpec,
    NameTable,
    Schema,
    WindowConfig,
)
from .errors import (
    CorruptModel,
    EmptyDataset,
    FormatVersionMismatch,
    UnknownVertex,
    UnlabelledElement,
)

MAGIC = b"SKNN"
FORMAT_VERSION = 1

V_INIT = 0
V_END = 1


@dataclass(frozen=True)
class Violation:
    """One discrepancy between a model's edges and its training data."""

    kind: str  # SpuriousEdge | MissingEdge | SpuriousInitEdge | MissingInitEdge | ...
    labels: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.kind}({', '.join(self.labels)})"


@dataclass
class Model:
    """Immutable after construction; safe for concurrent read-only decoding."""

    schema: Schema
    labels: NameTable
    vertex_label: dict[int, int]  # label vertices only; injective
    edges: set[tuple[int, int]]
    exemplars: dict[int, list[Element]]
    vertex_class: Optional[dict[int, int]] = None
    classes: NameTable = field(default_factory=NameTable)
    metric_fingerprint: str = ""
    v_init: int = V_INIT
    v_end: int = V_END

    @property
    def vertices(self) -> set[int]:
        return {self.v_init, self.v_end} | set(self.vertex_label)

    @property
    def label_vertices(self) -> list[int]:
        return sorted(self.vertex_label)

    def vertex_of_label(self, label_id: int) -> int:
        for v, l in self.vertex_label.items():
            if l == label_id:
                return v
        raise KeyError(label_id)

    def label_name(self, vertex: int) -> str:
        return self.labels.name(self.vertex_label[vertex])

    def successors(self, v: int) -> list[int]:
        return sorted(b for a, b in self.edges if a == v)

    def predecessors(self, v: int) -> list[int]:
        return sorted(a for a, b in self.edges if b == v)


def build_model(dataset: Dataset, metric=None) -> Model:
    """Build the transition graph from an element-labelled training set.

    Every training sequence induces the walk entry -> vertex(label of the
    first element) -> ... -> exit; each element is stored as an exemplar of
    the vertex of its own label. Raises :class:`UnlabelledElement` if any
    element lacks a label and :class:`EmptyDataset` on an empty input.
    """
    if not dataset.sequences:
        raise EmptyDataset("cannot build a model from an empty dataset")

    vertex_label: dict[int, int] = {}
    label_vertex: dict[int, int] = {}
    edges: set[tuple[int, int]] = set()
    exemplars: dict[int, list[Element]] = {V_INIT: [], V_END: []}

    def vertex_for(label_id: int) -> int:
        v = label_vertex.get(label_id)
        if v is None:
            v = 2 + len(label_vertex)
            label_vertex[label_id] = v
            vertex_label[v] = label_id
            exemplars[v] = []
        return v

    for si, seq in enumerate(dataset.sequences):
        current = V_INIT
        for ei, el in enumerate(seq.elements):
            if el.label is None:
                raise UnlabelledElement(f"sequence {si}, element {ei} has no label")
            v = vertex_for(el.label)
            edges.add((current, v))
            exemplars[v].append(el)
            current = v
        edges.add((current, V_END))

    fingerprint = metric.fingerprint if metric is not None else ""
    return Model(
        schema=dataset.schema,
        labels=dataset.labels,
        vertex_label=vertex_label,
        edges=edges,
        exemplars=exemplars,
        classes=dataset.classes,
        metric_fingerprint=fingerprint,
    )


def validate_model(model: Model, dataset: Dataset) -> list[Violation]:
    """Check the edge set against the data, both directions.

    Returns an empty list iff label-to-label edges match the consecutive
    label pairs observed in the dataset, entry edges match first-element
    labels and exit edges match last-element labels.
    """
    expected_pairs: set[tuple[int, int]] = set()
    expected_init: set[int] = set()
    expected_end: set[int] = set()
    for seq in dataset.sequences:
        labels = [e.label for e in seq.elements]
        if any(l is None for l in labels):
            raise UnlabelledElement("dataset passed to validate_model must be labelled")
        expected_init.add(labels[0])
        expected_end.add(labels[-1])
        expected_pairs.update(zip(labels, labels[1:]))

    have_pairs: set[tuple[int, int]] = set()
    have_init: set[int] = set()
    have_end: set[int] = set()
    for a, b in model.edges:
        if a == model.v_init and b == model.v_end:
            have_pairs.add((-1, -1))  # impossible per construction; flagged below
        elif a == model.v_init:
            have_init.add(model.vertex_label[b])
        elif b == model.v_end:
            have_end.add(model.vertex_label[a])
        else:
            have_pairs.add((model.vertex_label[a], model.vertex_label[b]))

    name = dataset.labels.name
    out: list[Violation] = []
    for x, y in sorted(have_pairs - expected_pairs):
        out.append(Violation("SpuriousEdge", (name(x) if x >= 0 else "init", name(y) if y >= 0 else "end")))
    for x, y in sorted(expected_pairs - have_pairs):
        out.append(Violation("MissingEdge", (name(x), name(y))))
    for x in sorted(have_init - expected_init):
        out.append(Violation("SpuriousInitEdge", (name(x),)))
    for x in sorted(expected_init - have_init):
        out.append(Violation("MissingInitEdge", (name(x),)))
    for x in sorted(have_end - expected_end):
        out.append(Violation("SpuriousEndEdge", (name(x),)))
    for x in sorted(expected_end - have_end):
        out.append(Violation("MissingEndEdge", (name(x),)))
    return out


def vertex_exemplars(model: Model, vertex: int) -> list[Element]:
    if vertex not in model.vertices:
        raise UnknownVertex(f"vertex {vertex} is not part of the model")
    return model.exemplars.get(vertex, [])


def model_digest(model: Model, metric=None) -> str:
    buf = io.BytesIO()
    save_model(model, buf, metric=metric)
    return hashlib.sha256(buf.getvalue()).hexdigest()


# ---------------------------------------------------------------------------
# Binary persistence.
#
# Layout: magic "SKNN", format version u16, then 8 length-prefixed sections:
# schema, label table, class table, vertex table, edge list, exemplar blocks,
# metric fingerprint, fitted-metric state (empty when the model is saved
# without its metric). All integers little-endian.
# ---------------------------------------------------------------------------

_KIND_CODES = {k: i for i, k in enumerate(FeatureKind)}
_KIND_FROM_CODE = {i: k for k, i in _KIND_CODES.items()}


class _Writer:
    def __init__(self):
        self.buf = io.BytesIO()

    def u8(self, v: int):
        self.buf.write(struct.pack("<B", v))

    def u16(self, v: int):
        self.buf.write(struct.pack("<H", v))

    def u32(self, v: int):
        self.buf.write(struct.pack("<I", v))

    def i64(self, v: int):
        self.buf.write(struct.pack("<q", v))

    def f64(self, v: float):
        self.buf.write(struct.pack("<d", v))

    def str16(self, s: str):
        raw = s.encode("utf-8")
        self.u16(len(raw))
        self.buf.write(raw)

    def str32(self, s: str):
        raw = s.encode("utf-8")
        self.u32(len(raw))
        self.buf.write(raw)

    def getvalue(self) -> bytes:
        return self.buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptModel("unexpected end of data")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return struct.unpack("<B", self._take(1))[0]

    def u16(self) -> int:
        return struct.unpack("<H", self._take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self._take(4))[0]

    def i64(self) -> int:
        return struct.unpack("<q", self._take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self._take(8))[0]

    def str16(self) -> str:
        return self._take(self.u16()).decode("utf-8")

    def str32(self) -> str:
        return self._take(self.u32()).decode("utf-8")

    @property
    def exhausted(self) -> bool:
        return self.pos == len(self.data)


def _encode_value(w: _Writer, kind: FeatureKind, value):
    if kind in (FeatureKind.TEXT, FeatureKind.SYMBOL):
        w.str32(value)
    elif kind == FeatureKind.REAL:
        w.f64(value)
    elif kind == FeatureKind.INTEGER:
        w.i64(value)
    else:
        w.u8(1 if value else 0)


def _decode_value(r: _Reader, kind: FeatureKind):
    if kind in (FeatureKind.TEXT, FeatureKind.SYMBOL):
        return r.str32()
    if kind == FeatureKind.REAL:
        return r.f64()
    if kind == FeatureKind.INTEGER:
        return r.i64()
    return bool(r.u8())


def _encode_schema(schema: Schema) -> bytes:
    w = _Writer()
    w.u16(schema.arity)
    for f in schema.features:
        w.str16(f.name)
        w.u8(_KIND_CODES[f.kind])
        if f.alphabet is None:
            w.u8(0)
        else:
            w.u8(1)
            w.u32(len(f.alphabet))
            for sym in sorted(f.alphabet):
                w.str16(sym)
        if f.pad_flag_of is None:
            w.u8(0)
        else:
            w.u8(1)
            w.u16(f.pad_flag_of)
    if schema.window is None:
        w.u8(0)
    else:
        w.u8(1)
        w.u16(schema.window.before)
        w.u16(schema.window.after)
        w.str16(schema.window.pad_token)
    return w.getvalue()


def _decode_schema(data: bytes) -> Schema:
    r = _Reader(data)
    feats = []
    for _ in range(r.u16()):
        name = r.str16()
        kind = _KIND_FROM_CODE.get(r.u8())
        if kind is None:
            raise CorruptModel("unknown feature kind")
        alphabet = None
        if r.u8():
            alphabet = {r.str16() for _ in range(r.u32())}
        pad_flag_of = r.u16() if r.u8() else None
        feats.append(FeatureSpec(name, kind, alphabet, pad_flag_of))
    window = None
    if r.u8():
        window = WindowConfig(r.u16(), r.u16(), r.str16())
    return Schema(feats, window=window)


def _encode_names(table: NameTable) -> bytes:
    w = _Writer()
    w.u32(len(table))
    for n in table.names():
        w.str16(n)
    return w.getvalue()


def _decode_names(data: bytes) -> NameTable:
    r = _Reader(data)
    return NameTable(r.str16() for _ in range(r.u32()))


def _encode_element(w: _Writer, schema: Schema, el: Element):
    for spec, value in zip(schema.features, el.values):
        _encode_value(w, spec.kind, value)
    if el.label is None:
        w.u8(0)
    else:
        w.u8(1)
        w.u32(el.label)


def _decode_element(r: _Reader, schema: Schema) -> Element:
    values = tuple(_decode_value(r, spec.kind) for spec in schema.features)
    label = r.u32() if r.u8() else None
    return Element(values, label)


def save_model(model: Model, sink: BinaryIO | str, metric=None) -> None:
    """Serialize the model (and, when given, its fitted metric) to ``sink``."""
    from .metrics import encode_metric_state  # local import to avoid a cycle

    sections: list[bytes] = []
    sections.append(_encode_schema(model.schema))
    sections.append(_encode_names(model.labels))
    sections.append(_encode_names(model.classes))

    w = _Writer()
    w.u32(model.v_init)
    w.u32(model.v_end)
    w.u32(len(model.vertex_label))
    for v in model.label_vertices:
        w.u32(v)
        w.u32(model.vertex_label[v])
        if model.vertex_class is not None and v in model.vertex_class:
            w.u8(1)
            w.u32(model.vertex_class[v])
        else:
            w.u8(0)
    sections.append(w.getvalue())

    w = _Writer()
    w.u32(len(model.edges))
    for a, b in sorted(model.edges):
        w.u32(a)
        w.u32(b)
    sections.append(w.getvalue())

    w = _Writer()
    w.u32(len(model.vertex_label))
    for v in model.label_vertices:
        w.u32(v)
        exs = model.exemplars.get(v, [])
        w.u32(len(exs))
        for el in exs:
            _encode_element(w, model.schema, el)
    sections.append(w.getvalue())

    w = _Writer()
    w.str16(model.metric_fingerprint)
    sections.append(w.getvalue())

    sections.append(encode_metric_state(metric) if metric is not None else b"")

    payload = io.BytesIO()
    payload.write(MAGIC)
    payload.write(struct.pack("<H", FORMAT_VERSION))
    for sec in sections:
        payload.write(struct.pack("<I", len(sec)))
        payload.write(sec)

    if isinstance(sink, str):
        with open(sink, "wb") as fh:
            fh.write(payload.getvalue())
    else:
        sink.write(payload.getvalue())


def _read_sections(source: BinaryIO | str) -> list[bytes]:
    if isinstance(source, str):
        with open(source, "rb") as fh:
            data = fh.read()
    else:
        data = source.read()
    if len(data) < 6 or data[:4] != MAGIC:
        raise CorruptModel("bad magic")
    version = struct.unpack("<H", data[4:6])[0]
    if version != FORMAT_VERSION:
        raise FormatVersionMismatch(f"file version {version}, expected {FORMAT_VERSION}")
    r = _Reader(data)
    r.pos = 6
    sections = []
    for _ in range(8):
        n = r.u32()
        sections.append(r._take(n))
    if not r.exhausted:
        raise CorruptModel("trailing bytes after final section")
    return sections


def load_model(source: BinaryIO | str) -> Model:
    model, _ = load_model_with_metric(source)
    return model


def load_model_with_metric(source: BinaryIO | str):
    """Load a model plus the fitted metric embedded at save time (or None)."""
    from .metrics import decode_metric_state

    secs = _read_sections(source)
    schema = _decode_schema(secs[0])
    labels = _decode_names(secs[1])
    classes = _decode_names(secs[2])

    r = _Reader(secs[3])
    v_init = r.u32()
    v_end = r.u32()
    vertex_label: dict[int, int] = {}
    vertex_class: dict[int, int] = {}
    for _ in range(r.u32()):
        v = r.u32()
        vertex_label[v] = r.u32()
        if r.u8():
            vertex_class[v] = r.u32()

    r = _Reader(secs[4])
    edges = set()
    for _ in range(r.u32()):
        edges.add((r.u32(), r.u32()))

    r = _Reader(secs[5])
    exemplars: dict[int, list[Element]] = {v_init: [], v_end: []}
    for _ in range(r.u32()):
        v = r.u32()
        exemplars[v] = [_decode_element(r, schema) for _ in range(r.u32())]

    r = _Reader(secs[6])
    fingerprint = r.str16()

    model = Model(
        schema=schema,
        labels=labels,
        vertex_label=vertex_label,
        edges=edges,
        exemplars=exemplars,
        vertex_class=vertex_class or None,
        classes=classes,
        metric_fingerprint=fingerprint,
        v_init=v_init,
        v_end=v_end,
    )
    metric = decode_metric_state(secs[7], schema, labels) if secs[7] else None
    return model, metric
