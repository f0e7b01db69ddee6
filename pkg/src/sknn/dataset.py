"""Core data model: schemas, elements, sequences and datasets.

Feature values are plain Python scalars (str, float, int, bool); their
interpretation is carried by the :class:`Schema`, which fixes the arity,
the kind of every feature and, for symbol features, the observed alphabet.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Optional

from .errors import SchemaMismatch

FeatureValue = str | float | int | bool


class FeatureKind(str, Enum):
    TEXT = "text"
    REAL = "real"
    INTEGER = "integer"
    BOOLEAN = "boolean"
    SYMBOL = "symbol"

    @property
    def numeric(self) -> bool:
        return self in (FeatureKind.REAL, FeatureKind.INTEGER, FeatureKind.BOOLEAN)


@dataclass(frozen=True)
class WindowConfig:
    """Context-window expansion parameters.

    ``before``/``after`` count neighbouring elements whose features are
    appended to each element; out-of-range positions are filled with
    ``pad_token`` (symbol/text features) or a flagged zero (numeric ones).
    """

    before: int = 0
    after: int = 0
    pad_token: str = "<PAD>"

    def __post_init__(self):
        if self.before < 0 or self.after < 0:
            raise ValueError("window sizes must be nonnegative")

    @property
    def offsets(self) -> list[int]:
        return list(range(-self.before, 0)) + list(range(1, self.after + 1))


@dataclass
class FeatureSpec:
    """One column of the schema.

    ``pad_flag_of`` marks a boolean companion feature that flags padded
    cells of the numeric feature at the given index (set by windowing).
    """

    name: str
    kind: FeatureKind
    alphabet: Optional[set[str]] = None
    pad_flag_of: Optional[int] = None


@dataclass
class Schema:
    features: list[FeatureSpec]
    window: Optional[WindowConfig] = None

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")

    @property
    def arity(self) -> int:
        return len(self.features)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def index_of(self, name: str) -> int:
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise KeyError(name)

    def pad_flags(self) -> dict[int, int]:
        """Map numeric feature index -> index of its is-pad companion."""
        return {
            f.pad_flag_of: i
            for i, f in enumerate(self.features)
            if f.pad_flag_of is not None
        }

    def compatible(self, other: "Schema") -> bool:
        """Structural equality ignoring alphabets (test-time vocab may differ)."""
        if self.arity != other.arity or self.window != other.window:
            return False
        return all(
            a.name == b.name and a.kind == b.kind and a.pad_flag_of == b.pad_flag_of
            for a, b in zip(self.features, other.features)
        )

    def check_element(self, element: "Element") -> None:
        if len(element.values) != self.arity:
            raise SchemaMismatch(
                f"element arity {len(element.values)} != schema arity {self.arity}"
            )
        for spec, value in zip(self.features, element.values):
            if not _kind_matches(spec.kind, value):
                raise SchemaMismatch(
                    f"feature {spec.name!r} expects {spec.kind.value}, got {value!r}"
                )


def _kind_matches(kind: FeatureKind, value) -> bool:
    if kind in (FeatureKind.TEXT, FeatureKind.SYMBOL):
        return isinstance(value, str)
    if kind == FeatureKind.BOOLEAN:
        return isinstance(value, bool)
    if kind == FeatureKind.INTEGER:
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == FeatureKind.REAL:
        return isinstance(value, float) and math.isfinite(value)
    return False


@dataclass
class Element:
    """One event of a sequence: a fixed-arity value tuple plus optional label."""

    values: tuple[FeatureValue, ...]
    label: Optional[int] = None


@dataclass
class Sequence:
    elements: list[Element]
    class_id: Optional[int] = None

    def __post_init__(self):
        if not self.elements:
            raise ValueError("sequences must contain at least one element")

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self) -> Iterator[Element]:
        return iter(self.elements)

    def labels(self) -> list[Optional[int]]:
        return [e.label for e in self.elements]


class NameTable:
    """Dense id registry for label/class names (ids in registration order)."""

    def __init__(self, names: Iterable[str] = ()):
        self._names: list[str] = []
        self._index: dict[str, int] = {}
        for n in names:
            self.add(n)

    def add(self, name: str) -> int:
        idx = self._index.get(name)
        if idx is None:
            idx = len(self._names)
            self._names.append(name)
            self._index[name] = idx
        return idx

    def id(self, name: str) -> int:
        return self._index[name]

    def name(self, idx: int) -> str:
        return self._names[idx]

    def names(self) -> list[str]:
        return list(self._names)

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, NameTable) and self._names == other._names

    def __repr__(self) -> str:
        return f"NameTable({self._names!r})"


@dataclass
class Dataset:
    schema: Schema
    sequences: list[Sequence]
    labels: NameTable = field(default_factory=NameTable)
    classes: NameTable = field(default_factory=NameTable)

    def __len__(self) -> int:
        return len(self.sequences)

    @property
    def n_elements(self) -> int:
        return sum(len(s) for s in self.sequences)

    def iter_elements(self) -> Iterator[Element]:
        for seq in self.sequences:
            yield from seq.elements

    def validate(self) -> None:
        """Raise if any element or registry entry violates the schema."""
        for seq in self.sequences:
            if seq.class_id is not None and not 0 <= seq.class_id < len(self.classes):
                raise ValueError(f"unregistered class id {seq.class_id}")
            for el in seq.elements:
                self.schema.check_element(el)
                if el.label is not None and not 0 <= el.label < len(self.labels):
                    raise ValueError(f"unregistered label id {el.label}")

    def with_sequences(self, sequences: list[Sequence]) -> "Dataset":
        """Shallow copy sharing schema and registries."""
        return Dataset(self.schema, sequences, self.labels, self.classes)


def copy_schema(schema: Schema) -> Schema:
    feats = [
        FeatureSpec(f.name, f.kind, set(f.alphabet) if f.alphabet is not None else None, f.pad_flag_of)
        for f in schema.features
    ]
    return Schema(feats, window=schema.window)


def dataset_digest(dataset: Dataset) -> str:
    """Stable content digest used in run manifests."""
    h = hashlib.sha256()
    h.update(repr([f"{f.name}:{f.kind.value}" for f in dataset.schema.features]).encode())
    h.update(repr(dataset.schema.window).encode())
    h.update(repr(dataset.labels.names()).encode())
    h.update(repr(dataset.classes.names()).encode())
    for seq in dataset.sequences:
        h.update(repr(seq.class_id).encode())
        for el in seq.elements:
            h.update(repr((el.values, el.label)).encode())
    return h.hexdigest()
