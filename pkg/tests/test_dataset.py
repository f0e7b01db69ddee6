"""Readers, windowing, splitting and generators."""

import gzip
import io
import math

import pytest

from sknn.data import (
    SplitConfig,
    apply_context_window,
    generate_chunking_corpus,
    generate_synthetic,
    generate_tagged_text,
    generate_trajectories,
    read_conll,
    read_points,
    resample_trajectories,
    split_dataset,
    write_conll,
    write_points,
)
from sknn.dataset import FeatureKind, WindowConfig
from sknn.errors import (
    DegenerateSplit,
    EmptyCorpus,
    MalformedLine,
    MalformedRecord,
    NonFiniteCoordinate,
    WindowAlreadyApplied,
)

CONLL_SAMPLE = "He PRP B-NP\nruns VBZ B-VP\n\n"


def test_read_conll_minimal():
    ds = read_conll(io.StringIO(CONLL_SAMPLE))
    assert len(ds.sequences) == 1
    seq = ds.sequences[0]
    assert len(seq) == 2
    assert [ds.labels.name(e.label) for e in seq.elements] == ["B-NP", "B-VP"]
    assert seq.elements[0].values == ("He", "PRP")
    assert ds.schema.features[0].kind == FeatureKind.TEXT
    assert ds.schema.features[1].kind == FeatureKind.SYMBOL


def test_read_conll_wrong_column_count():
    with pytest.raises(MalformedLine) as err:
        read_conll(io.StringIO("He PRP B-NP\nbroken line-without-third\nnext X Y\n"))
    assert err.value.lineno == 2


def test_read_conll_extra_columns_rejected():
    with pytest.raises(MalformedLine):
        read_conll(io.StringIO("He PRP B-NP extra\n"))


def test_read_conll_empty():
    with pytest.raises(EmptyCorpus):
        read_conll(io.StringIO("\n\n"))


def test_conll_round_trip(tmp_path):
    corpus = generate_chunking_corpus(25, seed=7)
    path = tmp_path / "corpus.txt"
    write_conll(corpus, str(path))
    back = read_conll(str(path))
    assert len(back.sequences) == len(corpus.sequences)
    for s1, s2 in zip(corpus.sequences, back.sequences):
        assert [e.values for e in s1.elements] == [e.values for e in s2.elements]
        assert [corpus.labels.name(e.label) for e in s1.elements] == [
            back.labels.name(e.label) for e in s2.elements
        ]


def test_read_conll_gzip(tmp_path):
    path = tmp_path / "corpus.txt.gz"
    with gzip.open(path, "wt") as fh:
        fh.write(CONLL_SAMPLE)
    ds = read_conll(str(path))
    assert len(ds.sequences) == 1


def test_read_points_minimal():
    ds = read_points(io.StringIO("7: 0.0 0.0 1.0 1.0\n"))
    assert len(ds.sequences) == 1
    seq = ds.sequences[0]
    assert ds.classes.name(seq.class_id) == "7"
    assert len(seq) == 2
    assert seq.elements[1].values == (1.0, 1.0)


def test_read_points_odd_coordinates():
    with pytest.raises(MalformedRecord):
        read_points(io.StringIO("7: 0.0 0.0 1.0\n"))


def test_read_points_missing_class():
    with pytest.raises(MalformedRecord):
        read_points(io.StringIO("0.0 0.0 1.0 1.0\n"))


def test_read_points_non_finite():
    with pytest.raises(NonFiniteCoordinate):
        read_points(io.StringIO("7: 0.0 inf 1.0 1.0\n"))


def test_points_round_trip(tmp_path):
    ds, _ = generate_trajectories(2, 3, 0.5, seed=3, n_points=5)
    path = tmp_path / "points.txt"
    write_points(ds, str(path))
    back = read_points(str(path))
    assert len(back.sequences) == len(ds.sequences)
    for s1, s2 in zip(ds.sequences, back.sequences):
        assert ds.classes.name(s1.class_id) == back.classes.name(s2.class_id)
        for e1, e2 in zip(s1.elements, s2.elements):
            assert e1.values[0] == pytest.approx(e2.values[0], rel=1e-9)


def test_resample_trajectories():
    ds = read_points(io.StringIO("7: 0.0 0.0 10.0 0.0\n"))
    out = resample_trajectories(ds, n_points=5)
    seq = out.sequences[0]
    assert len(seq) == 5
    xs = [e.values[0] for e in seq.elements]
    assert xs == pytest.approx([0.0, 2.5, 5.0, 7.5, 10.0])
    assert seq.class_id == ds.sequences[0].class_id


def test_resample_degenerate_point():
    ds = read_points(io.StringIO("1: 3.0 4.0 3.0 4.0\n"))
    out = resample_trajectories(ds, n_points=4)
    assert all(e.values == (3.0, 4.0) for e in out.sequences[0].elements)


# -- context windows ---------------------------------------------------------


def test_window_zero_is_identity():
    ds = read_conll(io.StringIO(CONLL_SAMPLE))
    out = apply_context_window(ds, WindowConfig(0, 0))
    assert out.schema.arity == ds.schema.arity
    assert out.schema.window == WindowConfig(0, 0)
    for s1, s2 in zip(ds.sequences, out.sequences):
        assert [e.values for e in s1.elements] == [e.values for e in s2.elements]
        assert [e.label for e in s1.elements] == [e.label for e in s2.elements]


def test_window_expands_arity_and_pads():
    ds = read_conll(io.StringIO(CONLL_SAMPLE))
    out = apply_context_window(ds, WindowConfig(1, 1, pad_token="<P>"))
    # 2 base features, 2 offsets each, both symbolic kinds: arity 2 + 4 = 6
    assert out.schema.arity == 6
    names = out.schema.names
    assert names == ["word", "pos", "word@-1", "word@+1", "pos@-1", "pos@+1"]
    he, runs = out.sequences[0].elements
    assert he.values[names.index("word@-1")] == "<P>"
    assert he.values[names.index("word@+1")] == "runs"
    assert runs.values[names.index("word@-1")] == "He"
    assert runs.values[names.index("word@+1")] == "<P>"
    # pad token joins the symbol alphabet
    assert "<P>" in out.schema.features[names.index("pos@-1")].alphabet


def test_window_length_one_sentence_fully_padded():
    ds = read_conll(io.StringIO("Go VB B-VP\n\n"))
    out = apply_context_window(ds, WindowConfig(2, 2))
    el = out.sequences[0].elements[0]
    names = out.schema.names
    for name in ("word@-2", "word@-1", "word@+1", "word@+2"):
        assert el.values[names.index(name)] == "<PAD>"


def test_window_numeric_pad_flags():
    ds = read_points(io.StringIO("7: 0.0 0.5 1.0 1.5 2.0 2.5\n"))
    out = apply_context_window(ds, WindowConfig(1, 0))
    names = out.schema.names
    assert names == ["x", "y", "x@-1", "x@-1:pad", "y@-1", "y@-1:pad"]
    flags = out.schema.pad_flags()
    assert flags == {names.index("x@-1"): names.index("x@-1:pad"),
                     names.index("y@-1"): names.index("y@-1:pad")}
    first, second, _ = out.sequences[0].elements
    assert first.values[names.index("x@-1")] == 0.0
    assert first.values[names.index("x@-1:pad")] is True
    assert second.values[names.index("x@-1")] == 0.0  # the real previous x
    assert second.values[names.index("x@-1:pad")] is False
    assert second.values[names.index("y@-1")] == 0.5


def test_window_preserves_structure():
    ds = generate_chunking_corpus(10, seed=1)
    out = apply_context_window(ds, WindowConfig(2, 2))
    assert len(out.sequences) == len(ds.sequences)
    assert out.n_elements == ds.n_elements
    for s1, s2 in zip(ds.sequences, out.sequences):
        assert len(s1) == len(s2)
        assert [e.label for e in s1.elements] == [e.label for e in s2.elements]


def test_window_single_application_enforced():
    ds = read_conll(io.StringIO(CONLL_SAMPLE))
    once = apply_context_window(ds, WindowConfig(1, 1))
    with pytest.raises(WindowAlreadyApplied):
        apply_context_window(once, WindowConfig(1, 1))


# -- splitting ----------------------------------------------------------------


def test_split_even():
    ds = generate_chunking_corpus(10, seed=0)
    train, test = split_dataset(ds, SplitConfig(0.5, seed=1))
    assert len(train.sequences) == 5 and len(test.sequences) == 5
    assert train.n_elements + test.n_elements == ds.n_elements


def test_split_deterministic():
    ds = generate_chunking_corpus(12, seed=0)
    a = split_dataset(ds, SplitConfig(0.25, seed=9))
    b = split_dataset(ds, SplitConfig(0.25, seed=9))
    assert [id(s) for s in a[0].sequences] == [id(s) for s in b[0].sequences]
    assert [id(s) for s in a[1].sequences] == [id(s) for s in b[1].sequences]


def test_split_keeps_both_sides_nonempty():
    ds = generate_chunking_corpus(2, seed=0)
    train, test = split_dataset(ds, SplitConfig(0.99, seed=0))
    assert len(train.sequences) == 1 and len(test.sequences) == 1


def test_split_single_sequence_degenerate():
    ds = generate_chunking_corpus(1, seed=0)
    with pytest.raises(DegenerateSplit):
        split_dataset(ds, SplitConfig(0.5, seed=0))


def test_split_is_partition():
    ds = generate_chunking_corpus(9, seed=2)
    train, test = split_dataset(ds, SplitConfig(0.3, seed=4))
    ids = [id(s) for s in train.sequences] + [id(s) for s in test.sequences]
    assert sorted(ids) == sorted(id(s) for s in ds.sequences)


# -- generators ----------------------------------------------------------------


def test_trajectories_noise_free_shapes():
    ds, truth = generate_trajectories(3, 10, 0.0, seed=0)
    assert len(ds.sequences) == 30
    shapes = set()
    for seq in ds.sequences:
        shapes.add(tuple(e.values for e in seq.elements))
    assert len(shapes) == 3  # exactly one shape per class at zero noise
    for seq in ds.sequences:
        for el in seq.elements:
            assert math.isfinite(el.values[0]) and math.isfinite(el.values[1])
    assert len(truth["templates"]) == 3


def test_trajectories_deterministic():
    a, _ = generate_trajectories(2, 4, 0.3, seed=5)
    b, _ = generate_trajectories(2, 4, 0.3, seed=5)
    for s1, s2 in zip(a.sequences, b.sequences):
        assert [e.values for e in s1.elements] == [e.values for e in s2.elements]


def test_tagged_text_private_vocabularies():
    ds, truth = generate_tagged_text(3, 4, 30, seed=0)
    for seq in ds.sequences:
        for el in seq.elements:
            word = el.values[0]
            assert truth["word_label"][word] == el.label


def test_generate_synthetic_dispatch():
    ds = generate_synthetic("trajectories", n_classes=2, per_class=3, seed=1)
    assert len(ds.sequences) == 6
    ds = generate_synthetic("tagged_text", n_labels=2, n_sequences=5, seed=1)
    assert len(ds.sequences) == 5
    with pytest.raises(ValueError):
        generate_synthetic("nope")


def test_chunking_corpus_shape():
    ds = generate_chunking_corpus(50, seed=0)
    assert len(ds.sequences) == 50
    ds.validate()
    names = set(ds.labels.names())
    assert "B-NP" in names and "I-NP" in names and "O" in names
    again = generate_chunking_corpus(50, seed=0)
    assert [
        [(e.values, e.label) for e in s.elements] for s in ds.sequences
    ] == [[(e.values, e.label) for e in s.elements] for s in again.sequences]
