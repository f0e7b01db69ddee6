"""Command-line interface: train, label, classify, eval, inspect, experiment.

Exit codes: 0 success, 1 usage error, 2 data/model error.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .data import apply_context_window, read_conll, read_points, resample_trajectories
from .dataset import Element, Sequence, WindowConfig
from .decoder import Decoder
from .errors import ConfigError, SknnError
from .harness import (
    config_from_dict,
    evaluate_classification,
    evaluate_labelling,
    format_grid_table,
    parse_config_text,
    parse_metric_spec,
    run_grid,
)
from .induction import ClusteringConfig, induce_classifier
from .metrics import describe_metric, fit_metric
from .model import build_model, load_model_with_metric, save_model

USAGE_EXIT = 1
DATA_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="sknn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="fit a metric and build a model file")
    train.add_argument("--format", choices=["conll", "points"], default="conll")
    train.add_argument("--metric", default="overlap", help="overlap|mvdm|ig-overlap|igr-overlap|euclidean")
    train.add_argument("--window", type=int, default=0, help="context elements on each side")
    train.add_argument("--pad", default="<PAD>", help="padding token for windowed features")
    train.add_argument("--k", type=int, default=1, help="neighbours aggregated per vertex")
    train.add_argument("--smoothing", type=float, default=0.0, help="MVDM add-alpha smoothing")
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--resample", type=int, default=32, help="trajectory resample length")
    train.add_argument("--cluster-count", type=int, default=4)
    train.add_argument("--clustering", choices=["k-medoids", "agglomerative"], default="k-medoids")
    train.add_argument("--linkage", choices=["single", "complete", "average"], default="average")
    train.add_argument("--threshold", type=float, default=None)
    train.add_argument("-o", "--output", required=True)
    train.add_argument("train_file")

    label = sub.add_parser("label", help="append predicted labels to a corpus")
    label.add_argument("-m", "--model", required=True)
    label.add_argument("--k", type=int, default=None, help="override the stored k")
    label.add_argument("-o", "--output", default=None)
    label.add_argument("input_file")

    classify = sub.add_parser("classify", help="predict the class of every sequence")
    classify.add_argument("-m", "--model", required=True)
    classify.add_argument("--k", type=int, default=None)
    classify.add_argument("-o", "--output", default=None)
    classify.add_argument("input_file")

    ev = sub.add_parser("eval", help="decode a corpus and report accuracy")
    ev.add_argument("-m", "--model", required=True)
    ev.add_argument("--k", type=int, default=None)
    ev.add_argument("input_file")

    inspect = sub.add_parser("inspect", help="dump model summary and metric tables")
    inspect.add_argument("model_file")

    experiment = sub.add_parser("experiment", help="run a metric x window grid from a config file")
    experiment.add_argument("config_file")
    experiment.add_argument("--manifest-out", default=None, help="override the manifest path")

    return parser


def _load(path: str):
    model, metric = load_model_with_metric(path)
    if metric is None:
        raise SknnError(f"{path} carries no fitted metric; re-train with this tool")
    return model, metric


def _prepare_input(model, metric, path: str):
    """Read and window test input to match the model's training-time schema."""
    is_points = model.vertex_class is not None
    dataset = read_points(path) if is_points else read_conll(path)
    if is_points and metric.default_resample:
        dataset = resample_trajectories(dataset, metric.default_resample)
    window = model.schema.window
    if window is not None and (window.before or window.after):
        dataset = apply_context_window(dataset, window)
    if not dataset.schema.compatible(model.schema):
        raise SknnError("input schema does not match the model's schema")
    return dataset


def _cmd_train(args) -> int:
    window = WindowConfig(args.window, args.window, args.pad)
    spec = parse_metric_spec(args.metric, args.smoothing)
    if args.format == "conll":
        dataset = read_conll(args.train_file)
    else:
        dataset = read_points(args.train_file)
        if args.resample:
            dataset = resample_trajectories(dataset, args.resample)
    if window.before or window.after:
        dataset = apply_context_window(dataset, window)
    metric = fit_metric(dataset, spec)
    metric.default_k = args.k
    metric.default_resample = args.resample if args.format == "points" else None
    if args.format == "conll":
        model = build_model(dataset, metric)
    else:
        cfg = ClusteringConfig(
            method=args.clustering,
            cluster_count=args.cluster_count,
            linkage=args.linkage,
            distance_threshold=args.threshold,
            seed=args.seed,
        )
        model = induce_classifier(dataset, metric, cfg)
    save_model(model, args.output, metric=metric)
    n_ex = sum(len(v) for v in model.exemplars.values())
    print(
        f"wrote {args.output}: {len(model.vertex_label)} label vertices, "
        f"{len(model.edges)} edges, {n_ex} exemplars"
    )
    return 0


def _out(path: Optional[str]):
    return open(path, "w", encoding="utf-8") if path else sys.stdout


def _cmd_label(args) -> int:
    model, metric = _load(args.model)
    dataset = _prepare_input(model, metric, args.input_file)
    k = args.k or metric.default_k or 1
    decoder = Decoder(model, metric, k)
    fh = _out(args.output)
    try:
        for seq in dataset.sequences:
            result = decoder.label(Sequence([Element(e.values) for e in seq.elements]))
            for el, lab in zip(seq.elements, result.labels):
                word, pos = el.values[0], el.values[1]
                gold = dataset.labels.name(el.label) if el.label is not None else "-"
                fh.write(f"{word} {pos} {gold} {model.labels.name(lab)}\n")
            fh.write("\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def _cmd_classify(args) -> int:
    model, metric = _load(args.model)
    dataset = _prepare_input(model, metric, args.input_file)
    k = args.k or metric.default_k or 1
    decoder = Decoder(model, metric, k)
    fh = _out(args.output)
    try:
        for i, seq in enumerate(dataset.sequences):
            result = decoder.classify(Sequence([Element(e.values) for e in seq.elements]))
            gold = (
                dataset.classes.name(seq.class_id) if seq.class_id is not None else "-"
            )
            fh.write(
                f"{i}\t{model.classes.name(result.class_id)}\t{gold}\t{result.total_cost:.6f}\n"
            )
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def _cmd_eval(args) -> int:
    model, metric = _load(args.model)
    dataset = _prepare_input(model, metric, args.input_file)
    k = args.k or metric.default_k or 1
    decoder = Decoder(model, metric, k)
    stripped = [Sequence([Element(e.values) for e in s.elements]) for s in dataset.sequences]
    if model.vertex_class is not None:
        preds = [model.classes.name(decoder.classify(s).class_id) for s in stripped]
        gold = [dataset.classes.name(s.class_id) for s in dataset.sequences]
        report = evaluate_classification(preds, gold)
        print(f"sequence accuracy: {report.sequence_accuracy:.4f}")
        print("confusion (rows = gold):")
        print("\t" + "\t".join(report.confusion_names))
        for name, row in zip(report.confusion_names, report.confusion):
            print(name + "\t" + "\t".join(str(int(c)) for c in row))
    else:
        results = [decoder.label(s) for s in stripped]
        preds = [[model.labels.name(l) for l in r.labels] for r in results]
        gold = [
            [dataset.labels.name(e.label) for e in s.elements] for s in dataset.sequences
        ]
        report = evaluate_labelling(preds, gold)
        print(f"token accuracy: {report.token_accuracy:.4f}")
        if report.chunk_f1 is not None:
            print(f"chunk F1:       {report.chunk_f1:.4f}")
        print(f"{'label':<12} {'precision':>9} {'recall':>9} {'support':>8}")
        for name in sorted(report.per_label):
            s = report.per_label[name]
            print(f"{name:<12} {s.precision:>9.4f} {s.recall:>9.4f} {s.support:>8}")
    return 0


def _cmd_inspect(args) -> int:
    model, metric = load_model_with_metric(args.model_file)
    print(f"schema\t{', '.join(f'{f.name}:{f.kind.value}' for f in model.schema.features)}")
    if model.schema.window is not None:
        w = model.schema.window
        print(f"window\tbefore={w.before}\tafter={w.after}\tpad={w.pad_token}")
    print(f"vertices\t{len(model.vertex_label)}")
    print(f"edges\t{len(model.edges)}")
    print(f"exemplars\t{sum(len(v) for v in model.exemplars.values())}")
    print(f"fingerprint\t{model.metric_fingerprint}")
    for v in model.label_vertices:
        cls = ""
        if model.vertex_class is not None and v in model.vertex_class:
            cls = f"\tclass={model.classes.name(model.vertex_class[v])}"
        print(f"vertex\t{v}\t{model.label_name(v)}\t{len(model.exemplars[v])} exemplars{cls}")
    if metric is not None:
        sys.stdout.write(describe_metric(metric))
    return 0


def _cmd_experiment(args) -> int:
    with open(args.config_file, "r", encoding="utf-8") as fh:
        raw = parse_config_text(fh.read())
    manifest_path = args.manifest_out or raw.get("manifest_out")
    rows, lines = run_grid(raw)
    print(format_grid_table(rows))
    if manifest_path:
        with open(str(manifest_path), "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"manifest: {manifest_path}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "label": _cmd_label,
    "classify": _cmd_classify,
    "eval": _cmd_eval,
    "inspect": _cmd_inspect,
    "experiment": _cmd_experiment,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (SknnError, ConfigError) as exc:
        print(f"sknn: error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except OSError as exc:
        print(f"sknn: error: {exc}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
