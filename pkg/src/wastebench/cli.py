"""Command-line interface.

Exit codes: 0 ok, 1 usage/configuration error, 2 data or format error,
3 training failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench, classifiers, dataset, deepfeat, selection, synth
from .errors import ConfigError, TrainingError, WastebenchError
from .features import SEGMENT_MODES
from .metrics import confusion, round_report, summarize


def _write_labels_csv(path, ids, labels) -> None:
    lines = ["sample_id,class_id"]
    lines += [f"{i},{int(l)}" for i, l in zip(ids, labels)]
    Path(path).write_text("\n".join(lines) + "\n")


def _load_features(features_path, labels_path=None):
    fm = deepfeat.read_matrix(features_path)
    y = None
    if labels_path:
        y, _ = deepfeat.align_labels(fm, labels_path)
    elif fm.labels is not None:
        y = np.asarray(fm.labels, dtype=np.int64)
    return fm, y


def _require_labels(y, what: str):
    if y is None:
        raise ConfigError(f"{what} requires labels; pass --labels CSV")
    return y


def _cmd_extract(args) -> int:
    ds = dataset.scan_directory(args.dataset)
    x, y, seconds = bench.extract_dataset(ds, segment=args.segment, resize=args.resize)
    ids = [str(Path(s.path).relative_to(ds.root)) for s in ds.samples]
    fm = deepfeat.FeatureMatrix(values=x.astype(np.float32), sample_ids=ids,
                                source_tag="handcrafted_v1", labels=y)
    deepfeat.write_matrix(fm, args.out)
    labels_out = args.labels_out or str(args.out) + ".labels.csv"
    _write_labels_csv(labels_out, ids, y)
    print(f"extracted {fm.n} x {fm.d} features in {seconds:.1f}s -> {args.out}")
    print(f"labels -> {labels_out}")
    return 0


def _cmd_deepfeat_import(args) -> int:
    fm, _ = deepfeat.import_csv(args.csv, has_header=args.has_header,
                                source_tag=args.tag)
    deepfeat.write_matrix(fm, args.out)
    msg = f"imported {fm.n} x {fm.d} features -> {args.out}"
    if fm.labels is not None:
        labels_out = str(args.out) + ".labels.csv"
        _write_labels_csv(labels_out, fm.sample_ids, fm.labels)
        msg += f" (labels -> {labels_out})"
    print(msg)
    return 0


def _cmd_select(args) -> int:
    fm, y = _load_features(args.features, args.labels)
    y = _require_labels(y, "selection")
    x = np.asarray(fm.values, dtype=np.float64)
    if args.method == "embedded":
        res = selection.rank_embedded_rf(x, y, seed=args.seed)
    else:
        parts = np.array(dataset.split_indices(y, (0.7, 0.3, 0.0), args.seed))
        tr = np.nonzero(parts == "train")[0]
        va = np.nonzero(parts == "val")[0]
        res = selection.wrapper_forward(x[tr], y[tr], x[va], y[va],
                                        max_k=args.max_k, seed=args.seed)
    if args.k is not None:
        res.k = args.k
        selection.select_top_k(res, args.k)  # validates range
    selection.save_selection(res, args.out)
    print(f"{args.method} selection over {fm.d} features -> {args.out}")
    return 0


def _cmd_train(args) -> int:
    fm, y = _load_features(args.features, args.labels)
    y = _require_labels(y, "training")
    spec: dict = {"family": args.model}
    if args.loss is not None:
        spec["loss"] = args.loss
    if args.gamma is not None:
        spec["gamma"] = args.gamma
    if args.alpha is not None:
        spec["alpha"] = args.alpha
    for item in args.opt or []:
        if "=" not in item:
            raise ConfigError(f"--opt expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        spec[key] = value
    model = classifiers.train(classifiers.validate_spec(spec),
                              np.asarray(fm.values, dtype=np.float64),
                              y, seed=args.seed)
    Path(args.out).write_bytes(classifiers.serialize(model))
    print(f"trained {model.family} on {fm.n} x {fm.d} "
          f"in {model.train_seconds:.2f}s -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    model = classifiers.deserialize(Path(args.model).read_bytes())
    fm, y = _load_features(args.features, args.labels)
    y = _require_labels(y, "evaluation")
    y_pred = classifiers.predict(model, np.asarray(fm.values, dtype=np.float64))
    conf = confusion(y, y_pred, model.n_classes)
    summary = round_report(summarize(conf))
    report = {
        "model": model.family,
        "n": fm.n,
        "metrics": summary,
        "confusion": conf.tolist(),
    }
    Path(args.report).write_text(json.dumps(report, indent=2) + "\n")
    print(f"accuracy {summary['accuracy']:.2f}% on {fm.n} samples -> {args.report}")
    return 0


def _cmd_bench(args) -> int:
    plan = bench.ExperimentPlan.from_json(args.plan)
    if args.out:
        plan.out_dir = args.out
    reports = bench.run_experiment(plan)
    for r in reports:
        k_tag = "all" if r.k_features is None else f"k={r.k_features}"
        if r.error:
            print(f"{r.model:10s} {k_tag:8s} FAILED: {r.error}")
        else:
            acc = round_report(r.metrics)["accuracy"]
            print(f"{r.model:10s} {k_tag:8s} accuracy {acc:.2f}%")
    if plan.out_dir:
        print(f"reports -> {plan.out_dir}")
    failed = sum(1 for r in reports if r.error)
    print(f"{len(reports) - failed}/{len(reports)} cells completed")
    return 0


def _cmd_audit(args) -> int:
    ds = dataset.scan_directory(args.dataset)
    x, y, _ = bench.extract_dataset(ds, segment=args.segment, resize=args.resize)
    flagged = dataset.audit_labels(x, y, k_folds=args.folds, seed=args.seed)
    print(f"{len(flagged)} suspect labels out of {len(y)}")
    for idx, predicted, conf in flagged:
        s = ds.samples[idx]
        print(f"{s.path}: labeled {ds.class_names[s.class_id]}, "
              f"predicted {ds.class_names[predicted]} (confidence {conf:.3f})")
    return 0


def _cmd_synth(args) -> int:
    counts = synth.synth_corpus(args.out, n_classes=args.classes,
                                per_class=args.per_class, seed=args.seed,
                                side=args.side)
    total = sum(counts.values())
    print(f"wrote {total} images across {len(counts)} classes under {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wastebench",
                                description="Waste-image classification benchmark")
    sub = p.add_subparsers(dest="command", required=True)

    px = sub.add_parser("extract", help="extract handcrafted features from an image corpus")
    px.add_argument("--dataset", required=True)
    px.add_argument("--out", required=True)
    px.add_argument("--segment", choices=SEGMENT_MODES, default="grabcut")
    px.add_argument("--resize", type=int, default=None)
    px.add_argument("--labels-out", default=None)
    px.set_defaults(func=_cmd_extract)

    pd = sub.add_parser("deepfeat", help="precomputed deep-feature utilities")
    dsub = pd.add_subparsers(dest="deepfeat_command", required=True)
    pdi = dsub.add_parser("import", help="convert a CSV feature dump to the binary format")
    pdi.add_argument("--csv", required=True)
    pdi.add_argument("--out", required=True)
    pdi.add_argument("--has-header", action="store_true")
    pdi.add_argument("--tag", default="deep_import")
    pdi.set_defaults(func=_cmd_deepfeat_import)

    ps = sub.add_parser("select", help="rank features and save a selection")
    ps.add_argument("--features", required=True)
    ps.add_argument("--labels", default=None)
    ps.add_argument("--method", choices=("embedded", "wrapper"), default="embedded")
    ps.add_argument("--k", type=int, default=None)
    ps.add_argument("--max-k", type=int, default=10)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=_cmd_select)

    pt = sub.add_parser("train", help="train a classifier on a feature matrix")
    pt.add_argument("--features", required=True)
    pt.add_argument("--labels", default=None)
    pt.add_argument("--model", required=True, choices=classifiers.FAMILIES)
    pt.add_argument("--loss", choices=("cross_entropy", "focal"), default=None)
    pt.add_argument("--gamma", type=float, default=None)
    pt.add_argument("--alpha", type=float, default=None)
    pt.add_argument("--opt", action="append", metavar="KEY=VALUE",
                    help="additional family option, repeatable")
    pt.add_argument("--seed", type=int, default=0)
    pt.add_argument("--out", required=True)
    pt.set_defaults(func=_cmd_train)

    pe = sub.add_parser("eval", help="evaluate a saved model on a feature matrix")
    pe.add_argument("--model", required=True)
    pe.add_argument("--features", required=True)
    pe.add_argument("--labels", default=None)
    pe.add_argument("--report", required=True)
    pe.set_defaults(func=_cmd_eval)

    pb = sub.add_parser("bench", help="run an experiment plan")
    pb.add_argument("--plan", required=True)
    pb.add_argument("--out", default=None)
    pb.set_defaults(func=_cmd_bench)

    pa = sub.add_parser("audit", help="flag suspect labels by cross-validated disagreement")
    pa.add_argument("--dataset", required=True)
    pa.add_argument("--folds", type=int, default=5)
    pa.add_argument("--segment", choices=SEGMENT_MODES, default="grabcut")
    pa.add_argument("--resize", type=int, default=None)
    pa.add_argument("--seed", type=int, default=0)
    pa.set_defaults(func=_cmd_audit)

    pg = sub.add_parser("synth", help="generate the synthetic shape corpus")
    pg.add_argument("--out", required=True)
    pg.add_argument("--classes", type=int, default=3)
    pg.add_argument("--per-class", type=int, default=100)
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--side", type=int, default=64)
    pg.set_defaults(func=_cmd_synth)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TrainingError as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return 3
    except WastebenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
