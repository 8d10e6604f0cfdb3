"""Command-line interface.

Subcommands: train, explain, patterns, reliability, robustness, importance.
Option precedence is flags > --config file (key=value lines) > defaults.
Every output file starts with a provenance block (schema version, command,
config hash, resolved options) and is byte-identical across reruns with the
same configuration, regardless of --threads.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys

import numpy as np

from . import analysis, contrib, data, forest as forest_mod, patterns
from .errors import DataError, RfContribError, UsageError

SCHEMA_VERSION = 1

_REQUIRED = object()


def _opt(type_, default, help_):
    return {"type": type_, "default": default, "help": help_}


_COMMANDS: dict[str, dict[str, dict]] = {
    "train": {
        "data": _opt(str, _REQUIRED, "training CSV file"),
        "label": _opt(str, _REQUIRED, "name of the label column"),
        "class-order": _opt(str, None, "comma-separated class names fixing label indices"),
        "drop": _opt(str, None, "comma-separated feature columns to exclude"),
        "trees": _opt(int, 100, "number of trees"),
        "mtry": _opt(int, None, "features sampled per split (default floor(sqrt(F)))"),
        "min-node-size": _opt(int, 1, "minimum rows for a node to be split"),
        "split": _opt(float, 2.0 / 3.0, "train fraction of the train/test split"),
        "seed": _opt(int, 7, "seed for the split and the forest"),
        "tie-seed": _opt(int, 7, "seed for vote tie resolution"),
        "model-out": _opt(str, _REQUIRED, "path for the model JSON"),
        "report-out": _opt(str, None, "optional path for the training report JSON"),
    },
    "explain": {
        "model": _opt(str, _REQUIRED, "model JSON produced by train"),
        "data": _opt(str, _REQUIRED, "CSV of instances to explain"),
        "label": _opt(str, None, "label column to exclude, when present"),
        "rows": _opt(str, "all", "rows to explain: 'all', 'a:b' or 'i,j,k'"),
        "instance": _opt(int, None, "single row to explain (alternative to --rows)"),
        "class": _opt(str, None, "fixed class to report contributions toward"),
        "format": _opt(str, "tsv", "output format: tsv or json"),
        "tie-seed": _opt(int, 7, "seed for vote tie resolution"),
        "out": _opt(str, None, "output path (default stdout)"),
    },
    "patterns": {
        "model": _opt(str, _REQUIRED, "model JSON produced by train"),
        "data": _opt(str, _REQUIRED, "the CSV the model was trained from"),
        "label": _opt(str, _REQUIRED, "name of the label column"),
        "rows": _opt(str, "train", "'train' (model's training rows) or 'all'"),
        "k": _opt(int, None, "fixed number of clusters per class"),
        "k-max": _opt(int, None, "BIC cap when --k is absent (default 6)"),
        "seed": _opt(int, 7, "seed for clustering"),
        "tie-seed": _opt(int, 7, "seed for vote tie resolution"),
        "vote-trust": _opt(float, 0.8, "minimum vote fraction for a trusted verdict"),
        "core-min-size-frac": _opt(float, 0.1, "minimum cluster share of class support"),
        "core-min-vote": _opt(float, 0.9, "minimum mean vote fraction of a core cluster"),
        "dist-quantile": _opt(float, 0.95, "member-distance quantile kept as radius"),
        "out": _opt(str, _REQUIRED, "path for the pattern JSON"),
    },
    "reliability": {
        "model": _opt(str, _REQUIRED, "model JSON produced by train"),
        "patterns": _opt(str, _REQUIRED, "pattern JSON produced by patterns"),
        "data": _opt(str, _REQUIRED, "CSV of instances to score"),
        "label": _opt(str, None, "label column to exclude, when present"),
        "rows": _opt(str, "all", "rows to score: 'all', 'a:b' or 'i,j,k'"),
        "tie-seed": _opt(int, 7, "seed for vote tie resolution"),
        "out": _opt(str, None, "output path (default stdout)"),
    },
    "robustness": {
        "data": _opt(str, _REQUIRED, "CSV file"),
        "label": _opt(str, _REQUIRED, "name of the label column"),
        "class-order": _opt(str, None, "comma-separated class names fixing label indices"),
        "drop": _opt(str, None, "comma-separated feature columns to exclude"),
        "models": _opt(int, 100, "number of independent models"),
        "trees": _opt(int, 500, "trees per model"),
        "split": _opt(float, 2.0 / 3.0, "train fraction per model"),
        "seed": _opt(int, 7, "base seed; model m uses spawn key (m,)"),
        "holdout": _opt(int, None, "row excluded from every split and explained per model"),
        "mtry": _opt(int, None, "features sampled per split"),
        "min-node-size": _opt(int, 1, "minimum rows for a node to be split"),
        "out-prefix": _opt(str, _REQUIRED, "prefix for _contributions.tsv and _accuracies.tsv"),
    },
    "importance": {
        "model": _opt(str, _REQUIRED, "model JSON produced by train"),
        "data": _opt(str, _REQUIRED, "the CSV the model was trained from"),
        "label": _opt(str, _REQUIRED, "name of the label column"),
        "seed": _opt(int, 7, "seed for the permutation draws"),
        "permutations": _opt(int, 5, "permutation repeats per tree and feature"),
        "out": _opt(str, None, "output path (default stdout)"),
    },
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rfcontrib",
        description="Random-forest feature contributions and reliability patterns",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name, opts in _COMMANDS.items():
        p = sub.add_parser(name, help=f"{name} command")
        for opt, spec in opts.items():
            p.add_argument(f"--{opt}", type=spec["type"], default=None, help=spec["help"])
        p.add_argument("--config", type=str, default=None,
                       help="key=value file supplying defaults for any long flag")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (never changes results)")
    return parser


def _read_config_file(path, allowed: dict) -> dict:
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as e:
        raise UsageError(f"cannot read config file: {e}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key == "threads":
            values["threads"] = value
            continue
        if key not in allowed:
            raise UsageError(f"{path}:{lineno}: unknown option {key!r}")
        values[key] = value
    return values


def _resolve(args: argparse.Namespace, command: str) -> tuple[dict, int]:
    """Merge flags over config over defaults; returns (config, threads)."""
    opts = _COMMANDS[command]
    file_values = {}
    if args.config is not None:
        file_values = _read_config_file(args.config, opts)
    resolved = {}
    for opt, spec in opts.items():
        dest = opt.replace("-", "_")
        value = getattr(args, dest)
        if value is None and opt in file_values:
            try:
                value = spec["type"](file_values[opt])
            except ValueError:
                raise UsageError(
                    f"config option {opt!r}: cannot parse {file_values[opt]!r}"
                ) from None
        if value is None:
            value = spec["default"]
        if value is _REQUIRED:
            raise UsageError(f"missing required option --{opt}")
        resolved[opt] = value
    threads = args.threads
    if threads is None and "threads" in file_values:
        try:
            threads = int(file_values["threads"])
        except ValueError:
            raise UsageError("config option 'threads': expected an integer") from None
    if threads is None:
        threads = 1
    if threads < 1:
        raise UsageError("--threads must be >= 1")
    return resolved, threads


def _fmt_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    return str(v)


def _config_hash(command: str, cfg: dict) -> str:
    payload = "\n".join(f"{k}={_fmt_value(cfg[k])}" for k in sorted(cfg))
    return hashlib.sha256(f"{command}\n{payload}".encode()).hexdigest()


def _provenance(command: str, cfg: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config_hash": _config_hash(command, cfg),
        "config": {k: cfg[k] for k in sorted(cfg)},
    }


def _tsv_header(command: str, cfg: dict) -> str:
    lines = [
        f"# schema_version={SCHEMA_VERSION}",
        f"# command={command}",
        f"# config_hash={_config_hash(command, cfg)}",
    ]
    lines += [f"# {k}={_fmt_value(cfg[k])}" for k in sorted(cfg)]
    return "\n".join(lines) + "\n"


def _emit(text: str, path) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _json_text(doc: dict) -> str:
    return json.dumps(doc, separators=(",", ":")) + "\n"


def _split_csv_list(value):
    return [v for v in (s.strip() for s in value.split(",")) if v] if value else None


def _parse_rows(spec: str, n: int) -> np.ndarray:
    if spec == "all":
        return np.arange(n, dtype=np.int64)
    try:
        if ":" in spec:
            a_s, _, b_s = spec.partition(":")
            a, b = int(a_s), int(b_s)
            if a < 0 or b < a:
                raise ValueError
            rows = np.arange(a, b, dtype=np.int64)
        else:
            rows = np.array([int(s) for s in spec.split(",")], dtype=np.int64)
    except ValueError:
        raise UsageError(f"--rows: cannot parse {spec!r}") from None
    if rows.size and rows.max() >= n:
        raise DataError(f"--rows: row {int(rows.max())} out of range (file has {n} rows)")
    return rows


def _load_instances(path, feature_names, label_column=None):
    """Instance matrix aligned to the model's feature order.

    The CSV must contain every model feature column; extra columns are
    ignored, and the label column (when named) is excluded.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column name in header")
        if label_column is not None and label_column not in header:
            raise DataError(f"{path}: no column named {label_column!r}")
        missing = [f for f in feature_names if f not in header]
        if missing:
            raise DataError(f"{path}: missing model feature column(s): {missing}")
        if label_column is not None and label_column in feature_names:
            raise DataError(f"{path}: label column {label_column!r} is a model feature")
        idx = [header.index(f) for f in feature_names]
        rows = []
        for rno, rec in enumerate(reader, start=1):
            if len(rec) != len(header):
                raise DataError(
                    f"{path}: data row {rno} has {len(rec)} cells, expected {len(header)}"
                )
            vals = []
            for i in idx:
                try:
                    vals.append(float(rec[i]))
                except ValueError:
                    raise DataError(
                        f"{path}: data row {rno}, column {header[i]!r}: "
                        f"could not parse {rec[i]!r} as a number"
                    ) from None
            rows.append(vals)
    return np.asarray(rows, dtype=np.float64).reshape(len(rows), len(feature_names))


def _align_dataset(ds: data.Dataset, model: forest_mod.Forest) -> data.Dataset:
    """Select and order the model's feature columns from a labeled dataset."""
    missing = [f for f in model.feature_names if f not in ds.feature_names]
    if missing:
        raise DataError(f"dataset is missing model feature column(s): {missing}")
    idx = [ds.feature_names.index(f) for f in model.feature_names]
    return data.Dataset(model.feature_names, ds.X[:, idx], ds.labels, ds.class_names)


def _instances_dataset(X: np.ndarray, model: forest_mod.Forest) -> data.Dataset:
    # placeholder labels: contributions and votes never read them
    return data.Dataset(
        model.feature_names, X, np.zeros(len(X), dtype=np.int64), model.class_names
    )


def _require_positive(cfg: dict, *keys: str) -> None:
    for key in keys:
        value = cfg.get(key)
        if value is not None and value < 1:
            raise UsageError(f"--{key} must be >= 1")


def cmd_train(cfg: dict, threads: int) -> int:
    _require_positive(cfg, "trees", "mtry", "min-node-size")
    if not 0.0 < cfg["split"] < 1.0:
        raise UsageError("--split must lie strictly between 0 and 1")
    ds = data.load_csv(cfg["data"], cfg["label"], _split_csv_list(cfg["class-order"]))
    drop = _split_csv_list(cfg["drop"])
    if drop:
        ds = ds.drop_features(drop)
    train_idx, test_idx = data.split(ds, data.SplitSpec(cfg["split"], cfg["seed"]))
    params = forest_mod.ForestParams(
        trees=cfg["trees"],
        mtry=cfg["mtry"],
        min_node_size=cfg["min-node-size"],
        seed=cfg["seed"],
    )
    model = forest_mod.fit(ds, train_idx, params, threads=threads)
    prov = _provenance("train", cfg)
    forest_mod.save(model, cfg["model-out"], provenance=prov)
    pred, tie = forest_mod.predict(
        model, ds.X[test_idx], tie_seed=cfg["tie-seed"], row_ids=test_idx
    )
    truth = ds.labels[test_idx]
    accuracy = float(np.mean(pred == truth))
    K = ds.n_classes
    confusion = np.zeros((K, K), dtype=np.int64)
    np.add.at(confusion, (truth, pred), 1)
    if cfg["report-out"] is not None:
        report = {
            "provenance": prov,
            "class_names": list(ds.class_names),
            "n_train": int(train_idx.size),
            "n_test": int(test_idx.size),
            "accuracy": accuracy,
            "tie_count": int(tie.sum()),
            "confusion": confusion.tolist(),
        }
        _emit(_json_text(report), cfg["report-out"])
    sys.stderr.write(
        f"trained {model.n_trees} trees on {train_idx.size} rows; "
        f"test accuracy {accuracy!r} over {test_idx.size} rows\n"
    )
    return 0


def cmd_explain(cfg: dict, threads: int) -> int:
    if cfg["format"] not in ("tsv", "json"):
        raise UsageError("--format must be tsv or json")
    if cfg["instance"] is not None and cfg["rows"] != "all":
        raise UsageError("pass either --instance or --rows, not both")
    model = forest_mod.load(cfg["model"])
    X = _load_instances(cfg["data"], model.feature_names, cfg["label"])
    if cfg["instance"] is not None:
        if not 0 <= cfg["instance"] < len(X):
            raise DataError(
                f"--instance: row {cfg['instance']} out of range (file has {len(X)} rows)"
            )
        rows = np.array([cfg["instance"]], dtype=np.int64)
    else:
        rows = _parse_rows(cfg["rows"], len(X))
    dsx = _instances_dataset(X, model)
    cset = contrib.contributions_matrix(
        model, dsx, rows=rows, target_class=cfg["class"], tie_seed=cfg["tie-seed"]
    )
    target = cset.target_class
    values = cset.per_instance_target()
    buf = io.StringIO()
    if cfg["format"] == "tsv":
        buf.write(_tsv_header("explain", cfg))
        cols = ["instance_id", "predicted_class", "tie_flag", "vote_fraction"]
        if target is not None:
            cols.append("target_class_fraction")
        cols += list(model.feature_names)
        buf.write("\t".join(cols) + "\n")
        for i in range(cset.n_instances):
            rec = [
                str(int(cset.row_ids[i])),
                model.class_names[cset.predicted[i]],
                "1" if cset.tie[i] else "0",
                repr(float(cset.y_hat[i, cset.predicted[i]])),
            ]
            if target is not None:
                rec.append(repr(float(cset.y_hat[i, target])))
            rec += [repr(float(v)) for v in values[i]]
            buf.write("\t".join(rec) + "\n")
    else:
        instances = []
        for i in range(cset.n_instances):
            instances.append(
                {
                    "instance_id": int(cset.row_ids[i]),
                    "predicted_class": model.class_names[cset.predicted[i]],
                    "tie_flag": bool(cset.tie[i]),
                    "vote_fraction": float(cset.y_hat[i, cset.predicted[i]]),
                    "y_hat": [float(v) for v in cset.y_hat[i]],
                    "contributions": {
                        f: float(v) for f, v in zip(model.feature_names, values[i])
                    },
                }
            )
        doc = {
            "provenance": _provenance("explain", cfg),
            "target_class": None if target is None else model.class_names[target],
            "instances": instances,
        }
        buf.write(_json_text(doc))
    _emit(buf.getvalue(), cfg["out"])
    return 0


def cmd_patterns(cfg: dict, threads: int) -> int:
    if cfg["k"] is not None and cfg["k-max"] is not None:
        raise UsageError("pass either --k or --k-max, not both")
    _require_positive(cfg, "k", "k-max")
    if cfg["rows"] not in ("train", "all"):
        raise UsageError("--rows must be 'train' or 'all'")
    model = forest_mod.load(cfg["model"])
    ds = data.load_csv(cfg["data"], cfg["label"], class_order=model.class_names)
    ds = _align_dataset(ds, model)
    if cfg["rows"] == "train":
        rows = model.train_indices
        if rows.size and rows.max() >= ds.n_instances:
            raise DataError("data file has fewer rows than the model's training indices")
    else:
        rows = np.arange(ds.n_instances, dtype=np.int64)
    cset = contrib.contributions_matrix(model, ds, rows=rows, tie_seed=cfg["tie-seed"])
    thresholds = patterns.PatternThresholds(
        vote_trust=cfg["vote-trust"],
        core_min_size_frac=cfg["core-min-size-frac"],
        core_min_vote=cfg["core-min-vote"],
        dist_quantile=cfg["dist-quantile"],
    )
    pm = patterns.build_pattern_model(
        cset,
        ds.labels[rows],
        k=cfg["k"],
        k_max=cfg["k-max"],
        seed=cfg["seed"],
        thresholds=thresholds,
    )
    for c, name in enumerate(pm.class_names):
        if pm.clusters[c] is None:
            sys.stderr.write(
                f"warning: class {name!r}: no correctly classified rows; skipped\n"
            )
    patterns.save_pattern_model(pm, cfg["out"], provenance=_provenance("patterns", cfg))
    for c, name in enumerate(pm.class_names):
        cm = pm.clusters[c]
        if cm is None:
            continue
        sizes = ",".join(str(cl.size) for cl in cm.clusters)
        cores = sum(1 for cl in cm.clusters if cl.core)
        sys.stderr.write(
            f"class {name}: support={cm.support} k={cm.k} sizes=[{sizes}] cores={cores}\n"
        )
    return 0


def cmd_reliability(cfg: dict, threads: int) -> int:
    model = forest_mod.load(cfg["model"])
    pm = patterns.load_pattern_model(cfg["patterns"])
    X = _load_instances(cfg["data"], model.feature_names, cfg["label"])
    rows = _parse_rows(cfg["rows"], len(X))
    reports = []
    for i in rows:
        rep = patterns.reliability_report(
            model, pm, X[int(i)], tie_seed=cfg["tie-seed"], row_id=int(i)
        )
        reports.append(
            {
                "instance_id": int(i),
                "predicted_class": model.class_names[rep.predicted_class],
                "tie_flag": rep.tie,
                "vote_fraction": rep.vote_fraction,
                "assigned_cluster": rep.assigned_cluster,
                "assigned_core": rep.assigned_core,
                "distance": rep.distance,
                "distance_threshold": rep.distance_threshold,
                "trusted": rep.trusted,
                "reasons": list(rep.reasons),
                "log_likelihoods": rep.log_likelihoods,
            }
        )
    doc = {"provenance": _provenance("reliability", cfg), "reports": reports}
    _emit(_json_text(doc), cfg["out"])
    return 0


def cmd_robustness(cfg: dict, threads: int) -> int:
    _require_positive(cfg, "trees", "mtry", "min-node-size")
    if cfg["models"] < 2:
        raise UsageError("--models must be >= 2")
    if not 0.0 < cfg["split"] < 1.0:
        raise UsageError("--split must lie strictly between 0 and 1")
    ds = data.load_csv(cfg["data"], cfg["label"], _split_csv_list(cfg["class-order"]))
    drop = _split_csv_list(cfg["drop"])
    if drop:
        ds = ds.drop_features(drop)
    rcfg = analysis.RobustnessConfig(
        models=cfg["models"],
        trees=cfg["trees"],
        train_fraction=cfg["split"],
        seed=cfg["seed"],
        holdout=cfg["holdout"],
        mtry=cfg["mtry"],
        min_node_size=cfg["min-node-size"],
    )
    result = analysis.robustness_run(ds, rcfg, threads=threads)
    header = _tsv_header("robustness", cfg)
    buf = io.StringIO()
    buf.write(header)
    buf.write("feature\tclass\tpartition\tmin\tq25\tmedian\tq75\tmax\n")
    for row in result.quantile_rows():
        fname, cname, partition, *stats = row
        buf.write(
            "\t".join([fname, cname, partition] + [repr(v) for v in stats]) + "\n"
        )
    _emit(buf.getvalue(), f"{cfg['out-prefix']}_contributions.tsv")
    buf = io.StringIO()
    buf.write(header)
    buf.write("model\taccuracy\n")
    for m, acc in enumerate(result.accuracies):
        buf.write(f"{m}\t{float(acc)!r}\n")
    _emit(buf.getvalue(), f"{cfg['out-prefix']}_accuracies.tsv")
    sys.stderr.write(
        f"ran {cfg['models']} models; mean accuracy {float(result.accuracies.mean())!r}\n"
    )
    return 0


def cmd_importance(cfg: dict, threads: int) -> int:
    _require_positive(cfg, "permutations")
    model = forest_mod.load(cfg["model"])
    ds = data.load_csv(cfg["data"], cfg["label"], class_order=model.class_names)
    ds = _align_dataset(ds, model)
    report = analysis.permutation_importance(
        model, ds, seed=cfg["seed"], repeats=cfg["permutations"]
    )
    buf = io.StringIO()
    buf.write(_tsv_header("importance", cfg))
    buf.write("feature\tgini_importance\tpermutation_importance\n")
    for f, name in enumerate(report.feature_names):
        buf.write(f"{name}\t{float(report.gini[f])!r}\t{float(report.permutation[f])!r}\n")
    _emit(buf.getvalue(), cfg["out"])
    return 0


_HANDLERS = {
    "train": cmd_train,
    "explain": cmd_explain,
    "patterns": cmd_patterns,
    "reliability": cmd_reliability,
    "robustness": cmd_robustness,
    "importance": cmd_importance,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        cfg, threads = _resolve(args, args.command)
        return _HANDLERS[args.command](cfg, threads)
    except UsageError as e:
        sys.stderr.write(f"usage error: {e}\n")
        return 2
    except RfContribError as e:
        sys.stderr.write(f"error: {e}\n")
        return 1
    except OSError as e:
        sys.stderr.write(f"error: {e}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
