"""Command line front end tying the pipeline together.

Subcommands: gen, cluster, featurize, evaluate, analyze, predict.
Every output file embeds the resolved run configuration: JSON files get
a ``config`` key, delimited files start with a ``# config: ...`` line,
figures carry it in their PNG metadata. Exit codes: 0 on success, 1 on
component errors (reported as ``module.Error: message`` on stderr),
2 on usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import __version__, figures, metapath, predictors
from .community import (
    augment,
    cluster_layer_trace,
    connected_component_partition,
    load_partition,
    map_equation,
    save_partition,
    visit_rates,
)
from .evalharness import (
    ExperimentConfig,
    correlation_report,
    embeddedness_histogram,
    kfold_split,
    run_experiments,
    PREDICTOR_KINDS,
)
from .netcore import (
    F,
    M,
    R,
    LAYERS,
    ParseError,
    SignedEdge,
    load_network,
    write_layer_file,
)
from .synthgen import GenConfig, generate, preset, PRESET_TARGETS

_FORMAT_VERSION = 1
_PARTITION_FILES = {R: "partition_R.json", M: "partition_M.json"}


def _run_config(command, args):
    skip = {"func", "command"}
    resolved = {
        k: v for k, v in sorted(vars(args).items()) if k not in skip
    }
    return {
        "command": command,
        "tool_version": __version__,
        "format_version": _FORMAT_VERSION,
        "args": resolved,
    }


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def _config_comment(config):
    return "config: " + json.dumps(config, sort_keys=True)


def _read_pairs(path):
    """Pairs files hold ``src dst`` or ``src dst sign`` lines."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) not in (2, 3):
                raise ParseError(f"line {lineno}: expected 2 or 3 fields")
            try:
                u, v = int(fields[0]), int(fields[1])
            except ValueError:
                raise ParseError(f"line {lineno}: node ids must be integers") from None
            sign = None
            if len(fields) == 3:
                if fields[2] not in ("+1", "-1"):
                    raise ParseError(f"line {lineno}: bad sign token {fields[2]!r}")
                sign = 1 if fields[2] == "+1" else -1
            pairs.append((u, v, sign))
    return pairs


def _load_partitions(directory, net):
    parts = {}
    for layer, name in _PARTITION_FILES.items():
        part = load_partition(os.path.join(directory, name))
        if part.layer != layer:
            raise ValueError(f"{name} holds a partition of layer {part.layer}")
        if len(part.assignment) != net.node_count:
            raise ValueError(f"{name} does not cover the network's node set")
        parts[layer] = part
    return parts


def _network_edges(net, layer):
    edges = []
    for (u, v) in net.edge_pairs(layer):
        sign = net.f_sign(u, v) if layer == F else None
        edges.append(SignedEdge(u, v, layer, sign, net.weight(layer, u, v)))
    return edges


def cmd_gen(args):
    if args.preset:
        cfg = preset(args.preset, seed=args.seed if args.seed is not None else 7)
    else:
        cfg = GenConfig.from_json_file(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
    net, truth = generate(cfg)
    rc = _run_config("gen", args)
    rc["gen_config"] = cfg.to_dict()

    os.makedirs(args.out, exist_ok=True)
    layer_files = {F: "f.edges", M: "m.edges", R: "r.edges"}
    comment = _config_comment(rc)
    for layer, name in layer_files.items():
        write_layer_file(
            os.path.join(args.out, name), _network_edges(net, layer), comment
        )
    manifest = {
        "node_count": net.node_count,
        "layers": layer_files,
        "config": rc,
    }
    _write_json(os.path.join(args.out, "manifest.json"), manifest)
    truth_payload = truth.to_dict()
    truth_payload["config"] = rc
    _write_json(os.path.join(args.out, "ground_truth.json"), truth_payload)
    counts = net.edge_counts
    print(
        f"generated {net.node_count} nodes, "
        f"F={counts[F]} M={counts[M]} R={counts[R]} -> {args.out}"
    )
    return 0


def cmd_cluster(args):
    net = load_network(args.manifest)
    out_dir = args.out or os.path.dirname(os.path.abspath(args.manifest))
    os.makedirs(out_dir, exist_ok=True)
    rc = _run_config("cluster", args)
    source = args.clusterer
    for layer in (R, M):
        vr = visit_rates(net, layer, args.teleport)
        singleton = map_equation(vr, np.arange(net.node_count))
        if source == "infomap":
            part, trace = cluster_layer_trace(net, layer, args.teleport, args.seed)
            final = trace[-1]
        elif source == "components":
            part = connected_component_partition(net, layer)
            final = map_equation(vr, part.assignment)
        elif source.startswith("file:"):
            part = _load_partitions(source[len("file:") :], net)[layer]
            final = map_equation(vr, part.assignment)
        else:
            raise ValueError(
                f"clusterer must be infomap, components or file:PATH, got {source!r}"
            )
        save_partition(part, os.path.join(out_dir, _PARTITION_FILES[layer]), rc)
        print(
            f"{layer}: codelength {singleton:.6f} -> {final:.6f} bits, "
            f"{part.cluster_count} clusters"
        )
    return 0


def _featurize_base(net, mode, partitions_dir):
    if mode in ("cb", "both"):
        if not partitions_dir:
            raise ValueError(f"mode {mode!r} needs --partitions")
        parts = _load_partitions(partitions_dir, net)
        return augment(net, parts[R], parts[M])
    return net


def cmd_featurize(args):
    net = load_network(args.manifest)
    pairs = _read_pairs(args.pairs)
    base = _featurize_base(net, args.mode, args.partitions)
    columns, rows = metapath.featurize_pairs(net=base, pairs=pairs, mode=args.mode)
    rc = _run_config("featurize", args)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(f"# {_config_comment(rc)}\n")
        fh.write("src,dst,label," + ",".join(columns) + "\n")
        for row in rows:
            label = "" if row.label is None else str(row.label)
            fh.write(
                f"{row.initiator},{row.recipient},{label},"
                + ",".join(str(c) for c in row.counts)
                + "\n"
            )
    print(f"wrote {len(rows)} rows x {len(columns)} features -> {args.out}")
    return 0


def _svm_model_payload(kind, columns, scaler, model, rc):
    return {
        "type": "svm",
        "predictor": kind,
        "columns": list(columns),
        "weights": model.weights.tolist(),
        "bias": model.bias,
        "standardizer": scaler.to_dict(),
        "class_weights": {"+1": model.class_weights[1], "-1": model.class_weights[-1]},
        "lam": model.lam,
        "epochs": model.epochs,
        "seed": model.seed,
        "config": rc,
    }


def _train_full_models(net, kinds, cfg, rc):
    """Fit deployable models on every labelled pair (own edges skipped
    inside the extractors; no fold masking applies)."""
    payloads = {}
    pairs = [(u, v) for (u, v, _) in net.f_edges()]
    labels = np.array([s for (_, _, s) in net.f_edges()], dtype=np.int64)
    svm_kinds = [k for k in kinds if k in ("cbmp", "nbmp", "nbsp")]
    for kind in svm_kinds:
        if kind in ("cbmp", "nbmp"):
            mode = "cb" if kind == "cbmp" else "nb"
            base = (
                augment(net, cfg.partitions[R], cfg.partitions[M])
                if kind == "cbmp"
                else net
            )
            columns, rows = metapath.featurize_pairs(base, pairs, mode)
            x = np.array([r.counts for r in rows], dtype=float)
        else:
            columns = predictors.NBSP_COLUMNS
            x = np.array([predictors.nbsp_features(net, u, v) for (u, v) in pairs])
        scaler = predictors.fit_standardizer(x)
        model = predictors.train_svm(
            scaler.transform(x),
            labels,
            lam=cfg.svm_lam,
            epochs=cfg.svm_epochs,
            seed=cfg.seed,
            class_weighted=cfg.class_weighted,
        )
        payloads[kind] = _svm_model_payload(kind, columns, scaler, model, rc)
    if "mf" in kinds:
        edges = net.f_edges()
        model = predictors.train_mf(
            edges,
            net.node_count,
            rank=cfg.mf_rank,
            lam=cfg.mf_lam,
            epochs=cfg.mf_epochs,
            lr=cfg.mf_lr,
            seed=cfg.seed,
        )
        payloads["mf"] = {
            "type": "mf",
            "predictor": "mf",
            "rank": model.rank,
            "factors_u": model.factors_u.tolist(),
            "factors_v": model.factors_v.tolist(),
            "lam": model.lam,
            "epochs": model.epochs,
            "seed": model.seed,
            "config": rc,
        }
    return payloads


def cmd_evaluate(args):
    net = load_network(args.manifest)
    kinds = [k.strip() for k in args.predictors.split(",") if k.strip()]
    unknown = [k for k in kinds if k not in PREDICTOR_KINDS]
    if unknown:
        raise ValueError(f"unknown predictors {unknown}, have {PREDICTOR_KINDS}")
    pairs = [(u, v) for (u, v, _) in net.f_edges()]
    plan = kfold_split(pairs, args.k, args.seed)

    partitions = None
    if "cbmp" in kinds:
        if args.partitions:
            partitions = _load_partitions(args.partitions, net)
        else:
            partitions = {
                layer: cluster_layer_trace(
                    net, layer, args.teleport, args.cluster_seed
                )[0]
                for layer in (R, M)
            }
    cfg = ExperimentConfig(
        partitions=partitions,
        seed=args.seed,
        svm_lam=args.svm_lam,
        svm_epochs=args.svm_epochs,
        class_weighted=not args.unweighted_svm,
        mf_rank=args.mf_rank,
        mf_lam=args.mf_lam,
        mf_epochs=args.mf_epochs,
        mf_lr=args.mf_lr,
        threads=args.threads,
    )
    reports = run_experiments(net, kinds, plan, cfg)
    rc = _run_config("evaluate", args)
    rc["experiment"] = cfg.echo(plan, kinds)

    os.makedirs(args.out, exist_ok=True)
    _write_json(
        os.path.join(args.out, "report.json"),
        {"reports": [r.to_dict() for r in reports], "config": rc},
    )
    with open(os.path.join(args.out, "report.csv"), "w", encoding="utf-8") as fh:
        fh.write(f"# {_config_comment(rc)}\n")
        fh.write("predictor,fold,tp,fn,tn,fp,balanced_accuracy\n")
        for report in reports:
            for o in report.folds:
                ba = "" if o.balanced_accuracy is None else repr(o.balanced_accuracy)
                fh.write(
                    f"{report.predictor},{o.fold},{o.tp},{o.fn},{o.tn},{o.fp},{ba}\n"
                )
            mean = (
                ""
                if report.mean_balanced_accuracy is None
                else repr(report.mean_balanced_accuracy)
            )
            fh.write(f"{report.predictor},mean,,,,,{mean}\n")
    if not args.no_figures:
        figures.save_accuracy_figure(
            reports, os.path.join(args.out, "accuracy.png"), rc
        )
    if args.save_model:
        os.makedirs(args.save_model, exist_ok=True)
        for kind, payload in _train_full_models(net, kinds, cfg, rc).items():
            _write_json(os.path.join(args.save_model, f"{kind}.json"), payload)
    for report in reports:
        mean = report.mean_balanced_accuracy
        shown = "undefined" if mean is None else f"{mean:.4f}"
        print(f"{report.predictor}: mean balanced accuracy {shown}")
    return 0


def cmd_analyze(args):
    net = load_network(args.manifest)
    rc = _run_config("analyze", args)
    os.makedirs(args.out, exist_ok=True)
    corr = correlation_report(net)
    corr["config"] = rc
    _write_json(os.path.join(args.out, "correlations.json"), corr)
    bins = embeddedness_histogram(net)
    with open(os.path.join(args.out, "embeddedness.csv"), "w", encoding="utf-8") as fh:
        fh.write(f"# {_config_comment(rc)}\n")
        fh.write("bin,n,pct_of_positives,pct_of_negatives,positive_rate\n")
        for row in bins:
            fh.write(
                f"{row['embeddedness']},{row['n']},{repr(row['pct_of_positives'])},"
                f"{repr(row['pct_of_negatives'])},{repr(row['positive_rate'])}\n"
            )
    if not args.no_figures:
        figures.save_embeddedness_figure(
            bins, os.path.join(args.out, "embeddedness.png"), rc
        )
    for entry in corr["pairs"]:
        print(
            f"{entry['layers']}: tau_in={entry['in_degree_tau']} "
            f"tau_out={entry['out_degree_tau']} common={entry['common_edges']}"
        )
    return 0


def _infer_mode(columns):
    for mode, names in metapath.MODE_COLUMNS.items():
        if columns == names:
            return mode
    if columns == predictors.NBSP_COLUMNS:
        return "nbsp"
    raise ValueError("model columns match no known feature mode")


def cmd_predict(args):
    with open(args.model, encoding="utf-8") as fh:
        payload = json.load(fh)
    net = load_network(args.manifest)
    pairs = _read_pairs(args.pairs)
    if payload.get("type") == "svm":
        columns = payload["columns"]
        mode = _infer_mode(columns)
        if mode == "nbsp":
            x = np.array(
                [predictors.nbsp_features(net, u, v) for (u, v, _) in pairs]
            )
        else:
            base = _featurize_base(net, mode, args.partitions)
            _, rows = metapath.featurize_pairs(
                base, [(u, v) for (u, v, _) in pairs], mode
            )
            x = np.array([r.counts for r in rows], dtype=float)
        scaler = predictors.Standardizer.from_dict(payload["standardizer"])
        weights = np.asarray(payload["weights"], dtype=float)
        margins = scaler.transform(x) @ weights + payload["bias"]
    elif payload.get("type") == "mf":
        fu = np.asarray(payload["factors_u"], dtype=float)
        fv = np.asarray(payload["factors_v"], dtype=float)
        margins = np.array([fu[u] @ fv[v] for (u, v, _) in pairs])
    else:
        raise ValueError(f"unknown model type {payload.get('type')!r}")
    signs = predictors.sign_of(margins)
    rc = _run_config("predict", args)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(f"# {_config_comment(rc)}\n")
        fh.write("src,dst,margin,predicted_sign\n")
        for (u, v, _), margin, sign in zip(pairs, margins, signs):
            fh.write(f"{u},{v},{repr(float(margin))},{int(sign)}\n")
    print(f"wrote {len(pairs)} predictions -> {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="twoway",
        description="Sign prediction for link initiations in three-layer networks",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"twoway {__version__} (format v{_FORMAT_VERSION})",
    )
    sub = parser.add_subparsers(dest="command")

    gen = sub.add_parser("gen", help="generate a synthetic network")
    src = gen.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESET_TARGETS))
    src.add_argument("--config", help="path to a JSON generation config")
    gen.add_argument("--seed", type=int, default=None, help="override the stream seed")
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=cmd_gen)

    cluster = sub.add_parser("cluster", help="cluster the M and R layers")
    cluster.add_argument("--manifest", required=True)
    cluster.add_argument("--teleport", type=float, default=0.15)
    cluster.add_argument("--seed", type=int, default=0)
    cluster.add_argument(
        "--clusterer",
        default="infomap",
        help="infomap, components, or file:PATH with existing partition files",
    )
    cluster.add_argument("--out", default=None, help="defaults to the manifest's directory")
    cluster.set_defaults(func=cmd_cluster)

    feat = sub.add_parser("featurize", help="write meta-path features as CSV")
    feat.add_argument("--manifest", required=True)
    feat.add_argument("--pairs", required=True, help="file of 'src dst [sign]' lines")
    feat.add_argument("--mode", choices=("nb", "cb", "both"), default="both")
    feat.add_argument("--partitions", help="directory with partition_R/M.json")
    feat.add_argument("--out", required=True, help="output CSV path")
    feat.set_defaults(func=cmd_featurize)

    ev = sub.add_parser("evaluate", help="cross-validated predictor comparison")
    ev.add_argument("--manifest", required=True)
    ev.add_argument(
        "--predictors",
        default="cbmp,nbmp,nbsp,mf,random",
        help="comma list of " + ",".join(PREDICTOR_KINDS),
    )
    ev.add_argument("--k", type=int, default=10)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--partitions", help="directory with partition_R/M.json")
    ev.add_argument("--teleport", type=float, default=0.15)
    ev.add_argument("--cluster-seed", type=int, default=0)
    ev.add_argument("--threads", type=int, default=1)
    ev.add_argument("--svm-lam", type=float, default=1e-4)
    ev.add_argument("--svm-epochs", type=int, default=50)
    ev.add_argument("--unweighted-svm", action="store_true")
    ev.add_argument("--mf-rank", type=int, default=20)
    ev.add_argument("--mf-lam", type=float, default=0.05)
    ev.add_argument("--mf-epochs", type=int, default=30)
    ev.add_argument("--mf-lr", type=float, default=0.05)
    ev.add_argument("--no-figures", action="store_true")
    ev.add_argument("--save-model", help="directory for deployable model files")
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=cmd_evaluate)

    an = sub.add_parser("analyze", help="layer correlation and embeddedness reports")
    an.add_argument("--manifest", required=True)
    an.add_argument("--no-figures", action="store_true")
    an.add_argument("--out", required=True)
    an.set_defaults(func=cmd_analyze)

    pred = sub.add_parser("predict", help="apply a saved model to pairs")
    pred.add_argument("--model", required=True)
    pred.add_argument("--manifest", required=True)
    pred.add_argument("--pairs", required=True)
    pred.add_argument("--partitions", help="directory with partition_R/M.json")
    pred.add_argument("--out", required=True)
    pred.set_defaults(func=cmd_predict)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except Exception as exc:  # component errors exit 1 with a qualified name
        module = type(exc).__module__
        print(f"{module}.{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
