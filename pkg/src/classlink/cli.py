"""Command-line pipeline: seeded stages writing digest-tracked artifacts.

Each subcommand reads its upstream artifacts out of the run directory,
verifies (via ``manifest.json``) that they were produced under the same
configuration, and writes its own artifact plus a manifest entry.  Running
stages one by one is therefore equivalent to ``run-all``, and re-running a
stage whose inputs have not changed reuses the cached artifact.
"""

from __future__ import annotations

import argparse
import sys
import json
from pathlib import Path

import numpy as np

from .backbone import (
    load_checkpoint,
    make_scorer,
    save_checkpoint,
    save_training_log,
    train,
)
from .clustering import (
    PseudoLabeling,
    aggregate_features,
    elbow_kmeans,
    kmeans,
    load_labeling_json,
    louvain,
    mono_label,
    save_labeling_json,
    save_labels_csv,
    save_ssd_curve_csv,
)
from .config import RunConfig, load_config_file, stage_digest
from .errors import (
    ClasslinkError,
    ConfigurationError,
    DependencyError,
    StaleArtifactError,
)
from .evaluation import bench_prior_runtime, evaluate_split, save_bench_csv, save_report
from .graph import (
    Graph,
    EdgeSplit,
    load_graph,
    load_graph_json,
    load_split_json,
    save_graph_json,
    save_split_json,
    split_edges,
)
from .heuristics import make_heuristic_scorer
from .priors import (
    build_prior_matrix,
    count_class_links,
    export_heatmap,
    load_prior_json,
    save_prior_json,
)

MANIFEST_NAME = "manifest.json"

ARTIFACT_NAMES = {
    "ingest": "graph.json",
    "split": "split.json",
    "cluster": "labeling.json",
    "prior": "prior.json",
    "heatmap": "heatmap.csv",
    "train": "checkpoint.json",
    "evaluate": "eval/report.json",
    "bench": "bench.csv",
}


# ---------------------------------------------------------------------------
# Manifest bookkeeping
# ---------------------------------------------------------------------------


def _manifest_path(cfg: RunConfig) -> Path:
    return Path(cfg.out) / MANIFEST_NAME


def _load_manifest(cfg: RunConfig) -> dict:
    path = _manifest_path(cfg)
    if not path.exists():
        return {"version": 1, "kind": "manifest", "stages": {}}
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise StaleArtifactError(f"{path}: manifest is corrupt ({exc})") from exc


def _record_stage(cfg: RunConfig, stage: str, **extra) -> None:
    manifest = _load_manifest(cfg)
    manifest["stages"][stage] = {
        "digest": stage_digest(cfg, stage),
        "path": ARTIFACT_NAMES[stage],
        "seed": cfg.seed,
        **extra,
    }
    path = _manifest_path(cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, sort_keys=True) + "\n")


def _require_stage(cfg: RunConfig, stage: str) -> Path:
    """Path of an upstream artifact, verified against the current config."""
    entry = _load_manifest(cfg)["stages"].get(stage)
    if entry is None:
        raise DependencyError(
            f"missing {stage} artifact; run `classlink {stage}` first"
        )
    path = Path(cfg.out) / entry["path"]
    if not path.exists():
        raise DependencyError(
            f"{stage} artifact vanished ({path}); run `classlink {stage}` again"
        )
    if entry.get("digest") != stage_digest(cfg, stage):
        raise StaleArtifactError(
            f"{stage} artifact was built from a different configuration; "
            f"re-run `classlink {stage}`"
        )
    return path


def _cached(cfg: RunConfig, stage: str) -> Path | None:
    """Artifact path when this stage is already up to date, else None."""
    entry = _load_manifest(cfg)["stages"].get(stage)
    if entry is None or entry.get("digest") != stage_digest(cfg, stage):
        return None
    path = Path(cfg.out) / entry["path"]
    return path if path.exists() else None


# ---------------------------------------------------------------------------
# Shared loading helpers
# ---------------------------------------------------------------------------


def _load_pipeline_graph(cfg: RunConfig) -> Graph:
    return load_graph_json(_require_stage(cfg, "ingest"))


def _load_pipeline_split(cfg: RunConfig) -> EdgeSplit:
    return load_split_json(_require_stage(cfg, "split"))


def _resolve_labels(
    cfg: RunConfig, g: Graph
) -> tuple[np.ndarray, int, tuple[str, ...]]:
    """Labels for prior building: ground truth or the clustering artifact."""
    if cfg.label_source == "true":
        if g.labels is None:
            raise ConfigurationError(
                "label source 'true' needs labels ingested from a labels file"
            )
        return g.labels, g.n_classes, g.class_ids
    labeling = load_labeling_json(_require_stage(cfg, "cluster"))
    if labeling.labels.size != g.n_nodes:
        raise StaleArtifactError(
            "clustering artifact covers a different node set; "
            "re-run `classlink cluster`"
        )
    return labeling.labels, labeling.k, tuple(str(i) for i in range(labeling.k))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_ingest(cfg: RunConfig) -> None:
    cached = _cached(cfg, "ingest")
    if cached is not None:
        print(f"ingest: up to date ({cached})")
        return
    g = load_graph(cfg.edges, cfg.features, cfg.labels)
    path = Path(cfg.out) / ARTIFACT_NAMES["ingest"]
    save_graph_json(g, path)
    _record_stage(cfg, "ingest", n_nodes=g.n_nodes, n_edges=g.n_edges)
    print(f"ingest: n_nodes={g.n_nodes} n_edges={g.n_edges} -> {path}")


def cmd_split(cfg: RunConfig) -> None:
    cached = _cached(cfg, "split")
    if cached is not None:
        print(f"split: up to date ({cached})")
        return
    g = _load_pipeline_graph(cfg)
    split = split_edges(g, cfg.ratios, cfg.seed, negatives=cfg.negatives)
    path = Path(cfg.out) / ARTIFACT_NAMES["split"]
    save_split_json(split, path)
    _record_stage(
        cfg,
        "split",
        n_train=len(split.train_edges),
        n_valid=len(split.valid_edges),
        n_test=len(split.test_edges),
    )
    print(
        f"split: train={len(split.train_edges)} valid={len(split.valid_edges)} "
        f"test={len(split.test_edges)} negatives={len(split.test_negatives)} -> {path}"
    )


def _cluster_labeling(cfg: RunConfig, g: Graph, split: EdgeSplit) -> PseudoLabeling:
    if cfg.label_source == "mono":
        return mono_label(g.n_nodes)
    g_train = split.train_graph(g)
    if cfg.label_source == "louvain":
        return louvain(g_train, cfg.seed)
    # kmeans on train-graph-aggregated features
    if g.features.shape[1] == 0:
        raise ConfigurationError("kmeans labels need node features")
    agg = aggregate_features(g_train)
    if cfg.k is not None:
        return kmeans(
            agg,
            cfg.k,
            cfg.seed,
            max_iters=cfg.max_iters,
            normalize_rows=cfg.normalize_rows,
        )
    return elbow_kmeans(
        agg,
        list(cfg.k_grid or ()),
        cfg.seed,
        max_iters=cfg.max_iters,
        normalize_rows=cfg.normalize_rows,
    )


def cmd_cluster(cfg: RunConfig) -> None:
    if cfg.label_source == "true":
        raise ConfigurationError(
            "label source 'true' reads the labels file; nothing to cluster"
        )
    cached = _cached(cfg, "cluster")
    if cached is not None:
        print(f"cluster: up to date ({cached})")
        return
    g = _load_pipeline_graph(cfg)
    split = _load_pipeline_split(cfg)
    labeling = _cluster_labeling(cfg, g, split)
    out = Path(cfg.out)
    path = out / ARTIFACT_NAMES["cluster"]
    save_labeling_json(labeling, path)
    save_labels_csv(labeling, g.node_ids, out / "labels.csv")
    if labeling.ssd_curve is not None:
        save_ssd_curve_csv(labeling.ssd_curve, out / "ssd_curve.csv")
    _record_stage(cfg, "cluster", method=labeling.method, k=labeling.k)
    print(f"cluster: method={labeling.method} k={labeling.k} -> {path}")


def cmd_prior(cfg: RunConfig) -> None:
    cached = _cached(cfg, "prior")
    if cached is not None:
        print(f"prior: up to date ({cached})")
        return
    g = _load_pipeline_graph(cfg)
    split = _load_pipeline_split(cfg)
    labels, n_classes, class_ids = _resolve_labels(cfg, g)
    prior = build_prior_matrix(count_class_links(split.train_edges, labels, n_classes))
    out = Path(cfg.out)
    path = out / ARTIFACT_NAMES["prior"]
    save_prior_json(prior, path, seed=cfg.seed, label_source=cfg.label_source)
    export_heatmap(prior, out / ARTIFACT_NAMES["heatmap"], class_ids)
    _record_stage(cfg, "prior", n_classes=n_classes, label_source=cfg.label_source)
    print(
        f"prior: {n_classes}x{n_classes} from {len(split.train_edges)} train edges "
        f"(labels={cfg.label_source}) -> {path}"
    )


def cmd_heatmap(cfg: RunConfig) -> None:
    prior = load_prior_json(_require_stage(cfg, "prior"))
    g = _load_pipeline_graph(cfg)
    if cfg.label_source == "true" and g.labels is not None:
        class_ids = g.class_ids
    else:
        class_ids = tuple(str(i) for i in range(prior.n_classes))
    path = Path(cfg.out) / ARTIFACT_NAMES["heatmap"]
    export_heatmap(prior, path, class_ids)
    _record_stage(cfg, "heatmap", n_classes=prior.n_classes)
    print(f"heatmap: {prior.n_classes}x{prior.n_classes} -> {path}")


def cmd_train(cfg: RunConfig) -> None:
    cached = _cached(cfg, "train")
    if cached is not None:
        print(f"train: up to date ({cached})")
        return
    g = _load_pipeline_graph(cfg)
    split = _load_pipeline_split(cfg)
    labels: np.ndarray | None = None
    if cfg.mode != "backbone_only":
        _require_stage(cfg, "prior")
        labels, _, _ = _resolve_labels(cfg, g)
    model, log = train(g, split, labels, cfg.mode, cfg.train_config())
    out = Path(cfg.out)
    path = out / ARTIFACT_NAMES["train"]
    save_checkpoint(model, path, config_digest=stage_digest(cfg, "train"))
    save_training_log(log, out / "training_log.csv")
    best_val = max(row["val_mrr"] for row in log)
    _record_stage(cfg, "train", mode=cfg.mode, epochs_run=len(log), best_val_mrr=best_val)
    print(
        f"train: mode={cfg.mode} epochs={len(log)} best_val_mrr={best_val:.6f} -> {path}"
    )


def _build_scorer(cfg: RunConfig, g: Graph, split: EdgeSplit):
    g_train = split.train_graph(g)
    if cfg.scorer == "model":
        model, digest = load_checkpoint(_require_stage(cfg, "train"))
        if digest != stage_digest(cfg, "train"):
            raise StaleArtifactError(
                "checkpoint was trained under a different configuration; "
                "re-run `classlink train`"
            )
        return make_scorer(model, g_train, g.features)
    if cfg.scorer == "hc":
        prior = load_prior_json(_require_stage(cfg, "prior"))
        labels, _, _ = _resolve_labels(cfg, g)
        return make_heuristic_scorer(
            "hc",
            g_train,
            katz=cfg.katz_config(),
            prior=prior,
            labels=labels,
            base=cfg.hc_base,
        )
    return make_heuristic_scorer(cfg.scorer, g_train, katz=cfg.katz_config())


def cmd_evaluate(cfg: RunConfig) -> None:
    g = _load_pipeline_graph(cfg)
    split = _load_pipeline_split(cfg)
    scorer = _build_scorer(cfg, g, split)
    report = evaluate_split(
        scorer,
        split,
        cfg.metric,
        cfg.seed,
        which=cfg.eval_split,
        per_edge_negatives=cfg.per_edge_negatives,
        graph=g,
    )
    if cfg.eval_split == "test":
        positives, pool = split.test_edges, split.test_negatives
    else:
        positives, pool = split.valid_edges, split.valid_negatives
    scores = {"positive": (positives, scorer(positives))}
    if cfg.per_edge_negatives is None:
        scores["negative"] = (pool, scorer(pool))
    paths = save_report(
        report,
        Path(cfg.out) / "eval",
        config_digest=stage_digest(cfg, "evaluate"),
        positives=positives,
        scores=scores,
    )
    _record_stage(
        cfg, "evaluate", scorer=cfg.scorer, metric=report.metric, value=report.value
    )
    print(
        f"evaluate: scorer={cfg.scorer} {report.metric}={report.value:.6f} "
        f"({len(positives)} positives vs {report.n_negatives} negatives) "
        f"-> {paths['report']}"
    )


def cmd_bench(cfg: RunConfig) -> None:
    result = bench_prior_runtime(list(cfg.bench_sizes), cfg.seed)
    path = Path(cfg.out) / ARTIFACT_NAMES["bench"]
    save_bench_csv(result, path)
    _record_stage(
        cfg,
        "bench",
        slope=result["slope"],
        intercept=result["intercept"],
        r_squared=result["r_squared"],
    )
    print(
        f"bench: sizes={list(cfg.bench_sizes)} slope={result['slope']:.3e} "
        f"r2={result['r_squared']:.4f} -> {path}"
    )


def cmd_run_all(cfg: RunConfig) -> None:
    cmd_ingest(cfg)
    cmd_split(cfg)
    needs_prior = cfg.mode != "backbone_only" or cfg.scorer == "hc"
    if needs_prior:
        if cfg.label_source != "true":
            cmd_cluster(cfg)
        cmd_prior(cfg)
    if cfg.scorer == "model":
        cmd_train(cfg)
    cmd_evaluate(cfg)


COMMANDS = {
    "ingest": (cmd_ingest, "load edge/feature/label files into a graph artifact"),
    "split": (cmd_split, "partition edges into train/valid/test with negative pools"),
    "prior": (cmd_prior, "count class-pair links on train edges and normalize"),
    "cluster": (cmd_cluster, "derive pseudo-labels (kmeans, louvain, or mono)"),
    "train": (cmd_train, "fit the link predictor with full-batch gradient descent"),
    "evaluate": (cmd_evaluate, "rank positives against sampled negatives"),
    "heatmap": (cmd_heatmap, "export the prior matrix as a CSV heatmap"),
    "bench": (cmd_bench, "time prior construction across edge counts"),
    "run-all": (cmd_run_all, "run the full pipeline for one config"),
}

# CLI flags that override config-file values when provided.
_OVERRIDE_FLAGS = (
    ("--seed", "seed", int, "root seed for every stage"),
    ("--out", "out", str, "run directory for artifacts"),
    ("--edges", "edges", str, "edge-list file (u v per line)"),
    ("--features", "features", str, "node feature CSV"),
    ("--labels", "labels", str, "node label CSV"),
    ("--label-source", "label_source", str, "true, kmeans, louvain, or mono"),
    ("--mode", "mode", str, "ncn, ncnc, or backbone_only"),
    ("--scorer", "scorer", str, "model, cn, aa, ra, katz, or hc"),
    ("--metric", "metric", str, "mrr or hr@K"),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="classlink",
        description="Seeded link-prediction pipeline with class-conditioned priors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (fn, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="YAML config file", default=None)
        for flag, dest, typ, help_str in _OVERRIDE_FLAGS:
            sp.add_argument(flag, dest=dest, type=typ, help=help_str, default=None)
        sp.set_defaults(func=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        mapping = load_config_file(args.config) if args.config else {}
        overrides = {
            dest: getattr(args, dest)
            for _, dest, _, _ in _OVERRIDE_FLAGS
            if getattr(args, dest) is not None
        }
        cfg = RunConfig.from_mapping(mapping, overrides=overrides)
        cfg.validate(
            pipeline=args.command != "bench",
            check_paths=args.command in ("ingest", "run-all"),
        )
        args.func(cfg)
    except ClasslinkError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
