#!/usr/bin/env python3
"""Convert the standard citation-network distribution into pipeline inputs.

The upstream distribution ships two files:

* ``cora.content`` — ``<paper_id> <1433 binary word flags> <class_label>``
  (tab separated)
* ``cora.cites``   — ``<cited_paper_id> <citing_paper_id>`` (tab separated)

This script writes ``edges.txt``, ``features.csv``, and ``labels.csv`` in the
formats ``classlink ingest`` expects, treating citations as undirected and
dropping self-citations and duplicate pairs.  Expected result: 2708 nodes,
5278 undirected edges, 1433 features, 7 classes.

Usage:
    python3 scripts/prepare_cora.py cora.content cora.cites data/cora
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("content", help="node file (<id> <features...> <label>)")
    parser.add_argument("cites", help="edge file (<cited_id> <citing_id>)")
    parser.add_argument("out_dir", help="output directory (e.g. data/cora)")
    args = parser.parse_args(argv)

    features: dict[str, list[str]] = {}
    labels: dict[str, str] = {}
    n_feats = None
    for lineno, line in enumerate(Path(args.content).read_text().splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) < 3:
            print(f"{args.content}:{lineno}: expected id, features, label", file=sys.stderr)
            return 1
        node, label = parts[0], parts[-1]
        row = parts[1:-1]
        if n_feats is None:
            n_feats = len(row)
        elif len(row) != n_feats:
            print(
                f"{args.content}:{lineno}: {len(row)} features, expected {n_feats}",
                file=sys.stderr,
            )
            return 1
        features[node] = row
        labels[node] = label

    edges: set[tuple[str, str]] = set()
    skipped = 0
    for lineno, line in enumerate(Path(args.cites).read_text().splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 2:
            print(f"{args.cites}:{lineno}: expected two node ids", file=sys.stderr)
            return 1
        u, v = parts
        if u == v:
            continue
        if u not in features or v not in features:
            skipped += 1
            continue
        edges.add((u, v) if u <= v else (v, u))

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    nodes = sorted(features)
    (out / "edges.txt").write_text(
        "\n".join(f"{u} {v}" for u, v in sorted(edges)) + "\n"
    )
    (out / "features.csv").write_text(
        "\n".join(f"{node}," + ",".join(features[node]) for node in nodes) + "\n"
    )
    (out / "labels.csv").write_text(
        "\n".join(f"{node},{labels[node]}" for node in nodes) + "\n"
    )

    n_classes = len(set(labels.values()))
    print(
        f"wrote {out}/: {len(nodes)} nodes, {len(edges)} undirected edges, "
        f"{n_feats} features, {n_classes} classes"
    )
    if skipped:
        print(f"note: skipped {skipped} citation(s) touching unknown node ids")
    expected = (2708, 5278, 1433, 7)
    actual = (len(nodes), len(edges), n_feats, n_classes)
    if actual != expected:
        print(
            f"warning: stats {actual} differ from the published {expected}; "
            "check that the inputs are the standard distribution",
            file=sys.stderr,
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
