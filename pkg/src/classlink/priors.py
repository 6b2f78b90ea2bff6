"""Class-conditioned edge priors.

From training edges and node class labels, estimate how likely an edge is to
connect each ordered pair of classes: ``probs[i][j]`` is the empirical
probability that a training neighbor of a class-``i`` node belongs to class
``j``.  Each undirected edge contributes one count in each direction, so the
joint count matrix is symmetric (a same-class edge adds 2 to its diagonal
cell) and every row of ``probs`` sums to 1 unless its class never appears as
an endpoint.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, MissingLabelError, ParseError

ARTIFACT_VERSION = 1


@dataclass(frozen=True)
class ClassPriorMatrix:
    """Joint class-pair counts and the row-normalized conditional matrix.

    ``probs`` is ``None`` until :func:`build_prior_matrix` fills it in;
    rows with ``row_totals == 0`` normalize to all-zero rows.
    """

    n_classes: int
    joint_counts: np.ndarray  # (C, C) int64, symmetric
    row_totals: np.ndarray  # (C,) int64
    probs: np.ndarray | None = None


def count_class_links(
    train_edges: np.ndarray, labels: np.ndarray, n_classes: int
) -> ClassPriorMatrix:
    """Count class co-occurrences over training edges (one per direction).

    Every endpoint must carry a label in ``[0, n_classes)``; an unlabeled
    endpoint (label ``-1``) raises :class:`MissingLabelError` naming the node.
    """
    if n_classes < 1:
        raise ConfigurationError(f"need at least one class, got {n_classes}")
    edges = np.asarray(train_edges, dtype=np.int64).reshape(-1, 2)
    labels = np.asarray(labels, dtype=np.int64)

    endpoint_labels = labels[edges]
    bad = np.nonzero((endpoint_labels < 0) | (endpoint_labels >= n_classes))
    if bad[0].size:
        node = int(edges[bad[0][0], bad[1][0]])
        raise MissingLabelError(
            f"node {node} lacks a usable class label "
            f"(label={int(labels[node])}, n_classes={n_classes})"
        )

    cu, cv = endpoint_labels[:, 0], endpoint_labels[:, 1]
    flat = np.bincount(cu * n_classes + cv, minlength=n_classes * n_classes)
    flat += np.bincount(cv * n_classes + cu, minlength=n_classes * n_classes)
    counts = flat.reshape(n_classes, n_classes).astype(np.int64)
    return ClassPriorMatrix(
        n_classes=n_classes,
        joint_counts=counts,
        row_totals=counts.sum(axis=1),
    )


def build_prior_matrix(counted: ClassPriorMatrix) -> ClassPriorMatrix:
    """Row-normalize joint counts into conditional probabilities."""
    totals = counted.row_totals.astype(np.float64)
    safe = np.where(totals == 0, 1.0, totals)
    probs = counted.joint_counts / safe[:, None]
    probs[totals == 0] = 0.0
    return replace(counted, probs=probs)


def lookup_prior(
    prior: ClassPriorMatrix, labels: np.ndarray, x: int, y: int
) -> tuple[float, float]:
    """Return ``(P(c_y | c_x), P(c_x | c_y))`` for nodes ``x`` and ``y``."""
    if prior.probs is None:
        raise ConfigurationError("prior matrix has not been normalized yet")
    cx, cy = int(labels[x]), int(labels[y])
    for node, cls in ((x, cx), (y, cy)):
        if cls < 0 or cls >= prior.n_classes:
            raise MissingLabelError(
                f"node {node} lacks a usable class label (label={cls})"
            )
    return float(prior.probs[cx, cy]), float(prior.probs[cy, cx])


def lookup_prior_batch(
    prior: ClassPriorMatrix, labels: np.ndarray, pairs: np.ndarray
) -> np.ndarray:
    """Vectorized :func:`lookup_prior` over a ``(m, 2)`` pair array.

    Returns an ``(m, 2)`` float array of ``(P(c_y|c_x), P(c_x|c_y))`` rows.
    """
    if prior.probs is None:
        raise ConfigurationError("prior matrix has not been normalized yet")
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    cls = np.asarray(labels, dtype=np.int64)[pairs]
    bad = np.nonzero((cls < 0) | (cls >= prior.n_classes))
    if bad[0].size:
        node = int(pairs[bad[0][0], bad[1][0]])
        raise MissingLabelError(f"node {node} lacks a usable class label")
    fwd = prior.probs[cls[:, 0], cls[:, 1]]
    rev = prior.probs[cls[:, 1], cls[:, 0]]
    return np.column_stack([fwd, rev])


# ---------------------------------------------------------------------------
# Artifacts
# ---------------------------------------------------------------------------


def export_heatmap(
    prior: ClassPriorMatrix,
    path: str | Path,
    class_ids: tuple[str, ...] | None = None,
) -> Path:
    """Write ``probs`` as CSV plus a ``<path>.meta.json`` sidecar.

    The CSV stores probabilities with 17 significant digits so values
    round-trip exactly; the sidecar records class ids and row totals.
    """
    if prior.probs is None:
        raise ConfigurationError("prior matrix has not been normalized yet")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [",".join(format(v, ".17g") for v in row) for row in prior.probs]
    path.write_text("\n".join(rows) + "\n")
    sidecar = path.with_name(path.name + ".meta.json")
    sidecar.write_text(
        json.dumps(
            {
                "version": ARTIFACT_VERSION,
                "kind": "heatmap-meta",
                "n_classes": prior.n_classes,
                "class_ids": list(class_ids or ()),
                "row_totals": prior.row_totals.tolist(),
            },
            sort_keys=True,
        )
        + "\n"
    )
    return sidecar


def save_prior_json(
    prior: ClassPriorMatrix,
    path: str | Path,
    *,
    seed: int | None = None,
    label_source: str = "true",
) -> None:
    """Persist integer counts (probabilities are recomputed on load)."""
    payload = {
        "version": ARTIFACT_VERSION,
        "kind": "prior",
        "seed": seed,
        "label_source": label_source,
        "n_classes": prior.n_classes,
        "joint_counts": prior.joint_counts.tolist(),
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")


def load_prior_json(path: str | Path) -> ClassPriorMatrix:
    try:
        payload = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    if payload.get("kind") != "prior":
        raise ParseError(f"{path}: not a prior artifact")
    counts = np.array(payload["joint_counts"], dtype=np.int64)
    counted = ClassPriorMatrix(
        n_classes=int(payload["n_classes"]),
        joint_counts=counts,
        row_totals=counts.sum(axis=1),
    )
    return build_prior_matrix(counted)
