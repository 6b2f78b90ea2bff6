"""Graph container, file ingestion, edge splitting, negative sampling.

The in-memory representation is a compressed sparse row (CSR) adjacency over
dense integer node ids: ``csr_offsets`` (length ``n_nodes + 1``) and
``csr_targets`` (length ``2 * n_edges``).  Neighbor lists are sorted and
strictly increasing, the structure is symmetric, and there are no self-loops
or parallel edges — construction canonicalizes arbitrary edge lists into this
form, so two input files describing the same edge set (in any order, with
duplicates either way around) produce bit-identical graphs.

Node interning order is part of the reproducibility contract: original ids
are assigned dense ids in the order *feature-file rows, then label-file rows,
then edge-file endpoints (first seen)*.  Because auxiliary files are interned
first, deleting edges from the edge file never renumbers nodes that carry
features or labels, which downstream leakage checks rely on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    CapacityError,
    ConfigurationError,
    DimensionError,
    ParseError,
)
from .rand import STREAM_SPLIT, STREAM_TEST_NEG, STREAM_VALID_NEG, make_rng

ARTIFACT_VERSION = 1


# ---------------------------------------------------------------------------
# Core types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Graph:
    """Undirected graph with optional node features and class labels.

    Attributes
    ----------
    n_nodes : int
        Number of nodes (dense ids ``0 .. n_nodes - 1``).
    csr_offsets, csr_targets : np.ndarray
        CSR adjacency; ``csr_targets[csr_offsets[u]:csr_offsets[u+1]]`` is the
        sorted neighbor list of ``u``.
    features : np.ndarray
        Dense ``(n_nodes, F)`` float matrix; ``F == 0`` when no features were
        supplied.
    labels : np.ndarray | None
        ``(n_nodes,)`` int class ids, ``-1`` marking unlabeled nodes, or
        ``None`` when no label source was supplied.
    node_ids : tuple[str, ...]
        Dense id -> original id, persisted with the graph.
    class_ids : tuple[str, ...]
        Dense class id -> original label string (empty when unlabeled).
    """

    n_nodes: int
    csr_offsets: np.ndarray
    csr_targets: np.ndarray
    features: np.ndarray
    labels: np.ndarray | None
    node_ids: tuple[str, ...]
    class_ids: tuple[str, ...]

    @property
    def n_edges(self) -> int:
        """Number of undirected edges."""
        return int(self.csr_targets.size) // 2

    @property
    def n_classes(self) -> int:
        return len(self.class_ids)

    def degree(self, u: int) -> int:
        self._check_node(u)
        return int(self.csr_offsets[u + 1] - self.csr_offsets[u])

    def degrees(self) -> np.ndarray:
        """All node degrees as an int64 array."""
        return np.diff(self.csr_offsets)

    def neighbors(self, u: int) -> np.ndarray:
        """Sorted neighbor ids of ``u`` (read-only view)."""
        self._check_node(u)
        return self.csr_targets[self.csr_offsets[u] : self.csr_offsets[u + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        self._check_node(u)
        self._check_node(v)
        row = self.neighbors(u)
        i = int(np.searchsorted(row, v))
        return i < row.size and int(row[i]) == v

    def undirected_edges(self) -> np.ndarray:
        """All edges as a canonical ``(m, 2)`` array with ``u < v``, lex-sorted."""
        src = np.repeat(np.arange(self.n_nodes, dtype=np.int64), self.degrees())
        mask = src < self.csr_targets
        return np.column_stack([src[mask], self.csr_targets[mask]])

    def _check_node(self, u: int) -> None:
        if not 0 <= u < self.n_nodes:
            raise ConfigurationError(
                f"node id {u} out of range [0, {self.n_nodes})"
            )


@dataclass(frozen=True)
class EdgeSplit:
    """Train/validation/test partition of a graph's edges.

    Edge arrays are canonical ``(k, 2)`` int64 with ``u < v``.  The negative
    pools contain sampled non-edges of the *full* graph (shared across all
    positives of the corresponding split), never overlapping the edge set and
    free of duplicates.
    """

    n_nodes: int
    train_edges: np.ndarray
    valid_edges: np.ndarray
    test_edges: np.ndarray
    valid_negatives: np.ndarray
    test_negatives: np.ndarray
    seed: int

    def train_graph(self, g: Graph) -> Graph:
        """Graph restricted to training edges (features/labels carried over)."""
        offsets, targets = _csr_from_edges(self.train_edges, self.n_nodes)
        return replace(g, csr_offsets=offsets, csr_targets=targets)


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _canonical_undirected(edges: np.ndarray) -> np.ndarray:
    """Dedup + drop self-loops + orient u < v + lex-sort an edge array."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    edges = edges[edges[:, 0] != edges[:, 1]]
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    if lo.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    return np.unique(np.column_stack([lo, hi]), axis=0)


def _csr_from_edges(edges: np.ndarray, n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    und = _canonical_undirected(edges)
    if und.size and (und.min() < 0 or und.max() >= n_nodes):
        raise DimensionError(
            f"edge endpoint {int(und.max())} out of range for {n_nodes} nodes"
        )
    src = np.concatenate([und[:, 0], und[:, 1]])
    dst = np.concatenate([und[:, 1], und[:, 0]])
    order = np.lexsort((dst, src))
    targets = dst[order]
    counts = np.bincount(src, minlength=n_nodes)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return _freeze(offsets), _freeze(targets.astype(np.int64))


def build_graph(
    n_nodes: int,
    edges: np.ndarray,
    features: np.ndarray | None = None,
    labels: np.ndarray | None = None,
    node_ids: tuple[str, ...] | None = None,
    class_ids: tuple[str, ...] | None = None,
) -> Graph:
    """Build a canonical :class:`Graph` from raw arrays.

    ``edges`` may be in any order, contain duplicates (either orientation) and
    self-loops; the result is canonical.  ``labels`` uses ``-1`` for unlabeled
    nodes.
    """
    if n_nodes < 1:
        raise ConfigurationError(f"graph needs at least one node, got {n_nodes}")
    offsets, targets = _csr_from_edges(np.asarray(edges), n_nodes)

    if features is None:
        feats = np.zeros((n_nodes, 0), dtype=np.float64)
    else:
        feats = np.asarray(features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != n_nodes:
            raise DimensionError(
                f"feature matrix shape {feats.shape} does not match {n_nodes} nodes"
            )

    labs: np.ndarray | None = None
    if labels is not None:
        labs = np.asarray(labels, dtype=np.int64)
        if labs.shape != (n_nodes,):
            raise DimensionError(
                f"label vector shape {labs.shape} does not match {n_nodes} nodes"
            )
        if class_ids is None:
            top = int(labs.max()) if labs.size else -1
            class_ids = tuple(str(c) for c in range(top + 1))
        labs = _freeze(labs.copy())

    if node_ids is None:
        node_ids = tuple(str(i) for i in range(n_nodes))
    if len(node_ids) != n_nodes:
        raise DimensionError("node_ids length does not match n_nodes")

    return Graph(
        n_nodes=n_nodes,
        csr_offsets=offsets,
        csr_targets=targets,
        features=_freeze(feats.copy()),
        labels=labs,
        node_ids=tuple(node_ids),
        class_ids=tuple(class_ids or ()),
    )


# ---------------------------------------------------------------------------
# File ingestion
# ---------------------------------------------------------------------------


def _strip_comment(line: str) -> str:
    hash_pos = line.find("#")
    if hash_pos >= 0:
        line = line[:hash_pos]
    return line.strip()


def load_graph(
    edge_path: str | Path,
    feature_path: str | Path | None = None,
    label_path: str | Path | None = None,
) -> Graph:
    """Load a graph from an edge list plus optional feature/label CSVs.

    Edge file: one ``u v`` pair per line, whitespace separated; ``#`` starts a
    comment; blank lines are ignored.  Feature CSV: ``node_id,f1,f2,...`` with
    a fixed number of real-valued columns.  Label CSV: ``node_id,label``.
    Labels are re-mapped to contiguous dense ids in first-seen order; nodes
    missing from the label file get ``-1``; nodes missing from the feature
    file get zero rows.
    """
    index: dict[str, int] = {}

    def intern(token: str) -> int:
        if token not in index:
            index[token] = len(index)
        return index[token]

    # Feature and label files are interned before edges; see module docstring.
    feature_rows: dict[int, list[float]] = {}
    n_feature_cols: int | None = None
    if feature_path is not None:
        for lineno, raw in enumerate(_read_lines(feature_path), start=1):
            line = raw.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) < 2:
                raise ParseError(
                    f"{feature_path}:{lineno}: expected node id plus at least "
                    f"one feature column, got {len(cells)} cell(s)"
                )
            if n_feature_cols is None:
                n_feature_cols = len(cells) - 1
            elif len(cells) - 1 != n_feature_cols:
                raise DimensionError(
                    f"{feature_path}:{lineno}: row has {len(cells) - 1} feature "
                    f"columns, expected {n_feature_cols}"
                )
            node = intern(cells[0].strip())
            if node in feature_rows:
                raise ParseError(
                    f"{feature_path}:{lineno}: duplicate feature row for node "
                    f"'{cells[0].strip()}'"
                )
            try:
                feature_rows[node] = [float(c) for c in cells[1:]]
            except ValueError as exc:
                raise ParseError(
                    f"{feature_path}:{lineno}: non-numeric feature value ({exc})"
                ) from exc

    label_rows: dict[int, int] = {}
    class_index: dict[str, int] = {}
    if label_path is not None:
        for lineno, raw in enumerate(_read_lines(label_path), start=1):
            line = raw.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != 2:
                raise ParseError(
                    f"{label_path}:{lineno}: expected 'node_id,label', got "
                    f"{len(cells)} cell(s)"
                )
            node = intern(cells[0].strip())
            if node in label_rows:
                raise ParseError(
                    f"{label_path}:{lineno}: duplicate label row for node "
                    f"'{cells[0].strip()}'"
                )
            cls = cells[1].strip()
            if cls not in class_index:
                class_index[cls] = len(class_index)
            label_rows[node] = class_index[cls]

    edges: list[tuple[int, int]] = []
    for lineno, raw in enumerate(_read_lines(edge_path), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise ParseError(
                f"{edge_path}:{lineno}: expected two node ids per line, got "
                f"{len(tokens)} token(s): {line!r}"
            )
        edges.append((intern(tokens[0]), intern(tokens[1])))

    n_nodes = len(index)
    if n_nodes == 0:
        raise ParseError(f"{edge_path}: no nodes found in any input file")

    features = None
    if feature_path is not None:
        features = np.zeros((n_nodes, n_feature_cols or 0), dtype=np.float64)
        for node, row in feature_rows.items():
            features[node] = row

    labels = None
    class_ids: tuple[str, ...] = ()
    if label_path is not None:
        labels = np.full(n_nodes, -1, dtype=np.int64)
        for node, cls in label_rows.items():
            labels[node] = cls
        class_ids = tuple(class_index)

    node_ids = tuple(index)
    return build_graph(
        n_nodes,
        np.array(edges, dtype=np.int64).reshape(-1, 2),
        features=features,
        labels=labels,
        node_ids=node_ids,
        class_ids=class_ids,
    )


def _read_lines(path: str | Path) -> list[str]:
    try:
        return Path(path).read_text().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# JSON artifacts
# ---------------------------------------------------------------------------


def save_graph_json(g: Graph, path: str | Path) -> None:
    """Serialize a graph (losslessly, floats round-trip exactly)."""
    payload = {
        "version": ARTIFACT_VERSION,
        "kind": "graph",
        "seed": None,
        "n_nodes": g.n_nodes,
        "node_ids": list(g.node_ids),
        "edges": g.undirected_edges().tolist(),
        "features": g.features.tolist() if g.features.shape[1] else None,
        "labels": g.labels.tolist() if g.labels is not None else None,
        "class_ids": list(g.class_ids) if g.labels is not None else None,
    }
    _write_json(payload, path)


def load_graph_json(path: str | Path) -> Graph:
    payload = _read_json(path, expected_kind="graph")
    n = int(payload["n_nodes"])
    features = payload.get("features")
    labels = payload.get("labels")
    return build_graph(
        n,
        np.array(payload["edges"], dtype=np.int64).reshape(-1, 2),
        features=np.array(features, dtype=np.float64) if features is not None else None,
        labels=np.array(labels, dtype=np.int64) if labels is not None else None,
        node_ids=tuple(payload["node_ids"]),
        class_ids=tuple(payload.get("class_ids") or ()),
    )


def _write_json(payload: dict, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")


def _read_json(path: str | Path, expected_kind: str) -> dict:
    try:
        payload = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    if payload.get("kind") != expected_kind:
        raise ParseError(
            f"{path}: expected artifact kind '{expected_kind}', "
            f"found '{payload.get('kind')}'"
        )
    return payload


# ---------------------------------------------------------------------------
# Splitting and negative sampling
# ---------------------------------------------------------------------------


def split_edges(
    g: Graph,
    ratios: tuple[float, float, float],
    seed: int,
    *,
    negatives: int = 500,
) -> EdgeSplit:
    """Randomly partition edges into train/valid/test by ``ratios``.

    Sizes follow cumulative floor boundaries: with ``m`` edges and ratios
    ``(r1, r2, r3)``, train gets ``floor(m*r1)`` edges, train+valid
    ``floor(m*(r1+r2))``, and test the remainder, so the three buckets always
    exhaust the edge set.  A shared pool of up to ``negatives`` non-edges is
    sampled for each of valid and test (clamped to the number of available
    non-edges).  Deterministic given ``seed``.
    """
    r = tuple(float(x) for x in ratios)
    if len(r) != 3 or any(x <= 0 for x in r):
        raise ConfigurationError(f"ratios must be three positive reals, got {ratios}")
    if abs(sum(r) - 1.0) > 1e-9:
        raise ConfigurationError(f"ratios must sum to 1, got {sum(r)!r}")
    edges = g.undirected_edges()
    m = edges.shape[0]
    if m < 10:
        raise ConfigurationError(f"need at least 10 edges to split, graph has {m}")

    perm = make_rng(seed, STREAM_SPLIT).permutation(m)
    # +1e-9 absorbs float error in the cumulative sums (e.g. 0.7 + 0.15).
    b1 = int(np.floor(m * r[0] + 1e-9))
    b2 = int(np.floor(m * (r[0] + r[1]) + 1e-9))
    train = edges[np.sort(perm[:b1])]
    valid = edges[np.sort(perm[b1:b2])]
    test = edges[np.sort(perm[b2:])]

    capacity = g.n_nodes * (g.n_nodes - 1) // 2 - m
    pool = min(int(negatives), capacity)
    valid_neg = sample_negatives(g, pool, (seed, STREAM_VALID_NEG))
    test_neg = sample_negatives(g, pool, (seed, STREAM_TEST_NEG))

    return EdgeSplit(
        n_nodes=g.n_nodes,
        train_edges=_freeze(train),
        valid_edges=_freeze(valid),
        test_edges=_freeze(test),
        valid_negatives=_freeze(valid_neg),
        test_negatives=_freeze(test_neg),
        seed=int(seed),
    )


def sample_negatives(
    g: Graph,
    count: int,
    seed: int | tuple[int, ...],
    exclude: np.ndarray | None = None,
) -> np.ndarray:
    """Sample ``count`` distinct non-edges uniformly, without replacement.

    Pairs are canonical ``(u, v)`` with ``u < v``.  ``exclude`` (an optional
    ``(k, 2)`` array) removes further pairs from the population.  Raises
    :class:`CapacityError` when the population is smaller than ``count``.
    """
    if count < 0:
        raise ConfigurationError(f"negative sample count must be >= 0, got {count}")
    n = g.n_nodes
    edge_keys = _pair_keys(g.undirected_edges(), n)
    if exclude is not None and len(exclude):
        excl = _canonical_undirected(np.asarray(exclude))
        edge_keys = np.union1d(edge_keys, _pair_keys(excl, n))
    capacity = n * (n - 1) // 2 - edge_keys.size
    if count > capacity:
        raise CapacityError(
            f"requested {count} negatives but only {capacity} non-edges exist"
        )
    if count == 0:
        return np.empty((0, 2), dtype=np.int64)

    rng = make_rng(seed) if isinstance(seed, (int, np.integer)) else make_rng(*seed)
    chosen: list[int] = []
    seen: set[int] = set()
    while len(chosen) < count:
        batch = max(1024, 2 * (count - len(chosen)))
        u = rng.integers(0, n, size=batch)
        v = rng.integers(0, n, size=batch)
        lo = np.minimum(u, v)
        hi = np.maximum(u, v)
        keys = lo * n + hi
        ok = (lo != hi) & ~_in_sorted(keys, edge_keys)
        for key in keys[ok]:
            k = int(key)
            if k not in seen:
                seen.add(k)
                chosen.append(k)
                if len(chosen) == count:
                    break
    keys_arr = np.array(chosen, dtype=np.int64)
    return np.column_stack([keys_arr // n, keys_arr % n])


def _pair_keys(pairs: np.ndarray, n: int) -> np.ndarray:
    if len(pairs) == 0:
        return np.empty(0, dtype=np.int64)
    return np.sort(pairs[:, 0].astype(np.int64) * n + pairs[:, 1])


def _in_sorted(values: np.ndarray, sorted_keys: np.ndarray) -> np.ndarray:
    if sorted_keys.size == 0:
        return np.zeros(values.shape, dtype=bool)
    pos = np.searchsorted(sorted_keys, values)
    pos = np.minimum(pos, sorted_keys.size - 1)
    return sorted_keys[pos] == values


def common_neighbors(g: Graph, x: int, y: int) -> np.ndarray:
    """Sorted array of nodes adjacent to both ``x`` and ``y``."""
    return np.intersect1d(g.neighbors(x), g.neighbors(y), assume_unique=True)


# ---------------------------------------------------------------------------
# Split artifacts
# ---------------------------------------------------------------------------


def save_split_json(split: EdgeSplit, path: str | Path) -> None:
    payload = {
        "version": ARTIFACT_VERSION,
        "kind": "split",
        "seed": split.seed,
        "n_nodes": split.n_nodes,
        "train_edges": split.train_edges.tolist(),
        "valid_edges": split.valid_edges.tolist(),
        "test_edges": split.test_edges.tolist(),
        "valid_negatives": split.valid_negatives.tolist(),
        "test_negatives": split.test_negatives.tolist(),
    }
    _write_json(payload, path)


def load_split_json(path: str | Path) -> EdgeSplit:
    payload = _read_json(path, expected_kind="split")

    def arr(name: str) -> np.ndarray:
        return _freeze(np.array(payload[name], dtype=np.int64).reshape(-1, 2))

    return EdgeSplit(
        n_nodes=int(payload["n_nodes"]),
        train_edges=arr("train_edges"),
        valid_edges=arr("valid_edges"),
        test_edges=arr("test_edges"),
        valid_negatives=arr("valid_negatives"),
        test_negatives=arr("test_negatives"),
        seed=int(payload["seed"]),
    )
