"""Pseudo-label generation: feature aggregation, k-means, elbow rule, Louvain.

When true class labels are unavailable, downstream priors can be computed
over *pseudo-labels* instead.  Three generators are provided:

* ``kmeans`` over one-hop aggregated features ``H1 = (A + I) X``, with the
  number of clusters either fixed or chosen by the elbow rule (largest
  perpendicular distance to the chord of the min-max-normalized SSD curve);
* ``louvain`` greedy modularity maximization over the training adjacency;
* ``mono`` a single-label fallback that makes every prior lookup equal 1.

All routines are deterministic given their seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, DimensionError, ParseError
from .graph import Graph
from .heuristics import adjacency_matrix
from .rand import STREAM_CLUSTER, make_rng

ARTIFACT_VERSION = 1


@dataclass(frozen=True)
class PseudoLabeling:
    """Cluster assignment used as a label source.

    ``labels`` are contiguous ids ``0 .. k-1`` (renumbered by first
    occurrence); ``ssd_curve`` is populated by elbow selection.
    """

    labels: np.ndarray
    k: int
    method: str
    ssd_curve: tuple[tuple[int, float], ...] | None
    seed: int


# ---------------------------------------------------------------------------
# Feature aggregation
# ---------------------------------------------------------------------------


def aggregate_features(g: Graph, features: np.ndarray | None = None) -> np.ndarray:
    """One-hop sum aggregation ``H1[v] = X[v] + Σ_{u ∈ N(v)} X[u]``.

    Computed as a single sparse-dense product with ``A + I``.
    """
    x = g.features if features is None else np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != g.n_nodes:
        raise DimensionError(
            f"feature matrix shape {x.shape} does not match {g.n_nodes} nodes"
        )
    if x.shape[1] == 0:
        raise ConfigurationError("cannot aggregate an empty feature matrix")
    hat = adjacency_matrix(g) + sp.identity(g.n_nodes, format="csr")
    return hat @ x


# ---------------------------------------------------------------------------
# k-means (Lloyd's algorithm with k-means++ seeding)
# ---------------------------------------------------------------------------


def _pairwise_sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = (
        (points**2).sum(axis=1)[:, None]
        - 2.0 * points @ centroids.T
        + (centroids**2).sum(axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _kmeanspp_init(
    points: np.ndarray, k: int, rng: np.random.Generator
) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = points[first]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))  # all points coincide with a centroid
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids[j] = points[idx]
        d2 = np.minimum(d2, ((points - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _lloyd(
    points: np.ndarray, centroids: np.ndarray, max_iters: int
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Iterate assignment/update steps; returns (labels, centroids, SSD history).

    The history records the objective after each full iteration and is
    nonincreasing; assignment ties go to the lowest centroid index; an empty
    cluster is re-seeded from the point farthest from its assigned centroid.
    """
    n, k = points.shape[0], centroids.shape[0]
    centroids = centroids.copy()
    prev_assign: np.ndarray | None = None
    history: list[float] = []
    for _ in range(max_iters):
        d2 = _pairwise_sq_dists(points, centroids)
        assign = d2.argmin(axis=1)
        cost = d2[np.arange(n), assign]
        for j in range(k):
            if not np.any(assign == j):
                far = int(np.argmax(cost))
                centroids[j] = points[far]
                assign[far] = j
                cost[far] = 0.0
        for j in range(k):
            members = points[assign == j]
            if members.size:
                centroids[j] = members.mean(axis=0)
        history.append(
            float(((points - centroids[assign]) ** 2).sum())
        )
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        prev_assign = assign
    return assign.astype(np.int64), centroids, history


def _prepare_points(features: np.ndarray, normalize_rows: bool) -> np.ndarray:
    pts = np.asarray(features, dtype=np.float64)
    if pts.ndim != 2:
        raise DimensionError(f"expected a 2-D feature matrix, got shape {pts.shape}")
    if normalize_rows:
        norms = np.linalg.norm(pts, axis=1, keepdims=True)
        pts = np.divide(pts, norms, out=np.zeros_like(pts), where=norms > 0)
    return pts


def _kmeans_full(
    features: np.ndarray,
    k: int,
    rng: np.random.Generator,
    max_iters: int = 100,
    normalize_rows: bool = False,
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    points = _prepare_points(features, normalize_rows)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ConfigurationError(f"k must lie in [1, {n}], got {k}")
    return _lloyd(points, _kmeanspp_init(points, k, rng), max_iters)


def kmeans(
    features: np.ndarray,
    k: int,
    seed: int,
    *,
    max_iters: int = 100,
    normalize_rows: bool = False,
) -> PseudoLabeling:
    """Cluster rows of ``features`` into ``k`` groups (squared Euclidean)."""
    labels, _, _ = _kmeans_full(
        features, k, make_rng(seed), max_iters, normalize_rows
    )
    return PseudoLabeling(
        labels=_renumber(labels),
        k=k,
        method="kmeans",
        ssd_curve=None,
        seed=int(seed),
    )


# ---------------------------------------------------------------------------
# Elbow selection
# ---------------------------------------------------------------------------


def knee_point(curve: list[tuple[int, float]]) -> int:
    """Pick the curve point farthest (perpendicular) from the chord.

    Both axes are min-max normalized first.  Ties — including perfectly flat
    or perfectly linear curves — resolve to the smallest ``k``.
    """
    ks = np.array([float(k) for k, _ in curve])
    ssds = np.array([float(s) for _, s in curve])
    if ks.size == 1 or ssds.max() == ssds.min():
        return int(ks[0])
    kn = (ks - ks.min()) / (ks.max() - ks.min())
    sn = (ssds - ssds.min()) / (ssds.max() - ssds.min())
    slope = sn[-1] - sn[0]
    dist = np.abs(slope * kn - sn + sn[0]) / np.sqrt(slope**2 + 1.0)
    return int(ks[int(np.argmax(dist))])


def _elbow_runs(
    features: np.ndarray,
    k_candidates: list[int],
    seed: int,
    max_iters: int,
    normalize_rows: bool,
) -> tuple[list[tuple[int, float]], dict[int, np.ndarray]]:
    """Run k-means per candidate, warm-starting from the previous solution.

    Each k keeps the better of a fresh k-means++ run and a warm start that
    extends the previous centroids with greedily chosen farthest points, so
    the SSD curve is nonincreasing in k.
    """
    points = _prepare_points(features, normalize_rows)
    n = points.shape[0]
    ks = list(k_candidates)
    if len(ks) < 3:
        raise ConfigurationError(
            f"elbow selection needs at least 3 candidates, got {len(ks)}"
        )
    if ks != sorted(set(ks)):
        raise ConfigurationError(
            f"candidates must be strictly increasing, got {k_candidates}"
        )
    if ks[0] < 1 or ks[-1] > n:
        raise ConfigurationError(f"candidates must lie in [1, {n}], got {k_candidates}")

    curve: list[tuple[int, float]] = []
    labels_by_k: dict[int, np.ndarray] = {}
    prev_centroids: np.ndarray | None = None
    for k in ks:
        rng = make_rng(seed, STREAM_CLUSTER, k)
        labels, cents, hist = _lloyd(
            points, _kmeanspp_init(points, k, rng), max_iters
        )
        best = (hist[-1], labels, cents)
        if prev_centroids is not None:
            warm = _extend_centroids(points, prev_centroids, k)
            w_labels, w_cents, w_hist = _lloyd(points, warm, max_iters)
            if w_hist[-1] < best[0]:
                best = (w_hist[-1], w_labels, w_cents)
        curve.append((k, best[0]))
        labels_by_k[k] = best[1]
        prev_centroids = best[2]
    return curve, labels_by_k


def _extend_centroids(
    points: np.ndarray, centroids: np.ndarray, k: int
) -> np.ndarray:
    """Grow a centroid set to size ``k`` with farthest-point additions."""
    cents = list(centroids)
    d2 = _pairwise_sq_dists(points, centroids).min(axis=1)
    while len(cents) < k:
        far = int(np.argmax(d2))
        cents.append(points[far])
        d2 = np.minimum(d2, ((points - points[far]) ** 2).sum(axis=1))
    return np.array(cents[:k])


def elbow_select(
    features: np.ndarray,
    k_candidates: list[int],
    seed: int,
    *,
    max_iters: int = 100,
    normalize_rows: bool = False,
) -> tuple[int, list[tuple[int, float]]]:
    """Choose k by the elbow rule; returns ``(best_k, ssd_curve)``."""
    curve, _ = _elbow_runs(features, k_candidates, seed, max_iters, normalize_rows)
    return knee_point(curve), curve


def elbow_kmeans(
    features: np.ndarray,
    k_candidates: list[int],
    seed: int,
    *,
    max_iters: int = 100,
    normalize_rows: bool = False,
) -> PseudoLabeling:
    """Elbow-select k and return the winning clustering with its curve."""
    curve, labels_by_k = _elbow_runs(
        features, k_candidates, seed, max_iters, normalize_rows
    )
    best_k = knee_point(curve)
    return PseudoLabeling(
        labels=_renumber(labels_by_k[best_k]),
        k=best_k,
        method="kmeans",
        ssd_curve=tuple((int(k), float(s)) for k, s in curve),
        seed=int(seed),
    )


# ---------------------------------------------------------------------------
# Louvain community detection
# ---------------------------------------------------------------------------


def louvain(g: Graph, seed: int) -> PseudoLabeling:
    """Greedy modularity maximization with seeded node visitation.

    Local moves sweep nodes in a seeded shuffled order until no move improves
    modularity, then communities are aggregated into supernodes; phases repeat
    until the modularity gain drops below 1e-7.
    """
    if g.n_edges == 0:
        raise ConfigurationError("modularity is undefined on an edgeless graph")
    rng = make_rng(seed)
    adj: list[dict[int, float]] = [dict() for _ in range(g.n_nodes)]
    for u in range(g.n_nodes):
        for v in g.neighbors(u).tolist():
            adj[u][v] = 1.0

    membership = np.arange(g.n_nodes)
    q_prev = _modularity(adj, list(range(len(adj))))
    while True:
        comm = _local_move(adj, rng)
        q_new = _modularity(adj, comm)
        comm = _renumber(np.asarray(comm))
        membership = comm[membership]
        if q_new - q_prev < 1e-7 or len(set(comm.tolist())) == len(adj):
            break
        adj = _aggregate(adj, comm)
        q_prev = q_new

    labels = _renumber(membership)
    return PseudoLabeling(
        labels=labels,
        k=int(labels.max()) + 1,
        method="louvain",
        ssd_curve=None,
        seed=int(seed),
    )


def _degrees(adj: list[dict[int, float]]) -> np.ndarray:
    return np.array(
        [
            sum(w for u, w in row.items() if u != i) + 2.0 * row.get(i, 0.0)
            for i, row in enumerate(adj)
        ]
    )


def _local_move(adj: list[dict[int, float]], rng: np.random.Generator) -> list[int]:
    n = len(adj)
    k = _degrees(adj)
    m2 = k.sum()
    comm = list(range(n))
    sigma_tot = k.copy()
    order = rng.permutation(n).tolist()
    improved = True
    while improved:
        improved = False
        for v in order:
            cv = comm[v]
            links: dict[int, float] = {}
            for u, w in adj[v].items():
                if u != v:
                    cu = comm[u]
                    links[cu] = links.get(cu, 0.0) + w
            sigma_tot[cv] -= k[v]
            best_c = cv
            best_gain = links.get(cv, 0.0) - sigma_tot[cv] * k[v] / m2
            for c in sorted(links):
                if c == cv:
                    continue
                gain = links[c] - sigma_tot[c] * k[v] / m2
                if gain > best_gain + 1e-12:
                    best_c, best_gain = c, gain
            comm[v] = best_c
            sigma_tot[best_c] += k[v]
            if best_c != cv:
                improved = True
    return comm


def _modularity(adj: list[dict[int, float]], comm: list[int]) -> float:
    k = _degrees(adj)
    m2 = k.sum()
    n_comm = max(comm) + 1
    sigma_tot = np.zeros(n_comm)
    for i, c in enumerate(comm):
        sigma_tot[c] += k[i]
    sigma_in = np.zeros(n_comm)
    for i, row in enumerate(adj):
        for j, w in row.items():
            if comm[i] == comm[j]:
                sigma_in[comm[i]] += 2.0 * w if i == j else w
    return float(np.sum(sigma_in / m2 - (sigma_tot / m2) ** 2))


def _aggregate(adj: list[dict[int, float]], comm: np.ndarray) -> list[dict[int, float]]:
    n_comm = int(comm.max()) + 1
    new_adj: list[dict[int, float]] = [dict() for _ in range(n_comm)]
    for i, row in enumerate(adj):
        ci = int(comm[i])
        for j, w in row.items():
            cj = int(comm[j])
            if i == j:
                new_adj[ci][ci] = new_adj[ci].get(ci, 0.0) + w
            elif i < j:
                if ci == cj:
                    new_adj[ci][ci] = new_adj[ci].get(ci, 0.0) + w
                else:
                    new_adj[ci][cj] = new_adj[ci].get(cj, 0.0) + w
                    new_adj[cj][ci] = new_adj[cj].get(ci, 0.0) + w
    return new_adj


def _renumber(labels: np.ndarray) -> np.ndarray:
    """Relabel to contiguous 0..k-1 in order of first occurrence."""
    labels = np.asarray(labels, dtype=np.int64)
    mapping: dict[int, int] = {}
    out = np.empty_like(labels)
    for i, lab in enumerate(labels.tolist()):
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out


# ---------------------------------------------------------------------------
# Mono-label fallback
# ---------------------------------------------------------------------------


def mono_label(n_nodes: int) -> PseudoLabeling:
    """Assign every node the single class 0 (priors degenerate to 1)."""
    if n_nodes < 1:
        raise ConfigurationError(f"need at least one node, got {n_nodes}")
    return PseudoLabeling(
        labels=np.zeros(n_nodes, dtype=np.int64),
        k=1,
        method="mono",
        ssd_curve=None,
        seed=0,
    )


# ---------------------------------------------------------------------------
# Artifacts
# ---------------------------------------------------------------------------


def save_labels_csv(
    labeling: PseudoLabeling, node_ids: tuple[str, ...], path: str | Path
) -> None:
    """Write ``node_id,label`` rows in dense-id order."""
    if len(node_ids) != labeling.labels.size:
        raise DimensionError("node_ids length does not match label vector")
    lines = [
        f"{node_id},{int(lab)}"
        for node_id, lab in zip(node_ids, labeling.labels.tolist())
    ]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n")


def save_ssd_curve_csv(
    curve: tuple[tuple[int, float], ...] | list[tuple[int, float]],
    path: str | Path,
) -> None:
    """Write ``k,ssd`` rows (17 significant digits, exact round-trip)."""
    lines = [f"{int(k)},{format(float(s), '.17g')}" for k, s in curve]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n")


def save_labeling_json(labeling: PseudoLabeling, path: str | Path) -> None:
    payload = {
        "version": ARTIFACT_VERSION,
        "kind": "labeling",
        "seed": labeling.seed,
        "method": labeling.method,
        "k": labeling.k,
        "labels": labeling.labels.tolist(),
        "ssd_curve": [[int(k), float(s)] for k, s in labeling.ssd_curve]
        if labeling.ssd_curve is not None
        else None,
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")


def load_labeling_json(path: str | Path) -> PseudoLabeling:
    try:
        payload = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    if payload.get("kind") != "labeling":
        raise ParseError(f"{path}: not a labeling artifact")
    curve = payload.get("ssd_curve")
    return PseudoLabeling(
        labels=np.array(payload["labels"], dtype=np.int64),
        k=int(payload["k"]),
        method=str(payload["method"]),
        ssd_curve=tuple((int(k), float(s)) for k, s in curve)
        if curve is not None
        else None,
        seed=int(payload["seed"]),
    )
