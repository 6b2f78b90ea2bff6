"""Feature aggregation, k-means, elbow selection, Louvain, mono labels."""

from __future__ import annotations

import numpy as np
import pytest

from classlink.clustering import (
    _kmeans_full,
    aggregate_features,
    elbow_kmeans,
    elbow_select,
    kmeans,
    knee_point,
    load_labeling_json,
    louvain,
    mono_label,
    save_labeling_json,
    save_labels_csv,
    save_ssd_curve_csv,
)
from classlink.errors import ConfigurationError, DimensionError
from classlink.graph import build_graph, split_edges
from classlink.rand import make_rng

from conftest import random_edges
from test_graph import brute_adjacency


def make_blobs(rng, n_per_blob=100, n_blobs=3, spacing=10.0, sigma=0.1, dim=2):
    """Well-separated Gaussian blobs along the first axis."""
    centers = np.zeros((n_blobs, dim))
    centers[:, 0] = spacing * np.arange(n_blobs)
    points = np.concatenate(
        [c + sigma * rng.standard_normal((n_per_blob, dim)) for c in centers]
    )
    truth = np.repeat(np.arange(n_blobs), n_per_blob)
    return points, truth


def co_membership(labels):
    labels = np.asarray(labels)
    return labels[:, None] == labels[None, :]


class TestAggregateFeatures:
    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(1001)
        for _ in range(10):
            n = int(rng.integers(3, 30))
            edges = random_edges(rng, n, 0.3)
            feats = rng.standard_normal((n, 5))
            g = build_graph(n, edges, features=feats)
            adj = brute_adjacency(edges, n)
            dense = np.eye(n)
            for u in range(n):
                for v in adj[u]:
                    dense[u, v] = 1.0
            np.testing.assert_allclose(
                aggregate_features(g), dense @ feats, atol=1e-12
            )

    def test_explicit_matrix_overrides_graph_features(self, path3):
        x = np.array([[1.0], [2.0], [4.0]])
        # H1 = (A+I)X: node0: 1+2, node1: 2+1+4, node2: 4+2
        np.testing.assert_allclose(
            aggregate_features(path3, x), [[3.0], [7.0], [6.0]]
        )

    def test_empty_features_rejected(self, path3):
        with pytest.raises(ConfigurationError):
            aggregate_features(path3)

    def test_shape_mismatch_rejected(self, path3):
        with pytest.raises(DimensionError):
            aggregate_features(path3, np.ones((5, 2)))


class TestKmeans:
    def test_k1_ssd_is_total_scatter(self):
        rng = np.random.default_rng(1002)
        pts = rng.standard_normal((40, 3))
        _, _, hist = _kmeans_full(pts, 1, make_rng(0))
        expect = float(((pts - pts.mean(axis=0)) ** 2).sum())
        assert hist[-1] == pytest.approx(expect, rel=1e-12)

    def test_k_equals_n_gives_zero_ssd(self):
        rng = np.random.default_rng(1003)
        pts = rng.standard_normal((12, 2))
        labels, _, hist = _kmeans_full(pts, 12, make_rng(1))
        assert hist[-1] == pytest.approx(0.0, abs=1e-20)
        assert len(set(labels.tolist())) == 12

    def test_ssd_nonincreasing_per_iteration(self):
        rng = np.random.default_rng(1004)
        for trial in range(10):
            pts = rng.standard_normal((60, 4)) * rng.uniform(0.5, 3.0)
            _, _, hist = _kmeans_full(pts, int(rng.integers(2, 8)), make_rng(trial))
            diffs = np.diff(hist)
            assert np.all(diffs <= 1e-9), hist

    def test_separated_blobs_recovered(self):
        rng = np.random.default_rng(1005)
        pts, truth = make_blobs(rng)
        labeling = kmeans(pts, 3, seed=7)
        np.testing.assert_array_equal(
            co_membership(labeling.labels), co_membership(truth)
        )
        assert labeling.k == 3
        assert labeling.method == "kmeans"

    def test_deterministic(self):
        rng = np.random.default_rng(1006)
        pts = rng.standard_normal((50, 3))
        a = kmeans(pts, 4, seed=9)
        b = kmeans(pts, 4, seed=9)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_labels_contiguous_first_occurrence(self):
        rng = np.random.default_rng(1007)
        pts, _ = make_blobs(rng)
        labeling = kmeans(pts, 3, seed=3)
        assert labeling.labels[0] == 0
        assert sorted(set(labeling.labels.tolist())) == [0, 1, 2]

    def test_k_out_of_range(self):
        pts = np.zeros((5, 2))
        with pytest.raises(ConfigurationError):
            kmeans(pts, 0, seed=0)
        with pytest.raises(ConfigurationError):
            kmeans(pts, 6, seed=0)

    def test_normalize_rows_changes_geometry(self):
        # two directions, very different magnitudes
        pts = np.array([[10.0, 0.0], [0.1, 0.0], [0.0, 10.0], [0.0, 0.1]])
        raw = kmeans(pts, 2, seed=0)
        unit = kmeans(pts, 2, seed=0, normalize_rows=True)
        # normalized: clusters by direction -> {0,1} together
        assert unit.labels[0] == unit.labels[1]
        assert unit.labels[2] == unit.labels[3]
        # raw: magnitude dominates -> the two small points cluster together
        assert raw.labels[1] == raw.labels[3]


class TestElbow:
    def test_knee_rule_canonical(self):
        assert knee_point([(1, 100.0), (2, 10.0), (3, 5.0), (4, 4.0)]) == 2

    def test_knee_rule_linear_curve_picks_smallest(self):
        assert knee_point([(1, 100.0), (2, 75.0), (3, 50.0), (4, 25.0)]) == 1

    def test_knee_rule_flat_curve_picks_smallest(self):
        assert knee_point([(2, 5.0), (4, 5.0), (8, 5.0)]) == 2

    def test_three_blobs_yield_three(self):
        rng = np.random.default_rng(1008)
        pts, _ = make_blobs(rng)
        best_k, curve = elbow_select(pts, [1, 2, 3, 5, 8, 10], seed=0)
        assert best_k == 3
        ks = [k for k, _ in curve]
        assert ks == [1, 2, 3, 5, 8, 10]

    def test_curve_nonincreasing(self):
        rng = np.random.default_rng(1009)
        for trial in range(5):
            pts = rng.standard_normal((80, 3))
            _, curve = elbow_select(pts, [1, 2, 3, 5, 8, 10], seed=trial)
            ssds = [s for _, s in curve]
            assert all(a >= b - 1e-9 for a, b in zip(ssds, ssds[1:])), curve

    def test_elbow_kmeans_returns_curve_and_labels(self):
        rng = np.random.default_rng(1010)
        pts, truth = make_blobs(rng)
        labeling = elbow_kmeans(pts, [1, 2, 3, 5, 8, 10], seed=0)
        assert labeling.k == 3
        assert labeling.ssd_curve is not None and len(labeling.ssd_curve) == 6
        np.testing.assert_array_equal(
            co_membership(labeling.labels), co_membership(truth)
        )

    def test_candidate_validation(self):
        pts = np.zeros((10, 2))
        with pytest.raises(ConfigurationError, match="at least 3"):
            elbow_select(pts, [1, 2], seed=0)
        with pytest.raises(ConfigurationError, match="increasing"):
            elbow_select(pts, [3, 2, 1], seed=0)
        with pytest.raises(ConfigurationError, match="increasing"):
            elbow_select(pts, [1, 2, 2, 3], seed=0)
        with pytest.raises(ConfigurationError):
            elbow_select(pts, [1, 2, 11], seed=0)


def oracle_modularity(edges, labels, n):
    """Q = (1/2m) Σ_ij (A_ij - k_i k_j / 2m) δ(c_i, c_j) on a simple graph."""
    adj = brute_adjacency(edges, n)
    deg = np.array([len(a) for a in adj], dtype=float)
    m2 = deg.sum()
    q = 0.0
    for i in range(n):
        for j in range(n):
            a_ij = 1.0 if j in adj[i] else 0.0
            if labels[i] == labels[j]:
                q += a_ij - deg[i] * deg[j] / m2
    return q / m2


class TestLouvain:
    def two_cliques(self):
        """Two 5-cliques joined by a single bridge edge."""
        edges = []
        for base in (0, 5):
            for i in range(5):
                for j in range(i + 1, 5):
                    edges.append((base + i, base + j))
        edges.append((0, 5))
        return build_graph(10, np.array(edges))

    def test_two_cliques_two_communities(self):
        g = self.two_cliques()
        labeling = louvain(g, seed=0)
        assert labeling.k == 2
        labs = labeling.labels
        assert len(set(labs[:5].tolist())) == 1
        assert len(set(labs[5:].tolist())) == 1
        assert labs[0] != labs[5]
        assert labs[0] == 0  # first-occurrence renumbering

    def test_single_clique_single_community(self):
        edges = [(i, j) for i in range(6) for j in range(i + 1, 6)]
        g = build_graph(6, np.array(edges))
        labeling = louvain(g, seed=1)
        assert labeling.k == 1

    def test_modularity_at_least_mono(self):
        """Result never scores below the single-community partition (Q=0)."""
        rng = np.random.default_rng(1011)
        for trial in range(10):
            n = int(rng.integers(8, 40))
            edges = random_edges(rng, n, 0.2)
            if len(edges) == 0:
                continue
            g = build_graph(n, edges)
            labeling = louvain(g, seed=trial)
            q = oracle_modularity(g.undirected_edges(), labeling.labels, n)
            assert q >= -1e-12

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(1012)
        g = build_graph(30, random_edges(rng, 30, 0.15))
        if g.n_edges == 0:
            pytest.skip("degenerate draw")
        a = louvain(g, seed=5)
        b = louvain(g, seed=5)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_edgeless_rejected(self):
        g = build_graph(4, np.empty((0, 2), dtype=int))
        with pytest.raises(ConfigurationError, match="edgeless"):
            louvain(g, seed=0)

    def test_labels_contiguous(self):
        rng = np.random.default_rng(1013)
        g = build_graph(25, random_edges(rng, 25, 0.2))
        labeling = louvain(g, seed=2)
        labs = sorted(set(labeling.labels.tolist()))
        assert labs == list(range(labeling.k))


class TestMonoLabel:
    def test_all_zero(self):
        labeling = mono_label(7)
        np.testing.assert_array_equal(labeling.labels, np.zeros(7, dtype=int))
        assert labeling.k == 1
        assert labeling.method == "mono"

    def test_invalid_count(self):
        with pytest.raises(ConfigurationError):
            mono_label(0)


class TestLeakage:
    def test_pseudo_labels_ignore_held_out_edges(self):
        """Clustering the train graph is bit-identical with held-out edges
        physically absent from the input."""
        rng = np.random.default_rng(1014)
        n = 40
        edges = random_edges(rng, n, 0.25)
        feats = rng.standard_normal((n, 6))
        g = build_graph(n, edges, features=feats)
        split = split_edges(g, (0.6, 0.2, 0.2), seed=3, negatives=10)

        g_train_view = split.train_graph(g)
        g_train_only = build_graph(n, split.train_edges, features=feats)

        h_view = aggregate_features(g_train_view)
        h_only = aggregate_features(g_train_only)
        assert h_view.tobytes() == h_only.tobytes()

        km_view = kmeans(h_view, 4, seed=11)
        km_only = kmeans(h_only, 4, seed=11)
        assert km_view.labels.tobytes() == km_only.labels.tobytes()

        lv_view = louvain(g_train_view, seed=11)
        lv_only = louvain(g_train_only, seed=11)
        assert lv_view.labels.tobytes() == lv_only.labels.tobytes()


class TestArtifacts:
    def test_labels_csv(self, tmp_path):
        labeling = mono_label(3)
        save_labels_csv(labeling, ("a", "b", "c"), tmp_path / "labels.csv")
        assert (tmp_path / "labels.csv").read_text() == "a,0\nb,0\nc,0\n"

    def test_labels_csv_length_mismatch(self, tmp_path):
        with pytest.raises(DimensionError):
            save_labels_csv(mono_label(3), ("a", "b"), tmp_path / "x.csv")

    def test_ssd_curve_csv(self, tmp_path):
        save_ssd_curve_csv([(1, 10.0), (2, 2.5)], tmp_path / "curve.csv")
        assert (tmp_path / "curve.csv").read_text() == "1,10\n2,2.5\n"

    def test_labeling_json_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1015)
        pts, _ = make_blobs(rng, n_per_blob=20)
        labeling = elbow_kmeans(pts, [1, 2, 3, 5], seed=4)
        save_labeling_json(labeling, tmp_path / "labeling.json")
        back = load_labeling_json(tmp_path / "labeling.json")
        np.testing.assert_array_equal(labeling.labels, back.labels)
        assert back.k == labeling.k
        assert back.method == labeling.method
        assert back.ssd_curve == labeling.ssd_curve
        assert back.seed == labeling.seed
