"""Structural heuristics vs brute-force oracles; class-integrated rescoring."""

from __future__ import annotations

import math

import numpy as np
import pytest

from classlink.errors import (
    ConfigurationError,
    DegenerateNormalizerError,
    MissingLabelError,
)
from classlink.graph import build_graph
from classlink.heuristics import (
    ClassHeuristicParams,
    GammaDecayConfig,
    aa_score,
    class_heuristic_score,
    cn_score,
    katz_score,
    make_heuristic_scorer,
    ra_score,
    z_normalizer,
)
from classlink.priors import build_prior_matrix, count_class_links

from conftest import random_edges
from test_graph import brute_adjacency


# ---------------------------------------------------------------------------
# Brute-force oracles (independent of the package implementation)
# ---------------------------------------------------------------------------


def oracle_cn(adj, x, y):
    return len(adj[x] & adj[y])


def oracle_aa(adj, x, y):
    return sum(1.0 / math.log(len(adj[z])) for z in adj[x] & adj[y])


def oracle_ra(adj, x, y):
    return sum(1.0 / len(adj[z]) for z in adj[x] & adj[y])


def oracle_walk_counts(adj, x, y, max_len):
    """Exhaustive enumeration of walks from x to y, per length."""
    counts = [0] * (max_len + 1)
    frontier = {x: 1}
    for length in range(1, max_len + 1):
        nxt: dict[int, int] = {}
        for node, ways in frontier.items():
            for nb in adj[node]:
                nxt[nb] = nxt.get(nb, 0) + ways
        counts[length] = nxt.get(y, 0)
        frontier = nxt
    return counts


def oracle_katz(adj, x, y, gamma, max_len, eta=1.0):
    walks = oracle_walk_counts(adj, x, y, max_len)
    return eta * sum(gamma**l * walks[l] for l in range(1, max_len + 1))


class TestFrozenValues:
    def test_path_aa_ra(self, path3):
        # single common neighbor of degree 2
        assert cn_score(path3, 0, 2) == 1.0
        assert aa_score(path3, 0, 2) == pytest.approx(1.0 / math.log(2.0))
        assert ra_score(path3, 0, 2) == pytest.approx(0.5)

    def test_katz_single_edge(self):
        g = build_graph(2, np.array([[0, 1]]))
        cfg = GammaDecayConfig(gamma=0.5, max_length=1)
        assert katz_score(g, 0, 1, cfg) == pytest.approx(0.5)

    def test_katz_two_step_path(self, path3):
        cfg = GammaDecayConfig(gamma=0.5, max_length=2)
        # only walk of length 2 from 0 to 2
        assert katz_score(path3, 0, 2, cfg) == pytest.approx(0.25)

    def test_isolated_pair_scores_zero(self):
        g = build_graph(4, np.array([[0, 1]]))
        for fn in (cn_score, aa_score, ra_score):
            assert fn(g, 2, 3) == 0.0
        assert katz_score(g, 2, 3) == 0.0


class TestAgainstOracles:
    def test_cn_aa_ra_match_brute_force(self):
        rng = np.random.default_rng(901)
        for _ in range(20):
            n = int(rng.integers(5, 40))
            edges = random_edges(rng, n, 0.3)
            g = build_graph(n, edges)
            adj = brute_adjacency(edges, n)
            for _ in range(15):
                x, y = (int(v) for v in rng.integers(0, n, size=2))
                assert cn_score(g, x, y) == oracle_cn(adj, x, y)
                assert aa_score(g, x, y) == pytest.approx(
                    oracle_aa(adj, x, y), abs=1e-10
                )
                assert ra_score(g, x, y) == pytest.approx(
                    oracle_ra(adj, x, y), abs=1e-10
                )

    def test_katz_matches_walk_enumeration(self):
        rng = np.random.default_rng(902)
        for _ in range(10):
            n = int(rng.integers(4, 15))
            edges = random_edges(rng, n, 0.4)
            g = build_graph(n, edges)
            adj = brute_adjacency(edges, n)
            cfg = GammaDecayConfig(gamma=0.05, max_length=4)
            for _ in range(10):
                x, y = (int(v) for v in rng.integers(0, n, size=2))
                expect = oracle_katz(adj, x, y, cfg.gamma, cfg.max_length)
                assert katz_score(g, x, y, cfg) == pytest.approx(expect, abs=1e-10)

    def test_katz_eta_scales_linearly(self, path3):
        base = katz_score(path3, 0, 2, GammaDecayConfig(gamma=0.3, max_length=3))
        scaled = katz_score(
            path3, 0, 2, GammaDecayConfig(gamma=0.3, eta=2.5, max_length=3)
        )
        assert scaled == pytest.approx(2.5 * base)


class TestConfigValidation:
    def test_gamma_domain(self):
        with pytest.raises(ConfigurationError):
            GammaDecayConfig(gamma=0.0)
        with pytest.raises(ConfigurationError):
            GammaDecayConfig(gamma=1.0)
        with pytest.raises(ConfigurationError):
            GammaDecayConfig(max_length=0)
        with pytest.raises(ConfigurationError):
            GammaDecayConfig(eta=-1.0)

    def test_heuristic_params_domain(self):
        with pytest.raises(ConfigurationError):
            ClassHeuristicParams(beta=0.0)
        with pytest.raises(ConfigurationError):
            ClassHeuristicParams(alpha1=-0.5)
        with pytest.raises(ConfigurationError):
            ClassHeuristicParams(omega=(1.0, 1.0, -1.0, 1.0))


def two_class_prior():
    """Edges (0,1),(1,2) with labels [0,0,1]: probs [[2/3,1/3],[1,0]]."""
    edges = np.array([[0, 1], [1, 2]])
    labels = np.array([0, 0, 1])
    prior = build_prior_matrix(count_class_links(edges, labels, 2))
    g = build_graph(3, edges, labels=labels)
    return g, prior, labels


class TestClassIntegration:
    def test_worked_example(self):
        g, prior, labels = two_class_prior()
        # pair (1, 2): classes (0, 1) -> priors (1/3, 1); unnormalized
        score = class_heuristic_score(g, prior, labels, 1, 2, structural=2.0)
        assert score == pytest.approx(2.0 + (1.0 / 3.0 + 1.0))

    def test_zero_beta_rejected_positive_beta_scales(self):
        g, prior, labels = two_class_prior()
        s1 = class_heuristic_score(
            g, prior, labels, 1, 2, 0.0, ClassHeuristicParams(beta=2.0)
        )
        assert s1 == pytest.approx(2.0 * (1.0 / 3.0 + 1.0))

    def test_alpha_weights_select_directions(self):
        g, prior, labels = two_class_prior()
        fwd_only = class_heuristic_score(
            g, prior, labels, 1, 2, 0.0, ClassHeuristicParams(alpha2=0.0)
        )
        rev_only = class_heuristic_score(
            g, prior, labels, 1, 2, 0.0, ClassHeuristicParams(alpha1=0.0)
        )
        assert fwd_only == pytest.approx(1.0 / 3.0)
        assert rev_only == pytest.approx(1.0)

    def test_z_is_one_when_normalization_off(self):
        g, prior, labels = two_class_prior()
        assert z_normalizer(g, prior, labels, 0, 2, ClassHeuristicParams()) == 1.0

    def test_z_mono_label_star(self):
        """Single class, unit omegas: Z = 4 * |N(x) ∪ N(y)|."""
        star = build_graph(
            5, np.array([[0, 1], [0, 2], [0, 3], [0, 4]]), labels=np.zeros(5, int)
        )
        prior = build_prior_matrix(
            count_class_links(star.undirected_edges(), star.labels, 1)
        )
        params = ClassHeuristicParams(normalize_locally=True)
        # N(1) ∪ N(2) = {0} -> Z = 4
        assert z_normalizer(star, prior, star.labels, 1, 2, params) == pytest.approx(4.0)
        # N(0) ∪ N(1) = {0,1,2,3,4} minus... N(0)={1,2,3,4}, N(1)={0} -> union 5 nodes
        assert z_normalizer(star, prior, star.labels, 0, 1, params) == pytest.approx(
            20.0
        )

    def test_z_matches_direct_sum_on_random_graphs(self):
        rng = np.random.default_rng(903)
        for _ in range(10):
            n = int(rng.integers(6, 30))
            edges = random_edges(rng, n, 0.3)
            if len(edges) == 0:
                continue
            labels = rng.integers(0, 3, size=n)
            g = build_graph(n, edges, labels=labels)
            prior = build_prior_matrix(count_class_links(edges, labels, 3))
            omega = tuple(float(w) for w in rng.uniform(0.1, 2.0, size=4))
            params = ClassHeuristicParams(omega=omega, normalize_locally=True)
            x, y = (int(v) for v in rng.integers(0, n, size=2))
            union = sorted(set(g.neighbors(x).tolist()) | set(g.neighbors(y).tolist()))
            if not union:
                continue
            w1x, w2x, w1y, w2y = omega
            expect = 0.0
            for v in union:
                cv = labels[v]
                expect += w1x * prior.probs[cv, labels[x]]
                expect += w2x * prior.probs[labels[x], cv]
                expect += w1y * prior.probs[cv, labels[y]]
                expect += w2y * prior.probs[labels[y], cv]
            got = z_normalizer(g, prior, labels, x, y, params)
            assert got == pytest.approx(expect, abs=1e-12)

    def test_isolated_pair_degenerate_normalizer(self):
        g = build_graph(4, np.array([[0, 1]]), labels=np.zeros(4, int))
        prior = build_prior_matrix(
            count_class_links(g.undirected_edges(), g.labels, 1)
        )
        params = ClassHeuristicParams(normalize_locally=True)
        with pytest.raises(DegenerateNormalizerError):
            z_normalizer(g, prior, g.labels, 2, 3, params)

    def test_missing_label_raises(self):
        g = build_graph(3, np.array([[0, 1], [1, 2]]), labels=np.array([0, 0, -1]))
        prior = build_prior_matrix(count_class_links(np.array([[0, 1]]), g.labels, 1))
        with pytest.raises(MissingLabelError):
            class_heuristic_score(g, prior, g.labels, 1, 2, 1.0)


class TestBatchScorers:
    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(904)
        edges = random_edges(rng, 25, 0.3)
        labels = rng.integers(0, 3, size=25)
        g = build_graph(25, edges, labels=labels)
        prior = build_prior_matrix(count_class_links(edges, labels, 3))
        pairs = rng.integers(0, 25, size=(30, 2))
        for name, scalar in (
            ("cn", cn_score),
            ("aa", aa_score),
            ("ra", ra_score),
        ):
            scorer = make_heuristic_scorer(name, g)
            got = scorer(pairs)
            expect = [scalar(g, int(u), int(v)) for u, v in pairs.tolist()]
            np.testing.assert_allclose(got, expect)
        katz = make_heuristic_scorer("katz", g, katz=GammaDecayConfig())
        np.testing.assert_allclose(
            katz(pairs),
            [katz_score(g, int(u), int(v)) for u, v in pairs.tolist()],
        )
        hc = make_heuristic_scorer("hc", g, prior=prior, labels=labels, base="cn")
        np.testing.assert_allclose(
            hc(pairs),
            [
                class_heuristic_score(
                    g, prior, labels, int(u), int(v), cn_score(g, int(u), int(v))
                )
                for u, v in pairs.tolist()
            ],
        )

    def test_unknown_scorer_rejected(self, path3):
        with pytest.raises(ConfigurationError, match="unknown heuristic"):
            make_heuristic_scorer("pagerank", path3)

    def test_hc_requires_prior(self, path3):
        with pytest.raises(ConfigurationError):
            make_heuristic_scorer("hc", path3)
