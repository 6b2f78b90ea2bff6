"""Structural link-prediction heuristics and class-integrated rescoring.

Classical scores over a training adjacency:

* common neighbors      ``CN(x, y) = |N(x) ∩ N(y)|``
* Adamic-Adar           ``AA(x, y) = Σ_{z ∈ CN} 1 / ln d(z)``
* resource allocation   ``RA(x, y) = Σ_{z ∈ CN} 1 / d(z)``
* truncated Katz        ``K(x, y) = η · Σ_{l=1..L} γ^l · walks_l(x, y)``

and the class-integrated variant that adds a prior bonus on top of any
structural score:

``H_C(x, y) = H(x, y) + β · (α1 · P(c_y|c_x) + α2 · P(c_x|c_y)) / Z(x, y)``

where ``Z`` is 1, or (when local normalization is on) the neighborhood sum
``Σ_{v ∈ N(x) ∪ N(y)} Σ_{i ∈ {x,y}} ω_1i · P(c_i|c_v) + ω_2i · P(c_v|c_i)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import (
    ConfigurationError,
    DegenerateNormalizerError,
    MissingLabelError,
)
from .graph import Graph, common_neighbors
from .priors import ClassPriorMatrix, lookup_prior

Scorer = Callable[[np.ndarray], np.ndarray]
"""Batch scorer: maps an ``(m, 2)`` pair array to ``(m,)`` float scores."""


@dataclass(frozen=True)
class GammaDecayConfig:
    """Truncated-Katz parameters: decay ``gamma``, scale ``eta``, horizon."""

    gamma: float = 0.05
    eta: float = 1.0
    max_length: int = 4

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma < 1.0:
            raise ConfigurationError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.eta <= 0.0:
            raise ConfigurationError(f"eta must be positive, got {self.eta}")
        if self.max_length < 1:
            raise ConfigurationError(
                f"max_length must be >= 1, got {self.max_length}"
            )


@dataclass(frozen=True)
class ClassHeuristicParams:
    """Weights for the class-prior bonus.

    ``omega`` orders its four weights as (ω_1x, ω_2x, ω_1y, ω_2y); they only
    matter when ``normalize_locally`` is on.
    """

    alpha1: float = 1.0
    alpha2: float = 1.0
    beta: float = 1.0
    omega: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    normalize_locally: bool = False

    def __post_init__(self) -> None:
        if self.beta <= 0.0:
            raise ConfigurationError(f"beta must be positive, got {self.beta}")
        if self.alpha1 < 0.0 or self.alpha2 < 0.0:
            raise ConfigurationError("alpha weights must be nonnegative")
        if len(self.omega) != 4 or any(w < 0.0 for w in self.omega):
            raise ConfigurationError(
                "omega must be four nonnegative reals (w_1x, w_2x, w_1y, w_2y)"
            )


# ---------------------------------------------------------------------------
# Structural scores
# ---------------------------------------------------------------------------


def cn_score(g: Graph, x: int, y: int) -> float:
    """Number of common neighbors."""
    return float(common_neighbors(g, x, y).size)


def aa_score(g: Graph, x: int, y: int) -> float:
    """Adamic-Adar: down-weight common neighbors by 1/ln(degree).

    Degree-1 common neighbors are impossible (such a node touches both
    endpoints), so ln d(z) >= ln 2 and the sum is well defined.
    """
    zs = common_neighbors(g, x, y)
    if zs.size == 0:
        return 0.0
    degs = g.degrees()[zs].astype(np.float64)
    return float(np.sum(1.0 / np.log(degs)))


def ra_score(g: Graph, x: int, y: int) -> float:
    """Resource allocation: down-weight common neighbors by 1/degree."""
    zs = common_neighbors(g, x, y)
    if zs.size == 0:
        return 0.0
    degs = g.degrees()[zs].astype(np.float64)
    return float(np.sum(1.0 / degs))


def adjacency_matrix(g: Graph) -> sp.csr_matrix:
    """Sparse 0/1 adjacency view of a graph's CSR arrays."""
    return sp.csr_matrix(
        (
            np.ones(g.csr_targets.size, dtype=np.float64),
            g.csr_targets,
            g.csr_offsets,
        ),
        shape=(g.n_nodes, g.n_nodes),
    )


def katz_score(
    g: Graph,
    x: int,
    y: int,
    cfg: GammaDecayConfig = GammaDecayConfig(),
    _adj: sp.csr_matrix | None = None,
) -> float:
    """Truncated Katz index: decayed walk counts up to ``cfg.max_length``.

    Walk counts come from repeated sparse mat-vec products against the
    indicator of ``x``, so a single score costs O(L · E).
    """
    g._check_node(x)
    g._check_node(y)
    adj = adjacency_matrix(g) if _adj is None else _adj
    vec = np.zeros(g.n_nodes, dtype=np.float64)
    vec[x] = 1.0
    total = 0.0
    decay = 1.0
    for _ in range(cfg.max_length):
        vec = adj @ vec
        decay *= cfg.gamma
        total += decay * vec[y]
    return float(cfg.eta * total)


# ---------------------------------------------------------------------------
# Class-integrated rescoring
# ---------------------------------------------------------------------------


def z_normalizer(
    g: Graph,
    prior: ClassPriorMatrix,
    labels: np.ndarray,
    x: int,
    y: int,
    params: ClassHeuristicParams,
) -> float:
    """Local normalizer over the joint neighborhood of ``x`` and ``y``.

    Returns 1.0 when ``params.normalize_locally`` is off.  Raises
    :class:`DegenerateNormalizerError` when the sum evaluates to zero (for
    instance when both endpoints are isolated), since the bonus would be
    undefined.
    """
    if not params.normalize_locally:
        return 1.0
    if prior.probs is None:
        raise ConfigurationError("prior matrix has not been normalized yet")
    labels = np.asarray(labels, dtype=np.int64)
    union = np.union1d(g.neighbors(x), g.neighbors(y))
    involved = np.concatenate([[x, y], union])
    usable = (labels[involved] >= 0) & (labels[involved] < prior.n_classes)
    if not usable.all():
        bad = int(involved[np.argmin(usable)])
        raise MissingLabelError(f"node {bad} lacks a usable class label")
    cx, cy = int(labels[x]), int(labels[y])
    w1x, w2x, w1y, w2y = params.omega
    cv = labels[union]
    probs = prior.probs
    z = float(
        w1x * probs[cv, cx].sum()
        + w2x * probs[cx, cv].sum()
        + w1y * probs[cv, cy].sum()
        + w2y * probs[cy, cv].sum()
    )
    if z == 0.0:
        raise DegenerateNormalizerError(
            f"local normalizer for pair ({x}, {y}) is zero; "
            "cannot apply class-prior rescoring"
        )
    return z


def class_heuristic_score(
    g: Graph,
    prior: ClassPriorMatrix,
    labels: np.ndarray,
    x: int,
    y: int,
    structural: float,
    params: ClassHeuristicParams = ClassHeuristicParams(),
) -> float:
    """Add the (optionally normalized) class-prior bonus to a structural score."""
    fwd, rev = lookup_prior(prior, labels, x, y)
    z = z_normalizer(g, prior, labels, x, y, params)
    return structural + params.beta * (params.alpha1 * fwd + params.alpha2 * rev) / z


# ---------------------------------------------------------------------------
# Batch scorers
# ---------------------------------------------------------------------------

_STRUCTURAL = {
    "cn": cn_score,
    "aa": aa_score,
    "ra": ra_score,
}


def make_heuristic_scorer(
    name: str,
    g: Graph,
    *,
    katz: GammaDecayConfig | None = None,
    prior: ClassPriorMatrix | None = None,
    labels: np.ndarray | None = None,
    params: ClassHeuristicParams | None = None,
    base: str = "cn",
) -> Scorer:
    """Build a batch scorer for one of ``cn, aa, ra, katz, hc``.

    ``hc`` is the class-integrated variant layered on structural ``base``;
    it requires ``prior`` and ``labels``.
    """
    name = name.lower()
    if name in _STRUCTURAL:
        fn = _STRUCTURAL[name]

        def score(pairs: np.ndarray) -> np.ndarray:
            pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
            return np.array([fn(g, int(u), int(v)) for u, v in pairs])

        return score
    if name == "katz":
        cfg = katz or GammaDecayConfig()
        adj = adjacency_matrix(g)

        def score(pairs: np.ndarray) -> np.ndarray:
            pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
            return np.array(
                [katz_score(g, int(u), int(v), cfg, _adj=adj) for u, v in pairs]
            )

        return score
    if name == "hc":
        if prior is None or labels is None:
            raise ConfigurationError(
                "class-integrated scorer needs a prior matrix and labels"
            )
        if base not in _STRUCTURAL and base != "katz":
            raise ConfigurationError(f"unknown structural base '{base}'")
        structural = make_heuristic_scorer(base, g, katz=katz)
        hp = params or ClassHeuristicParams()

        def score(pairs: np.ndarray) -> np.ndarray:
            pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
            bases = structural(pairs)
            return np.array(
                [
                    class_heuristic_score(
                        g, prior, labels, int(u), int(v), float(b), hp
                    )
                    for (u, v), b in zip(pairs.tolist(), bases)
                ]
            )

        return score
    raise ConfigurationError(f"unknown heuristic '{name}'")
