"""Link-prediction backbone: 2-layer message passing over the training
adjacency, neighborhood-aware edge embeddings, and a small fusion MLP that
can consume class-prior features.

All gradients are derived and implemented by hand (no autodiff):

* propagation  ``H = S · relu(S X W1) · W2`` with the symmetric operator
  ``S = D̂^{-1/2} (A + I) D̂^{-1/2}`` built from training edges only;
* edge embedding ``e(x,y) = concat(H[x] ⊙ H[y], Σ_u w_uxy · H[u])`` where the
  sum runs over common neighbors (weights 1) or, in completion mode, over the
  neighborhood union with predicted weights for the missing links;
* fusion ``p = σ(relu(z Wh + bh) · wo + bo)`` on ``z = concat(e, priors)``
  (priors omitted when ``use_priors`` is off);
* loss: mean binary cross-entropy in its numerically stable softplus form,
  over training positives plus an equal number of freshly resampled
  negatives per epoch.

The backprop bookkeeping mirrors the forward caches: ``S X`` is computed once
and reused by both the forward pass and the ``W1`` gradient, and the scatter
sums over neighborhood entries use flattened (pair index, node, weight)
arrays so the same index arrays drive the forward aggregation and the
gradient accumulation.
"""

from __future__ import annotations

import base64
import json
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .errors import (
    ConfigurationError,
    DimensionError,
    NumericError,
    ParseError,
    TrainingError,
)
from .graph import EdgeSplit, Graph, common_neighbors, sample_negatives
from .heuristics import Scorer, adjacency_matrix
from .priors import (
    ClassPriorMatrix,
    build_prior_matrix,
    count_class_links,
    lookup_prior_batch,
)
from .rand import STREAM_INIT, STREAM_TRAIN_NEG, derive_seed, make_rng

ARTIFACT_VERSION = 1

N_PRIOR_FEATURES = 2  # (P(c_y|c_x), P(c_x|c_y)) appended to the embedding

MODES = ("ncn", "ncnc", "backbone_only")


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


@dataclass
class BackboneParams:
    """All trainable arrays plus the hyperparameters that shaped them."""

    w1: np.ndarray  # (F, d)
    w2: np.ndarray  # (d, d)
    wh: np.ndarray  # (2d [+2], h)
    bh: np.ndarray  # (h,)
    wo: np.ndarray  # (h,)
    bo: float
    use_priors: bool
    dim: int
    hidden: int
    seed: int

    def copy(self) -> "BackboneParams":
        return BackboneParams(
            w1=self.w1.copy(),
            w2=self.w2.copy(),
            wh=self.wh.copy(),
            bh=self.bh.copy(),
            wo=self.wo.copy(),
            bo=float(self.bo),
            use_priors=self.use_priors,
            dim=self.dim,
            hidden=self.hidden,
            seed=self.seed,
        )

    def arrays(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "w2": self.w2, "wh": self.wh, "bh": self.bh, "wo": self.wo}


@dataclass(frozen=True)
class TrainConfig:
    """Backbone hyperparameters; ``seed`` drives init and negative sampling."""

    dim: int = 64
    hidden: int = 64
    lr: float = 0.1
    momentum: float = 0.9
    epochs: int = 200
    patience: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1 or self.hidden < 1:
            raise ConfigurationError("dim and hidden must be >= 1")
        if self.lr <= 0:
            raise ConfigurationError(f"learning rate must be positive, got {self.lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.patience < 1:
            raise ConfigurationError(f"patience must be >= 1, got {self.patience}")


@dataclass
class TrainedModel:
    """A trained backbone plus everything a scorer needs to reproduce it."""

    params: BackboneParams
    mode: str
    prior: ClassPriorMatrix | None
    labels: np.ndarray | None
    completion: BackboneParams | None = None  # frozen stage-1 scorer (ncnc)


def init_params(
    n_features: int, config: TrainConfig, use_priors: bool
) -> BackboneParams:
    """Glorot-normal weights, zero biases, on the init stream of ``seed``."""
    if n_features < 1:
        raise ConfigurationError("backbone needs at least one node feature")
    rng = make_rng(config.seed, STREAM_INIT)
    d, h = config.dim, config.hidden
    z_dim = 2 * d + (N_PRIOR_FEATURES if use_priors else 0)

    def glorot(fan_in: int, fan_out: int) -> np.ndarray:
        scale = np.sqrt(2.0 / (fan_in + fan_out))
        return scale * rng.standard_normal((fan_in, fan_out))

    return BackboneParams(
        w1=glorot(n_features, d),
        w2=glorot(d, d),
        wh=glorot(z_dim, h),
        bh=np.zeros(h),
        wo=glorot(h, 1)[:, 0],
        bo=0.0,
        use_priors=use_priors,
        dim=d,
        hidden=h,
        seed=config.seed,
    )


# ---------------------------------------------------------------------------
# Propagation
# ---------------------------------------------------------------------------


def normalized_operator(g: Graph) -> sp.csr_matrix:
    """Symmetric normalized adjacency with self-loops over a graph."""
    deg_hat = g.degrees().astype(np.float64) + 1.0
    inv_sqrt = 1.0 / np.sqrt(deg_hat)
    hat = adjacency_matrix(g) + sp.identity(g.n_nodes, format="csr")
    scale = sp.diags(inv_sqrt)
    return (scale @ hat @ scale).tocsr()


def mpnn_forward(g: Graph, features: np.ndarray, params: BackboneParams) -> np.ndarray:
    """Node embeddings ``H = S · relu(S X W1) · W2`` (no final nonlinearity)."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != g.n_nodes:
        raise DimensionError(
            f"feature matrix shape {x.shape} does not match {g.n_nodes} nodes"
        )
    if x.shape[1] != params.w1.shape[0]:
        raise DimensionError(
            f"feature width {x.shape[1]} does not match W1 fan-in {params.w1.shape[0]}"
        )
    sym = normalized_operator(g)
    sx = sym @ x
    h1 = np.maximum(sx @ params.w1, 0.0)
    return (sym @ h1) @ params.w2


# ---------------------------------------------------------------------------
# Neighborhood index sets
# ---------------------------------------------------------------------------


def cnc_probability(g: Graph, scorer: Scorer, x: int, y: int, u: int) -> float:
    """Completion weight of node ``u`` for the candidate pair ``(x, y)``.

    1 for a common neighbor; the predicted link probability for the one
    missing side when ``u`` neighbors exactly one endpoint; 0 otherwise.
    """
    near_x = g.has_edge(u, x)
    near_y = g.has_edge(u, y)
    if near_x and near_y:
        return 1.0
    if near_y:  # u ∈ N(y) \ N(x): weight is the predicted (x, u) link
        return float(scorer(np.array([[x, u]]))[0])
    if near_x:  # u ∈ N(x) \ N(y): weight is the predicted (y, u) link
        return float(scorer(np.array([[y, u]]))[0])
    return 0.0


def _ncn_indices(
    g: Graph, pairs: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flattened (pair index, node, weight=1) entries over common neighbors."""
    edge_idx: list[np.ndarray] = []
    u_idx: list[np.ndarray] = []
    for i, (x, y) in enumerate(pairs.tolist()):
        cn = common_neighbors(g, int(x), int(y))
        if cn.size:
            edge_idx.append(np.full(cn.size, i, dtype=np.int64))
            u_idx.append(cn)
    if not edge_idx:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, np.empty(0, dtype=np.float64)
    e = np.concatenate(edge_idx)
    u = np.concatenate(u_idx)
    return e, u, np.ones(u.size, dtype=np.float64)


def _ncnc_indices(
    g: Graph, pairs: np.ndarray, scorer: Scorer
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flattened entries over neighborhood unions with completion weights.

    Common neighbors weigh 1; a node adjacent to exactly one endpoint weighs
    the predicted probability of its missing link, fetched from ``scorer`` in
    one batch across all pairs.
    """
    edge_idx: list[int] = []
    u_idx: list[int] = []
    weights: list[float] = []
    pending_pairs: list[tuple[int, int]] = []  # (x, u) links to predict
    pending_slots: list[int] = []
    for i, (x, y) in enumerate(pairs.tolist()):
        nx, ny = g.neighbors(int(x)), g.neighbors(int(y))
        union = np.union1d(nx, ny)
        union = union[(union != int(x)) & (union != int(y))]  # endpoints never complete themselves
        both = np.intersect1d(nx, ny, assume_unique=True)
        in_both = np.isin(union, both, assume_unique=True)
        in_x = np.isin(union, nx, assume_unique=True)
        for u, common, near_x in zip(
            union.tolist(), in_both.tolist(), in_x.tolist()
        ):
            edge_idx.append(i)
            u_idx.append(u)
            if common:
                weights.append(1.0)
            else:
                # one side missing: predict (x,u) if u only neighbors y, else (y,u)
                missing = (int(x), u) if not near_x else (int(y), u)
                pending_slots.append(len(weights))
                weights.append(0.0)
                pending_pairs.append(missing)
    if pending_pairs:
        predicted = np.asarray(scorer(np.array(pending_pairs, dtype=np.int64)))
        for slot, p in zip(pending_slots, predicted.tolist()):
            weights[slot] = float(p)
    return (
        np.array(edge_idx, dtype=np.int64),
        np.array(u_idx, dtype=np.int64),
        np.array(weights, dtype=np.float64),
    )


def ncn_embed(g: Graph, h: np.ndarray, x: int, y: int) -> np.ndarray:
    """``concat(H[x] ⊙ H[y], Σ_{u ∈ N(x) ∩ N(y)} H[u])`` for one pair."""
    cn = common_neighbors(g, x, y)
    agg = h[cn].sum(axis=0) if cn.size else np.zeros(h.shape[1])
    return np.concatenate([h[x] * h[y], agg])


def ncnc_embed(
    g: Graph, h: np.ndarray, x: int, y: int, scorer: Scorer
) -> np.ndarray:
    """Union-aggregated embedding with completion-weighted neighbors."""
    pairs = np.array([[x, y]], dtype=np.int64)
    edge_idx, u_idx, w = _ncnc_indices(g, pairs, scorer)
    agg = np.zeros(h.shape[1])
    if u_idx.size:
        agg = (w[:, None] * h[u_idx]).sum(axis=0)
    return np.concatenate([h[x] * h[y], agg])


# ---------------------------------------------------------------------------
# Batches, forward, backward
# ---------------------------------------------------------------------------


@dataclass
class LinkBatch:
    """Everything one forward/backward pass needs, with fixed index arrays."""

    sym: sp.csr_matrix  # (n, n) normalized operator over training edges
    sx: np.ndarray  # (n, F) = sym @ X, shared by forward and the W1 gradient
    pairs: np.ndarray  # (m, 2)
    targets: np.ndarray  # (m,) in {0, 1}
    edge_idx: np.ndarray  # flattened neighborhood entries: which pair
    u_idx: np.ndarray  # which node
    u_w: np.ndarray  # with which weight
    priors: np.ndarray | None  # (m, 2) prior features or None


def forward_loss(params: BackboneParams, batch: LinkBatch) -> tuple[float, dict]:
    """Mean BCE over the batch; returns the cache the backward pass reuses."""
    z1 = batch.sx @ params.w1
    h1 = np.maximum(z1, 0.0)
    q = batch.sym @ h1
    h = q @ params.w2

    m = batch.pairs.shape[0]
    xs, ys = batch.pairs[:, 0], batch.pairs[:, 1]
    e1 = h[xs] * h[ys]
    e2 = np.zeros((m, params.dim))
    if batch.u_idx.size:
        np.add.at(e2, batch.edge_idx, batch.u_w[:, None] * h[batch.u_idx])
    z = np.concatenate([e1, e2], axis=1)
    if params.use_priors:
        if batch.priors is None:
            raise ConfigurationError("batch lacks prior features but use_priors is on")
        z = np.concatenate([z, batch.priors], axis=1)

    pre_h = z @ params.wh + params.bh
    act = np.maximum(pre_h, 0.0)
    logits = act @ params.wo + params.bo
    # BCE in softplus form: softplus(logit) - target * logit
    loss = float(np.mean(np.logaddexp(0.0, logits) - batch.targets * logits))
    cache = {
        "z1": z1,
        "h1": h1,
        "q": q,
        "h": h,
        "e1": e1,
        "z": z,
        "pre_h": pre_h,
        "act": act,
        "logits": logits,
    }
    return loss, cache


def predict_batch(params: BackboneParams, batch: LinkBatch) -> np.ndarray:
    """Link probabilities for a batch, strictly inside (0, 1)."""
    _, cache = forward_loss(params, batch)
    probs = expit(cache["logits"])
    return np.clip(probs, 1e-12, 1.0 - 1e-12)


def backward(
    params: BackboneParams, batch: LinkBatch, cache: dict
) -> dict[str, np.ndarray | float]:
    """Hand-derived gradients of the mean BCE w.r.t. every parameter."""
    m = batch.pairs.shape[0]
    xs, ys = batch.pairs[:, 0], batch.pairs[:, 1]
    h = cache["h"]

    dlogits = (expit(cache["logits"]) - batch.targets) / m
    dwo = cache["act"].T @ dlogits
    dbo = float(dlogits.sum())
    dact = np.outer(dlogits, params.wo)
    dpre_h = dact * (cache["pre_h"] > 0.0)
    dwh = cache["z"].T @ dpre_h
    dbh = dpre_h.sum(axis=0)
    dz = dpre_h @ params.wh.T

    d = params.dim
    de1 = dz[:, :d]
    de2 = dz[:, d : 2 * d]  # prior columns are inputs; their grads stop here

    dh = np.zeros_like(h)
    np.add.at(dh, xs, de1 * h[ys])
    np.add.at(dh, ys, de1 * h[xs])
    if batch.u_idx.size:
        np.add.at(dh, batch.u_idx, batch.u_w[:, None] * de2[batch.edge_idx])

    dw2 = cache["q"].T @ dh
    dq = dh @ params.w2.T
    dh1 = batch.sym @ dq  # sym is symmetric, so S^T = S
    dz1 = dh1 * (cache["z1"] > 0.0)
    dw1 = batch.sx.T @ dz1

    return {"w1": dw1, "w2": dw2, "wh": dwh, "bh": dbh, "wo": dwo, "bo": dbo}


def gradient_check(
    params: BackboneParams, batch: LinkBatch, epsilon: float = 1e-5
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Relative error uses ``|a - n| / max(1e-6, |a| + |n|)`` so that entries
    where both gradients vanish (dead ReLU units) compare at absolute scale.
    """
    if epsilon <= 0:
        raise ConfigurationError(f"epsilon must be positive, got {epsilon}")
    _, cache = forward_loss(params, batch)
    grads = backward(params, batch, cache)

    worst = 0.0

    def fd(get: Callable[[], float], put: Callable[[float], None]) -> float:
        orig = get()
        put(orig + epsilon)
        up, _ = forward_loss(params, batch)
        put(orig - epsilon)
        down, _ = forward_loss(params, batch)
        put(orig)
        return (up - down) / (2.0 * epsilon)

    for name, arr in params.arrays().items():
        ga = np.asarray(grads[name])
        flat = arr.reshape(-1)
        for i in range(flat.size):
            numeric = fd(
                lambda: float(flat[i]),
                lambda v: flat.__setitem__(i, v),
            )
            analytic = float(ga.reshape(-1)[i])
            denom = max(1e-6, abs(analytic) + abs(numeric))
            worst = max(worst, abs(analytic - numeric) / denom)

    numeric = fd(
        lambda: float(params.bo),
        lambda v: setattr(params, "bo", v),
    )
    denom = max(1e-6, abs(float(grads["bo"])) + abs(numeric))
    worst = max(worst, abs(float(grads["bo"]) - numeric) / denom)
    return worst


def fuse_and_predict(
    e: np.ndarray, priors: tuple[float, float] | None, params: BackboneParams
) -> float:
    """MLP head on one edge embedding; probability strictly in (0, 1)."""
    e = np.asarray(e, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(e)):
        raise NumericError("edge embedding contains non-finite values")
    if params.use_priors:
        if priors is None:
            raise ConfigurationError("params expect prior features, none given")
        z = np.concatenate([e, np.asarray(priors, dtype=np.float64)])
    else:
        z = e
    if z.size != params.wh.shape[0]:
        raise DimensionError(
            f"fusion input width {z.size} does not match Wh fan-in {params.wh.shape[0]}"
        )
    act = np.maximum(z @ params.wh + params.bh, 0.0)
    logit = float(act @ params.wo + params.bo)
    return float(np.clip(expit(logit), 1e-12, 1.0 - 1e-12))


# ---------------------------------------------------------------------------
# Batch builder
# ---------------------------------------------------------------------------


@dataclass
class BatchBuilder:
    """Assembles :class:`LinkBatch` objects for a fixed training graph."""

    g_train: Graph
    sym: sp.csr_matrix
    sx: np.ndarray
    mode: str
    prior: ClassPriorMatrix | None
    labels: np.ndarray | None
    completion_scorer: Scorer | None = None

    @classmethod
    def create(
        cls,
        g_train: Graph,
        features: np.ndarray,
        mode: str,
        prior: ClassPriorMatrix | None,
        labels: np.ndarray | None,
        completion_scorer: Scorer | None = None,
    ) -> "BatchBuilder":
        if mode not in MODES:
            raise ConfigurationError(f"unknown mode '{mode}' (expected {MODES})")
        if mode == "ncnc" and completion_scorer is None:
            raise ConfigurationError("ncnc batches need a completion scorer")
        x = np.asarray(features, dtype=np.float64)
        if x.shape[1] == 0:
            raise ConfigurationError("backbone needs node features")
        sym = normalized_operator(g_train)
        return cls(
            g_train=g_train,
            sym=sym,
            sx=sym @ x,
            mode=mode,
            prior=prior,
            labels=labels,
            completion_scorer=completion_scorer,
        )

    def build(self, pairs: np.ndarray, targets: np.ndarray | None = None) -> LinkBatch:
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if targets is None:
            targets = np.zeros(len(pairs))
        if self.mode == "ncnc":
            edge_idx, u_idx, u_w = _ncnc_indices(
                self.g_train, pairs, self.completion_scorer
            )
        else:
            edge_idx, u_idx, u_w = _ncn_indices(self.g_train, pairs)
        priors = None
        if self.prior is not None and self.labels is not None:
            priors = lookup_prior_batch(self.prior, self.labels, pairs)
        return LinkBatch(
            sym=self.sym,
            sx=self.sx,
            pairs=pairs,
            targets=np.asarray(targets, dtype=np.float64),
            edge_idx=edge_idx,
            u_idx=u_idx,
            u_w=u_w,
            priors=priors,
        )


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def _ranks_against_pool(pos: np.ndarray, neg: np.ndarray) -> np.ndarray:
    """Midpoint-tie ranks of each positive against a shared pool."""
    neg_sorted = np.sort(neg)
    n = neg.size
    left = np.searchsorted(neg_sorted, pos, side="left")
    right = np.searchsorted(neg_sorted, pos, side="right")
    greater = n - right
    ties = right - left
    return 1 + greater + ties // 2


def train(
    g: Graph,
    split: EdgeSplit,
    labels: np.ndarray | None,
    mode: str,
    config: TrainConfig = TrainConfig(),
) -> tuple[TrainedModel, list[dict]]:
    """Full-batch gradient descent with momentum and early stopping.

    Uses training edges for propagation, link supervision, and the class
    prior; validation MRR (shared negative pool) drives early stopping with
    the best parameters kept.  ``mode='ncnc'`` first trains and freezes an
    ``ncn`` completion scorer on a derived seed, then trains the final model
    on completion-weighted neighborhoods.  Deterministic given ``config.seed``.
    """
    if mode not in MODES:
        raise ConfigurationError(f"unknown mode '{mode}' (expected {MODES})")
    use_priors = mode != "backbone_only"
    if use_priors and labels is None:
        raise ConfigurationError(f"mode '{mode}' needs a label source for priors")
    if g.features.shape[1] == 0:
        raise ConfigurationError("backbone needs node features")
    if len(split.valid_edges) == 0 or len(split.valid_negatives) == 0:
        raise ConfigurationError(
            "early stopping needs a non-empty validation split and negative pool"
        )

    g_train = split.train_graph(g)
    prior = None
    label_arr = None
    if use_priors:
        label_arr = np.asarray(labels, dtype=np.int64)
        n_classes = int(label_arr.max()) + 1
        prior = build_prior_matrix(
            count_class_links(split.train_edges, label_arr, n_classes)
        )

    completion_params: BackboneParams | None = None
    completion_scorer: Scorer | None = None
    if mode == "ncnc":
        stage1_cfg = replace(config, seed=derive_seed(config.seed, STREAM_INIT))
        stage1_model, _ = train(g, split, labels, "ncn", stage1_cfg)
        completion_params = stage1_model.params
        completion_scorer = make_scorer(stage1_model, g_train, g.features)

    builder = BatchBuilder.create(
        g_train, g.features, mode, prior, label_arr, completion_scorer
    )
    params = init_params(g.features.shape[1], config, use_priors)

    positives = split.train_edges
    pos_batch = builder.build(positives, np.ones(len(positives)))
    valid_batch = builder.build(split.valid_edges)
    valid_pool_batch = builder.build(split.valid_negatives)

    velocity = {name: np.zeros_like(arr) for name, arr in params.arrays().items()}
    velocity_bo = 0.0
    best_params = params.copy()
    best_val = -np.inf
    patience_left = config.patience
    log: list[dict] = []

    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        negatives = sample_negatives(
            g, len(positives), (config.seed, STREAM_TRAIN_NEG, epoch)
        )
        neg_batch = builder.build(negatives, np.zeros(len(negatives)))
        batch = _concat_batches(pos_batch, neg_batch)

        loss, cache = forward_loss(params, batch)
        if not np.isfinite(loss):
            raise TrainingError(
                f"non-finite loss at epoch {epoch}; try a smaller learning rate"
            )
        grads = backward(params, batch, cache)
        for name, arr in params.arrays().items():
            velocity[name] = config.momentum * velocity[name] - config.lr * np.asarray(
                grads[name]
            )
            arr += velocity[name]
        velocity_bo = config.momentum * velocity_bo - config.lr * float(grads["bo"])
        params.bo = float(params.bo) + velocity_bo

        val_pos = predict_batch(params, valid_batch)
        val_neg = predict_batch(params, valid_pool_batch)
        val_mrr = float(np.mean(1.0 / _ranks_against_pool(val_pos, val_neg)))

        log.append(
            {
                "epoch": epoch,
                "loss": loss,
                "val_mrr": val_mrr,
                "seconds": time.perf_counter() - t0,
            }
        )
        if val_mrr > best_val:
            best_val = val_mrr
            best_params = params.copy()
            patience_left = config.patience
        else:
            patience_left -= 1
            if patience_left == 0:
                break

    model = TrainedModel(
        params=best_params,
        mode=mode,
        prior=prior,
        labels=label_arr,
        completion=completion_params,
    )
    return model, log


def _concat_batches(a: LinkBatch, b: LinkBatch) -> LinkBatch:
    offset = a.pairs.shape[0]
    priors = None
    if a.priors is not None and b.priors is not None:
        priors = np.concatenate([a.priors, b.priors])
    return LinkBatch(
        sym=a.sym,
        sx=a.sx,
        pairs=np.concatenate([a.pairs, b.pairs]),
        targets=np.concatenate([a.targets, b.targets]),
        edge_idx=np.concatenate([a.edge_idx, b.edge_idx + offset]),
        u_idx=np.concatenate([a.u_idx, b.u_idx]),
        u_w=np.concatenate([a.u_w, b.u_w]),
        priors=priors,
    )


def make_scorer(
    model: TrainedModel, g_train: Graph, features: np.ndarray
) -> Scorer:
    """Batch scorer closing over a trained model and its training graph."""
    completion_scorer = None
    if model.mode == "ncnc":
        if model.completion is None:
            raise ConfigurationError("ncnc model is missing its completion scorer")
        stage1 = TrainedModel(
            params=model.completion,
            mode="ncn",
            prior=model.prior,
            labels=model.labels,
        )
        completion_scorer = make_scorer(stage1, g_train, features)
    builder = BatchBuilder.create(
        g_train,
        features,
        model.mode,
        model.prior if model.params.use_priors else None,
        model.labels if model.params.use_priors else None,
        completion_scorer,
    )

    def score(pairs: np.ndarray) -> np.ndarray:
        return predict_batch(model.params, builder.build(pairs))

    return score


# ---------------------------------------------------------------------------
# Artifacts
# ---------------------------------------------------------------------------


def _encode(arr: np.ndarray) -> dict:
    a = np.ascontiguousarray(arr, dtype="<f8")
    return {
        "shape": list(a.shape),
        "data": base64.b64encode(a.tobytes()).decode("ascii"),
    }


def _decode(payload: dict) -> np.ndarray:
    raw = base64.b64decode(payload["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(payload["shape"]).copy()


def _params_payload(params: BackboneParams) -> dict:
    return {
        "arrays": {name: _encode(arr) for name, arr in params.arrays().items()},
        "bo": params.bo,
        "use_priors": params.use_priors,
        "dim": params.dim,
        "hidden": params.hidden,
        "seed": params.seed,
    }


def _params_from_payload(payload: dict) -> BackboneParams:
    arrays = {name: _decode(blob) for name, blob in payload["arrays"].items()}
    return BackboneParams(
        w1=arrays["w1"],
        w2=arrays["w2"],
        wh=arrays["wh"],
        bh=arrays["bh"],
        wo=arrays["wo"],
        bo=float(payload["bo"]),
        use_priors=bool(payload["use_priors"]),
        dim=int(payload["dim"]),
        hidden=int(payload["hidden"]),
        seed=int(payload["seed"]),
    )


def save_checkpoint(
    model: TrainedModel, path: str | Path, *, config_digest: str = ""
) -> None:
    """Checkpoint with float64 little-endian base64 weight blobs."""
    payload = {
        "version": ARTIFACT_VERSION,
        "kind": "checkpoint",
        "seed": model.params.seed,
        "config_digest": config_digest,
        "mode": model.mode,
        "params": _params_payload(model.params),
        "completion": _params_payload(model.completion)
        if model.completion is not None
        else None,
        "prior_counts": model.prior.joint_counts.tolist()
        if model.prior is not None
        else None,
        "labels": model.labels.tolist() if model.labels is not None else None,
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")


def load_checkpoint(path: str | Path) -> tuple[TrainedModel, str]:
    """Returns the model and the config digest it was trained under."""
    try:
        payload = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    if payload.get("kind") != "checkpoint":
        raise ParseError(f"{path}: not a checkpoint artifact")
    prior = None
    if payload.get("prior_counts") is not None:
        counts = np.array(payload["prior_counts"], dtype=np.int64)
        prior = build_prior_matrix(
            ClassPriorMatrix(
                n_classes=counts.shape[0],
                joint_counts=counts,
                row_totals=counts.sum(axis=1),
            )
        )
    model = TrainedModel(
        params=_params_from_payload(payload["params"]),
        mode=str(payload["mode"]),
        prior=prior,
        labels=np.array(payload["labels"], dtype=np.int64)
        if payload.get("labels") is not None
        else None,
        completion=_params_from_payload(payload["completion"])
        if payload.get("completion") is not None
        else None,
    )
    return model, str(payload.get("config_digest", ""))


def save_training_log(log: list[dict], path: str | Path) -> None:
    """CSV of per-epoch loss and validation MRR."""
    lines = ["epoch,loss,val_mrr"]
    for row in log:
        lines.append(
            f"{row['epoch']},{format(row['loss'], '.17g')},"
            f"{format(row['val_mrr'], '.17g')}"
        )
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n")
