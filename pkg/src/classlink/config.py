"""Run configuration: one YAML document driving every pipeline stage.

A :class:`RunConfig` is the single source of truth for a run.  Stages are
keyed by digests over the subset of fields they depend on (cumulative, so a
seed change invalidates everything downstream while an evaluation-only tweak
leaves checkpoints valid).  The output directory is deliberately excluded
from digests — moving artifacts does not make them stale.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path

import yaml

from .backbone import MODES, TrainConfig
from .errors import ConfigurationError
from .evaluation import parse_metric
from .heuristics import GammaDecayConfig

LABEL_SOURCES = ("true", "kmeans", "louvain", "mono")
SCORERS = ("model", "cn", "aa", "ra", "katz", "hc")
HC_BASES = ("cn", "aa", "ra", "katz")
EVAL_SPLITS = ("test", "valid")


@dataclass(frozen=True)
class RunConfig:
    """Validated settings for the whole pipeline (flat key/value document)."""

    # input/output paths
    edges: str = ""
    features: str | None = None
    labels: str | None = None
    out: str = "artifacts"
    # split
    seed: int = 0
    ratios: tuple[float, float, float] = (0.85, 0.05, 0.10)
    negatives: int = 500
    # label source (exactly one; k/k_grid only meaningful for kmeans)
    label_source: str = "true"
    k: int | None = None
    k_grid: tuple[int, ...] | None = None
    normalize_rows: bool = False
    max_iters: int = 100
    # backbone training
    mode: str = "ncn"
    dim: int = 64
    hidden: int = 64
    lr: float = 0.1
    momentum: float = 0.9
    epochs: int = 200
    patience: int = 20
    # evaluation
    metric: str = "mrr"
    scorer: str = "model"
    hc_base: str = "cn"
    gamma: float = 0.05
    katz_length: int = 4
    eval_split: str = "test"
    per_edge_negatives: int | None = None
    # benchmarking
    bench_sizes: tuple[int, ...] = (10_000, 100_000, 1_000_000)

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    @classmethod
    def from_mapping(
        cls, mapping: dict | None, overrides: dict | None = None
    ) -> "RunConfig":
        """Build from a parsed config document plus CLI-flag overrides.

        Keys may use ``-`` or ``_`` interchangeably; unknown keys are
        rejected so typos never silently fall back to defaults.
        """
        merged: dict = {}
        for source in (mapping or {}), (overrides or {}):
            for key, value in source.items():
                merged[str(key).replace("-", "_")] = value
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(merged) - known)
        if unknown:
            raise ConfigurationError(
                f"unknown config key(s): {', '.join(unknown)}"
            )
        coerced = {key: _coerce(key, value) for key, value in merged.items()}
        return cls(**coerced)

    # ------------------------------------------------------------------
    # Views
    # ------------------------------------------------------------------

    def to_mapping(self) -> dict:
        """Canonical JSON-ready mapping (tuples become lists)."""
        out: dict = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            dim=self.dim,
            hidden=self.hidden,
            lr=self.lr,
            momentum=self.momentum,
            epochs=self.epochs,
            patience=self.patience,
            seed=self.seed,
        )

    def katz_config(self) -> GammaDecayConfig:
        return GammaDecayConfig(gamma=self.gamma, max_length=self.katz_length)

    # ------------------------------------------------------------------
    # Validation
    # ------------------------------------------------------------------

    def validate(self, *, pipeline: bool = True, check_paths: bool = False) -> None:
        """Check invariants; raises :class:`ConfigurationError` on the first
        violation.  ``pipeline=False`` relaxes the input-data requirements
        (for standalone commands like bench); ``check_paths`` additionally
        requires the referenced input files to exist (used by commands that
        read them).
        """
        if pipeline and not self.edges:
            raise ConfigurationError("config needs an 'edges' path")
        if check_paths:
            for name in ("edges", "features", "labels"):
                value = getattr(self, name)
                if value is not None and value != "" and not Path(value).exists():
                    raise ConfigurationError(f"{name} file not found: {value}")

        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigurationError(f"seed must be an integer, got {self.seed!r}")
        if len(self.ratios) != 3 or any(r <= 0 for r in self.ratios):
            raise ConfigurationError(
                f"ratios must be three positive reals, got {self.ratios}"
            )
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ConfigurationError(f"ratios must sum to 1, got {sum(self.ratios)!r}")
        if self.negatives < 1:
            raise ConfigurationError("negatives must be >= 1")

        if self.label_source not in LABEL_SOURCES:
            raise ConfigurationError(
                f"label source must be one of {LABEL_SOURCES}, got "
                f"{self.label_source!r}"
            )
        if self.label_source == "kmeans":
            if (self.k is None) == (self.k_grid is None):
                raise ConfigurationError(
                    "kmeans labels need exactly one of 'k' or 'k_grid'"
                )
            if self.k is not None and self.k < 1:
                raise ConfigurationError(f"k must be >= 1, got {self.k}")
            if self.k_grid is not None:
                if len(self.k_grid) < 3:
                    raise ConfigurationError(
                        "k_grid needs at least 3 candidates for the elbow rule"
                    )
                if any(k < 1 for k in self.k_grid):
                    raise ConfigurationError(f"k_grid values must be >= 1: {self.k_grid}")
        elif self.k is not None or self.k_grid is not None:
            raise ConfigurationError(
                "'k'/'k_grid' only apply when label_source is 'kmeans'"
            )
        if (
            pipeline
            and self.label_source == "true"
            and self.labels is None
            and self.mode != "backbone_only"
        ):
            raise ConfigurationError(
                "label source 'true' needs a labels file (or use a pseudo-label source)"
            )
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be >= 1")

        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode '{self.mode}' (expected {MODES})")
        self.train_config()  # reuses the training-hyperparameter checks

        parse_metric(self.metric)
        if self.scorer not in SCORERS:
            raise ConfigurationError(
                f"scorer must be one of {SCORERS}, got {self.scorer!r}"
            )
        if self.hc_base not in HC_BASES:
            raise ConfigurationError(
                f"hc_base must be one of {HC_BASES}, got {self.hc_base!r}"
            )
        self.katz_config()  # reuses the decay checks
        if self.eval_split not in EVAL_SPLITS:
            raise ConfigurationError(
                f"eval_split must be one of {EVAL_SPLITS}, got {self.eval_split!r}"
            )
        if self.per_edge_negatives is not None and self.per_edge_negatives < 1:
            raise ConfigurationError("per_edge_negatives must be >= 1")
        if len(self.bench_sizes) < 2 or any(s < 1 for s in self.bench_sizes):
            raise ConfigurationError(
                f"bench_sizes needs >= 2 positive sizes, got {self.bench_sizes}"
            )


# ---------------------------------------------------------------------------
# Coercion (YAML is friendly but loosely typed)
# ---------------------------------------------------------------------------


def _fail(key: str, value, expected: str) -> ConfigurationError:
    return ConfigurationError(f"config key '{key}' expects {expected}, got {value!r}")


def _as_int(key: str, value) -> int:
    if isinstance(value, bool):
        raise _fail(key, value, "an integer")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        try:
            as_float = float(value)
        except ValueError as exc:
            raise _fail(key, value, "an integer") from exc
        if as_float.is_integer():
            return int(as_float)
    raise _fail(key, value, "an integer")


def _as_float(key: str, value) -> float:
    if isinstance(value, bool):
        raise _fail(key, value, "a real number")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError as exc:
            raise _fail(key, value, "a real number") from exc
    raise _fail(key, value, "a real number")


def _as_str(key: str, value) -> str:
    if isinstance(value, str):
        return value
    raise _fail(key, value, "a string")


def _as_opt_path(key: str, value):
    if value is None:
        return None
    return _as_str(key, value)


def _as_bool(key: str, value) -> bool:
    if isinstance(value, bool):
        return value
    raise _fail(key, value, "a boolean")


def _as_label_source(key: str, value) -> str:
    # YAML parses a bare `true` as a boolean; that spelling means the
    # ground-truth label source here.
    if value is True:
        return "true"
    if isinstance(value, str):
        return value.lower()
    raise _fail(key, value, f"one of {LABEL_SOURCES}")


def _as_ratios(key: str, value) -> tuple[float, float, float]:
    if isinstance(value, (list, tuple)) and len(value) == 3:
        return tuple(_as_float(key, v) for v in value)  # type: ignore[return-value]
    raise _fail(key, value, "a list of three reals")


def _as_int_tuple(key: str, value) -> tuple[int, ...]:
    if isinstance(value, (list, tuple)):
        return tuple(_as_int(key, v) for v in value)
    raise _fail(key, value, "a list of integers")


def _as_opt_int(key: str, value):
    if value is None:
        return None
    return _as_int(key, value)


def _as_lower(key: str, value) -> str:
    return _as_str(key, value).lower()


_COERCERS = {
    "edges": _as_str,
    "features": _as_opt_path,
    "labels": _as_opt_path,
    "out": _as_str,
    "seed": _as_int,
    "ratios": _as_ratios,
    "negatives": _as_int,
    "label_source": _as_label_source,
    "k": _as_opt_int,
    "k_grid": lambda k, v: None if v is None else _as_int_tuple(k, v),
    "normalize_rows": _as_bool,
    "max_iters": _as_int,
    "mode": _as_lower,
    "dim": _as_int,
    "hidden": _as_int,
    "lr": _as_float,
    "momentum": _as_float,
    "epochs": _as_int,
    "patience": _as_int,
    "metric": _as_lower,
    "scorer": _as_lower,
    "hc_base": _as_lower,
    "gamma": _as_float,
    "katz_length": _as_int,
    "eval_split": _as_lower,
    "per_edge_negatives": _as_opt_int,
    "bench_sizes": _as_int_tuple,
}


def _coerce(key: str, value):
    return _COERCERS[key](key, value)


def load_config_file(path: str | Path) -> dict:
    """Parse a YAML config document into a plain mapping."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: invalid YAML ({exc})") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: config must be a key/value mapping")
    return data


# ---------------------------------------------------------------------------
# Digests
# ---------------------------------------------------------------------------

_INGEST_KEYS = ("edges", "features", "labels")
_SPLIT_KEYS = _INGEST_KEYS + ("seed", "ratios", "negatives")
_LABEL_KEYS = _SPLIT_KEYS + (
    "label_source",
    "k",
    "k_grid",
    "normalize_rows",
    "max_iters",
)
_TRAIN_KEYS = _LABEL_KEYS + ("mode", "dim", "hidden", "lr", "momentum", "epochs", "patience")
_EVAL_KEYS = _TRAIN_KEYS + (
    "metric",
    "scorer",
    "hc_base",
    "gamma",
    "katz_length",
    "eval_split",
    "per_edge_negatives",
)

STAGE_KEYS: dict[str, tuple[str, ...]] = {
    "ingest": _INGEST_KEYS,
    "split": _SPLIT_KEYS,
    "cluster": _LABEL_KEYS,
    "prior": _LABEL_KEYS,
    "heatmap": _LABEL_KEYS,
    "train": _TRAIN_KEYS,
    "evaluate": _EVAL_KEYS,
    "bench": ("seed", "bench_sizes"),
}


def _digest_of(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def config_digest(cfg: RunConfig) -> str:
    """Digest of the full configuration (output dir excluded)."""
    mapping = cfg.to_mapping()
    mapping.pop("out")
    return _digest_of(mapping)


def stage_digest(cfg: RunConfig, stage: str) -> str:
    """Digest over the config keys a pipeline stage depends on.

    Key sets are cumulative along the pipeline, so changing an upstream
    value (e.g. the seed) changes every downstream stage digest, while an
    evaluation-only change leaves train artifacts valid.
    """
    if stage not in STAGE_KEYS:
        raise ConfigurationError(f"unknown pipeline stage '{stage}'")
    mapping = cfg.to_mapping()
    return _digest_of({key: mapping[key] for key in STAGE_KEYS[stage]})
