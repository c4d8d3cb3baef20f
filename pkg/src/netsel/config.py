"""Run configuration read from a TOML file."""

from __future__ import annotations

import hashlib
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .classifiers import PredictorSpec
from .mdl import CODECS, K_GRID, canonical
from .netinfer import NetworkModelSpec
from .weights import DEFAULT_BUDGET, DEFAULT_FRACTION, KINDS

TASKS = ("cc", "lp")


class ConfigError(ValueError):
    """Raised for any invalid or inconsistent configuration."""


@dataclass(frozen=True)
class DataConfig:
    synthetic: dict | None = None
    events: str | None = None
    item_groups: str | None = None
    explicit_edges: str | None = None
    fractions: tuple = (1 / 3, 1 / 3, 1 / 3)
    value_threshold: float = 5.0
    item_threshold: int = 5
    top_items: int | None = None


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig
    networks: tuple
    weights: tuple
    tasks: tuple = ("cc",)
    predictors: tuple = (PredictorSpec(),)
    labels: tuple | None = None
    k_grid: tuple = K_GRID
    bootstrap: int = 20
    lam: float = 1.0
    top: int = 10
    exemplar_fraction: float = DEFAULT_FRACTION
    exemplar_budget: int = DEFAULT_BUDGET
    degree_mode: str = "total"
    noise_levels: tuple = (0.0, 0.1, 0.25, 0.5)
    noise_targets: tuple | None = None
    codec: str = "lz4"
    lp_pair_cap: int = 200
    lp_signed: bool = False
    seed: int = 0
    workers: int = 1
    out: str = "netsel-out"

    def with_overrides(self, seed=None, workers=None, out=None) -> "RunConfig":
        changes = {}
        if seed is not None:
            changes["seed"] = int(seed)
        if workers is not None:
            changes["workers"] = int(workers)
        if out is not None:
            changes["out"] = str(out)
        cfg = replace(self, **changes)
        _validate(cfg)
        return cfg

    def to_canonical(self) -> dict:
        """Every field that can change results (workers and out do not)."""
        d = asdict(self)
        d.pop("workers")
        d.pop("out")
        return d

    def digest(self) -> str:
        return hashlib.sha256(canonical(self, digits=None)).hexdigest()


def _tuple(v):
    return tuple(v) if isinstance(v, (list, tuple)) else (v,)


def _network(entry) -> NetworkModelSpec:
    if not isinstance(entry, dict):
        raise ConfigError("each [[networks]] entry must be a table")
    unknown = set(entry) - {"kind", "rho", "density", "similarity", "path"}
    if unknown:
        raise ConfigError(f"unknown network keys: {sorted(unknown)}")
    try:
        return NetworkModelSpec(**entry)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad network spec {entry}: {exc}") from exc


def _predictors(section) -> tuple:
    kinds = _tuple(section.get("kinds", ["forest"]))
    out = []
    for kind in kinds:
        params = dict(section.get(kind, {}))
        try:
            out.append(PredictorSpec(kind=kind, **params))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad predictor {kind!r}: {exc}") from exc
    return tuple(out)


def _validate(cfg: RunConfig) -> None:
    d = cfg.data
    if (d.synthetic is None) == (d.events is None):
        raise ConfigError("[data] needs exactly one of 'synthetic' or 'events'")
    if d.events is not None and d.item_groups is None:
        raise ConfigError("[data] 'events' requires 'item_groups'")
    if len(d.fractions) != 3 or any(f < 0 for f in d.fractions) or abs(sum(d.fractions) - 1) > 1e-9:
        raise ConfigError("[data] fractions must be three non-negative reals summing to 1")
    for w in cfg.weights:
        if w not in KINDS:
            raise ConfigError(f"unknown weight kind {w!r}")
    if not cfg.weights:
        raise ConfigError("at least one weight kind is required")
    for t in cfg.tasks:
        if t not in TASKS:
            raise ConfigError(f"unknown task {t!r}")
    if not cfg.tasks:
        raise ConfigError("at least one task is required")
    if not cfg.predictors:
        raise ConfigError("at least one predictor is required")
    if len({p.kind for p in cfg.predictors}) != len(cfg.predictors):
        raise ConfigError("predictor kinds must be distinct")
    if cfg.labels is not None and not cfg.labels:
        raise ConfigError("label selection is empty")
    if not cfg.k_grid or any(int(k) <= 0 for k in cfg.k_grid) or len(set(cfg.k_grid)) != len(cfg.k_grid):
        raise ConfigError("k_grid must be distinct positive integers")
    if cfg.bootstrap < 1:
        raise ConfigError("bootstrap must be >= 1")
    if not 0 < cfg.exemplar_fraction <= 1:
        raise ConfigError("exemplar_fraction must be in (0, 1]")
    if cfg.exemplar_budget < 1:
        raise ConfigError("exemplar_budget must be >= 1")
    if cfg.degree_mode not in ("in", "out", "total"):
        raise ConfigError("degree_mode must be in/out/total")
    if any(not 0 <= p <= 1 for p in cfg.noise_levels):
        raise ConfigError("noise levels must lie in [0, 1]")
    if cfg.codec not in CODECS:
        raise ConfigError(f"codec must be one of {CODECS}")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    needs_net = any(w in ("degree_flat", "cluster", "bfs", "degree_net") for w in cfg.weights)
    if needs_net and not cfg.networks:
        raise ConfigError("network-backed weight kinds need at least one [[networks]] entry")
    if any(n.kind == "explicit" for n in cfg.networks) and d.explicit_edges is None:
        raise ConfigError("an explicit network needs [data] explicit_edges")


_TOP_KEYS = {"seed", "workers", "out", "data", "networks", "weights", "tasks", "predictors",
             "selection", "noise"}


def parse_config(text: str, base_dir: Path | str = ".") -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    base = Path(base_dir)

    data_raw = dict(raw.get("data", {}))
    for key in ("events", "item_groups", "explicit_edges"):
        if key in data_raw:
            data_raw[key] = str((base / data_raw[key]).resolve())
    if "fractions" in data_raw:
        data_raw["fractions"] = tuple(float(f) for f in data_raw["fractions"])
    try:
        data = DataConfig(**data_raw)
    except TypeError as exc:
        raise ConfigError(f"bad [data] section: {exc}") from exc

    weights_raw = raw.get("weights", {})
    tasks_raw = raw.get("tasks", {})
    sel_raw = raw.get("selection", {})
    noise_raw = raw.get("noise", {})
    try:
        labels = tasks_raw.get("labels")
        targets = noise_raw.get("targets")
        cfg = RunConfig(
            data=data,
            networks=tuple(_network(e) for e in raw.get("networks", [])),
            weights=_tuple(weights_raw.get("kinds", [])),
            tasks=_tuple(tasks_raw.get("kinds", ["cc"])),
            predictors=_predictors(raw.get("predictors", {})),
            labels=None if labels is None else _tuple(labels),
            k_grid=tuple(int(k) for k in tasks_raw.get("k_grid", K_GRID)),
            bootstrap=int(tasks_raw.get("bootstrap", 20)),
            lam=float(sel_raw.get("lambda", 1.0)),
            top=int(sel_raw.get("top", 10)),
            exemplar_fraction=float(weights_raw.get("exemplar_fraction", DEFAULT_FRACTION)),
            exemplar_budget=int(weights_raw.get("exemplar_budget", DEFAULT_BUDGET)),
            degree_mode=str(weights_raw.get("degree_mode", "total")),
            noise_levels=tuple(float(p) for p in noise_raw.get("levels", (0.0, 0.1, 0.25, 0.5))),
            noise_targets=None if targets is None else _tuple(targets),
            codec=str(sel_raw.get("codec", "lz4")),
            lp_pair_cap=int(tasks_raw.get("lp_pair_cap", 200)),
            lp_signed=bool(tasks_raw.get("lp_signed", False)),
            seed=int(raw.get("seed", 0)),
            workers=int(raw.get("workers", 1)),
            out=str(base / raw.get("out", "netsel-out")),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    _validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, path.parent)

