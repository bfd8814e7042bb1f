"""Run configuration: key=value files, CLI overrides, and config hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

from .corpus import DEFAULT_HASHTAGS
from .errors import ConfigError


@dataclass
class RunConfig:
    """All tunables for the pipeline, with the documented defaults."""

    # corpus
    course_start: int = 0
    hashtags: tuple[str, ...] = DEFAULT_HASHTAGS
    seed: int = 0

    # state-transition topic model
    states: int = 10
    topics: int = 20
    sweeps: int = 2000
    burn_in: int = 1000
    thin: int = 10
    alpha: float = 0.1
    beta: float = 0.01
    nu: float = 0.1
    gamma: float = 0.1
    chains: int = 1
    scan: str = "fixed"  # fixed | random site order per sweep

    # relevance model
    features: str = "gc"  # base | g | c | gc
    latent_dim: int = 8
    learning_rate: float = 0.01
    reg: float = 0.01
    epochs: int = 200
    neg_ratio: int = 3

    # constrained assignment
    mode: str = "mccf_gc"
    goal_threshold: float = 1.0
    centrality_threshold: float = 0.1
    penalty_weight: float = 0.1
    user_cap: int = 5
    workload_cost: float = 0.0
    top_n: int = 5

    # analysis
    graph_categories: tuple[str, ...] = ("S1", "S2", "S3", "S7")
    top_words: int = 10

    def replace(self, **kwargs) -> "RunConfig":
        return dataclasses.replace(self, **kwargs)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["hashtags"] = list(self.hashtags)
        out["graph_categories"] = list(self.graph_categories)
        return out

    def hash(self) -> str:
        """Stable short digest of the full configuration."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _parse_value(key: str, raw: str):
    ftype = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        if ftype == "str":
            return raw
        # tuple-of-string fields use comma separation
        return tuple(part.strip() for part in raw.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


def load_config(path: str, base: RunConfig | None = None) -> RunConfig:
    """Parse a key=value config file on top of ``base`` (or the defaults).

    Blank lines and ``#`` comments are ignored.  Unknown keys are an error so
    typos do not silently fall back to defaults.
    """
    cfg = base or RunConfig()
    updates = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
            key, raw = stripped.split("=", 1)
            key = key.strip()
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            updates[key] = _parse_value(key, raw)
    return cfg.replace(**updates)
