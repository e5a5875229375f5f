"""Engine configuration shared by the CLI and the service.

Precedence: built-in defaults < config file (JSON) < explicit overrides.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .query_engine import DiversityParams, SimilarityParams
from .user_model import UpdatePolicy


@dataclass(frozen=True)
class EngineConfig:
    schema_path: str | None = None
    items_path: str | None = None
    data_dir: str = "./data"
    similarity_threshold: float = 0.05
    presentation_threshold: int = 3
    learn_rate: float = 0.1
    init_accepted: int = 9
    init_presented: int = 10
    constrain_strategy: str = "by-weight"
    relax_strategy: str = "by-weight"
    diversity_enabled: bool = False
    diversity_k_item: float = 1.0
    diversity_k_value: float = 1.0
    diversity_item_gap: int = 0
    diversity_value_gap: int = 0
    adapt: bool = True

    def similarity_params(self) -> SimilarityParams:
        return SimilarityParams(self.similarity_threshold, self.presentation_threshold)

    def update_policy(self) -> UpdatePolicy:
        return UpdatePolicy(self.learn_rate, self.init_accepted, self.init_presented)

    def diversity_params(self) -> DiversityParams:
        return DiversityParams(
            enabled=self.diversity_enabled,
            k_item=self.diversity_k_item,
            k_value=self.diversity_k_value,
            t_item_gap=self.diversity_item_gap,
            t_value_gap=self.diversity_value_gap,
        )


def load_config(path: str | Path | None = None, **overrides) -> EngineConfig:
    """Build a config: defaults, then the file's values, then overrides."""
    config = EngineConfig()
    if path is not None:
        data = json.loads(Path(path).read_text())
        known = {f.name for f in fields(EngineConfig)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        config = replace(config, **data)
    cleaned = {k: v for k, v in overrides.items() if v is not None}
    if cleaned:
        config = replace(config, **cleaned)
    return config
