"""Service configuration: file plus environment overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path

import yaml

ENV_PREFIX = "CELLCROWD_"


@dataclass
class OrchestratorConfig:
    port: int = 8040
    host: str = "127.0.0.1"
    k: int = 5
    reward_cents: int = 1
    claim_ttl_seconds: float = 3600.0          # 1 hour per assignment
    task_ttl_seconds: float = 3 * 86400.0      # 3 day task expiration
    auto_approve_seconds: float = 7 * 86400.0  # 7 day auto-approval
    min_approval_rate: float = 0.90            # strict >, masters only
    require_master: bool = True
    data_dir: str = ""                         # event log + snapshots; empty = memory only
    crops_dir: str = ""                        # static cell images for the UI
    frontend_dir: str = ""                     # compiled labeling UI, served at /app
    snapshot_interval: int = 1000

    @classmethod
    def load(cls, path: str | Path | None = None, env: dict | None = None) -> "OrchestratorConfig":
        """Read config from a YAML/JSON file, then apply env overrides
        (CELLCROWD_<FIELD>, e.g. CELLCROWD_PORT=9000)."""
        values: dict = {}
        if path:
            text = Path(path).read_text()
            loaded = yaml.safe_load(text) if str(path).endswith((".yml", ".yaml")) else json.loads(text)
            values.update(loaded or {})
        env = os.environ if env is None else env
        for f in fields(cls):
            key = ENV_PREFIX + f.name.upper()
            if key in env:
                raw = env[key]
                if f.type in ("int", int):
                    values[f.name] = int(raw)
                elif f.type in ("float", float):
                    values[f.name] = float(raw)
                elif f.type in ("bool", bool):
                    values[f.name] = raw.lower() in ("1", "true", "yes")
                else:
                    values[f.name] = raw
        unknown = set(values) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values)
