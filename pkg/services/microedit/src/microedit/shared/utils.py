from __future__ import annotations

import hashlib
import json
import os
from functools import lru_cache
from typing import Any

from microedit.shared.settings import Settings


@lru_cache
def get_settings() -> Settings:
    return Settings()  # type: ignore


def resolve_seed(seed: int | None, settings: Settings | None = None) -> int:
    """Explicit seed, else `MICROEDIT_SEED`, else the configured seed."""
    if seed is not None:
        return int(seed)
    env_seed = os.environ.get('MICROEDIT_SEED')
    if env_seed is not None and env_seed.strip():
        return int(env_seed)
    return (settings or get_settings()).seed


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, separators=(',', ':'), ensure_ascii=False)


def content_hash(payload: Any) -> str:
    return hashlib.sha256(canonical_json(payload).encode('utf-8')).hexdigest()
