from __future__ import annotations

from .utils import canonical_json
from .utils import content_hash
from .utils import get_settings
from .utils import resolve_seed

__all__ = ['canonical_json', 'content_hash', 'get_settings', 'resolve_seed']
