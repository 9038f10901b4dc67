from __future__ import annotations

from .logger import get_logger
from .logger import render_kv
from .logger import setup_logging

__all__ = ['setup_logging', 'get_logger', 'render_kv']
