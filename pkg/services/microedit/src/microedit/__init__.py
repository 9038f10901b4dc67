from __future__ import annotations

from microedit.cli import main
from microedit.cli import run

__all__ = ['main', 'run']
