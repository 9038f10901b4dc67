from __future__ import annotations

from .hparams import HparamSet

__all__ = ['HparamSet']
