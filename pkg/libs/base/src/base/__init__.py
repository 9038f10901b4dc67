from __future__ import annotations

from .base_model import CustomBaseModel
from .base_model import CustomBaseModel as BaseModel
from .base_model import FrozenModel
from .base_service import BaseService

__all__ = ['BaseModel', 'CustomBaseModel', 'FrozenModel', 'BaseService']
