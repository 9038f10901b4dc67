from __future__ import annotations

from base import BaseModel


class LoggingSettings(BaseModel):
    level: str = 'INFO'
    json_logs: bool = False
