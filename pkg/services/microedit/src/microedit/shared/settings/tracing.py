from __future__ import annotations

from base import BaseModel


class TracingSettings(BaseModel):
    noise_scale: float = 3.0
    n_samples: int = 10
