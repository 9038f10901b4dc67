from __future__ import annotations

from base import BaseModel


class TrainerSettings(BaseModel):
    max_steps: int = 30_000
    batch_size: int = 32
    learning_rate: float = 3e-3
    momentum: float = 0.9
    warmup_fraction: float = 0.05
    eval_interval: int = 250
    patience: int = 3
    log_interval: int = 100


class ClassifierSettings(BaseModel):
    n_facts: int = 60
    negatives_per_positive: int = 2
    steps: int = 500
    learning_rate: float = 1.0
    holdout_fraction: float = 0.3
