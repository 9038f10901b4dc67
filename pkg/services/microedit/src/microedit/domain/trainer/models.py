from __future__ import annotations

from typing import Optional

from base import BaseModel
from microedit.domain.factworld import EditRequest
from microedit.domain.factworld import FactWorld
from microedit.domain.microlm import ModelConfig
from microedit.domain.microlm import ModelState
from pydantic import Field


class TrainRun(BaseModel):
    steps: int = Field(..., ge=1, description='Maximum optimizer steps')
    batch_size: int = Field(..., ge=1)
    learning_rate: float = Field(..., gt=0.0)
    seed: int = 0
    momentum: float = 0.9
    warmup_fraction: float = 0.05
    eval_interval: int = 250
    patience: int = 3
    log_interval: int = 100

    loss_curve: list[tuple[int, float]] = Field(default_factory=list)
    validation: list[tuple[int, float]] = Field(default_factory=list)
    best_step: Optional[int] = None
    best_recall: Optional[float] = None
    stopped_early: bool = False

    @property
    def warmup_steps(self) -> int:
        return max(1, round(self.steps * self.warmup_fraction))

    def learning_rate_at(self, step: int) -> float:
        return self.learning_rate * min(1.0, (step + 1) / self.warmup_steps)


class LMTrainInput(BaseModel):
    world: FactWorld
    config: ModelConfig
    run: TrainRun
    corpus: Optional[list[list[str]]] = None


class LMTrainOutput(BaseModel):
    model: ModelState
    run: TrainRun


class ClassifierTrainInput(BaseModel):
    model: ModelState
    world: FactWorld
    seed: int = 0
    exclude: list[EditRequest] = Field(default_factory=list, description='Edits whose facts stay out of the training slice')
