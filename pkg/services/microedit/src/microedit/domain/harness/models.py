from __future__ import annotations

from enum import Enum
from typing import Any
from typing import Optional

from base import BaseModel
from microedit.domain.editors import EditOutcome
from microedit.domain.evaluate import MetricReport
from microedit.shared.exception import ContractError
from microedit.shared.utils import content_hash
from pydantic import Field
from pydantic import model_validator


class RegimeKind(str, Enum):
    SINGLE = 'single'
    BATCH = 'batch'
    SEQUENTIAL = 'sequential'


class RegimeSpec(BaseModel):
    kind: RegimeKind = RegimeKind.SINGLE
    batch_size: int = Field(1, ge=1, description='Requests per edit call; batch regime only')

    @model_validator(mode='after')
    def check_batch_size(self) -> RegimeSpec:
        if self.kind != RegimeKind.BATCH and self.batch_size != 1:
            raise ContractError(f'batch_size applies to the batch regime only, got {self.batch_size} for {self.kind.value}')
        return self

    @property
    def evaluation_point(self) -> str:
        return {
            RegimeKind.SINGLE: 'per-edit',
            RegimeKind.BATCH: 'per-chunk',
            RegimeKind.SEQUENTIAL: 'after-all',
        }[self.kind]

    @property
    def rolls_back(self) -> bool:
        return self.kind != RegimeKind.SEQUENTIAL


class BenchReport(BaseModel):
    method: str
    regime: RegimeKind
    batch_size: int = 1
    hparams_fingerprint: str
    update_form: Optional[str] = Field(None, description='Weight-update rule, for methods with more than one')
    world_seed: int
    reports: list[MetricReport] = Field(default_factory=list)
    aggregate: Optional[MetricReport] = None
    wall_seconds: float = Field(0.0, ge=0.0)

    def header(self) -> dict[str, Any]:
        return {
            'kind': 'bench',
            'method': self.method,
            'regime': self.regime.value,
            'batch_size': self.batch_size,
            'hparams_fingerprint': self.hparams_fingerprint,
            'world_seed': self.world_seed,
            'edits': len(self.reports),
            **({'update_form': self.update_form} if self.update_form else {}),
        }

    def content_hash(self) -> str:
        """Hash of everything but timing."""
        return content_hash(
            {
                'header': self.header(),
                'reports': [r.record(timing=False) for r in self.reports],
                'aggregate': self.aggregate.record(timing=False) if self.aggregate else None,
            },
        )


class EditResult(BaseModel):
    outcome: EditOutcome
    before: list[MetricReport]
    after: list[MetricReport]
