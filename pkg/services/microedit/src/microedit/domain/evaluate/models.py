from __future__ import annotations

from typing import Any
from typing import Optional

from base import BaseModel
from microedit.domain.factworld import EditRequest
from pydantic import Field

FRACTION_FIELDS = ('reliability', 'generalization', 'locality', 'portability')


class MetricReport(BaseModel):
    case_id: Optional[int] = None
    reliability: float = Field(0.0, ge=0.0, le=1.0)
    generalization: float = Field(0.0, ge=0.0, le=1.0)
    locality: float = Field(0.0, ge=0.0, le=1.0)
    portability: float = Field(0.0, ge=0.0, le=1.0)
    fluency: float = Field(0.0, ge=0.0, description='Weighted bigram/trigram entropy in bits')
    elapsed_seconds: float = Field(0.0, ge=0.0)
    extra_state_bytes: int = Field(0, ge=0)
    token_overlap: float = Field(0.0, ge=0.0, le=1.0)
    degenerate: bool = False
    error: Optional[str] = Field(default=None, description='Error category when the edit failed')

    @property
    def efficiency(self) -> tuple[float, int]:
        return self.elapsed_seconds, self.extra_state_bytes

    def record(self, timing: bool = True) -> dict[str, Any]:
        """Line-delimited report record with the fixed field names."""
        row: dict[str, Any] = {
            'case_id': self.case_id,
            'reliability': self.reliability,
            'generalization': self.generalization,
            'locality': self.locality,
            'portability': self.portability,
            'fluency': self.fluency,
            'extra_bytes': self.extra_state_bytes,
            'token_overlap': self.token_overlap,
        }
        if timing:
            row['time_s'] = self.elapsed_seconds
        if self.degenerate:
            row['degenerate'] = True
        if self.error is not None:
            row['error'] = self.error
        return row


class EvaluateInput(BaseModel):
    pre: Any = Field(..., description='Base model or its responder')
    post: Any = Field(..., description='Edited model or the editor responder')
    request: EditRequest
    outcome: Any = None
