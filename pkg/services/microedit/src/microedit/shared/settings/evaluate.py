from __future__ import annotations

from base import BaseModel


class EvaluateSettings(BaseModel):
    gen_len: int = 50
    max_answer_tokens: int = 4
