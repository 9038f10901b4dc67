from __future__ import annotations

from collections.abc import Sequence

from base import BaseModel
from base import BaseService
from logger import get_logger
from microedit.domain.editors import BaseEditor
from microedit.domain.editors import ModelResponder
from microedit.domain.evaluate import evaluate_edit
from microedit.domain.factworld import EditRequest
from microedit.domain.microlm import ModelState
from microedit.domain.microlm import clone_state
from pydantic import Field

from .models import EditResult

logger = get_logger(__name__)


class EditInput(BaseModel):
    requests: list[EditRequest]
    keep_original: bool = False


class EditorService(BaseService):
    """Edits a model through one editor and evaluates every request before and after the edit."""

    model: ModelState
    editor: BaseEditor
    gen_len: int = Field(50, ge=3)

    def edit(self, requests: Sequence[EditRequest], keep_original: bool = False) -> EditResult:
        """
        Args:
            requests (list[EditRequest]): one request, or a batch for batch-capable methods
            keep_original (bool): retain a snapshot so the edit can be rolled back

        Returns:
            EditResult: the outcome plus per-request metric reports before and after
        """
        requests = list(requests)
        base = ModelResponder(clone_state(self.model), self.editor.context.max_answer_tokens)
        before = [evaluate_edit(base, base, r, gen_len=self.gen_len) for r in requests]
        outcome = self.editor.apply_to_model(self.model, requests, keep_original=keep_original)
        post = self.editor.responder(self.model)
        after = [evaluate_edit(base, post, r, outcome, self.gen_len) for r in requests]
        logger.info(
            'Edited and evaluated',
            extra={
                'method': self.editor.name,
                'case_ids': [r.case_id for r in requests],
                'reliability_before': [b.reliability for b in before],
                'reliability_after': [a.reliability for a in after],
            },
        )
        return EditResult(outcome=outcome, before=before, after=after)

    def rollback(self, result: EditResult) -> None:
        self.editor.rollback(self.model, result.outcome)

    def process(self, inputs: EditInput) -> EditResult:
        return self.edit(inputs.requests, inputs.keep_original)
