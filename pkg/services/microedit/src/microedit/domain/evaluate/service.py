from __future__ import annotations

from base import BaseService
from logger import get_logger
from microedit.shared.settings import EvaluateSettings

from .metrics import as_responder
from .metrics import evaluate_edit
from .models import EvaluateInput
from .models import MetricReport

logger = get_logger(__name__)


class EvaluateService(BaseService):
    settings: EvaluateSettings

    def process(self, inputs: EvaluateInput) -> MetricReport:
        try:
            report = evaluate_edit(
                as_responder(inputs.pre, self.settings.max_answer_tokens),
                as_responder(inputs.post, self.settings.max_answer_tokens),
                inputs.request,
                inputs.outcome,
                self.settings.gen_len,
            )
        except Exception:
            logger.exception('Evaluation failed', extra={'case_id': inputs.request.case_id})
            raise
        logger.info('Evaluated edit', extra=report.record())
        return report
