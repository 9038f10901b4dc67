"""Single, batch and sequential editing regimes over a benchmark."""
from __future__ import annotations

import time
from collections.abc import Sequence
from typing import Optional

from logger import get_logger
from microedit.domain.editors import BaseEditor
from microedit.domain.editors import EditOutcome
from microedit.domain.editors import ModelResponder
from microedit.domain.editors import Responder
from microedit.domain.evaluate import MetricReport
from microedit.domain.evaluate import aggregate
from microedit.domain.evaluate import evaluate_edit
from microedit.domain.evaluate import failed_report
from microedit.domain.factworld import EditRequest
from microedit.domain.microlm import ModelState
from microedit.domain.microlm import clone_state
from microedit.shared.exception import CapabilityError
from microedit.shared.exception import MicroEditError
from microedit.shared.exception import TrainingRequiredError
from microedit.shared.models import HparamSet

from .models import BenchReport
from .models import RegimeKind
from .models import RegimeSpec

logger = get_logger(__name__)


def check_regime(editor: BaseEditor, regime: RegimeSpec, n_requests: int) -> None:
    """
    Reject regimes the editor's capabilities do not admit, before any mutation.

    Raises:
        CapabilityError, TrainingRequiredError
    """
    caps = editor.capabilities
    if regime.kind == RegimeKind.BATCH and regime.batch_size > 1 and not caps.supports_batch:
        raise CapabilityError(
            f'{editor.name} does not support batch editing',
            details={'method': editor.name, 'regime': regime.kind.value, 'batch_size': regime.batch_size},
        )
    if regime.kind == RegimeKind.SEQUENTIAL and n_requests > 1 and not caps.supports_sequential:
        raise CapabilityError(
            f'{editor.name} does not support sequential editing',
            details={'method': editor.name, 'regime': regime.kind.value},
        )
    if caps.needs_training and not editor.is_trained():
        raise TrainingRequiredError(f'{editor.name} needs additional training before editing', details={'method': editor.name})


def chunks(requests: Sequence[EditRequest], size: int) -> list[list[EditRequest]]:
    return [list(requests[i: i + size]) for i in range(0, len(requests), size)]


class RegimeRunner:
    """Runs one editor over a benchmark under one regime; per-edit failures are recorded, not raised."""

    def __init__(self, model: ModelState, editor: BaseEditor, gen_len: int = 50):
        self.model = model
        self.editor = editor
        self.gen_len = gen_len
        self.base = ModelResponder(clone_state(model), editor.context.max_answer_tokens)

    def try_edit(self, requests: list[EditRequest], keep_original: bool) -> tuple[Optional[EditOutcome], Optional[str]]:
        try:
            return self.editor.apply_to_model(self.model, requests, keep_original=keep_original), None
        except MicroEditError as e:
            logger.warning(
                'Edit failed, recorded as a miss',
                extra={'method': self.editor.name, 'case_ids': [r.case_id for r in requests], 'category': e.category},
            )
            return None, e.category

    def evaluate(self, post: Responder, request: EditRequest, outcome: Optional[EditOutcome], share: int = 1) -> MetricReport:
        try:
            report = evaluate_edit(self.base, post, request, outcome, self.gen_len)
        except MicroEditError as e:
            logger.warning('Evaluation failed', extra={'case_id': request.case_id, 'category': e.category})
            return failed_report(request, e.category)
        if share > 1:
            report = report.model_copy(update={'elapsed_seconds': report.elapsed_seconds / share})
        return report

    def run_chunk(self, requests: list[EditRequest]) -> list[MetricReport]:
        """Edit, evaluate every member, roll back."""
        outcome, error = self.try_edit(requests, keep_original=True)
        if outcome is None:
            return [failed_report(r, error) for r in requests]
        try:
            post = self.editor.responder(self.model)
            return [self.evaluate(post, r, outcome, share=len(requests)) for r in requests]
        finally:
            self.editor.rollback(self.model, outcome)

    def run_sequential(self, requests: list[EditRequest]) -> list[MetricReport]:
        outcomes: dict[int, EditOutcome] = {}
        errors: dict[int, str] = {}
        for request in requests:
            outcome, error = self.try_edit([request], keep_original=False)
            if outcome is None:
                errors[request.case_id] = error
            else:
                outcomes[request.case_id] = outcome
        post = self.editor.responder(self.model)
        return [
            failed_report(r, errors[r.case_id]) if r.case_id in errors else self.evaluate(post, r, outcomes[r.case_id])
            for r in requests
        ]


def run_regime(
    model: ModelState,
    editor: BaseEditor,
    benchmark: Sequence[EditRequest],
    regime: RegimeSpec,
    hparams: Optional[HparamSet] = None,
    gen_len: int = 50,
    world_seed: int = 0,
) -> BenchReport:
    """
    Run `editor` over `benchmark` under `regime`.

    Single and batch regimes roll back after every edit call, so `model` ends
    bitwise equal to its starting weights; the sequential regime keeps every
    edit and evaluates all requests against the final model.

    Raises:
        CapabilityError, TrainingRequiredError: the regime is not admitted; nothing was mutated
    """
    if hparams is not None:
        editor.hparams = hparams
    requests = list(benchmark)
    check_regime(editor, regime, len(requests))
    editor.reset()

    start = time.perf_counter()
    runner = RegimeRunner(model, editor, gen_len)
    logger.info(
        'Running regime',
        extra={'method': editor.name, 'regime': regime.kind.value, 'batch_size': regime.batch_size, 'edits': len(requests)},
    )
    if regime.kind == RegimeKind.SEQUENTIAL:
        reports = runner.run_sequential(requests)
    else:
        reports = []
        for chunk in chunks(requests, regime.batch_size):
            reports.extend(runner.run_chunk(chunk))

    summary = aggregate(reports) if reports else None
    report = BenchReport(
        method=editor.name,
        regime=regime.kind,
        batch_size=regime.batch_size,
        hparams_fingerprint=editor.hparams.fingerprint(),
        update_form=editor.update_form(),
        world_seed=world_seed,
        reports=reports,
        aggregate=summary,
        wall_seconds=time.perf_counter() - start,
    )
    logger.info(
        'Regime finished',
        extra={
            'method': editor.name,
            'regime': regime.kind.value,
            'failures': sum(r.error is not None for r in reports),
            'reliability': summary.reliability if summary else None,
        },
    )
    return report
