"""The six edit metrics, computed through responders so memory and in-context methods are measured on their real query path."""
from __future__ import annotations

import math
from collections import Counter
from collections.abc import Sequence
from typing import Optional
from typing import Union

from logger import get_logger
from microedit.domain.editors import EditOutcome
from microedit.domain.editors import ModelResponder
from microedit.domain.editors import Responder
from microedit.domain.factworld import EditRequest
from microedit.domain.microlm import ModelState
from microedit.shared.exception import ContractError

from .models import FRACTION_FIELDS
from .models import MetricReport

logger = get_logger(__name__)

Answerer = Union[ModelState, Responder]

BIGRAM_WEIGHT = 1.0 / 3.0
TRIGRAM_WEIGHT = 2.0 / 3.0


def as_responder(model: Answerer, max_answer_tokens: int = 4) -> Responder:
    if isinstance(model, Responder):
        return model
    return ModelResponder(model, max_answer_tokens)


def reliability(post: Answerer, request: EditRequest) -> float:
    return 1.0 if as_responder(post).answer_matches(request.edit_prompt, request.target) else 0.0


def generalization(post: Answerer, request: EditRequest) -> float:
    if not request.rephrases:
        raise ContractError('generalization needs at least one rephrase', details={'case_id': request.case_id})
    responder = as_responder(post)
    return sum(responder.answer_matches(p, request.target) for p in request.rephrases) / len(request.rephrases)


def locality(pre: Answerer, post: Answerer, request: EditRequest) -> float:
    """Agreement of the edited model with the base model on out-of-scope probes."""
    if not request.locality_probes:
        raise ContractError('locality needs at least one probe', details={'case_id': request.case_id})
    before, after = as_responder(pre), as_responder(post)
    agree = sum(after.answer(p.prompt) == before.answer(p.prompt) for p in request.locality_probes)
    return agree / len(request.locality_probes)


def portability(post: Answerer, request: EditRequest) -> float:
    if not request.portability_probes:
        raise ContractError('portability needs at least one probe', details={'case_id': request.case_id})
    responder = as_responder(post)
    hits = sum(responder.answer_matches(p.prompt, p.expected) for p in request.portability_probes)
    return hits / len(request.portability_probes)


def ngram_entropy(tokens: Sequence[str], n: int) -> float:
    """Entropy in bits of the empirical n-gram distribution of `tokens`."""
    grams = Counter(tuple(tokens[i: i + n]) for i in range(len(tokens) - n + 1))
    total = sum(grams.values())
    if not total:
        return 0.0
    return max(0.0, -sum(c / total * math.log2(c / total) for c in grams.values()))


def fluency_score(tokens: Sequence[str]) -> float:
    return BIGRAM_WEIGHT * ngram_entropy(tokens, 2) + TRIGRAM_WEIGHT * ngram_entropy(tokens, 3)


def fluency(post: Answerer, request: EditRequest, gen_len: int = 50) -> tuple[float, bool]:
    """
    Weighted n-gram entropy of a greedy continuation of the edit prompt.

    Generation ignores the end token and is clamped to the context headroom.

    Returns:
        (fluency, degenerate): degenerate when fewer than 3 tokens were generated
    """
    if gen_len < 3:
        raise ContractError(f'gen_len must be at least 3, got {gen_len}')
    responder = as_responder(post)
    max_new = min(gen_len, responder.headroom(request.edit_prompt))
    generated = responder.generate(request.edit_prompt, max_new, stop_at_end=False) if max_new > 0 else []
    if len(generated) < 3:
        logger.warning('Degenerate generation for fluency', extra={'case_id': request.case_id, 'tokens': len(generated)})
        return 0.0, True
    return fluency_score(generated), False


def efficiency(outcome: EditOutcome) -> tuple[float, int]:
    return outcome.elapsed_seconds, outcome.extra_state_bytes


def token_overlap(predicted: Sequence[str], expected: Sequence[str]) -> float:
    """Fraction of expected tokens reproduced at their position."""
    if not expected:
        return 1.0 if not predicted else 0.0
    return sum(1 for p, e in zip(predicted, expected) if p == e) / len(expected)


def evaluate_edit(
    pre: Answerer,
    post: Answerer,
    request: EditRequest,
    outcome: Optional[EditOutcome] = None,
    gen_len: int = 50,
) -> MetricReport:
    """All six metrics for one request; neither model is mutated."""
    responder = as_responder(post)
    seconds, extra = efficiency(outcome) if outcome is not None else (0.0, 0)
    fluent, degenerate = fluency(responder, request, gen_len)
    return MetricReport(
        case_id=request.case_id,
        reliability=reliability(responder, request),
        generalization=generalization(responder, request),
        locality=locality(pre, responder, request),
        portability=portability(responder, request),
        fluency=fluent,
        elapsed_seconds=seconds,
        extra_state_bytes=extra,
        token_overlap=token_overlap(responder.answer(request.edit_prompt), request.target),
        degenerate=degenerate,
    )


def failed_report(request: EditRequest, category: str, elapsed_seconds: float = 0.0) -> MetricReport:
    return MetricReport(case_id=request.case_id, elapsed_seconds=elapsed_seconds, error=category)


def _mean(values: list[float]) -> float:
    if all(v == values[0] for v in values):
        return values[0]
    return math.fsum(values) / len(values)


def aggregate(reports: Sequence[MetricReport]) -> MetricReport:
    """Mean of fractions, fluency and token overlap; sum of seconds; max of bytes."""
    if not reports:
        raise ContractError('aggregate needs at least one report')
    means = {f: _mean([getattr(r, f) for r in reports]) for f in (*FRACTION_FIELDS, 'fluency', 'token_overlap')}
    return MetricReport(
        **means,
        elapsed_seconds=math.fsum(r.elapsed_seconds for r in reports),
        extra_state_bytes=max(r.extra_state_bytes for r in reports),
    )
