from __future__ import annotations

from .metrics import aggregate
from .metrics import as_responder
from .metrics import efficiency
from .metrics import evaluate_edit
from .metrics import failed_report
from .metrics import fluency
from .metrics import fluency_score
from .metrics import generalization
from .metrics import locality
from .metrics import ngram_entropy
from .metrics import portability
from .metrics import reliability
from .metrics import token_overlap
from .models import EvaluateInput
from .models import MetricReport
from .service import EvaluateService

__all__ = [
    'EvaluateInput',
    'EvaluateService',
    'MetricReport',
    'aggregate',
    'as_responder',
    'efficiency',
    'evaluate_edit',
    'failed_report',
    'fluency',
    'fluency_score',
    'generalization',
    'locality',
    'ngram_entropy',
    'portability',
    'reliability',
    'token_overlap',
]
