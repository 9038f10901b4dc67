from __future__ import annotations

import time
from abc import ABC
from abc import abstractmethod
from collections.abc import Sequence
from typing import Any
from typing import ClassVar
from typing import Optional

from base import CustomBaseModel
from logger import get_logger
from logger import render_kv
from microedit.domain.factworld import EditRequest
from microedit.domain.microlm import ModelState
from microedit.domain.microlm import changed_addresses
from microedit.shared.exception import CapabilityError
from microedit.shared.exception import ContractError
from microedit.shared.exception import MicroEditError
from microedit.shared.exception import RollbackError
from microedit.shared.exception import TrainingRequiredError
from microedit.shared.models import HparamSet
from microedit.shared.settings import MethodKnobs
from pydantic import PrivateAttr

from .context import EditContext
from .models import EditorCapabilities
from .models import EditOutcome
from .models import Family
from .models import WeightDelta
from .responders import ModelResponder
from .responders import Responder

logger = get_logger(__name__)


class BaseEditor(ABC, CustomBaseModel):
    """
    Uniform editor contract.

    Subclasses implement `execute`; `apply_to_model` enforces the capability
    matrix before any mutation, times the edit, and makes it atomic.
    """

    name: ClassVar[str]
    family: ClassVar[Family]
    capabilities: ClassVar[EditorCapabilities]
    weight_editor: ClassVar[bool] = False

    hparams: HparamSet
    context: EditContext

    _pending: int = PrivateAttr(default=0)
    _also_allowed: set[str] = PrivateAttr(default_factory=set)

    @property
    def knobs(self) -> MethodKnobs:
        return self.hparams.method_knobs()

    def is_trained(self) -> bool:
        return True

    @abstractmethod
    def execute(self, model: ModelState, requests: list[EditRequest], knobs: MethodKnobs) -> tuple[dict[str, Any], dict[str, Any]]:
        """Perform the edit; returns (auxiliary payload, method_log)."""
        raise NotImplementedError

    def update_form(self) -> Optional[str]:
        """Name of the weight-update rule when the method offers more than one."""
        return None

    def aux_state(self) -> Any:
        return None

    def restore_aux(self, state: Any) -> None:
        return None

    def aux_bytes(self) -> int:
        return 0

    def responder(self, model: ModelState) -> Responder:
        return ModelResponder(model, self.context.max_answer_tokens)

    def check_capabilities(self, n_requests: int) -> None:
        caps = self.capabilities
        if n_requests < 1:
            raise ContractError('apply_to_model needs at least one request')
        if n_requests > 1 and not caps.supports_batch:
            raise CapabilityError(
                f'{self.name} does not support batch editing ({n_requests} requests given)',
                details={'method': self.name, 'capability': 'batch', 'requests': n_requests},
            )
        if self._pending and not caps.supports_sequential:
            raise CapabilityError(
                f'{self.name} does not support sequential editing; roll back the previous edit first',
                details={'method': self.name, 'capability': 'sequential'},
            )
        if caps.needs_training and not self.is_trained():
            raise TrainingRequiredError(
                f'{self.name} needs additional training before editing',
                details={'method': self.name},
            )

    def apply_to_model(
        self,
        model: ModelState,
        requests: Sequence[EditRequest],
        hparams: HparamSet | None = None,
        keep_original: bool = False,
    ) -> EditOutcome:
        """
        Apply the edit described by `requests` to `model`.

        Args:
            model (ModelState): mutated in place (weight methods) or left untouched
            requests (list[EditRequest]): more than one only for batch-capable methods
            hparams (HparamSet): overrides the editor's hparams for this call
            keep_original (bool): attach a snapshot so the edit can be rolled back

        Returns:
            EditOutcome: delta, timing, extra state size and diagnostics

        Raises:
            CapabilityError, TrainingRequiredError, plus the method's own errors
        """
        requests = list(requests)
        if hparams is not None:
            self.hparams = hparams
        knobs = self.knobs
        self.check_capabilities(len(requests))

        before = model.snapshot()
        aux_before = self.aux_state()
        start = time.perf_counter()
        try:
            auxiliary, method_log = self.execute(model, requests, knobs)
        except Exception as e:
            model.restore(before)
            self.restore_aux(aux_before)
            logger.exception(
                'Edit failed',
                extra={'method': self.name, 'case_ids': [r.case_id for r in requests], 'typed': isinstance(e, MicroEditError)},
            )
            raise
        elapsed = time.perf_counter() - start

        changed = changed_addresses(before, model)
        if changed and not self.weight_editor:
            model.restore(before)
            raise ContractError(f'{self.name} must not modify weights', details={'changed': changed})
        allowed = set(self.hparams.targets) | self._also_allowed
        if self.weight_editor and not set(changed) <= allowed:
            model.restore(before)
            raise ContractError(
                f'{self.name} modified weights outside its targets',
                details={'changed': changed, 'targets': sorted(allowed)},
            )
        delta = WeightDelta(
            weights={a: model.weights[a] - before.weights[a] for a in changed},
            auxiliary=auxiliary,
        )

        if self.weight_editor:
            extra = sum(w.nbytes for w in before.weights.values()) if keep_original else 0
        else:
            extra = self.aux_bytes()

        self._pending += 1
        outcome = EditOutcome(
            method=self.name,
            delta=delta,
            elapsed_seconds=elapsed,
            extra_state_bytes=extra,
            method_log=method_log,
            case_ids=[r.case_id for r in requests],
            snapshot=before if keep_original else None,
            aux_snapshot=aux_before,
        )
        logger.info(render_kv(f'{self.name}.edit', {**method_log, 'elapsed_s': round(elapsed, 6)}))
        return outcome

    def rollback(self, model: ModelState, outcome: EditOutcome) -> None:
        """Restore the pre-edit model bit-exactly and drop this edit's auxiliary entries.

        Raises:
            RollbackError: no snapshot (keep_original was false, or already rolled back)
        """
        if outcome.snapshot is None:
            raise RollbackError(
                'No snapshot retained for this edit',
                details={'method': self.name, 'case_ids': outcome.case_ids},
            )
        model.restore(outcome.snapshot)
        self.restore_aux(outcome.aux_snapshot)
        outcome.snapshot = None
        self._pending = max(0, self._pending - 1)
        logger.info('Rolled back edit', extra={'method': self.name, 'case_ids': outcome.case_ids})

    def reset(self) -> None:
        self._pending = 0
