from __future__ import annotations

from typing import ClassVar

import numpy as np
from microedit.domain.factworld import EditRequest
from microedit.domain.microlm import ModelState
from microedit.numerics import Graph
from microedit.numerics import grad
from microedit.shared.exception import DivergenceError
from microedit.shared.settings import FTLKnobs

from .base import BaseEditor
from .context import prepare_request
from .context import request_nll
from .models import EditArea
from .models import EditorCapabilities
from .models import Family
from .responders import ModelResponder


class FTLEditor(BaseEditor):
    """Constrained fine-tuning of one MLP `down` matrix under an L-infinity box."""

    name: ClassVar[str] = 'ftl'
    family: ClassVar[Family] = Family.LOCATE_THEN_EDIT
    capabilities: ClassVar[EditorCapabilities] = EditorCapabilities(
        supports_batch=False, supports_sequential=True, needs_training=False, edit_area=EditArea.MLP,
    )
    weight_editor: ClassVar[bool] = True

    def execute(self, model: ModelState, requests: list[EditRequest], knobs: FTLKnobs):
        request = requests[0]
        address = self.hparams.targets[0]
        W0 = model.weights[address].copy()
        low, high = W0 - knobs.eps_inf, W0 + knobs.eps_inf
        prepared = prepare_request(model, request.edit_prompt, request.target)
        check = ModelResponder(model, self.context.max_answer_tokens)

        losses: list[float] = []
        steps = 0
        for steps in range(knobs.steps):
            if check.answer_matches(request.edit_prompt, request.target):
                break
            graph = Graph()
            params = model.parameters(graph, [address])
            loss = request_nll(model, prepared, graph=graph, params=params)
            value = float(loss.value)
            if not np.isfinite(value):
                raise DivergenceError(
                    f'Fine-tuning loss became non-finite at step {steps}',
                    details={'address': address, 'step': steps},
                    last_good=model.weights[address].copy(),
                )
            losses.append(value)
            g = grad(loss, params)[address]
            model.weights[address] = np.clip(model.weights[address] - knobs.lr * g, low, high)
        else:
            steps = knobs.steps

        return {}, {
            'address': address,
            'steps': steps,
            'loss_first': losses[0] if losses else None,
            'loss_last': losses[-1] if losses else None,
            'max_abs_change': float(np.max(np.abs(model.weights[address] - W0))),
        }
