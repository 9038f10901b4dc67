from __future__ import annotations

from typing import ClassVar

import numpy as np
from logger import get_logger
from microedit.domain.factworld import EditRequest
from microedit.domain.microlm import ModelState
from microedit.domain.microlm import causal_trace
from microedit.domain.microlm import layer_of
from microedit.domain.microlm import select_edit_layer
from microedit.shared.exception import LocalizationError
from microedit.shared.settings import ROMEKnobs

from .base import BaseEditor
from .context import prepare_request
from .locate import compute_key
from .locate import covariance
from .locate import optimize_value
from .locate import rank_one_update
from .locate import second_moment
from .locate import with_ridge_retry
from .models import EditArea
from .models import EditorCapabilities
from .models import Family

logger = get_logger(__name__)


class ROMEEditor(BaseEditor):
    name: ClassVar[str] = 'rome'
    family: ClassVar[Family] = Family.LOCATE_THEN_EDIT
    capabilities: ClassVar[EditorCapabilities] = EditorCapabilities(
        supports_batch=False, supports_sequential=True, needs_training=False, edit_area=EditArea.MLP,
    )
    weight_editor: ClassVar[bool] = True

    def edit_layer(self, model: ModelState, request: EditRequest, knobs: ROMEKnobs) -> int:
        configured = layer_of(self.hparams.targets[0])
        if not knobs.auto_layer:
            return configured
        trace = causal_trace(
            model, request,
            noise_scale=self.context.trace_noise_scale,
            n_samples=self.context.trace_samples,
            seed=self.context.seed,
        )
        try:
            layer = select_edit_layer(trace)
        except LocalizationError:
            logger.warning('Causal trace is flat, using the configured layer', extra={'layer': configured})
            return configured
        self._also_allowed.add(f'blocks.{layer}.mlp.down')
        return layer

    def execute(self, model: ModelState, requests: list[EditRequest], knobs: ROMEKnobs):
        request = requests[0]
        layer = self.edit_layer(model, request, knobs)
        address = f'blocks.{layer}.mlp.down'

        k = compute_key(model, self.context, request, layer, knobs.n_prefix)
        moment = second_moment(model, self.context, layer, knobs.covariance_samples)
        W = model.weights[address]
        v0 = W @ k

        prepared = prepare_request(model, request.edit_prompt, request.target)
        v_star, losses = optimize_value(
            model, prepared, address,
            position=request.subject_span[1] - 1,
            v0=v0,
            steps=knobs.v_steps,
            lr=knobs.v_lr,
            beta=knobs.beta,
            exit_layer=knobs.value_loss_layer,
        )
        (W_new, _), ridge = with_ridge_retry(
            lambda r: rank_one_update(W, covariance(moment, r), k, v_star), knobs.ridge, address,
        )
        model.weights[address] = W_new
        exactness = float(np.max(np.abs(W_new @ k - v_star)))
        return {}, {
            'address': address,
            'layer': layer,
            'ridge': ridge,
            'v_loss_first': losses[0] if losses else None,
            'v_loss_last': losses[-1] if losses else None,
            'exactness': exactness,
            'key_norm': float(np.linalg.norm(k)),
        }
