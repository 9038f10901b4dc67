from __future__ import annotations

from typing import ClassVar

import numpy as np
from logger import get_logger
from microedit.domain.factworld import EditRequest
from microedit.domain.microlm import ModelState
from microedit.domain.microlm import layer_of
from microedit.numerics import solve_spd
from microedit.shared.exception import EditFailure
from microedit.shared.settings import MEMITKnobs

from .base import BaseEditor
from .context import prepare_request
from .locate import compute_key
from .locate import covariance
from .locate import optimize_value
from .locate import second_moment
from .locate import with_ridge_retry
from .models import EditArea
from .models import EditorCapabilities
from .models import Family

logger = get_logger(__name__)


def spread_update(res: np.ndarray, K: np.ndarray, C: np.ndarray, mass_least_squares: bool = False) -> np.ndarray:
    """
    Weight change mapping the keys K [d_in, N] onto the residuals Res [d_out, N].

    The default is the constrained least-squares form Res (K^T C^-1 K)^-1 K^T C^-1,
    which reduces to the rank-one update for one key; `mass_least_squares`
    selects Res K^T (C + K K^T)^-1.
    """
    if mass_least_squares:
        return res @ solve_spd(C + K @ K.T, K).T
    c_inv_k = solve_spd(C, K)
    gram = K.T @ c_inv_k
    return res @ solve_spd(0.5 * (gram + gram.T), c_inv_k.T)


class MEMITEditor(BaseEditor):
    name: ClassVar[str] = 'memit'
    family: ClassVar[Family] = Family.LOCATE_THEN_EDIT
    capabilities: ClassVar[EditorCapabilities] = EditorCapabilities(
        supports_batch=True, supports_sequential=True, needs_training=False, edit_area=EditArea.MLP,
    )
    weight_editor: ClassVar[bool] = True

    def update_form(self) -> str:
        return self.knobs.update_form

    def execute(self, model: ModelState, requests: list[EditRequest], knobs: MEMITKnobs):
        layers = sorted(layer_of(a) for a in self.hparams.targets)
        last = layers[-1]
        last_address = f'blocks.{last}.mlp.down'

        # target values at the last layer of the range, from the unedited model
        targets = []
        v_losses = []
        for request in requests:
            k = compute_key(model, self.context, request, last, knobs.n_prefix)
            z, losses = optimize_value(
                model,
                prepare_request(model, request.edit_prompt, request.target),
                last_address,
                position=request.subject_span[1] - 1,
                v0=model.weights[last_address] @ k,
                steps=knobs.v_steps,
                lr=knobs.v_lr,
                beta=knobs.beta,
                exit_layer=knobs.value_loss_layer,
            )
            targets.append(z)
            v_losses.append(losses[-1] if losses else None)
        Z = np.stack(targets, axis=1)

        applied: list[int] = []
        per_layer: dict[str, float] = {}
        for i, layer in enumerate(layers):
            address = f'blocks.{layer}.mlp.down'
            K = np.stack([compute_key(model, self.context, r, layer, knobs.n_prefix) for r in requests], axis=1)
            current = np.stack(
                [model.weights[last_address] @ compute_key(model, self.context, r, last, knobs.n_prefix) for r in requests],
                axis=1,
            )
            res = (Z - current) / (len(layers) - i)
            moment = second_moment(model, self.context, layer, knobs.covariance_samples)
            try:
                delta, ridge = with_ridge_retry(
                    lambda r: spread_update(res, K, covariance(moment, r), knobs.mass_least_squares),
                    knobs.ridge,
                    address,
                )
            except EditFailure as e:
                e.details['layers_applied'] = list(applied)
                raise
            model.weights[address] = model.weights[address] + delta
            applied.append(layer)
            per_layer[f'delta_inf.{layer}'] = float(np.max(np.abs(delta)))
            per_layer[f'ridge.{layer}'] = ridge

        return {}, {
            'layers': layers,
            'layers_applied': applied,
            'requests': len(requests),
            'update_form': knobs.update_form,
            'v_loss_last': v_losses,
            **per_layer,
        }
