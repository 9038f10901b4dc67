from __future__ import annotations

from collections.abc import Callable
from typing import ClassVar

import numpy as np
from microedit.domain.factworld import EditRequest
from microedit.domain.microlm import HookMode
from microedit.domain.microlm import HookSpec
from microedit.domain.microlm import ModelState
from microedit.domain.microlm import forward
from microedit.domain.microlm import layer_of
from microedit.numerics import Graph
from microedit.numerics import grad
from microedit.numerics import ops
from microedit.shared.exception import ContractError
from microedit.shared.settings import KNKnobs

from .base import BaseEditor
from .models import EditArea
from .models import EditorCapabilities
from .models import Family


def integrated_gradients(
    grad_fn: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    steps: int,
    baseline: np.ndarray | None = None,
) -> np.ndarray:
    """(x - x0) * mean of grad f at x0 + (j/m)(x - x0), j = 1..m (right Riemann sum)."""
    if steps < 1:
        raise ContractError('Integrated gradients needs at least one step')
    baseline = np.zeros_like(x) if baseline is None else baseline
    total = np.zeros_like(x)
    for j in range(1, steps + 1):
        total += grad_fn(baseline + (j / steps) * (x - baseline))
    return (x - baseline) * total / steps


def neuron_attributions(model: ModelState, prompt: list[str], token_id: int, layer: int, steps: int) -> np.ndarray:
    """Integrated-gradient attribution of p(token | prompt) to each MLP hidden neuron at the answer position."""
    site = f'blocks.{layer}.mlp.act'
    position = len(prompt) - 1
    clean = forward(model, prompt, [HookSpec(address=site, mode=HookMode.CAPTURE_OUTPUT, token_positions=[position])])
    activation = clean.captures[(site, position)]

    def prob_grad(a: np.ndarray) -> np.ndarray:
        graph = Graph()
        a_node = graph.leaf(a[None, :], name=site)
        hook = HookSpec(address=site, mode=HookMode.REPLACE_OUTPUT, token_positions=[position], payload=a_node)
        logits = ops.select(forward(model, prompt, [hook], graph=graph).logits_node, (0, position))
        prob = ops.select(ops.softmax(logits), token_id)
        return grad(prob, {'a': a_node})['a'][0]

    return integrated_gradients(prob_grad, activation, steps)


class KNEditor(BaseEditor):
    """Knowledge-neuron editing: shift the value slots of the most attributed neurons."""

    name: ClassVar[str] = 'kn'
    family: ClassVar[Family] = Family.LOCATE_THEN_EDIT
    capabilities: ClassVar[EditorCapabilities] = EditorCapabilities(
        supports_batch=False, supports_sequential=True, needs_training=False, edit_area=EditArea.MLP,
    )
    weight_editor: ClassVar[bool] = True

    def execute(self, model: ModelState, requests: list[EditRequest], knobs: KNKnobs):
        request = requests[0]
        if knobs.top_k > model.config.d_mlp:
            raise ContractError(
                f'top_k={knobs.top_k} exceeds the MLP hidden width {model.config.d_mlp}',
                details={'top_k': knobs.top_k, 'd_mlp': model.config.d_mlp},
            )
        old_id = model.vocab.id(request.old_target[0])
        new_id = model.vocab.id(request.target[0])
        layers = sorted(layer_of(a) for a in self.hparams.targets)

        candidates: list[tuple[float, int, int]] = []
        for layer in layers:
            scores = neuron_attributions(model, list(request.edit_prompt), old_id, layer, knobs.steps)
            candidates.extend((-float(s), layer, neuron) for neuron, s in enumerate(scores))
        selected = sorted(candidates)[: knobs.top_k]

        unembed = model.weights['unembed']
        shift = knobs.alpha * (unembed[new_id] - unembed[old_id])
        if knobs.alpha != 0.0:
            for _, layer, neuron in selected:
                address = f'blocks.{layer}.mlp.down'
                W = model.weights[address].copy()
                W[:, neuron] += shift
                model.weights[address] = W

        return {}, {
            'layers': layers,
            'neurons': [f'{layer}:{neuron}' for _, layer, neuron in selected],
            'top_score': -selected[0][0] if selected else None,
            'alpha': knobs.alpha,
        }
