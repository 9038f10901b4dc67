from __future__ import annotations

from collections.abc import Mapping
from typing import Optional

import numpy as np
from base import BaseModel
from base import BaseService
from logger import get_logger
from microedit.domain.factworld import EditRequest
from microedit.numerics import make_rng
from microedit.shared.exception import ContractError
from microedit.shared.exception import LocalizationError
from microedit.shared.settings import TracingSettings

from .model import ModelState
from .model import forward
from .model import next_token_probs
from .models import HookMode
from .models import HookSpec
from .models import TraceResult

logger = get_logger(__name__)


def restore_site(layer: int, restore: str) -> str:
    return f'blocks.{layer}.mlp.down' if restore == 'mlp' else f'blocks.{layer}'


def traced_probability(
    state: ModelState,
    prompt: list[str],
    target_id: int,
    span: tuple[int, int],
    noise: np.ndarray | None,
    restorations: Mapping[tuple[str, int], np.ndarray] | None = None,
) -> float:
    """p(target) at the final position with subject noise and clean restorations applied."""
    hooks: list[HookSpec] = []
    if noise is not None:
        hooks.append(
            HookSpec(address='embed', mode=HookMode.ADD_TO_OUTPUT, token_positions=list(range(*span)), payload=noise),
        )
    for (address, position), value in (restorations or {}).items():
        hooks.append(
            HookSpec(address=address, mode=HookMode.REPLACE_OUTPUT, token_positions=[position], payload=value[None, :]),
        )
    return float(next_token_probs(state, prompt, hooks)[target_id])


def clean_activations(state: ModelState, prompt: list[str], restore: str = 'mlp') -> dict[tuple[str, int], np.ndarray]:
    hooks = [
        HookSpec(address=restore_site(layer, restore), mode=HookMode.CAPTURE_OUTPUT)
        for layer in range(state.config.n_layers)
    ]
    return forward(state, prompt, hooks).captures


def noise_scale_sigma(state: ModelState, noise_scale: float) -> float:
    return float(noise_scale * np.std(state.weights['embed']))


def causal_trace(
    state: ModelState,
    request: EditRequest,
    noise_scale: float,
    n_samples: int,
    seed: int = 0,
    restore: str = 'mlp',
) -> TraceResult:
    """
    Indirect effect of restoring each (layer, token) clean activation on a
    subject-corrupted run, averaged over noise draws.

    Raises:
        ContractError: empty subject span, negative noise scale or no samples
    """
    start, end = request.subject_span
    if end <= start:
        raise ContractError('Subject span is empty', details={'subject_span': [start, end]})
    if noise_scale < 0:
        raise ContractError('noise_scale must be non-negative')
    if n_samples < 1:
        raise ContractError('n_samples must be at least 1')
    if restore not in ('mlp', 'hidden'):
        raise ContractError(f'Unknown restoration site {restore!r}')

    prompt = list(request.edit_prompt)
    target_id = state.vocab.id(request.old_target[0])
    clean = clean_activations(state, prompt, restore)
    clean_prob = traced_probability(state, prompt, target_id, (start, end), None)

    sigma = noise_scale_sigma(state, noise_scale)
    rng = make_rng(seed, 'causal-trace', request.key)
    n_layers, length = state.config.n_layers, len(prompt)
    grid = np.zeros((n_layers, length))
    corrupted = 0.0
    for _ in range(n_samples):
        noise = rng.normal(0.0, 1.0, size=(end - start, state.config.d_model)) * sigma
        p_corrupt = traced_probability(state, prompt, target_id, (start, end), noise)
        corrupted += p_corrupt / n_samples
        for layer in range(n_layers):
            address = restore_site(layer, restore)
            for position in range(length):
                p = traced_probability(
                    state, prompt, target_id, (start, end), noise,
                    {(address, position): clean[(address, position)]},
                )
                grid[layer, position] += (p - p_corrupt) / n_samples

    logger.info(
        'Causal trace complete',
        extra={'case_id': request.case_id, 'clean_prob': clean_prob, 'corrupted_prob': corrupted, 'restore': restore},
    )
    return TraceResult(
        grid=grid,
        clean_prob=clean_prob,
        corrupted_prob=corrupted,
        subject_last=end - 1,
        tokens=prompt,
        restore=restore,
    )


def select_edit_layer(trace: TraceResult) -> int:
    """Layer with the largest indirect effect at the subject's last token; lowest wins ties.

    Raises:
        LocalizationError: the subject column of the grid is all zeros
    """
    column = trace.grid[:, trace.subject_last]
    if not np.any(column):
        raise LocalizationError(
            'Causal trace shows no effect at the last subject token',
            details={'subject_last': trace.subject_last},
        )
    return int(np.argmax(column))


class CausalTraceInput(BaseModel):
    state: ModelState
    request: EditRequest
    seed: int = 0
    noise_scale: Optional[float] = None
    n_samples: Optional[int] = None
    restore: str = 'mlp'


class CausalTraceService(BaseService):
    settings: TracingSettings

    def process(self, inputs: CausalTraceInput) -> TraceResult:
        return causal_trace(
            inputs.state,
            inputs.request,
            noise_scale=self.settings.noise_scale if inputs.noise_scale is None else inputs.noise_scale,
            n_samples=inputs.n_samples or self.settings.n_samples,
            seed=inputs.seed,
            restore=inputs.restore,
        )
