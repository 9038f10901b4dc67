from __future__ import annotations

from collections.abc import Sequence
from typing import Any
from typing import ClassVar
from typing import Optional

import numpy as np
from logger import get_logger
from microedit.domain.factworld import END
from microedit.domain.factworld import EditRequest
from microedit.domain.microlm import HookMode
from microedit.domain.microlm import HookSpec
from microedit.domain.microlm import ModelState
from microedit.domain.microlm import forward
from microedit.domain.microlm import layer_of
from microedit.shared.exception import ContractError
from microedit.shared.exception import LengthError
from microedit.shared.settings import GRACEKnobs

from .base import BaseEditor
from .context import prepare_request
from .locate import optimize_value
from .models import Codebook
from .models import CodebookEntry
from .models import EditArea
from .models import EditorCapabilities
from .models import Family
from .responders import Responder

logger = get_logger(__name__)

CONFLICT_MARGIN = 1e-6


def key_site(address: str) -> str:
    return f'blocks.{layer_of(address)}.ln2'


def insert_entry(codebook: Codebook, entry: CodebookEntry) -> str:
    """
    Add `entry`, resolving overlaps with existing keys.

    Same label within reach: the existing radius grows to cover the new key and
    nothing is inserted, unless growing would reach into an entry with another
    label. Otherwise the entry is inserted and every overlapping entry with a
    different label shrinks, together with the new one, to half the key
    distance minus the margin. Entries with different labels never overlap.
    """
    for existing in codebook.entries:
        if existing.label != entry.label:
            continue
        distance = float(np.linalg.norm(entry.key - existing.key))
        if distance >= existing.radius + entry.radius:
            continue
        if distance <= expansion_limit(codebook, existing):
            existing.radius = max(existing.radius, distance)
            return 'expanded'

    for existing in codebook.entries:
        if existing.label == entry.label:
            continue
        distance = float(np.linalg.norm(entry.key - existing.key))
        if distance >= existing.radius + entry.radius:
            continue
        limit = max(0.0, distance / 2.0 - CONFLICT_MARGIN)
        existing.radius = min(existing.radius, limit)
        entry.radius = min(entry.radius, limit)
    codebook.entries.append(entry)
    return 'inserted'


def expansion_limit(codebook: Codebook, entry: CodebookEntry) -> float:
    """Largest radius `entry` can take without touching an entry of another label."""
    limit = float('inf')
    for other in codebook.entries:
        if other.label == entry.label:
            continue
        gap = float(np.linalg.norm(entry.key - other.key)) - other.radius - CONFLICT_MARGIN
        limit = min(limit, gap)
    return limit


def lookup(codebook: Codebook, key: np.ndarray) -> Optional[CodebookEntry]:
    """Nearest entry whose radius covers `key`; ties go to the earlier entry."""
    best, best_distance = None, None
    for entry in codebook.entries:
        distance = float(np.linalg.norm(key - entry.key))
        if distance <= entry.radius and (best_distance is None or distance < best_distance):
            best, best_distance = entry, distance
    return best


class CodebookResponder(Responder):
    """Replaces the MLP output at positions whose incoming key hits the codebook."""

    def __init__(self, state: ModelState, codebook: Codebook, max_answer_tokens: int = 4):
        self.state = state
        self.codebook = codebook
        self.max_answer_tokens = max_answer_tokens

    def _replacements(self, hits: dict[int, np.ndarray]) -> list[HookSpec]:
        return [
            HookSpec(address=self.codebook.address, mode=HookMode.REPLACE_OUTPUT, token_positions=[p], payload=v[None, :])
            for p, v in sorted(hits.items())
        ]

    def _step(self, ids: list[str], hits: dict[int, np.ndarray]) -> list[HookSpec]:
        site = key_site(self.codebook.address)
        position = len(ids) - 1
        probe = HookSpec(address=site, mode=HookMode.CAPTURE_OUTPUT, token_positions=[position])
        captured = forward(self.state, ids, self._replacements(hits) + [probe]).captures[(site, position)]
        entry = lookup(self.codebook, captured)
        if entry is not None:
            hits[position] = entry.value
        return self._replacements(hits)

    def generate(self, prompt: Sequence[str], max_new: int, stop_at_end: bool = True) -> list[str]:
        tokens = list(prompt)
        if len(tokens) + max_new > self.state.config.context_len:
            raise LengthError(
                f'Prompt of {len(tokens)} tokens leaves no headroom for {max_new} new tokens',
                details={'prompt': len(tokens), 'max_new': max_new, 'context_len': self.state.config.context_len},
            )
        hits: dict[int, np.ndarray] = {}
        generated: list[str] = []
        for _ in range(max_new):
            hooks = self._step(tokens, hits) if self.codebook.entries else []
            logits = forward(self.state, tokens, hooks).logits[-1]
            token = self.state.vocab.tokens[int(np.argmax(logits))]
            tokens.append(token)
            generated.append(token)
            if stop_at_end and token == END:
                break
        return generated


class GRACEEditor(BaseEditor):
    """Codebook of (key, value, radius) entries consulted at one MLP; weights stay frozen."""

    name: ClassVar[str] = 'grace'
    family: ClassVar[Family] = Family.MEMORY_BASED
    capabilities: ClassVar[EditorCapabilities] = EditorCapabilities(
        supports_batch=False, supports_sequential=True, needs_training=False, edit_area=EditArea.MLP_CODEBOOK,
    )

    codebook: Optional[Codebook] = None

    def book(self) -> Codebook:
        address = self.hparams.targets[0]
        if self.codebook is None or self.codebook.address != address:
            self.codebook = Codebook(address=address)
        return self.codebook

    def execute(self, model: ModelState, requests: list[EditRequest], knobs: GRACEKnobs):
        request = requests[0]
        book = self.book()
        if not book.address.endswith('.mlp.down'):
            raise ContractError(f'GRACE targets an MLP down projection, got {book.address}')
        site = key_site(book.address)
        position = len(request.edit_prompt) - 1

        clean = forward(
            model, request.edit_prompt,
            [
                HookSpec(address=site, mode=HookMode.CAPTURE_OUTPUT, token_positions=[position]),
                HookSpec(address=book.address, mode=HookMode.CAPTURE_OUTPUT, token_positions=[position]),
            ],
        )
        key = clean.captures[(site, position)]
        v0 = clean.captures[(book.address, position)]
        prepared = prepare_request(model, request.edit_prompt, request.target)
        value, losses = optimize_value(model, prepared, book.address, position, v0, knobs.v_steps, knobs.v_lr)

        action = insert_entry(
            book,
            CodebookEntry(key=key, value=value, radius=knobs.eps0, label=' '.join(request.target)),
        )
        return {'codebook_entries': len(book.entries)}, {
            'address': book.address,
            'action': action,
            'entries': len(book.entries),
            'v_loss_first': losses[0] if losses else None,
            'v_loss_last': losses[-1] if losses else None,
        }

    def aux_state(self) -> Any:
        if self.codebook is None:
            return None
        return self.codebook.model_copy(deep=True)

    def restore_aux(self, state: Any) -> None:
        self.codebook = None if state is None else state.model_copy(deep=True)

    def aux_bytes(self) -> int:
        return 0 if self.codebook is None else self.codebook.nbytes()

    def responder(self, model: ModelState) -> Responder:
        return CodebookResponder(model, self.book(), self.context.max_answer_tokens)
