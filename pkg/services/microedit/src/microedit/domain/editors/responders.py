from __future__ import annotations

from abc import ABC
from abc import abstractmethod
from collections.abc import Sequence

from microedit.domain.microlm import ModelState
from microedit.domain.microlm import generate_greedy
from microedit.domain.microlm import truncate_at_end


class Responder(ABC):
    """The query path of an edited model: plain weights, prefix, codebook or memory."""

    state: ModelState
    max_answer_tokens: int = 4

    @abstractmethod
    def generate(self, prompt: Sequence[str], max_new: int, stop_at_end: bool = True) -> list[str]:
        raise NotImplementedError

    def headroom(self, prompt: Sequence[str]) -> int:
        return self.state.config.context_len - len(prompt)

    def answer(self, prompt: Sequence[str]) -> list[str]:
        return truncate_at_end(self.generate(prompt, self.max_answer_tokens))

    def answer_matches(self, prompt: Sequence[str], expected: Sequence[str]) -> bool:
        return self.answer(prompt) == list(expected)


class ModelResponder(Responder):
    def __init__(self, state: ModelState, max_answer_tokens: int = 4):
        self.state = state
        self.max_answer_tokens = max_answer_tokens

    def generate(self, prompt: Sequence[str], max_new: int, stop_at_end: bool = True) -> list[str]:
        return generate_greedy(self.state, list(prompt), max_new, stop_at_end=stop_at_end)
