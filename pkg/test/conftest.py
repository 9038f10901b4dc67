"""
Root conftest.py: registers markers and builds the tiny world and model shared by the suite.

The fixtures are sized so that every editor, trace and regime runs in well
under a second; the desk-scale runs live behind the `slow` marker.
"""
from __future__ import annotations

import pytest

from microedit.domain.editors import EditContext
from microedit.domain.factworld import FactWorldService
from microedit.domain.microlm import ModelConfig
from microedit.domain.microlm import ModelState
from microedit.domain.microlm import Vocabulary
from microedit.shared.settings import FactWorldSettings

TINY_SEED = 3


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "slow: desk-scale acceptance runs on the default world (minutes)"
    )


# ─── Fixtures ─────────────────────────────────────────────────────────────────

@pytest.fixture(scope='session')
def factworld_settings() -> FactWorldSettings:
    return FactWorldSettings(n_entities=12, n_relations=3, n_facts=24, n_edits=4, n_locality=2, max_demos=1)


@pytest.fixture(scope='session')
def factworld_service(factworld_settings) -> FactWorldService:
    return FactWorldService(settings=factworld_settings)


@pytest.fixture(scope='session')
def world(factworld_service):
    return factworld_service.generate_world(n_entities=12, n_relations=3, n_facts=24, seed=TINY_SEED)


@pytest.fixture(scope='session')
def benchmark(factworld_service, world):
    return factworld_service.generate_edit_benchmark(world, n_edits=4, seed=TINY_SEED)


@pytest.fixture(scope='session')
def corpus(factworld_service, world):
    return factworld_service.emit_training_corpus(world, seed=TINY_SEED, context_len=64)


@pytest.fixture(scope='session')
def vocab(world) -> Vocabulary:
    return Vocabulary.from_world(world)


@pytest.fixture(scope='session')
def tiny_config(vocab) -> ModelConfig:
    return ModelConfig(n_layers=2, d_model=16, n_heads=2, d_mlp=32, vocab_size=len(vocab), context_len=64)


@pytest.fixture
def model(tiny_config, vocab) -> ModelState:
    """A fresh untrained model; wide init so the random logits are far from uniform."""
    return ModelState.initialize(tiny_config, vocab, seed=0, init_std=0.2)


@pytest.fixture
def edit_context(world, corpus) -> EditContext:
    return EditContext(seed=0, world=world, corpus=corpus, max_answer_tokens=4, trace_samples=2)
