"""Wires settings, world, benchmark and model into editors that share one EditContext."""
from __future__ import annotations

from pathlib import Path
from typing import Optional

from base import BaseModel
from logger import get_logger
from microedit.domain.editors import BaseEditor
from microedit.domain.editors import EditContext
from microedit.domain.editors import build_editor
from microedit.domain.editors import canonical_name
from microedit.domain.factworld import EditRequest
from microedit.domain.factworld import FactWorld
from microedit.domain.factworld import FactWorldService
from microedit.domain.factworld import load_benchmark
from microedit.domain.factworld import load_world
from microedit.domain.microlm import ModelState
from microedit.domain.microlm import load_checkpoint
from microedit.domain.trainer import ScopeClassifierTrainer
from microedit.shared.exception import ContractError
from microedit.shared.exception import HparamsError
from microedit.shared.models import HparamSet
from microedit.shared.settings import Settings
from pydantic import PrivateAttr

from .hparams import default_hparams
from .hparams import load_hparams
from .hparams import validate_hparams

logger = get_logger(__name__)


class Workbench(BaseModel):
    settings: Settings
    seed: int = 0
    world: Optional[FactWorld] = None
    benchmark: list[EditRequest] = []
    model: Optional[ModelState] = None

    _context: Optional[EditContext] = PrivateAttr(default=None)

    @classmethod
    def from_files(
        cls,
        settings: Settings,
        seed: int,
        world_path: Optional[str | Path] = None,
        ckpt_path: Optional[str | Path] = None,
    ) -> Workbench:
        world = load_world(world_path) if world_path else None
        benchmark = load_benchmark(world_path) if world_path else []
        model = load_checkpoint(ckpt_path) if ckpt_path else None
        return cls(settings=settings, seed=seed, world=world, benchmark=benchmark, model=model)

    def require_model(self) -> ModelState:
        if self.model is None:
            raise ContractError('A model checkpoint is required (--ckpt)')
        return self.model

    def require_world(self) -> FactWorld:
        if self.world is None:
            raise ContractError('A world file is required (--world)')
        return self.world

    def context(self) -> EditContext:
        if self._context is None:
            corpus: list[list[str]] = []
            if self.world is not None:
                context_len = self.model.config.context_len if self.model is not None else self.settings.model.context_len
                corpus = FactWorldService(settings=self.settings.factworld).emit_training_corpus(
                    self.world, self.world.seed, context_len,
                )
            self._context = EditContext(
                seed=self.seed,
                world=self.world,
                corpus=corpus,
                max_answer_tokens=self.settings.evaluate.max_answer_tokens,
                trace_noise_scale=self.settings.tracing.noise_scale,
                trace_samples=self.settings.tracing.n_samples,
            )
        return self._context

    def hparams(self, method: str, path: Optional[str | Path] = None) -> HparamSet:
        model = self.require_model()
        if path is not None:
            hparams = load_hparams(path, model.config)
            if method and hparams.method != canonical_name(method):
                raise HparamsError(
                    f'Hparams file is for {hparams.method}, not {method}',
                    details={'method': method, 'source_path': str(path)},
                )
            return hparams
        return validate_hparams(default_hparams(method, model.config, self.settings.editors), model.config)

    def ensure_classifier(self) -> None:
        context = self.context()
        if context.scope_classifier is not None:
            return
        trainer = ScopeClassifierTrainer(settings=self.settings.classifier)
        context.scope_classifier = trainer.run(self.require_model(), self.require_world(), self.seed, self.benchmark)

    def editor(self, method: str, hparams_path: Optional[str | Path] = None) -> BaseEditor:
        """
        Build a ready editor; methods that need additional training get it here.

        Raises:
            UnknownMethodError, UnimplementedMethodError, HparamsError
        """
        hparams = self.hparams(method, hparams_path)
        editor = build_editor(hparams, self.context())
        if editor.capabilities.needs_training and not editor.is_trained() and editor.name == 'serac':
            self.ensure_classifier()
        logger.info('Built editor', extra={'method': editor.name, 'targets': hparams.targets})
        return editor
