"""Base micro-LM pretraining: momentum gradient descent with warmup and recall-based checkpoint selection."""
from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np
from logger import get_logger
from microedit.domain.factworld import PAD
from microedit.domain.factworld import FactWorld
from microedit.domain.factworld import FactWorldService
from microedit.domain.microlm import Checkpoint
from microedit.domain.microlm import ModelConfig
from microedit.domain.microlm import ModelState
from microedit.domain.microlm import Vocabulary
from microedit.domain.microlm import forward
from microedit.numerics import Graph
from microedit.numerics import grad
from microedit.numerics import make_rng
from microedit.numerics import ops
from microedit.shared.exception import ContractError
from microedit.shared.exception import DivergenceError
from microedit.shared.settings import FactWorldSettings
from microedit.shared.settings import TrainerSettings

from .base import BaseTrainer
from .base import fact_probes
from .models import LMTrainInput
from .models import LMTrainOutput
from .models import TrainRun

logger = get_logger(__name__)


def batch_arrays(vocab: Vocabulary, sequences: list[list[str]]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right-padded inputs, next-token targets and a loss mask that zeroes padding."""
    width = max(len(s) for s in sequences) - 1
    pad_id = vocab.id(PAD)
    inputs = np.full((len(sequences), width), pad_id, dtype=np.int64)
    targets = np.full((len(sequences), width), pad_id, dtype=np.int64)
    mask = np.zeros((len(sequences), width))
    for row, seq in enumerate(sequences):
        ids = vocab.encode(seq)
        n = len(ids) - 1
        inputs[row, :n] = ids[:-1]
        targets[row, :n] = ids[1:]
        mask[row, :n] = 1.0
    return inputs, targets, mask


class BatchSampler:
    """Epoch-wise permutations of the corpus, cut into fixed-size batches."""

    def __init__(self, corpus: list[list[str]], batch_size: int, seed: int):
        self.corpus = corpus
        self.batch_size = batch_size
        self.rng = make_rng(seed, 'trainer', 'batches')
        self.order: list[int] = []

    def next(self) -> list[list[str]]:
        batch = []
        while len(batch) < self.batch_size:
            if not self.order:
                self.order = self.rng.permutation(len(self.corpus)).tolist()
            batch.append(self.corpus[self.order.pop()])
        return batch


class LMTrainer(BaseTrainer):
    settings: TrainerSettings
    factworld_settings: FactWorldSettings = FactWorldSettings()

    def default_run(self, seed: int, **overrides) -> TrainRun:
        s = self.settings
        fields = dict(
            steps=s.max_steps,
            batch_size=s.batch_size,
            learning_rate=s.learning_rate,
            momentum=s.momentum,
            warmup_fraction=s.warmup_fraction,
            eval_interval=s.eval_interval,
            patience=s.patience,
            log_interval=s.log_interval,
            seed=seed,
        )
        fields.update(overrides)
        return TrainRun(**fields)

    def loss_and_grads(self, model: ModelState, batch: list[list[str]]) -> tuple[float, dict[str, np.ndarray]]:
        inputs, targets, mask = batch_arrays(model.vocab, batch)
        graph = Graph()
        params = model.parameters(graph, model.addresses())
        logits = forward(model, inputs, graph=graph, params=params).logits_node
        loss = ops.cross_entropy(logits, targets, mask)
        return float(loss.value), grad(loss, params)

    def run(
        self,
        world: FactWorld,
        config: ModelConfig,
        run: TrainRun,
        corpus: Optional[list[list[str]]] = None,
    ) -> ModelState:
        """
        Train a fresh model on the world's corpus.

        The returned model holds the checkpoint with the best probe recall (the
        latest among ties). Training stops early once recall has been 1.0 for
        `run.patience` consecutive evaluations.

        Raises:
            DivergenceError: the loss became non-finite; `last_good` holds the best checkpoint so far
        """
        vocab = Vocabulary.from_world(world)
        config = config.model_copy(update={'vocab_size': len(vocab)})
        if corpus is None:
            corpus = FactWorldService(settings=self.factworld_settings).emit_training_corpus(
                world, run.seed, config.context_len,
            )
        corpus = [seq for seq in corpus if 2 <= len(seq) <= config.context_len + 1]
        if not corpus:
            raise ContractError('Training corpus is empty')

        model = ModelState.initialize(config, vocab, run.seed)
        probes = fact_probes(world)
        sampler = BatchSampler(corpus, run.batch_size, run.seed)
        velocity = {a: np.zeros_like(w) for a, w in model.weights.items()}
        best: Optional[Checkpoint] = None
        perfect_streak = 0

        logger.info(
            'Training base model',
            extra={'steps': run.steps, 'batch_size': run.batch_size, 'corpus': len(corpus), 'seed': run.seed},
        )
        for step in range(1, run.steps + 1):
            loss, grads = self.loss_and_grads(model, sampler.next())
            if not np.isfinite(loss):
                logger.error('Training diverged', extra={'step': step})
                raise DivergenceError(
                    f'Training loss became non-finite at step {step}',
                    details={'step': step, 'best_step': run.best_step},
                    last_good=best or model.snapshot(),
                )
            lr = run.learning_rate_at(step - 1)
            for address, g in grads.items():
                velocity[address] = run.momentum * velocity[address] + g
                model.weights[address] = model.weights[address] - lr * velocity[address]

            if step % run.log_interval == 0 or step == 1:
                run.loss_curve.append((step, loss))
                logger.info('Training step', extra={'step': step, 'loss': round(loss, 6), 'lr': lr})

            if step % run.eval_interval == 0 or step == run.steps:
                recall = self.validate_step(model, probes)
                run.validation.append((step, recall))
                if run.best_recall is None or recall >= run.best_recall:
                    best, run.best_step, run.best_recall = model.snapshot(), step, recall
                perfect_streak = perfect_streak + 1 if recall == 1.0 else 0
                logger.info('Validation', extra={'step': step, 'recall': recall, 'best_step': run.best_step})
                if perfect_streak >= run.patience:
                    run.stopped_early = True
                    logger.info('Early stop at full recall', extra={'step': step})
                    break

        if best is not None:
            model.restore(best)
        return model

    def process(self, inputs: LMTrainInput) -> LMTrainOutput:
        try:
            model = self.run(inputs.world, inputs.config, inputs.run, inputs.corpus)
        except Exception:
            logger.exception('Base model training failed', extra={'seed': inputs.run.seed})
            raise
        return LMTrainOutput(model=model, run=inputs.run)


def write_loss_curve(path: str | Path, run: TrainRun) -> Path:
    """Line-delimited `step,loss` text."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(''.join(f'{step},{loss!r}\n' for step, loss in run.loss_curve), encoding='utf-8')
    return path


def read_loss_curve(path: str | Path) -> list[tuple[int, float]]:
    rows = []
    for line in Path(path).read_text(encoding='utf-8').splitlines():
        if line.strip():
            step, loss = line.split(',')
            rows.append((int(step), float(loss)))
    return rows
