"""Scope-classifier training: logistic regression over (query, record) similarity features."""
from __future__ import annotations

from typing import Optional

import numpy as np
from logger import get_logger
from microedit.domain.editors import ScopeClassifier
from microedit.domain.editors import prompt_embedding
from microedit.domain.editors import similarity_features
from microedit.domain.factworld import EditRequest
from microedit.domain.factworld import FactTriple
from microedit.domain.factworld import FactWorld
from microedit.domain.microlm import ModelState
from microedit.numerics import make_rng
from microedit.shared.exception import GenerationError
from microedit.shared.settings import ClassifierSettings

from .base import BaseTrainer
from .models import ClassifierTrainInput

logger = get_logger(__name__)

Pair = tuple[list[str], list[str]]


def balanced_accuracy(scores: np.ndarray, labels: np.ndarray, threshold: float) -> float:
    predicted = scores >= threshold
    positives, negatives = labels == 1, labels == 0
    tpr = float(np.mean(predicted[positives])) if positives.any() else 0.0
    tnr = float(np.mean(~predicted[negatives])) if negatives.any() else 0.0
    return (tpr + tnr) / 2.0


def best_threshold(scores: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Midpoint between consecutive distinct scores maximizing balanced accuracy; lowest wins ties."""
    distinct = np.unique(scores)
    candidates = (distinct[:-1] + distinct[1:]) / 2.0 if len(distinct) > 1 else distinct
    best_t, best_acc = float(candidates[0]), -1.0
    for t in candidates:
        acc = balanced_accuracy(scores, labels, float(t))
        if acc > best_acc:
            best_t, best_acc = float(t), acc
    return best_t, best_acc


def fit_logistic(features: np.ndarray, labels: np.ndarray, steps: int, lr: float) -> tuple[np.ndarray, float]:
    """Class-balanced logistic regression by full-batch gradient descent from zero."""
    w = np.zeros(features.shape[1])
    b = 0.0
    n_pos = max(1, int(labels.sum()))
    n_neg = max(1, int(len(labels) - labels.sum()))
    sample_weight = np.where(labels == 1, 0.5 / n_pos, 0.5 / n_neg)
    for _ in range(steps):
        z = features @ w + b
        p = 0.5 * (1.0 + np.tanh(0.5 * z))
        residual = sample_weight * (p - labels)
        w = w - lr * (features.T @ residual)
        b = b - lr * float(residual.sum())
    return w, b


class ScopeClassifierTrainer(BaseTrainer):
    settings: ClassifierSettings

    def training_slice(self, world: FactWorld, seed: int, exclude: Optional[list[EditRequest]] = None) -> list[FactTriple]:
        """Facts disjoint from the edited (subject, relation) pairs."""
        edited = {(r.subject, r.relation) for r in exclude or []}
        pool = [f for f in world.facts if (f.subject, f.relation) not in edited]
        rng = make_rng(seed, 'classifier', 'slice')
        order = rng.permutation(len(pool)).tolist()
        return [pool[i] for i in sorted(order[: self.settings.n_facts])]

    def build_pairs(self, world: FactWorld, facts: list[FactTriple], seed: int) -> tuple[list[Pair], list[int]]:
        """
        Positive pairs: an anchor prompt against itself and its rephrasings.
        Negatives: the anchor against prompts sharing its relation or its subject,
        which are the hard cases, topped up with random other facts.

        Raises:
            GenerationError: no negative prompt is available
        """
        rng = make_rng(seed, 'classifier', 'pairs')
        pairs: list[Pair] = []
        labels: list[int] = []
        for fact in facts:
            relation = world.relation(fact.relation)
            anchor = relation.render(fact.subject, 0)
            others = [f for f in facts if f != fact]
            if not others:
                raise GenerationError('Scope classifier needs at least two facts for negative pairs')
            hard = [f for f in others if f.relation == fact.relation or f.subject == fact.subject]
            for template in range(len(relation.templates)):
                pairs.append((relation.render(fact.subject, template), anchor))
                labels.append(1)
                for _ in range(self.settings.negatives_per_positive):
                    source = hard if hard and rng.random() < 0.5 else others
                    other = source[int(rng.integers(len(source)))]
                    other_relation = world.relation(other.relation)
                    prompt = other_relation.render(other.subject, int(rng.integers(len(other_relation.templates))))
                    pairs.append((prompt, anchor))
                    labels.append(0)
        return pairs, labels

    def featurize(self, model: ModelState, pairs: list[Pair]) -> np.ndarray:
        cache: dict[tuple[str, ...], np.ndarray] = {}

        def embed(prompt: list[str]) -> np.ndarray:
            key = tuple(prompt)
            if key not in cache:
                cache[key] = prompt_embedding(model, prompt)
            return cache[key]

        return np.stack([similarity_features(q, embed(q), r, embed(r)) for q, r in pairs])

    def run(
        self,
        model: ModelState,
        world: FactWorld,
        seed: int,
        exclude: Optional[list[EditRequest]] = None,
    ) -> ScopeClassifier:
        """
        Train the SERAC-lite scope classifier on a slice of the world disjoint from `exclude`.

        Returns:
            ScopeClassifier: weights, bias, a threshold maximizing held-out balanced
            accuracy, and that accuracy
        """
        facts = self.training_slice(world, seed, exclude)
        pairs, labels = self.build_pairs(world, facts, seed)
        y = np.asarray(labels, dtype=np.float64)
        if not (y == 0).any():
            raise GenerationError('Scope classifier training produced no negative pairs')
        x = self.featurize(model, pairs)

        rng = make_rng(seed, 'classifier', 'split')
        order = rng.permutation(len(pairs))
        n_holdout = max(2, int(round(len(pairs) * self.settings.holdout_fraction)))
        held, train = order[:n_holdout], order[n_holdout:]
        if not len(train):
            train = held

        w, b = fit_logistic(x[train], y[train], self.settings.steps, self.settings.learning_rate)
        classifier = ScopeClassifier(weights=w, bias=b, threshold=0.5)
        held_scores = np.array([classifier.score(f) for f in x[held]])
        threshold, accuracy = best_threshold(held_scores, y[held])
        classifier = ScopeClassifier(weights=w, bias=b, threshold=threshold, heldout_accuracy=accuracy)
        logger.info(
            'Trained scope classifier',
            extra={'pairs': len(pairs), 'heldout': len(held), 'threshold': threshold, 'heldout_accuracy': accuracy},
        )
        return classifier

    def process(self, inputs: ClassifierTrainInput) -> ScopeClassifier:
        return self.run(inputs.model, inputs.world, inputs.seed, inputs.exclude)
