from __future__ import annotations

from .base import BaseTrainer
from .base import fact_probes
from .classifier import ScopeClassifierTrainer
from .classifier import balanced_accuracy
from .classifier import best_threshold
from .lm import LMTrainer
from .lm import batch_arrays
from .lm import read_loss_curve
from .lm import write_loss_curve
from .models import ClassifierTrainInput
from .models import LMTrainInput
from .models import LMTrainOutput
from .models import TrainRun

__all__ = [
    'BaseTrainer',
    'ClassifierTrainInput',
    'LMTrainInput',
    'LMTrainOutput',
    'LMTrainer',
    'ScopeClassifierTrainer',
    'TrainRun',
    'balanced_accuracy',
    'batch_arrays',
    'best_threshold',
    'fact_probes',
    'read_loss_curve',
    'write_loss_curve',
]
