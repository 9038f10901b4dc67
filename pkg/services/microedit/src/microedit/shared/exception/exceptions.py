from __future__ import annotations

from typing import Any

from .base import MicroEditError


class DimensionError(MicroEditError):
    category = 'dimension'


class ContractError(MicroEditError):
    category = 'contract'


class SingularityError(MicroEditError):
    category = 'singularity'


class CapacityError(MicroEditError):
    category = 'capacity'


class GenerationError(MicroEditError):
    category = 'generation'


class TokenError(MicroEditError):
    category = 'unknown-token'


class LengthError(MicroEditError):
    category = 'over-length'


class AddressError(MicroEditError):
    category = 'unresolved-address'


class ShapeError(MicroEditError):
    category = 'shape'


class LocalizationError(MicroEditError):
    category = 'localization'


class DivergenceError(MicroEditError):
    category = 'divergence'

    def __init__(self, message: str = 'Non-finite loss', details: dict | None = None, last_good: Any = None):
        super().__init__(message=message, details=details)
        self.last_good = last_good


class EditFailure(MicroEditError):
    category = 'edit-failure'


class CapabilityError(MicroEditError):
    category = 'capability'


class TrainingRequiredError(MicroEditError):
    category = 'training-required'


class RollbackError(MicroEditError):
    category = 'rollback'


class HparamsError(MicroEditError):
    category = 'hparams'


class UnknownKnobError(HparamsError):
    category = 'unknown-knob'


class UnknownMethodError(HparamsError):
    category = 'unknown-method'


class UnimplementedMethodError(UnknownMethodError):
    category = 'unimplemented-method'


class CheckpointError(MicroEditError):
    category = 'checkpoint'


class UsageError(MicroEditError):
    category = 'usage'
    exit_code = 1
