from __future__ import annotations

from .base import MicroEditError
from .exceptions import AddressError
from .exceptions import CapabilityError
from .exceptions import CapacityError
from .exceptions import CheckpointError
from .exceptions import ContractError
from .exceptions import DimensionError
from .exceptions import DivergenceError
from .exceptions import EditFailure
from .exceptions import GenerationError
from .exceptions import HparamsError
from .exceptions import LengthError
from .exceptions import LocalizationError
from .exceptions import RollbackError
from .exceptions import ShapeError
from .exceptions import SingularityError
from .exceptions import TokenError
from .exceptions import TrainingRequiredError
from .exceptions import UnimplementedMethodError
from .exceptions import UnknownKnobError
from .exceptions import UnknownMethodError
from .exceptions import UsageError

__all__ = [
    'MicroEditError',
    'AddressError',
    'CapabilityError',
    'CapacityError',
    'CheckpointError',
    'ContractError',
    'DimensionError',
    'DivergenceError',
    'EditFailure',
    'GenerationError',
    'HparamsError',
    'LengthError',
    'LocalizationError',
    'RollbackError',
    'ShapeError',
    'SingularityError',
    'TokenError',
    'TrainingRequiredError',
    'UnimplementedMethodError',
    'UnknownKnobError',
    'UnknownMethodError',
    'UsageError',
]
