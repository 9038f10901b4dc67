from __future__ import annotations

from .editors import EditorsSettings
from .editors import FTLKnobs
from .editors import GRACEKnobs
from .editors import IKEKnobs
from .editors import KNOB_SCHEMAS
from .editors import KNKnobs
from .editors import MEMITKnobs
from .editors import MethodKnobs
from .editors import ROMEKnobs
from .editors import SERACKnobs
from .evaluate import EvaluateSettings
from .factworld import FactWorldSettings
from .logs import LoggingSettings
from .model import ModelSettings
from .settings import Settings
from .tracing import TracingSettings
from .trainer import ClassifierSettings
from .trainer import TrainerSettings

__all__ = [
    'Settings',
    'ClassifierSettings',
    'EditorsSettings',
    'EvaluateSettings',
    'FactWorldSettings',
    'FTLKnobs',
    'GRACEKnobs',
    'IKEKnobs',
    'KNOB_SCHEMAS',
    'KNKnobs',
    'LoggingSettings',
    'MEMITKnobs',
    'MethodKnobs',
    'ModelSettings',
    'ROMEKnobs',
    'SERACKnobs',
    'TracingSettings',
    'TrainerSettings',
]
