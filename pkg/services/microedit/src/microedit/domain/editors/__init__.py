from __future__ import annotations

from .base import BaseEditor
from .context import EditContext
from .context import PreparedRequest
from .context import prepare_request
from .context import request_nll
from .ftl import FTLEditor
from .grace import CodebookResponder
from .grace import GRACEEditor
from .grace import insert_entry
from .grace import lookup
from .ike import DemoStore
from .ike import IKEEditor
from .ike import PrefixResponder
from .ike import build_demo_store
from .kn import KNEditor
from .kn import integrated_gradients
from .kn import neuron_attributions
from .locate import compute_key
from .locate import rank_one_update
from .locate import second_moment
from .memit import MEMITEditor
from .memit import spread_update
from .models import Codebook
from .models import CodebookEntry
from .models import EditArea
from .models import EditorCapabilities
from .models import EditOutcome
from .models import Family
from .models import ScopeClassifier
from .models import WeightDelta
from .registry import METHODS
from .registry import MethodInfo
from .registry import build_editor
from .registry import canonical_name
from .registry import capability_table
from .registry import get_method
from .registry import implemented_methods
from .responders import ModelResponder
from .responders import Responder
from .rome import ROMEEditor
from .serac import EditMemory
from .serac import RoutingResponder
from .serac import SERACEditor
from .serac import prompt_embedding
from .serac import similarity_features

__all__ = [
    'BaseEditor',
    'Codebook',
    'CodebookEntry',
    'CodebookResponder',
    'DemoStore',
    'EditArea',
    'EditContext',
    'EditMemory',
    'EditOutcome',
    'EditorCapabilities',
    'FTLEditor',
    'Family',
    'GRACEEditor',
    'IKEEditor',
    'KNEditor',
    'MEMITEditor',
    'METHODS',
    'MethodInfo',
    'ModelResponder',
    'PrefixResponder',
    'PreparedRequest',
    'ROMEEditor',
    'Responder',
    'RoutingResponder',
    'SERACEditor',
    'ScopeClassifier',
    'WeightDelta',
    'build_demo_store',
    'build_editor',
    'canonical_name',
    'capability_table',
    'compute_key',
    'get_method',
    'implemented_methods',
    'insert_entry',
    'integrated_gradients',
    'lookup',
    'neuron_attributions',
    'prepare_request',
    'prompt_embedding',
    'rank_one_update',
    'request_nll',
    'second_moment',
    'similarity_features',
    'spread_update',
]
