from __future__ import annotations

from .addressing import hook_sites
from .addressing import layer_of
from .addressing import resolve_address
from .addressing import resolve_alias
from .addressing import weight_addresses
from .checkpoint import dumps_checkpoint
from .checkpoint import load_checkpoint
from .checkpoint import loads_checkpoint
from .checkpoint import save_checkpoint
from .model import ModelState
from .model import answer
from .model import answer_matches
from .model import changed_addresses
from .model import clone_state
from .model import forward
from .model import generate_greedy
from .model import next_token_probs
from .model import truncate_at_end
from .model import weights_equal
from .models import Checkpoint
from .models import ForwardResult
from .models import HookMode
from .models import HookSpec
from .models import ModelConfig
from .models import TraceResult
from .tokenizer import Vocabulary
from .tracing import CausalTraceInput
from .tracing import CausalTraceService
from .tracing import causal_trace
from .tracing import clean_activations
from .tracing import select_edit_layer
from .tracing import traced_probability

__all__ = [
    'CausalTraceInput',
    'CausalTraceService',
    'Checkpoint',
    'ForwardResult',
    'HookMode',
    'HookSpec',
    'ModelConfig',
    'ModelState',
    'TraceResult',
    'Vocabulary',
    'answer',
    'answer_matches',
    'causal_trace',
    'changed_addresses',
    'clean_activations',
    'clone_state',
    'dumps_checkpoint',
    'forward',
    'generate_greedy',
    'hook_sites',
    'layer_of',
    'load_checkpoint',
    'loads_checkpoint',
    'next_token_probs',
    'resolve_address',
    'resolve_alias',
    'save_checkpoint',
    'select_edit_layer',
    'traced_probability',
    'truncate_at_end',
    'weight_addresses',
    'weights_equal',
]
