from __future__ import annotations

from .grammar import END
from .grammar import PAD
from .grammar import SEP
from .grammar import SPECIALS
from .models import EditRequest
from .models import EditScope
from .models import FactTriple
from .models import FactWorld
from .models import Probe
from .models import RelationSpec
from .prompts import context_prefix
from .prompts import demonstration
from .prompts import statement
from .service import FactWorldInput
from .service import FactWorldOutput
from .service import FactWorldService
from .storage import load_benchmark
from .storage import load_world
from .storage import save_benchmark
from .storage import save_world

__all__ = [
    'END',
    'PAD',
    'SEP',
    'SPECIALS',
    'EditRequest',
    'EditScope',
    'FactTriple',
    'FactWorld',
    'FactWorldInput',
    'FactWorldOutput',
    'FactWorldService',
    'Probe',
    'RelationSpec',
    'context_prefix',
    'demonstration',
    'load_benchmark',
    'load_world',
    'save_benchmark',
    'save_world',
    'statement',
]
