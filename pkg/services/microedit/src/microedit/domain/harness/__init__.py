from __future__ import annotations

from .editor import EditInput
from .editor import EditorService
from .hparams import default_hparams
from .hparams import default_targets
from .hparams import dumps_hparams
from .hparams import load_hparams
from .hparams import parse_hparams
from .hparams import save_hparams
from .hparams import validate_hparams
from .models import BenchReport
from .models import EditResult
from .models import RegimeKind
from .models import RegimeSpec
from .regimes import check_regime
from .regimes import run_regime
from .render import render_capabilities
from .render import render_table
from .render import render_trace
from .repl import ReplSession
from .reports import dumps_report
from .reports import load_report
from .reports import save_report
from .workbench import Workbench

__all__ = [
    'BenchReport',
    'EditInput',
    'EditResult',
    'EditorService',
    'RegimeKind',
    'RegimeSpec',
    'ReplSession',
    'Workbench',
    'check_regime',
    'default_hparams',
    'default_targets',
    'dumps_hparams',
    'dumps_report',
    'load_hparams',
    'load_report',
    'parse_hparams',
    'render_capabilities',
    'render_table',
    'render_trace',
    'run_regime',
    'save_hparams',
    'save_report',
    'validate_hparams',
]
