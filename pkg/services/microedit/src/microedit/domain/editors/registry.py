"""Method registry: every editing method known to the lab, with its taxonomy and capabilities."""
from __future__ import annotations

from typing import Optional

from base import FrozenModel
from microedit.shared.exception import UnimplementedMethodError
from microedit.shared.exception import UnknownMethodError
from microedit.shared.models import HparamSet

from .base import BaseEditor
from .context import EditContext
from .ftl import FTLEditor
from .grace import GRACEEditor
from .ike import IKEEditor
from .kn import KNEditor
from .memit import MEMITEditor
from .models import EditArea
from .models import EditorCapabilities
from .models import Family
from .rome import ROMEEditor
from .serac import SERACEditor


class MethodInfo(FrozenModel):
    name: str
    display: str
    family: Family
    capabilities: EditorCapabilities
    editor: Optional[type[BaseEditor]] = None

    @property
    def implemented(self) -> bool:
        return self.editor is not None


def _implemented(editor: type[BaseEditor], display: str) -> MethodInfo:
    return MethodInfo(
        name=editor.name, display=display, family=editor.family, capabilities=editor.capabilities, editor=editor,
    )


def _unimplemented(name: str, display: str, family: Family, batch: bool, sequential: bool, train: bool, area: EditArea) -> MethodInfo:
    return MethodInfo(
        name=name,
        display=display,
        family=family,
        capabilities=EditorCapabilities(
            supports_batch=batch, supports_sequential=sequential, needs_training=train, edit_area=area,
        ),
    )


METHODS: dict[str, MethodInfo] = {
    info.name: info
    for info in (
        _implemented(SERACEditor, 'SERAC'),
        _implemented(IKEEditor, 'IKE'),
        _unimplemented('melo', 'MELO', Family.MEMORY_BASED, True, True, False, EditArea.LORA_CODEBOOK),
        _implemented(GRACEEditor, 'GRACE'),
        _unimplemented('ke', 'KE', Family.META_LEARNING, True, True, True, EditArea.MLP),
        _unimplemented('mend', 'MEND', Family.META_LEARNING, True, True, True, EditArea.MLP),
        _implemented(KNEditor, 'KN'),
        _implemented(ROMEEditor, 'ROME'),
        _implemented(MEMITEditor, 'MEMIT'),
        _unimplemented('pmet', 'PMET', Family.LOCATE_THEN_EDIT, True, True, False, EditArea.MLP),
        _implemented(FTLEditor, 'FT-L'),
    )
}

ALIASES = {'ft-l': 'ftl', 'ft_l': 'ftl', 'serac-lite': 'serac'}


def canonical_name(method: str) -> str:
    key = method.strip().lower()
    return ALIASES.get(key, key)


def get_method(method: str) -> MethodInfo:
    """
    Look up a registered method by name (case-insensitive, `FT-L` aliases accepted).

    Raises:
        UnimplementedMethodError: registered for comparison but not available
        UnknownMethodError: never registered
    """
    info = METHODS.get(canonical_name(method))
    if info is None:
        raise UnknownMethodError(
            f'Unknown method {method!r}; known: {", ".join(METHODS)}',
            details={'method': method},
        )
    if not info.implemented:
        raise UnimplementedMethodError(
            f'Method {info.display} is registered but not implemented',
            details={'method': info.name, 'family': info.family.value},
        )
    return info


def implemented_methods() -> list[str]:
    return [name for name, info in METHODS.items() if info.implemented]


def build_editor(hparams: HparamSet, context: EditContext) -> BaseEditor:
    info = get_method(hparams.method)
    if hparams.method != info.name:
        hparams = hparams.model_copy(update={'method': info.name})
    return info.editor(hparams=hparams, context=context)


def capability_table() -> list[dict]:
    """One row per registered method, in comparison-table order."""
    return [
        {
            'method': info.display,
            'family': info.family.value,
            'batch': info.capabilities.supports_batch,
            'sequential': info.capabilities.supports_sequential,
            'additional_train': info.capabilities.needs_training,
            'edit_area': info.capabilities.edit_area.value,
            'implemented': info.implemented,
        }
        for info in METHODS.values()
    ]
