"""Method hparams files: one TOML table per method holding `targets`, numeric knobs and boolean flags."""
from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any
from typing import Optional

import tomli_w
from logger import get_logger
from microedit.domain.editors import get_method
from microedit.domain.microlm import ModelConfig
from microedit.domain.microlm import resolve_address
from microedit.shared.exception import HparamsError
from microedit.shared.models import HparamSet
from microedit.shared.settings import EditorsSettings

logger = get_logger(__name__)


def default_targets(method: str, n_layers: int) -> list[str]:
    """Default edited modules, scaled from 32-layer defaults by floor ratio."""
    rome_layer = n_layers // 6
    if method in ('rome', 'ftl'):
        return [f'blocks.{rome_layer}.mlp.down']
    if method == 'memit':
        start, stop = n_layers // 3, max(n_layers // 3 + 1, 2 * n_layers // 3)
        return [f'blocks.{i}.mlp.down' for i in range(start, stop)]
    if method == 'grace':
        return [f'blocks.{min(n_layers - 1, 27 * n_layers // 32)}.mlp.down']
    if method == 'kn':
        return [f'blocks.{i}.mlp.down' for i in range(n_layers)]
    return []


def default_hparams(method: str, config: ModelConfig, editors: Optional[EditorsSettings] = None) -> HparamSet:
    """
    Configured knobs and default targets for `method` on a model of `config`'s depth.

    Raises:
        UnknownMethodError, UnimplementedMethodError
    """
    info = get_method(method)
    knobs = (editors or EditorsSettings()).knobs_for(info.name).model_dump()
    return HparamSet(
        method=info.name,
        targets=default_targets(info.name, config.n_layers),
        knobs={k: v for k, v in knobs.items() if not isinstance(v, bool)},
        flags={k: v for k, v in knobs.items() if isinstance(v, bool)},
    )


def validate_hparams(hparams: HparamSet, config: Optional[ModelConfig] = None) -> HparamSet:
    """Canonical method name, knobs checked against the method schema, addresses resolved."""
    info = get_method(hparams.method)
    hparams = hparams.model_copy(update={'method': info.name})
    hparams.method_knobs()
    if config is not None:
        hparams = hparams.model_copy(update={'targets': [resolve_address(config, a) for a in hparams.targets]})
    return hparams


def parse_hparams(data: dict[str, Any], source_path: Optional[str] = None, config: Optional[ModelConfig] = None) -> HparamSet:
    if len(data) != 1 or not isinstance(next(iter(data.values())), dict):
        raise HparamsError(
            'An hparams file holds exactly one [method] table',
            details={'source_path': source_path, 'tables': sorted(data)},
        )
    method, table = next(iter(data.items()))
    targets = table.get('targets', [])
    if not isinstance(targets, list) or not all(isinstance(t, str) for t in targets):
        raise HparamsError('`targets` must be a list of module addresses', details={'source_path': source_path})
    knobs: dict[str, int | float] = {}
    flags: dict[str, bool] = {}
    for name, value in table.items():
        if name == 'targets':
            continue
        if isinstance(value, bool):
            flags[name] = value
        elif isinstance(value, (int, float)):
            knobs[name] = value
        else:
            raise HparamsError(
                f'Knob {name!r} must be a number or a boolean',
                details={'source_path': source_path, 'knob': name},
            )
    hparams = HparamSet(method=method, targets=targets, knobs=knobs, flags=flags, source_path=source_path)
    return validate_hparams(hparams, config)


def load_hparams(path: str | Path, config: Optional[ModelConfig] = None) -> HparamSet:
    """
    Read and validate an hparams file.

    Args:
        path (str | Path): TOML file with a single method table
        config (ModelConfig): when given, every target must resolve against it

    Raises:
        HparamsError, UnknownKnobError, UnknownMethodError, UnimplementedMethodError, AddressError
    """
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding='utf-8'))
    except FileNotFoundError as e:
        raise HparamsError(f'Hparams file not found: {path}', details={'source_path': str(path)}) from e
    except tomllib.TOMLDecodeError as e:
        raise HparamsError(f'Hparams file {path} does not parse: {e}', details={'source_path': str(path)}) from e
    hparams = parse_hparams(data, str(path), config)
    logger.info('Loaded hparams', extra={'method': hparams.method, 'path': str(path), 'fingerprint': hparams.fingerprint()})
    return hparams


def dumps_hparams(hparams: HparamSet) -> str:
    table: dict[str, Any] = {'targets': list(hparams.targets)}
    table.update(sorted(hparams.knobs.items()))
    table.update(sorted(hparams.flags.items()))
    return tomli_w.dumps({hparams.method: table})


def save_hparams(path: str | Path, hparams: HparamSet) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_hparams(hparams), encoding='utf-8')
    return path
