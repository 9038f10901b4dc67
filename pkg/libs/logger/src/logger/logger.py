from __future__ import annotations

import logging
import sys
from collections.abc import Iterable
from typing import Any

import structlog
from rich.console import Console
from rich.traceback import Traceback
from rich.traceback import install as install_rich_traceback
from structlog.stdlib import BoundLogger
from structlog.types import EventDict
from structlog.types import Processor

# stderr only: stdout belongs to tables, reports and generated text
console = Console(stderr=True)

TRACEBACK_WIDTH = 120

_kv_renderer = structlog.processors.KeyValueRenderer(
    key_order=['event'],
    sort_keys=True,
    drop_missing=True,
)


def flatten_extra(_, __, event_dict: EventDict) -> EventDict:
    """Merge the `extra` mapping passed by call sites into the event dict."""
    extra = event_dict.pop('extra', None)
    if isinstance(extra, dict):
        for key, value in extra.items():
            event_dict.setdefault(key, value)
    return event_dict


def _pre_chain(json_logs: bool) -> list[Processor]:
    chain: list[Processor] = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.stdlib.PositionalArgumentsFormatter(),
        structlog.stdlib.ExtraAdder(),
        flatten_extra,
        structlog.processors.TimeStamper(fmt='iso'),
        structlog.processors.StackInfoRenderer(),
    ]
    if json_logs:
        chain.append(structlog.processors.format_exc_info)
    return chain


def _stderr_handler(pre_chain: list[Processor], json_logs: bool) -> logging.Handler:
    renderer: Processor = structlog.processors.JSONRenderer() if json_logs else structlog.dev.ConsoleRenderer()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(
        structlog.stdlib.ProcessorFormatter(
            foreign_pre_chain=pre_chain,
            processors=[structlog.stdlib.ProcessorFormatter.remove_processors_meta, renderer],
        ),
    )
    return handler


def _quiet_other_loggers(keep: Iterable[str], exclude: Iterable[str]) -> None:
    keep = {'__main__', *keep}
    exclude = tuple(exclude)
    for name in logging.root.manager.loggerDict:
        if any(name == mod or name.startswith(f'{mod}.') for mod in keep):
            continue
        if exclude and name.startswith(exclude):
            continue
        logging.getLogger(name).setLevel(logging.WARNING)


def _excepthook(rich_tracebacks: bool):
    def handle_exception(exc_type, exc_value, exc_traceback):
        """Log uncaught exceptions; Ctrl+C keeps the default behaviour."""
        if issubclass(exc_type, KeyboardInterrupt):
            sys.__excepthook__(exc_type, exc_value, exc_traceback)
            return
        if rich_tracebacks:
            console.print(
                Traceback.from_exception(exc_type, exc_value, exc_traceback, width=TRACEBACK_WIDTH, word_wrap=True),
            )
            return
        logging.getLogger().error('Uncaught exception', exc_info=(exc_type, exc_value, exc_traceback))

    return handle_exception


def setup_logging(
    json_logs: bool = False,
    log_level: str = 'INFO',
    exclude_modules: list[str] | None = None,
    include_modules: list[str] | None = None,
    rich_tracebacks: bool = True,
) -> None:
    """set-up logging for the application

    Safe to call more than once; the root handler is replaced, not stacked.

    Args:
        json_logs (bool, optional): True if logs should be in JSON format. Defaults to False.
        log_level (str, optional): The log level to use. Defaults to "INFO".
        exclude_modules (list[str] | None, optional): Module prefixes left at their own level.
        include_modules (list[str] | None, optional): Module prefixes kept at `log_level`
            (e.g. ['microedit']). Every other logger is lowered to WARNING.
        rich_tracebacks (bool, optional): Pretty tracebacks on stderr (console mode only). Defaults to True.
    """
    rich_tracebacks = rich_tracebacks and not json_logs
    if rich_tracebacks:
        install_rich_traceback(console=console, show_locals=False, width=TRACEBACK_WIDTH, word_wrap=True)

    pre_chain = _pre_chain(json_logs)
    structlog.configure(
        processors=[*pre_chain, structlog.stdlib.ProcessorFormatter.wrap_for_formatter],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    root_logger = logging.getLogger()
    root_logger.handlers.clear()
    root_logger.addHandler(_stderr_handler(pre_chain, json_logs))
    root_logger.setLevel(log_level.upper())

    _quiet_other_loggers(include_modules or [], exclude_modules or [])
    sys.excepthook = _excepthook(rich_tracebacks)


def get_logger(name: str) -> BoundLogger:
    """Get a logger with the given name

    Args:
        name (str): The name of the logger

    Returns:
        BoundLogger: The logger
    """
    return structlog.stdlib.get_logger(name)


def render_kv(event: str, fields: dict[str, Any]) -> str:
    """Render one structured diagnostic line as ``event='..' key=value ...``.

    Keys are sorted so that the same fields always render to the same line.

    Args:
        event (str): The event name placed first on the line.
        fields (dict[str, Any]): Diagnostic fields.

    Returns:
        str: The key/value line.
    """
    return _kv_renderer(None, 'info', {'event': event, **fields})
