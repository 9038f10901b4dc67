"""
Tests for the logger library helpers.

Covers:
  1. render_kv line format
  2. flatten_extra
  3. setup_logging keeps a single stderr handler

Run with:
    pytest test/logger -v
"""
from __future__ import annotations

import logging
import sys

from logger import render_kv
from logger import setup_logging
from logger.logger import flatten_extra


class TestRenderKV:

    def test_event_first_then_sorted_keys(self):
        line = render_kv('rome.edit', {'v_loss': 0.5, 'layer': 1})
        assert line == "event='rome.edit' layer=1 v_loss=0.5"

    def test_same_fields_same_line(self):
        assert render_kv('e', {'b': 2, 'a': 1}) == render_kv('e', {'a': 1, 'b': 2})


class TestFlattenExtra:

    def test_extra_is_merged(self):
        event = flatten_extra(None, 'info', {'event': 'x', 'extra': {'step': 3}})
        assert event == {'event': 'x', 'step': 3}

    def test_existing_keys_win(self):
        event = flatten_extra(None, 'info', {'event': 'x', 'extra': {'event': 'y'}})
        assert event['event'] == 'x'


class TestSetupLogging:

    def test_repeated_setup_does_not_stack_handlers(self):
        hook = sys.excepthook
        try:
            setup_logging(include_modules=['microedit'], rich_tracebacks=False)
            setup_logging(include_modules=['microedit'], rich_tracebacks=False)
            handlers = logging.getLogger().handlers
            assert len(handlers) == 1
            assert handlers[0].stream is sys.stderr
        finally:
            sys.excepthook = hook
