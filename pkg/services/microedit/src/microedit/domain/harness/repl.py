"""Interactive edit-and-probe session."""
from __future__ import annotations

import shlex
from typing import Optional

from logger import get_logger
from logger import render_kv
from microedit.domain.editors import BaseEditor
from microedit.domain.editors import EditOutcome
from microedit.domain.editors import ModelResponder
from microedit.domain.evaluate import evaluate_edit
from microedit.domain.factworld import EditRequest
from microedit.domain.factworld import FactWorldService
from microedit.domain.microlm import clone_state
from microedit.shared.exception import MicroEditError
from microedit.shared.exception import UsageError

from .workbench import Workbench

logger = get_logger(__name__)

HELP = 'commands: edit <subject> <relation> <new-object> | ask <prompt> | undo | metrics | quit'


class ReplSession:
    """One model, one editor; edits stack up and `undo` rolls back the latest."""

    def __init__(self, workbench: Workbench, editor: BaseEditor, gen_len: int = 50):
        self.workbench = workbench
        self.editor = editor
        self.gen_len = gen_len
        self.model = workbench.require_model()
        self.world = workbench.require_world()
        self.base = ModelResponder(clone_state(self.model), editor.context.max_answer_tokens)
        self.history: list[tuple[EditRequest, EditOutcome]] = []

    def relation_id(self, name: str) -> str:
        for spec in self.world.relations:
            if name in (spec.id, spec.noun):
                return spec.id
        return name

    def cmd_edit(self, args: list[str]) -> str:
        if len(args) != 3:
            raise UsageError('usage: edit <subject> <relation> <new-object>')
        subject, relation, new_object = args
        request = FactWorldService(settings=self.workbench.settings.factworld).edit_request(
            self.world, subject, self.relation_id(relation), new_object,
            case_id=len(self.history), seed=self.workbench.seed,
        )
        outcome = self.editor.apply_to_model(self.model, [request], keep_original=True)
        self.history.append((request, outcome))
        return render_kv(f'{self.editor.name}.edit', outcome.method_log)

    def cmd_ask(self, args: list[str]) -> str:
        if not args:
            raise UsageError('usage: ask <prompt>')
        prompt = ' '.join(args).split()
        return ' '.join(self.editor.responder(self.model).answer(prompt))

    def cmd_undo(self, args: list[str]) -> str:
        if not self.history:
            raise UsageError('nothing to undo')
        request, outcome = self.history.pop()
        self.editor.rollback(self.model, outcome)
        return f'undone: {request.subject} {request.relation} {request.new_object}'

    def cmd_metrics(self, args: list[str]) -> str:
        if not self.history:
            return 'no active edits'
        post = self.editor.responder(self.model)
        lines = []
        for request, outcome in self.history:
            try:
                record = evaluate_edit(self.base, post, request, outcome, self.gen_len).record()
            except MicroEditError as e:
                logger.warning('Could not evaluate edit', extra={'case_id': request.case_id, 'category': e.category})
                record = {'case_id': request.case_id, 'error': e.cli_line()}
            lines.append(render_kv('metrics', record))
        return '\n'.join(lines)

    def handle(self, line: str) -> tuple[Optional[str], bool]:
        """Run one command line; returns (output, finished)."""
        try:
            words = shlex.split(line)
        except ValueError as e:
            return UsageError(str(e)).cli_line(), False
        if not words:
            return None, False
        command, args = words[0].lower(), words[1:]
        if command in ('quit', 'exit'):
            return None, True
        handler = getattr(self, f'cmd_{command}', None)
        if handler is None:
            return HELP, False
        try:
            return handler(args), False
        except MicroEditError as e:
            logger.warning('REPL command failed', extra={'command': command, 'category': e.category})
            return e.cli_line(), False
