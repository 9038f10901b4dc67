"""Command line for the lab.

Usage:
    microedit generate --out world.fw
    microedit train --world world.fw --out model.melm
    microedit edit --world world.fw --ckpt model.melm --method rome --case 3
    microedit bench --world world.fw --ckpt model.melm --method rome --regime single --out rome.jsonl
    microedit trace --world world.fw --ckpt model.melm --case 0
    microedit repl --world world.fw --ckpt model.melm --method rome
    microedit methods

Exit status is 0 on success, 1 on usage errors and 2 on runtime failures;
errors go to stderr as `error:<category>:<message>`.
"""
from __future__ import annotations

import argparse
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Optional
from typing import TextIO

from logger import get_logger
from logger import render_kv
from logger import setup_logging
from microedit.domain.editors import ModelResponder
from microedit.domain.editors import capability_table
from microedit.domain.evaluate import evaluate_edit
from microedit.domain.factworld import FactWorldInput
from microedit.domain.factworld import FactWorldService
from microedit.domain.factworld import save_world
from microedit.domain.harness import EditorService
from microedit.domain.harness import RegimeKind
from microedit.domain.harness import RegimeSpec
from microedit.domain.harness import ReplSession
from microedit.domain.harness import Workbench
from microedit.domain.harness import render_capabilities
from microedit.domain.harness import render_table
from microedit.domain.harness import render_trace
from microedit.domain.harness import run_regime
from microedit.domain.harness import save_report
from microedit.domain.microlm import CausalTraceInput
from microedit.domain.microlm import CausalTraceService
from microedit.domain.microlm import ModelConfig
from microedit.domain.microlm import clone_state
from microedit.domain.microlm import load_checkpoint
from microedit.domain.microlm import save_checkpoint
from microedit.domain.microlm import select_edit_layer
from microedit.domain.trainer import LMTrainer
from microedit.domain.trainer import write_loss_curve
from microedit.shared.exception import LocalizationError
from microedit.shared.exception import MicroEditError
from microedit.shared.exception import UsageError
from microedit.shared.settings import Settings
from microedit.shared.utils import canonical_json
from microedit.shared.utils import get_settings
from microedit.shared.utils import resolve_seed

logger = get_logger(__name__)


class ArgumentParser(argparse.ArgumentParser):
    """argparse that reports usage errors as exceptions instead of exiting with status 2."""

    def error(self, message: str):
        raise UsageError(f'{self.prog}: {message}')


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------
def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog='microedit', description='Desk-scale knowledge-editing laboratory')
    sub = parser.add_subparsers(dest='command', parser_class=ArgumentParser)

    def common(p: ArgumentParser, world: bool = True, ckpt: bool = True) -> None:
        p.add_argument('--seed', type=int, default=None, help='Global seed (falls back to MICROEDIT_SEED)')
        if world:
            p.add_argument('--world', help='World and benchmark file')
        if ckpt:
            p.add_argument('--ckpt', help='Model checkpoint')

    p = sub.add_parser('generate', help='Synthesize a world and its edit benchmark')
    common(p, world=False, ckpt=False)
    p.add_argument('--out', default='world.fw')

    p = sub.add_parser('train', help='Train the base model on a world')
    common(p, ckpt=False)
    p.add_argument('--out', default='model.melm')
    p.add_argument('--steps', type=int, default=None, help='Override the maximum number of steps')

    p = sub.add_parser('edit', help='Apply one method to one benchmark request')
    common(p)
    p.add_argument('--method', required=True)
    p.add_argument('--hparams')
    p.add_argument('--case', type=int, default=0)
    p.add_argument('--out', help='Write the edited checkpoint here')
    p.add_argument('--gen-len', type=int, default=None)

    p = sub.add_parser('eval', help='Metric report for a stored edit')
    common(p)
    p.add_argument('--edited', help='Edited checkpoint to compare against --ckpt')
    p.add_argument('--method', help='Re-apply this method when no edited checkpoint is given')
    p.add_argument('--hparams')
    p.add_argument('--case', type=int, default=0)
    p.add_argument('--out')
    p.add_argument('--gen-len', type=int, default=None)

    p = sub.add_parser('bench', help='Run a method over the benchmark under one regime')
    common(p)
    p.add_argument('--method', required=True)
    p.add_argument('--regime', choices=[k.value for k in RegimeKind], default='single')
    p.add_argument('--batch-size', type=int, default=None)
    p.add_argument('--hparams')
    p.add_argument('--out')
    p.add_argument('--gen-len', type=int, default=None)
    p.add_argument('--limit', type=int, default=None, help='Use only the first N requests')
    p.add_argument('--efficiency', action='store_true', help='Add time and extra-state columns')

    p = sub.add_parser('trace', help='Causal trace of one benchmark request')
    common(p)
    p.add_argument('--case', type=int, default=0)
    p.add_argument('--restore', choices=['mlp', 'hidden'], default='mlp')

    p = sub.add_parser('repl', help='Interactive edit-and-probe session')
    common(p)
    p.add_argument('--method', required=True)
    p.add_argument('--hparams')
    p.add_argument('--gen-len', type=int, default=None)

    sub.add_parser('methods', help='Capability matrix of all registered methods')
    return parser


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------
def workbench(args: argparse.Namespace, settings: Settings) -> Workbench:
    return Workbench.from_files(
        settings,
        resolve_seed(args.seed, settings),
        world_path=getattr(args, 'world', None),
        ckpt_path=getattr(args, 'ckpt', None),
    )


def pick_case(bench: Workbench, case: int):
    if not 0 <= case < len(bench.benchmark):
        raise UsageError(f'--case {case} outside the benchmark of {len(bench.benchmark)} requests')
    return bench.benchmark[case]


def cmd_generate(args, settings: Settings, out: TextIO) -> None:
    seed = resolve_seed(args.seed, settings)
    result = FactWorldService(settings=settings.factworld).process(
        FactWorldInput(seed=seed, context_len=settings.model.context_len),
    )
    path = save_world(args.out, result.world, result.benchmark)
    out.write(
        f'world: {len(result.world.entities)} entities, {len(result.world.facts)} facts, '
        f'{len(result.benchmark)} edits -> {path}\n',
    )


def cmd_train(args, settings: Settings, out: TextIO) -> None:
    bench = workbench(args, settings)
    world = bench.require_world()
    trainer = LMTrainer(settings=settings.trainer, factworld_settings=settings.factworld)
    overrides = {'steps': args.steps} if args.steps else {}
    run = trainer.default_run(bench.seed, **overrides)
    config = ModelConfig.from_settings(settings.model, vocab_size=0)
    model = trainer.run(world, config, run)
    path = save_checkpoint(args.out, model)
    curve = write_loss_curve(Path(args.out).with_suffix('.loss'), run)
    out.write(f'trained: best_step={run.best_step} recall={run.best_recall} -> {path} (loss curve {curve})\n')


def cmd_edit(args, settings: Settings, out: TextIO) -> None:
    bench = workbench(args, settings)
    request = pick_case(bench, args.case)
    editor = bench.editor(args.method, args.hparams)
    service = EditorService(
        model=bench.require_model(), editor=editor, gen_len=args.gen_len or settings.evaluate.gen_len,
    )
    result = service.edit([request])
    out.write(render_kv(f'{editor.name}.edit', result.outcome.method_log) + '\n')
    out.write(render_kv('before', result.before[0].record()) + '\n')
    out.write(render_kv('after', result.after[0].record()) + '\n')
    if args.out:
        save_checkpoint(args.out, service.model)


def cmd_eval(args, settings: Settings, out: TextIO) -> None:
    bench = workbench(args, settings)
    request = pick_case(bench, args.case)
    gen_len = args.gen_len or settings.evaluate.gen_len
    base = bench.require_model()
    pre = ModelResponder(base, settings.evaluate.max_answer_tokens)
    if args.edited:
        post = ModelResponder(load_checkpoint(args.edited), settings.evaluate.max_answer_tokens)
        report = evaluate_edit(pre, post, request, gen_len=gen_len)
    elif args.method:
        editor = bench.editor(args.method, args.hparams)
        edited = clone_state(base)
        outcome = editor.apply_to_model(edited, [request])
        report = evaluate_edit(pre, editor.responder(edited), request, outcome, gen_len)
    else:
        raise UsageError('eval needs --edited or --method')
    line = canonical_json(report.record())
    out.write(line + '\n')
    if args.out:
        Path(args.out).write_text(line + '\n', encoding='utf-8')


def cmd_bench(args, settings: Settings, out: TextIO) -> None:
    bench = workbench(args, settings)
    model = bench.require_model()
    world = bench.require_world()
    kind = RegimeKind(args.regime)
    regime = RegimeSpec(kind=kind, batch_size=args.batch_size or 1) if kind == RegimeKind.BATCH else RegimeSpec(kind=kind)
    if kind != RegimeKind.BATCH and args.batch_size not in (None, 1):
        raise UsageError('--batch-size applies to the batch regime only')
    editor = bench.editor(args.method, args.hparams)
    requests = bench.benchmark[: args.limit] if args.limit else bench.benchmark
    report = run_regime(
        model, editor, requests, regime,
        gen_len=args.gen_len or settings.evaluate.gen_len, world_seed=world.seed,
    )
    path = save_report(args.out or f'bench_{editor.name}_{kind.value}.jsonl', report)
    out.write(render_table(report, efficiency=args.efficiency))
    logger.info('Wrote bench report', extra={'path': str(path), 'content_hash': report.content_hash()})


def cmd_trace(args, settings: Settings, out: TextIO) -> None:
    bench = workbench(args, settings)
    request = pick_case(bench, args.case)
    trace = CausalTraceService(settings=settings.tracing).process(
        CausalTraceInput(state=bench.require_model(), request=request, seed=bench.seed, restore=args.restore),
    )
    out.write(render_trace(trace))
    try:
        out.write(f'edit layer: {select_edit_layer(trace)}\n')
    except LocalizationError:
        out.write('edit layer: none (flat trace)\n')


def cmd_repl(args, settings: Settings, out: TextIO, stdin: Optional[TextIO] = None) -> None:
    bench = workbench(args, settings)
    session = ReplSession(bench, bench.editor(args.method, args.hparams), args.gen_len or settings.evaluate.gen_len)
    stdin = stdin or sys.stdin
    interactive = stdin.isatty()
    while True:
        if interactive:
            out.write('> ')
            out.flush()
        line = stdin.readline()
        if not line:
            break
        output, done = session.handle(line)
        if output:
            out.write(output + '\n')
        if done:
            break


def cmd_methods(args, settings: Settings, out: TextIO) -> None:
    out.write(render_capabilities(capability_table()))


COMMANDS = {
    'generate': cmd_generate,
    'train': cmd_train,
    'edit': cmd_edit,
    'eval': cmd_eval,
    'bench': cmd_bench,
    'trace': cmd_trace,
    'repl': cmd_repl,
    'methods': cmd_methods,
}


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------
def main(argv: Optional[Sequence[str]] = None, out: Optional[TextIO] = None, err: Optional[TextIO] = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError('a subcommand is required: ' + ', '.join(COMMANDS))
        settings = get_settings()
        setup_logging(
            json_logs=settings.logging.json_logs,
            log_level=settings.logging.level,
            include_modules=['microedit'],
        )
        COMMANDS[args.command](args, settings, out)
    except MicroEditError as e:
        err.write(e.cli_line() + '\n')
        return e.exit_code
    except OSError as e:
        err.write(f'error:io:{e}\n')
        return 2
    return 0


def run() -> None:
    sys.exit(main())


if __name__ == '__main__':
    run()
