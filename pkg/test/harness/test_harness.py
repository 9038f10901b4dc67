"""
Tests for the bench harness: hparams files, regimes, reports, rendering and the REPL.

Covers:
  1. Default targets and hparams files
  2. Regime validation and runs
  3. Report files and content hashes
  4. Text rendering
  5. EditorService and ReplSession

Run with:
    pytest test/harness -v
"""
from __future__ import annotations

import numpy as np
import pytest

from microedit.domain.editors import capability_table
from microedit.domain.evaluate import MetricReport
from microedit.domain.harness import BenchReport
from microedit.domain.harness import EditorService
from microedit.domain.harness import RegimeKind
from microedit.domain.harness import RegimeSpec
from microedit.domain.harness import ReplSession
from microedit.domain.harness import Workbench
from microedit.domain.harness import check_regime
from microedit.domain.harness import default_hparams
from microedit.domain.harness import default_targets
from microedit.domain.harness import dumps_report
from microedit.domain.harness import load_hparams
from microedit.domain.harness import load_report
from microedit.domain.harness import parse_hparams
from microedit.domain.harness import render_capabilities
from microedit.domain.harness import render_table
from microedit.domain.harness import render_trace
from microedit.domain.harness import run_regime
from microedit.domain.harness import save_hparams
from microedit.domain.harness import save_report
from microedit.domain.harness import repl as repl_module
from microedit.domain.harness.repl import HELP
from microedit.domain.microlm import TraceResult
from microedit.domain.microlm import clone_state
from microedit.domain.microlm import weights_equal
from microedit.shared.exception import AddressError
from microedit.shared.exception import CapabilityError
from microedit.shared.exception import CheckpointError
from microedit.shared.exception import ContractError
from microedit.shared.exception import GenerationError
from microedit.shared.exception import HparamsError
from microedit.shared.exception import UnknownKnobError
from microedit.shared.exception import UnknownMethodError
from microedit.shared.models import HparamSet
from microedit.shared.settings import EditorsSettings
from microedit.shared.settings import GRACEKnobs
from microedit.shared.settings import MEMITKnobs
from microedit.shared.settings import ROMEKnobs
from microedit.shared.settings import Settings


# ─── Fixtures ─────────────────────────────────────────────────────────────────

@pytest.fixture(scope='module')
def fast_settings(factworld_settings) -> Settings:
    return Settings(
        factworld=factworld_settings,
        editors=EditorsSettings(
            rome=ROMEKnobs(covariance_samples=200, v_steps=5, n_prefix=2),
            memit=MEMITKnobs(covariance_samples=200, v_steps=5, n_prefix=2),
            grace=GRACEKnobs(v_steps=3),
        ),
    )


@pytest.fixture
def workbench(fast_settings, world, benchmark, model) -> Workbench:
    return Workbench(settings=fast_settings, seed=0, world=world, benchmark=benchmark, model=model)


# ═════════════════════════════════════════════════════════════════════════════
# 1. Hparams
# ═════════════════════════════════════════════════════════════════════════════

class TestDefaultTargets:

    def test_six_layers(self):
        assert default_targets('rome', 6) == ['blocks.1.mlp.down']
        assert default_targets('ftl', 6) == ['blocks.1.mlp.down']
        assert default_targets('memit', 6) == ['blocks.2.mlp.down', 'blocks.3.mlp.down']
        assert default_targets('grace', 6) == ['blocks.5.mlp.down']
        assert len(default_targets('kn', 6)) == 6

    def test_memory_methods_have_no_targets(self):
        assert default_targets('ike', 6) == []
        assert default_targets('serac', 6) == []

    def test_default_hparams_carry_configured_knobs(self, tiny_config):
        hparams = default_hparams('rome', tiny_config, EditorsSettings(rome=ROMEKnobs(v_steps=7)))
        assert hparams.knobs['v_steps'] == 7
        assert hparams.flags == {'auto_layer': False}

    def test_unknown_method(self, tiny_config):
        with pytest.raises(UnknownMethodError):
            default_hparams('lora', tiny_config)


class TestHparamsFiles:

    def test_round_trip(self, tmp_path, tiny_config):
        hparams = default_hparams('memit', tiny_config).with_knobs(ridge=0.5, mass_least_squares=True)
        path = save_hparams(tmp_path / 'memit.toml', hparams)
        loaded = load_hparams(path, tiny_config)
        assert loaded.fingerprint() == hparams.fingerprint()
        assert loaded.source_path == str(path)

    def test_fingerprint_follows_knobs(self, tiny_config):
        hparams = default_hparams('rome', tiny_config)
        assert hparams.fingerprint() == default_hparams('rome', tiny_config).fingerprint()
        assert hparams.fingerprint() != hparams.with_knobs(ridge=0.1).fingerprint()

    def test_fingerprint_names_the_memit_update_form(self, tiny_config):
        hparams = default_hparams('memit', tiny_config)
        implicit = HparamSet(method='memit', targets=hparams.targets)
        assert implicit.fingerprint() == hparams.fingerprint()
        assert hparams.fingerprint() != hparams.with_knobs(mass_least_squares=True).fingerprint()

    def test_unknown_knob(self, tiny_config):
        with pytest.raises(UnknownKnobError) as exc_info:
            parse_hparams({'kn': {'targets': ['blocks.0.mlp.down'], 'lr': 0.1}}, config=tiny_config)
        assert exc_info.value.category == 'unknown-knob'
        assert exc_info.value.details['knobs'] == ['lr']

    def test_aliases_resolve(self, tiny_config):
        hparams = parse_hparams(
            {'FT-L': {'targets': ['transformer.h.1.mlp.fc_out'], 'eps_inf': 0.01}}, config=tiny_config,
        )
        assert hparams.method == 'ftl'
        assert hparams.targets == ['blocks.1.mlp.down']

    def test_unresolvable_target(self, tiny_config):
        with pytest.raises(AddressError):
            parse_hparams({'rome': {'targets': ['blocks.9.mlp.down']}}, config=tiny_config)

    def test_one_table_per_file(self):
        with pytest.raises(HparamsError):
            parse_hparams({'rome': {}, 'memit': {}})

    def test_non_numeric_knob(self):
        with pytest.raises(HparamsError):
            parse_hparams({'rome': {'ridge': 'small'}})

    def test_missing_file(self, tmp_path):
        with pytest.raises(HparamsError):
            load_hparams(tmp_path / 'nope.toml')

    def test_unparsable_file(self, tmp_path):
        path = tmp_path / 'bad.toml'
        path.write_text('[rome\n', encoding='utf-8')
        with pytest.raises(HparamsError):
            load_hparams(path)


# ═════════════════════════════════════════════════════════════════════════════
# 2. Regimes
# ═════════════════════════════════════════════════════════════════════════════

class TestRegimeSpec:

    def test_batch_size_outside_batch_regime(self):
        with pytest.raises(ContractError):
            RegimeSpec(kind=RegimeKind.SINGLE, batch_size=2)

    def test_evaluation_points(self):
        assert RegimeSpec().evaluation_point == 'per-edit'
        assert RegimeSpec(kind=RegimeKind.BATCH, batch_size=4).evaluation_point == 'per-chunk'
        assert not RegimeSpec(kind=RegimeKind.SEQUENTIAL).rolls_back


class TestRunRegime:

    def test_single_regime_leaves_the_model_untouched(self, workbench, model, benchmark):
        original = clone_state(model)
        report = run_regime(model, workbench.editor('grace'), benchmark[:2], RegimeSpec(), gen_len=5, world_seed=3)
        assert weights_equal(model, original)
        assert [r.case_id for r in report.reports] == [0, 1]
        assert report.aggregate is not None
        assert report.world_seed == 3

    def test_single_rome_rolls_back_every_edit(self, workbench, model, benchmark):
        original = clone_state(model)
        report = run_regime(model, workbench.editor('rome'), benchmark[:2], RegimeSpec(), gen_len=5)
        assert weights_equal(model, original)
        assert all(r.error is None for r in report.reports)

    def test_batch_refused_before_any_change(self, workbench, model, benchmark):
        original = clone_state(model)
        with pytest.raises(CapabilityError):
            run_regime(model, workbench.editor('rome'), benchmark, RegimeSpec(kind=RegimeKind.BATCH, batch_size=2))
        assert weights_equal(model, original)

    def test_sequential_keeps_the_edits(self, workbench, model, benchmark):
        original = clone_state(model)
        report = run_regime(model, workbench.editor('rome'), benchmark[:2], RegimeSpec(kind=RegimeKind.SEQUENTIAL), gen_len=5)
        assert not weights_equal(model, original)
        assert len(report.reports) == 2

    def test_sequential_refused_for_ike(self, workbench, model, benchmark):
        with pytest.raises(CapabilityError):
            run_regime(model, workbench.editor('ike'), benchmark[:2], RegimeSpec(kind=RegimeKind.SEQUENTIAL))

    def test_capability_sweep(self, workbench, model, benchmark):
        original = clone_state(model)
        regimes = [
            RegimeSpec(),
            RegimeSpec(kind=RegimeKind.BATCH, batch_size=1),
            RegimeSpec(kind=RegimeKind.BATCH, batch_size=2),
            RegimeSpec(kind=RegimeKind.BATCH, batch_size=4),
            RegimeSpec(kind=RegimeKind.SEQUENTIAL),
        ]
        for method in ('ftl', 'kn', 'rome', 'memit', 'ike', 'grace'):
            editor = workbench.editor(method)
            caps = editor.capabilities
            for regime in regimes:
                admitted = not (
                    (regime.kind == RegimeKind.BATCH and regime.batch_size > 1 and not caps.supports_batch)
                    or (regime.kind == RegimeKind.SEQUENTIAL and not caps.supports_sequential)
                )
                if admitted:
                    check_regime(editor, regime, len(benchmark))
                    continue
                with pytest.raises(CapabilityError):
                    run_regime(model, editor, benchmark, regime)
                assert weights_equal(model, original)

    def test_failures_are_recorded(self, workbench, model, benchmark):
        editor = workbench.editor('kn')
        editor.hparams = editor.hparams.with_knobs(top_k=10_000, steps=1)
        report = run_regime(model, editor, benchmark[:2], RegimeSpec(), gen_len=5)
        assert [r.error for r in report.reports] == ['contract', 'contract']
        assert report.aggregate.reliability == 0.0


# ═════════════════════════════════════════════════════════════════════════════
# 3. Reports
# ═════════════════════════════════════════════════════════════════════════════

class TestReports:

    def test_round_trip(self, tmp_path, workbench, model, benchmark):
        report = run_regime(model, workbench.editor('grace'), benchmark[:2], RegimeSpec(), gen_len=5)
        path = save_report(tmp_path / 'grace.jsonl', report)
        loaded = load_report(path)
        assert loaded.content_hash() == report.content_hash()
        assert [r.record() for r in loaded.reports] == [r.record() for r in report.reports]

    def test_header_names_the_memit_update_form(self, tmp_path, workbench, model, benchmark):
        editor = workbench.editor('memit')
        editor.hparams = editor.hparams.with_knobs(mass_least_squares=True)
        report = run_regime(model, editor, benchmark[:1], RegimeSpec(), gen_len=5)
        assert report.header()['update_form'] == 'mass_least_squares'
        loaded = load_report(save_report(tmp_path / 'memit.jsonl', report))
        assert loaded.update_form == 'mass_least_squares'

    def test_header_omits_update_form_for_single_rule_methods(self, workbench, model, benchmark):
        report = run_regime(model, workbench.editor('grace'), benchmark[:1], RegimeSpec(), gen_len=5)
        assert 'update_form' not in report.header()

    def test_reruns_hash_identically(self, fast_settings, world, benchmark, model):
        hashes = []
        for _ in range(2):
            bench = Workbench(settings=fast_settings, seed=0, world=world, benchmark=benchmark, model=clone_state(model))
            report = run_regime(bench.model, bench.editor('grace'), benchmark[:2], RegimeSpec(), gen_len=5)
            hashes.append((report.content_hash(), dumps_report(report, timing=False)))
        assert hashes[0] == hashes[1]

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_report(tmp_path / 'nope.jsonl')

    def test_malformed_header(self, tmp_path):
        path = tmp_path / 'bad.jsonl'
        path.write_text('{"kind":"edit"}\n', encoding='utf-8')
        with pytest.raises(CheckpointError):
            load_report(path)


# ═════════════════════════════════════════════════════════════════════════════
# 4. Rendering
# ═════════════════════════════════════════════════════════════════════════════

class TestRender:

    def _report(self, aggregate=None) -> BenchReport:
        return BenchReport(
            method='serac', regime=RegimeKind.SINGLE, hparams_fingerprint='0' * 64, world_seed=0, aggregate=aggregate,
        )

    def test_table_row(self):
        agg = MetricReport(reliability=0.9949, generalization=0.9913, locality=1.0, portability=0.5782, fluency=423.22)
        lines = render_table(self._report(agg)).splitlines()
        assert lines[0].split() == ['Method', 'Reliability', 'Generalization', 'Locality', 'Portability', 'Fluency']
        assert lines[1].split() == ['SERAC', '99.49', '99.13', '100.00', '57.82', '423.22']

    def test_header_only_without_aggregate(self):
        lines = render_table(self._report()).splitlines()
        assert len(lines) == 1
        assert lines[0].startswith('Method')

    def test_efficiency_columns(self):
        agg = MetricReport(elapsed_seconds=1.5, extra_state_bytes=272)
        lines = render_table([self._report(agg)], efficiency=True).splitlines()
        assert 'Time (s)' in lines[0] and 'Extra bytes' in lines[0]
        assert lines[1].split()[-2:] == ['1.50', '272']

    def test_trace_marks_the_subject(self):
        trace = TraceResult(
            grid=np.array([[0.0, 0.5, 0.1], [0.0, 1.0, 0.0]]),
            clean_prob=0.9, corrupted_prob=0.2, subject_last=1, tokens=['the', 'zorba', 'is'],
        )
        lines = render_trace(trace).splitlines()
        assert lines[0].startswith('restore=mlp')
        assert lines[3].startswith('*zorba')
        assert lines[2].startswith(' the')
        assert '@@' in lines[3]

    def test_capabilities(self):
        lines = render_capabilities(capability_table()).splitlines()
        assert len(lines) == 12
        assert sum('unimplemented' in line for line in lines) == 4
        assert lines[0].startswith('Method')


# ═════════════════════════════════════════════════════════════════════════════
# 5. EditorService and REPL
# ═════════════════════════════════════════════════════════════════════════════

class TestEditorService:

    def test_before_and_after(self, workbench, model, benchmark):
        service = EditorService(model=model, editor=workbench.editor('grace'), gen_len=5)
        result = service.edit([benchmark[0]], keep_original=True)
        assert len(result.before) == len(result.after) == 1
        assert result.before[0].locality == 1.0
        service.rollback(result)
        assert len(service.editor.book().entries) == 0


class TestReplSession:

    @pytest.fixture
    def session(self, workbench) -> ReplSession:
        return ReplSession(workbench, workbench.editor('grace'), gen_len=5)

    def _edit_line(self, world, request) -> str:
        return f'edit {request.subject} {world.relation(request.relation).noun} {request.new_object}'

    def test_edit_then_undo(self, session, world, benchmark):
        output, done = session.handle(self._edit_line(world, benchmark[0]))
        assert 'grace.edit' in output
        assert not done
        assert len(session.history) == 1
        output, _ = session.handle('undo')
        assert output.startswith('undone:')
        assert session.history == []

    def test_undo_with_nothing_to_undo(self, session):
        output, done = session.handle('undo')
        assert output == 'error:usage:nothing to undo'
        assert not done

    def test_ask_and_metrics(self, session, world, benchmark):
        assert session.handle('metrics') == ('no active edits', False)
        session.handle(self._edit_line(world, benchmark[0]))
        prompt = ' '.join(benchmark[0].edit_prompt)
        answer, _ = session.handle(f'ask {prompt}')
        assert isinstance(answer, str)
        metrics, _ = session.handle('metrics')
        assert 'reliability' in metrics

    def test_noop_edit_is_reported(self, session, world):
        fact = world.facts[0]
        output, done = session.handle(f'edit {fact.subject} {fact.relation} {fact.object}')
        assert output.startswith('error:generation:')
        assert not done
        assert session.history == []

    def test_metrics_survive_one_failing_edit(self, session, world, benchmark, monkeypatch):
        session.handle(self._edit_line(world, benchmark[0]))
        session.handle(self._edit_line(world, benchmark[1]))
        assert len(session.history) == 2
        failing_case = session.history[0][0].case_id
        real_evaluate = repl_module.evaluate_edit

        def evaluate_or_fail(base, post, request, outcome, gen_len):
            if request.case_id == failing_case:
                raise GenerationError('no portability probe')
            return real_evaluate(base, post, request, outcome, gen_len)

        monkeypatch.setattr(repl_module, 'evaluate_edit', evaluate_or_fail)
        metrics, done = session.handle('metrics')
        lines = metrics.splitlines()
        assert not done
        assert len(lines) == 2
        assert 'error:generation:' in lines[0]
        assert 'reliability' in lines[1]

    def test_unknown_command_shows_help(self, session):
        assert session.handle('frobnicate') == (HELP, False)

    def test_blank_line_and_quit(self, session):
        assert session.handle('   ') == (None, False)
        assert session.handle('quit') == (None, True)

    def test_bad_edit_is_reported(self, session):
        output, done = session.handle('edit only-two args')
        assert output.startswith('error:usage:')
        assert not done
