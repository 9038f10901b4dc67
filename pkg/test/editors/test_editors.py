"""
Tests for the editing methods and their shared contract.

Covers:
  1. Rank-one solve
  2. ROME (exactness, targets, rollback, capability gate)
  3. MEMIT (reduces to ROME for one layer and one request)
  4. FT-L (L-infinity box)
  5. KN (integrated gradients, alpha and top_k)
  6. IKE (prefix, weights untouched, no sequential use)
  7. GRACE (codebook rules, deferral, exact-key hits)
  8. SERAC (training gate, routing)
  9. Method registry

Run with:
    pytest test/editors -v
"""
from __future__ import annotations

import numpy as np
import pytest

from microedit.domain.editors import Codebook
from microedit.domain.editors import CodebookEntry
from microedit.domain.editors import EditArea
from microedit.domain.editors import FTLEditor
from microedit.domain.editors import GRACEEditor
from microedit.domain.editors import IKEEditor
from microedit.domain.editors import KNEditor
from microedit.domain.editors import MEMITEditor
from microedit.domain.editors import ModelResponder
from microedit.domain.editors import ROMEEditor
from microedit.domain.editors import SERACEditor
from microedit.domain.editors import ScopeClassifier
from microedit.domain.editors import build_editor
from microedit.domain.editors import canonical_name
from microedit.domain.editors import capability_table
from microedit.domain.editors import get_method
from microedit.domain.editors import implemented_methods
from microedit.domain.editors import insert_entry
from microedit.domain.editors import integrated_gradients
from microedit.domain.editors import lookup
from microedit.domain.editors import rank_one_update
from microedit.domain.factworld import SEP
from microedit.domain.harness import default_hparams
from microedit.domain.microlm import HookMode
from microedit.domain.microlm import HookSpec
from microedit.domain.microlm import answer
from microedit.domain.microlm import clone_state
from microedit.domain.microlm import forward
from microedit.domain.microlm import weights_equal
from microedit.numerics import make_rng
from microedit.shared.exception import CapabilityError
from microedit.shared.exception import ContractError
from microedit.shared.exception import RollbackError
from microedit.shared.exception import TrainingRequiredError
from microedit.shared.exception import UnimplementedMethodError
from microedit.shared.exception import UnknownMethodError


# ─── Helper ───────────────────────────────────────────────────────────────────

ROME_FAST = {'covariance_samples': 200, 'v_steps': 5, 'n_prefix': 2}


def _editor(method: str, config, context, **knobs):
    hparams = default_hparams(method, config)
    if knobs:
        hparams = hparams.with_knobs(**knobs)
    return build_editor(hparams, context)


def _entry(key, radius, label, value=None) -> CodebookEntry:
    key = np.asarray(key, dtype=np.float64)
    return CodebookEntry(key=key, value=np.zeros(2) if value is None else value, radius=radius, label=label)


class _CrashingFTL(FTLEditor):
    """Writes its target weight, then fails with an untyped error."""

    def execute(self, model, requests, knobs):
        address = self.hparams.targets[0]
        model.weights[address] = model.weights[address] + 1.0
        raise RuntimeError('solver blew up')


# ═════════════════════════════════════════════════════════════════════════════
# 1. Rank-one solve
# ═════════════════════════════════════════════════════════════════════════════

class TestRankOneUpdate:

    def test_identity_case(self):
        W, _ = rank_one_update(np.eye(2), np.eye(2), np.array([1.0, 0.0]), np.array([3.0, 0.0]))
        np.testing.assert_allclose(W, [[3.0, 0.0], [0.0, 1.0]], atol=1e-12)

    def test_value_already_stored_changes_nothing(self):
        rng = make_rng(0, 'test', 'rank-one-noop')
        W = rng.normal(size=(4, 3))
        k = rng.normal(size=3)
        W_new, _ = rank_one_update(W, np.eye(3), k, W @ k)
        np.testing.assert_allclose(W_new, W, atol=1e-12)

    def test_new_weights_map_key_to_value(self):
        rng = make_rng(0, 'test', 'rank-one')
        W = rng.normal(size=(5, 4))
        A = rng.normal(size=(4, 4))
        C = A @ A.T + np.eye(4)
        k, v = rng.normal(size=4), rng.normal(size=5)
        W_new, _ = rank_one_update(W, C, k, v)
        np.testing.assert_allclose(W_new @ k, v, atol=1e-10)

    def test_shape_mismatch(self):
        with pytest.raises(ContractError):
            rank_one_update(np.eye(2), np.eye(2), np.ones(3), np.ones(2))


# ═════════════════════════════════════════════════════════════════════════════
# 2. ROME
# ═════════════════════════════════════════════════════════════════════════════

class TestROME:

    def test_default_target_on_two_layers(self, tiny_config, edit_context):
        editor = _editor('rome', tiny_config, edit_context)
        assert isinstance(editor, ROMEEditor)
        assert editor.hparams.targets == ['blocks.0.mlp.down']

    def test_edit_is_exact_and_local(self, model, benchmark, tiny_config, edit_context):
        editor = _editor('rome', tiny_config, edit_context, **ROME_FAST)
        outcome = editor.apply_to_model(model, [benchmark[0]])
        assert outcome.method_log['exactness'] < 1e-8
        assert list(outcome.delta.weights) == ['blocks.0.mlp.down']
        assert outcome.extra_state_bytes == 0
        assert outcome.case_ids == [0]
        # rank one
        assert np.linalg.matrix_rank(outcome.delta.weights['blocks.0.mlp.down'], tol=1e-10) == 1

    def test_rollback_is_bit_exact(self, model, benchmark, tiny_config, edit_context):
        original = clone_state(model)
        editor = _editor('rome', tiny_config, edit_context, **ROME_FAST)
        outcome = editor.apply_to_model(model, [benchmark[0]], keep_original=True)
        assert not weights_equal(model, original)
        assert outcome.extra_state_bytes == sum(w.nbytes for w in original.weights.values())
        editor.rollback(model, outcome)
        assert weights_equal(model, original)
        with pytest.raises(RollbackError):
            editor.rollback(model, outcome)

    def test_rollback_without_snapshot(self, model, benchmark, tiny_config, edit_context):
        editor = _editor('rome', tiny_config, edit_context, **ROME_FAST)
        outcome = editor.apply_to_model(model, [benchmark[0]])
        with pytest.raises(RollbackError) as exc_info:
            editor.rollback(model, outcome)
        assert exc_info.value.category == 'rollback'

    def test_batch_is_refused_before_any_change(self, model, benchmark, tiny_config, edit_context):
        original = clone_state(model)
        editor = _editor('rome', tiny_config, edit_context, **ROME_FAST)
        with pytest.raises(CapabilityError):
            editor.apply_to_model(model, benchmark[:2])
        assert weights_equal(model, original)

    def test_sequential_edits_are_allowed(self, model, benchmark, tiny_config, edit_context):
        editor = _editor('rome', tiny_config, edit_context, **ROME_FAST)
        editor.apply_to_model(model, [benchmark[0]])
        outcome = editor.apply_to_model(model, [benchmark[1]])
        assert outcome.case_ids == [1]

    def test_empty_request_list(self, model, tiny_config, edit_context):
        with pytest.raises(ContractError):
            _editor('rome', tiny_config, edit_context).apply_to_model(model, [])


# ═════════════════════════════════════════════════════════════════════════════
# 3. MEMIT
# ═════════════════════════════════════════════════════════════════════════════

class TestMEMIT:

    def test_single_layer_single_request_matches_rome(self, model, benchmark, tiny_config, edit_context):
        rome_model = clone_state(model)
        memit = _editor('memit', tiny_config, edit_context, **ROME_FAST)
        assert isinstance(memit, MEMITEditor)
        assert memit.hparams.targets == ['blocks.0.mlp.down']
        rome = _editor('rome', tiny_config, edit_context, **ROME_FAST)

        memit.apply_to_model(model, [benchmark[0]])
        rome.apply_to_model(rome_model, [benchmark[0]])
        np.testing.assert_allclose(
            model.weights['blocks.0.mlp.down'], rome_model.weights['blocks.0.mlp.down'], atol=1e-6,
        )

    def test_batch_edit_touches_only_targets(self, model, benchmark, tiny_config, edit_context):
        memit = _editor('memit', tiny_config, edit_context, **ROME_FAST)
        outcome = memit.apply_to_model(model, benchmark[:2])
        assert set(outcome.delta.weights) <= set(memit.hparams.targets)
        assert outcome.case_ids == [0, 1]
        assert outcome.method_log['layers_applied'] == [0]

    def test_update_form_is_logged(self, model, benchmark, tiny_config, edit_context):
        constrained = _editor('memit', tiny_config, edit_context, **ROME_FAST)
        assert constrained.update_form() == 'constrained'
        mass = _editor('memit', tiny_config, edit_context, mass_least_squares=True, **ROME_FAST)
        assert mass.update_form() == 'mass_least_squares'
        outcome = mass.apply_to_model(model, [benchmark[0]])
        assert outcome.method_log['update_form'] == 'mass_least_squares'
        assert _editor('rome', tiny_config, edit_context).update_form() is None


# ═════════════════════════════════════════════════════════════════════════════
# 4. FT-L
# ═════════════════════════════════════════════════════════════════════════════

class TestFTL:

    def test_zero_box_changes_nothing(self, model, benchmark, tiny_config, edit_context):
        original = clone_state(model)
        editor = _editor('ftl', tiny_config, edit_context, eps_inf=0.0, steps=3)
        assert isinstance(editor, FTLEditor)
        editor.apply_to_model(model, [benchmark[0]])
        assert weights_equal(model, original)

    def test_change_stays_in_the_box(self, model, benchmark, tiny_config, edit_context):
        original = clone_state(model)
        editor = _editor('ftl', tiny_config, edit_context, eps_inf=1e-3, steps=3, lr=1.0)
        outcome = editor.apply_to_model(model, [benchmark[0]])
        delta = model.weights['blocks.0.mlp.down'] - original.weights['blocks.0.mlp.down']
        assert np.max(np.abs(delta)) <= 1e-3 + 1e-12
        assert set(outcome.delta.weights) <= {'blocks.0.mlp.down'}

    def test_untyped_failure_restores_weights(self, model, benchmark, tiny_config, edit_context):
        original = clone_state(model)
        editor = _CrashingFTL(hparams=default_hparams('ftl', tiny_config), context=edit_context)
        with pytest.raises(RuntimeError, match='solver blew up'):
            editor.apply_to_model(model, [benchmark[0]])
        assert weights_equal(model, original)
        assert editor._pending == 0


# ═════════════════════════════════════════════════════════════════════════════
# 5. KN
# ═════════════════════════════════════════════════════════════════════════════

class TestKN:

    def test_integrated_gradients_of_a_linear_function(self):
        w = np.array([0.5, -2.0, 3.0])
        x = np.array([1.0, 4.0, -1.0])
        np.testing.assert_allclose(integrated_gradients(lambda a: w, x, steps=7), x * w, atol=1e-12)

    def test_integrated_gradients_needs_steps(self):
        with pytest.raises(ContractError):
            integrated_gradients(lambda a: a, np.ones(2), steps=0)

    def test_zero_alpha_changes_nothing(self, model, benchmark, tiny_config, edit_context):
        original = clone_state(model)
        editor = _editor('kn', tiny_config, edit_context, alpha=0.0, steps=2)
        assert isinstance(editor, KNEditor)
        outcome = editor.apply_to_model(model, [benchmark[0]])
        assert weights_equal(model, original)
        assert len(outcome.method_log['neurons']) == 5

    def test_shift_lands_on_selected_columns(self, model, benchmark, tiny_config, edit_context):
        original = clone_state(model)
        editor = _editor('kn', tiny_config, edit_context, alpha=1.0, steps=2, top_k=2)
        outcome = editor.apply_to_model(model, [benchmark[0]])
        changed_columns = []
        for address, delta in outcome.delta.weights.items():
            layer = int(address.split('.')[1])
            changed_columns.extend(f'{layer}:{c}' for c in np.nonzero(np.any(delta != 0, axis=0))[0])
        assert sorted(changed_columns) == sorted(outcome.method_log['neurons'])
        assert not weights_equal(model, original)

    def test_top_k_wider_than_mlp(self, model, benchmark, tiny_config, edit_context):
        editor = _editor('kn', tiny_config, edit_context, top_k=tiny_config.d_mlp + 1, steps=2)
        with pytest.raises(ContractError):
            editor.apply_to_model(model, [benchmark[0]])


# ═════════════════════════════════════════════════════════════════════════════
# 6. IKE
# ═════════════════════════════════════════════════════════════════════════════

class TestIKE:

    def test_no_demonstrations(self, model, benchmark, tiny_config, edit_context):
        original = clone_state(model)
        request = benchmark[0]
        editor = _editor('ike', tiny_config, edit_context, k=0)
        assert isinstance(editor, IKEEditor)
        outcome = editor.apply_to_model(model, [request])
        assert editor.prefix == request.new_statement + [SEP]
        assert outcome.extra_state_bytes == len(editor.prefix) * 8
        assert outcome.delta.weights == {}
        assert weights_equal(model, original)

    def test_demonstrations_exclude_the_edited_fact(self, model, benchmark, tiny_config, edit_context):
        request = benchmark[0]
        editor = _editor('ike', tiny_config, edit_context, k=1)
        outcome = editor.apply_to_model(model, [request])
        assert outcome.method_log['demos'] == 1
        assert editor.prefix[-len(request.new_statement) - 1:] == request.new_statement + [SEP]
        demo = next(d for d in edit_context.demo_store.demos if d.tokens == editor.prefix[: len(d.tokens)])
        assert (demo.subject, demo.relation) != (request.subject, request.relation)

    def test_responder_prepends_the_prefix(self, model, benchmark, tiny_config, edit_context):
        request = benchmark[0]
        editor = _editor('ike', tiny_config, edit_context, k=0)
        editor.apply_to_model(model, [request])
        responder = editor.responder(model)
        assert responder.answer(request.edit_prompt) == answer(model, editor.prefix + request.edit_prompt, 4)

    def test_second_edit_is_refused(self, model, benchmark, tiny_config, edit_context):
        editor = _editor('ike', tiny_config, edit_context, k=0)
        editor.apply_to_model(model, [benchmark[0]])
        with pytest.raises(CapabilityError):
            editor.apply_to_model(model, [benchmark[1]])

    def test_rollback_clears_the_prefix(self, model, benchmark, tiny_config, edit_context):
        editor = _editor('ike', tiny_config, edit_context, k=0)
        outcome = editor.apply_to_model(model, [benchmark[0]], keep_original=True)
        editor.rollback(model, outcome)
        assert editor.prefix is None
        editor.apply_to_model(model, [benchmark[1]])


# ═════════════════════════════════════════════════════════════════════════════
# 7. GRACE
# ═════════════════════════════════════════════════════════════════════════════

class TestCodebook:

    def test_conflicting_labels_shrink_both_radii(self):
        book = Codebook(address='blocks.1.mlp.down')
        insert_entry(book, _entry([0.0, 0.0], 1.0, 'a'))
        action = insert_entry(book, _entry([1.0, 0.0], 1.0, 'b'))
        assert action == 'inserted'
        assert [e.radius for e in book.entries] == [pytest.approx(0.5 - 1e-6)] * 2

    def test_same_label_expands(self):
        book = Codebook(address='blocks.1.mlp.down')
        insert_entry(book, _entry([0.0, 0.0], 1.0, 'a'))
        action = insert_entry(book, _entry([1.5, 0.0], 1.0, 'a'))
        assert action == 'expanded'
        assert len(book.entries) == 1
        assert book.entries[0].radius == pytest.approx(1.5)

    def test_expansion_stops_short_of_other_labels(self):
        book = Codebook(address='blocks.1.mlp.down')
        insert_entry(book, _entry([0.0, 0.0], 1.0, 'x'))
        insert_entry(book, _entry([1.9, 0.0], 1.0, 'y'))
        action = insert_entry(book, _entry([-1.5, 0.0], 1.0, 'x'))
        assert action == 'inserted'
        assert len(book.entries) == 3
        for a in book.entries:
            for b in book.entries:
                if a.label != b.label:
                    assert a.radius + b.radius <= float(np.linalg.norm(a.key - b.key))

    def test_expansion_is_capped_by_the_nearest_other_label(self):
        book = Codebook(address='blocks.1.mlp.down')
        insert_entry(book, _entry([0.0, 0.0], 1.0, 'x'))
        insert_entry(book, _entry([3.0, 0.0], 1.0, 'y'))
        action = insert_entry(book, _entry([1.5, 0.0], 1.0, 'x'))
        assert action == 'expanded'
        assert book.entries[0].radius == pytest.approx(1.5)
        assert book.entries[0].radius + book.entries[1].radius <= 3.0

    def test_expansion_leaves_other_entries_alone(self):
        book = Codebook(address='blocks.1.mlp.down')
        insert_entry(book, _entry([0.0, 0.0], 1.0, 'y'))
        insert_entry(book, _entry([2.5, 0.0], 1.0, 'x'))
        action = insert_entry(book, _entry([1.2, 0.0], 1.0, 'x'))
        assert action == 'expanded'
        assert len(book.entries) == 2
        assert book.entries[0].radius == 1.0
        assert book.entries[1].radius == pytest.approx(1.3)

    def test_far_keys_do_not_interact(self):
        book = Codebook(address='blocks.1.mlp.down')
        insert_entry(book, _entry([0.0, 0.0], 1.0, 'a'))
        insert_entry(book, _entry([5.0, 0.0], 1.0, 'b'))
        assert [e.radius for e in book.entries] == [1.0, 1.0]

    def test_lookup(self):
        book = Codebook(address='blocks.1.mlp.down')
        insert_entry(book, _entry([0.0, 0.0], 1.0, 'a'))
        insert_entry(book, _entry([5.0, 0.0], 1.0, 'b'))
        assert lookup(book, np.array([0.5, 0.0])).label == 'a'
        assert lookup(book, np.array([4.5, 0.0])).label == 'b'
        assert lookup(book, np.array([2.5, 0.0])) is None


class TestGRACE:

    def test_weights_untouched_and_bytes_counted(self, model, benchmark, tiny_config, edit_context):
        original = clone_state(model)
        editor = _editor('grace', tiny_config, edit_context, v_steps=3)
        assert isinstance(editor, GRACEEditor)
        assert editor.hparams.targets == ['blocks.1.mlp.down']
        outcome = editor.apply_to_model(model, [benchmark[0]])
        assert weights_equal(model, original)
        assert outcome.extra_state_bytes == (16 + 16 + 2) * 8
        assert outcome.method_log['action'] == 'inserted'

    def test_tiny_radius_defers_to_the_base_model(self, model, benchmark, tiny_config, edit_context):
        request = benchmark[0]
        editor = _editor('grace', tiny_config, edit_context, eps0=1e-3, v_steps=3)
        editor.apply_to_model(model, [request])
        responder = editor.responder(model)
        base = ModelResponder(model, 4)
        for probe in request.locality_probes:
            assert responder.answer(probe.prompt) == base.answer(probe.prompt)

    def test_exact_key_replaces_the_mlp_output(self, model, benchmark, tiny_config, edit_context):
        request = benchmark[0]
        editor = _editor('grace', tiny_config, edit_context, v_steps=3)
        editor.apply_to_model(model, [request])
        value = editor.codebook.entries[0].value
        last = len(request.edit_prompt) - 1
        hook = HookSpec(address='blocks.1.mlp.down', mode=HookMode.REPLACE_OUTPUT, token_positions=[last], payload=value[None, :])
        expected = model.vocab.tokens[int(np.argmax(forward(model, request.edit_prompt, [hook]).logits[-1]))]
        assert editor.responder(model).generate(request.edit_prompt, 1) == [expected]

    def test_rollback_removes_the_entry(self, model, benchmark, tiny_config, edit_context):
        editor = _editor('grace', tiny_config, edit_context, v_steps=3)
        editor.apply_to_model(model, [benchmark[0]])
        outcome = editor.apply_to_model(model, [benchmark[1]], keep_original=True)
        editor.rollback(model, outcome)
        assert len(editor.codebook.entries) == 1


# ═════════════════════════════════════════════════════════════════════════════
# 8. SERAC
# ═════════════════════════════════════════════════════════════════════════════

class TestSERAC:

    @pytest.fixture
    def strict_classifier(self) -> ScopeClassifier:
        # routes only when both similarity features are essentially 1
        return ScopeClassifier(weights=np.array([100.0, 100.0]), bias=-199.9, threshold=0.5)

    def test_untrained_is_refused(self, model, benchmark, tiny_config, edit_context):
        editor = _editor('serac', tiny_config, edit_context)
        assert isinstance(editor, SERACEditor)
        with pytest.raises(TrainingRequiredError) as exc_info:
            editor.apply_to_model(model, [benchmark[0]])
        assert exc_info.value.category == 'training-required'

    def test_routes_the_edit_prompt_and_defers_elsewhere(self, model, benchmark, tiny_config, edit_context, strict_classifier):
        original = clone_state(model)
        edit_context.scope_classifier = strict_classifier
        request = benchmark[0]
        editor = _editor('serac', tiny_config, edit_context)
        outcome = editor.apply_to_model(model, [request])
        assert weights_equal(model, original)
        assert outcome.extra_state_bytes > 0

        responder = editor.responder(model)
        assert responder.answer(request.edit_prompt) == request.target
        for probe in request.locality_probes:
            assert responder.answer(probe.prompt) == answer(model, probe.prompt, 4)

    def test_batch_edits_fill_memory(self, model, benchmark, tiny_config, edit_context, strict_classifier):
        edit_context.scope_classifier = strict_classifier
        editor = _editor('serac', tiny_config, edit_context)
        outcome = editor.apply_to_model(model, benchmark[:3], keep_original=True)
        assert len(editor.memory) == 3
        editor.rollback(model, outcome)
        assert len(editor.memory) == 0


# ═════════════════════════════════════════════════════════════════════════════
# 9. Registry
# ═════════════════════════════════════════════════════════════════════════════

class TestRegistry:

    @pytest.mark.parametrize('name', ['melo', 'ke', 'mend', 'pmet'])
    def test_registered_but_unimplemented(self, name):
        with pytest.raises(UnimplementedMethodError) as exc_info:
            get_method(name)
        assert exc_info.value.category == 'unimplemented-method'

    def test_unknown(self):
        with pytest.raises(UnknownMethodError):
            get_method('lora')

    @pytest.mark.parametrize('alias, name', [('FT-L', 'ftl'), ('ft_l', 'ftl'), ('SERAC-lite', 'serac'), (' Rome ', 'rome')])
    def test_aliases(self, alias, name):
        assert canonical_name(alias) == name
        assert get_method(alias).name == name

    def test_implemented_set(self):
        assert sorted(implemented_methods()) == ['ftl', 'grace', 'ike', 'kn', 'memit', 'rome', 'serac']

    def test_capability_table(self):
        rows = {row['method']: row for row in capability_table()}
        assert len(rows) == 11
        assert rows['ROME']['batch'] is False and rows['ROME']['sequential'] is True
        assert rows['MEMIT']['batch'] is True
        assert rows['IKE']['sequential'] is False
        assert rows['SERAC']['additional_train'] is True
        assert rows['GRACE']['edit_area'] == EditArea.MLP_CODEBOOK.value
        assert rows['MEND']['implemented'] is False

    def test_editor_flags_match_the_table(self, tiny_config, edit_context):
        rows = {row['method'].lower().replace('-', ''): row for row in capability_table()}
        for name in implemented_methods():
            editor = _editor(name, tiny_config, edit_context)
            assert editor.capabilities.supports_batch == rows[name]['batch']
            assert editor.capabilities.supports_sequential == rows[name]['sequential']
