"""
Tests for FactWorldService: world generation, training corpus, edit benchmark and storage.

Covers:
  1. World generation (determinism, uniqueness, capacity errors)
  2. Training corpus (plain statements, context-reading items, length bound)
  3. Edit benchmark (targets, rephrases, locality, portability, scope)
  4. Ad-hoc edit requests
  5. World file round trip

Run with:
    pytest test/factworld -v
"""
from __future__ import annotations

import pytest

from microedit.domain.factworld import END
from microedit.domain.factworld import SEP
from microedit.domain.factworld import FactWorldInput
from microedit.domain.factworld import FactWorldService
from microedit.domain.factworld import load_benchmark
from microedit.domain.factworld import load_world
from microedit.domain.factworld import save_benchmark
from microedit.domain.factworld import save_world
from microedit.shared.exception import CapacityError
from microedit.shared.exception import CheckpointError
from microedit.shared.exception import GenerationError
from microedit.shared.settings import FactWorldSettings


# ─── Fixtures ─────────────────────────────────────────────────────────────────

@pytest.fixture(scope='module')
def default_service() -> FactWorldService:
    return FactWorldService(settings=FactWorldSettings())


@pytest.fixture(scope='module')
def default_world(default_service):
    return default_service.generate_world(n_entities=100, n_relations=6, n_facts=200, seed=1)


# ═════════════════════════════════════════════════════════════════════════════
# 1. World generation
# ═════════════════════════════════════════════════════════════════════════════

class TestGenerateWorld:

    def test_same_seed_same_world(self, default_service):
        a = default_service.generate_world(4, 2, 8, seed=7)
        b = default_service.generate_world(4, 2, 8, seed=7)
        assert a.model_dump() == b.model_dump()

    def test_different_seed_different_world(self, default_service):
        a = default_service.generate_world(20, 3, 30, seed=1)
        b = default_service.generate_world(20, 3, 30, seed=2)
        assert a.model_dump() != b.model_dump()

    def test_default_world_counts(self, default_world):
        assert len(default_world.entities) == 100
        assert len(default_world.relations) == 6
        assert len(default_world.facts) == 200

    def test_subject_relation_pairs_are_unique(self, default_world):
        pairs = [(f.subject, f.relation) for f in default_world.facts]
        assert len(set(pairs)) == len(pairs)

    def test_no_fact_points_at_its_subject(self, default_world):
        assert all(f.subject != f.object for f in default_world.facts)

    def test_entities_are_distinct(self, default_world):
        assert len(set(default_world.entities)) == len(default_world.entities)

    def test_every_relation_has_rephrase_templates_and_a_partner(self, default_world):
        ids = {r.id for r in default_world.relations}
        for relation in default_world.relations:
            assert len(relation.templates) >= 3
            assert relation.partners and relation.partners[0] in ids
            assert relation.partners[0] != relation.id

    def test_facts_exceed_pairs(self, default_service):
        with pytest.raises(CapacityError) as exc_info:
            default_service.generate_world(2, 1, 5, seed=0)
        assert exc_info.value.category == 'capacity'
        assert 'n_facts' in exc_info.value.message

    def test_too_few_entities(self, default_service):
        with pytest.raises(CapacityError):
            default_service.generate_world(3, 2, 2, seed=0)

    def test_too_many_relations(self, default_service):
        with pytest.raises(CapacityError):
            default_service.generate_world(20, 13, 10, seed=0)

    def test_unknown_relation_lookup(self, world):
        with pytest.raises(KeyError):
            world.relation('nope_of')


# ═════════════════════════════════════════════════════════════════════════════
# 2. Training corpus
# ═════════════════════════════════════════════════════════════════════════════

class TestTrainingCorpus:

    def test_one_fact_world(self, default_service):
        world = default_service.generate_world(4, 2, 1, seed=0)
        corpus = default_service.emit_training_corpus(world, seed=0)
        fact = world.facts[0]
        templates = len(world.relation(fact.relation).templates)
        plain = [s for s in corpus if SEP not in s]
        assert len(plain) == templates
        assert all(s[-2:] == [fact.object, END] for s in plain)
        assert len(corpus) > templates

    def test_context_items_carry_separators(self, corpus):
        context_items = [s for s in corpus if SEP in s]
        assert context_items
        assert all(s[-1] == END for s in context_items)

    def test_sequences_fit_the_context(self, corpus):
        assert all(len(s) <= 64 for s in corpus)

    def test_deterministic(self, factworld_service, world, corpus):
        assert factworld_service.emit_training_corpus(world, seed=3, context_len=64) == corpus

    def test_plain_statements_cover_every_fact_and_template(self, world, corpus):
        plain = {tuple(s) for s in corpus if SEP not in s}
        for fact in world.facts:
            relation = world.relation(fact.relation)
            for t in range(len(relation.templates)):
                assert tuple(relation.render(fact.subject, t) + [fact.object, END]) in plain


# ═════════════════════════════════════════════════════════════════════════════
# 3. Edit benchmark
# ═════════════════════════════════════════════════════════════════════════════

class TestEditBenchmark:

    def test_size_and_case_ids(self, benchmark):
        assert [r.case_id for r in benchmark] == [0, 1, 2, 3]

    def test_target_differs_from_old_target(self, world, benchmark):
        for request in benchmark:
            assert request.target != request.old_target
            assert request.old_target == [world.lookup(request.subject, request.relation)]

    def test_subject_span_points_at_the_subject(self, benchmark):
        for request in benchmark:
            start, end = request.subject_span
            assert request.edit_prompt[start:end] == [request.subject]

    def test_at_least_two_rephrases(self, benchmark):
        for request in benchmark:
            assert len(request.rephrases) >= 2
            assert all(p != request.edit_prompt for p in request.rephrases)

    def test_locality_probes_avoid_the_edited_subject(self, world, benchmark):
        for request in benchmark:
            for probe in request.locality_probes:
                assert request.subject not in probe.prompt
                subject = next(e for e in probe.prompt if e in world.entities)
                relation = next(r.id for r in world.relations if r.noun in probe.prompt)
                assert probe.expected == [world.lookup(subject, relation)]

    def test_portability_answer_is_partner_of_new_object(self, world, benchmark):
        index = world.index()
        for request in benchmark:
            partner = world.relation(request.relation).partners[0]
            assert request.portability_probes
            assert request.portability_probes[0].expected == [index[(request.new_object, partner)]]

    def test_scopes_are_disjoint(self, benchmark):
        for request in benchmark:
            scope = request.scope
            assert not {tuple(p) for p in scope.in_scope} & {tuple(p) for p in scope.out_of_scope}

    def test_deterministic(self, factworld_service, world, benchmark):
        again = factworld_service.generate_edit_benchmark(world, n_edits=4, seed=3)
        assert [r.model_dump() for r in again] == [r.model_dump() for r in benchmark]

    def test_more_edits_than_facts(self, factworld_service, world):
        with pytest.raises(CapacityError):
            factworld_service.generate_edit_benchmark(world, n_edits=25, seed=0)

    def test_process_bundles_everything(self, factworld_service):
        out = factworld_service.process(FactWorldInput(n_entities=10, n_relations=2, n_facts=10, n_edits=1, seed=5))
        assert len(out.world.facts) == 10
        assert len(out.benchmark) == 1
        assert out.corpus


# ═════════════════════════════════════════════════════════════════════════════
# 4. Ad-hoc edit requests
# ═════════════════════════════════════════════════════════════════════════════

class TestEditRequest:

    def test_matches_benchmark_structure(self, factworld_service, world, benchmark):
        planned = benchmark[0]
        request = factworld_service.edit_request(world, planned.subject, planned.relation, planned.new_object)
        assert request.target == [planned.new_object]
        assert request.old_target == [planned.old_object]
        assert request.edit_prompt == world.relation(planned.relation).render(planned.subject, 0)
        assert request.new_statement[-1] == planned.new_object
        assert request.target != request.old_target
        assert len(request.portability_probes) == 1

    def test_unknown_relation(self, factworld_service, world):
        with pytest.raises(GenerationError):
            factworld_service.edit_request(world, world.entities[0], 'nope_of', world.entities[1])

    def test_unknown_entity(self, factworld_service, world):
        with pytest.raises(GenerationError):
            factworld_service.edit_request(world, 'zzzzzz', world.relations[0].id, world.entities[1])

    def test_edit_to_current_object_is_refused(self, factworld_service, world):
        fact = world.facts[0]
        with pytest.raises(GenerationError, match='already'):
            factworld_service.edit_request(world, fact.subject, fact.relation, fact.object)

    def test_missing_fact_is_refused(self, factworld_service, world):
        index = world.index()
        subject, relation = next(
            (e, r.id) for e in world.entities for r in world.relations if (e, r.id) not in index
        )
        with pytest.raises(GenerationError, match='No fact'):
            factworld_service.edit_request(world, subject, relation, world.entities[0])

    def test_object_without_partner_fact_is_refused(self, factworld_service, world, benchmark):
        planned = benchmark[0]
        partner = world.relation(planned.relation).partners[0]
        pruned = world.model_copy(update={
            'facts': [f for f in world.facts if (f.subject, f.relation) != (planned.new_object, partner)],
        })
        with pytest.raises(GenerationError, match='compose'):
            factworld_service.edit_request(pruned, planned.subject, planned.relation, planned.new_object)


# ═════════════════════════════════════════════════════════════════════════════
# 5. Storage
# ═════════════════════════════════════════════════════════════════════════════

class TestStorage:

    def test_world_round_trip(self, tmp_path, world, benchmark):
        path = save_world(tmp_path / 'world.fw', world, benchmark)
        assert load_world(path).model_dump() == world.model_dump()
        assert [r.model_dump() for r in load_benchmark(path)] == [r.model_dump() for r in benchmark]

    def test_benchmark_file(self, tmp_path, benchmark):
        path = save_benchmark(tmp_path / 'edits.jsonl', benchmark)
        assert [r.model_dump() for r in load_benchmark(path)] == [r.model_dump() for r in benchmark]

    def test_missing_header(self, tmp_path, benchmark):
        path = save_benchmark(tmp_path / 'edits.jsonl', benchmark)
        with pytest.raises(CheckpointError):
            load_world(path)
