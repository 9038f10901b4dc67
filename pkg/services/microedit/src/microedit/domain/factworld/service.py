from __future__ import annotations

from typing import Optional

from base import BaseModel
from base import BaseService
from logger import get_logger
from microedit.numerics import make_rng
from microedit.shared.exception import CapacityError
from microedit.shared.exception import GenerationError
from microedit.shared.settings import FactWorldSettings

from .grammar import END
from .grammar import RELATION_NOUNS
from .grammar import composition_prompt
from .grammar import entity_names
from .grammar import name_capacity
from .grammar import relation_id
from .grammar import relation_templates
from .models import EditRequest
from .models import FactTriple
from .models import FactWorld
from .models import Probe
from .models import RelationSpec
from .prompts import context_prefix
from .prompts import demonstration
from .prompts import statement
from .prompts import training_statement

logger = get_logger(__name__)


class FactWorldInput(BaseModel):
    n_entities: Optional[int] = None
    n_relations: Optional[int] = None
    n_facts: Optional[int] = None
    n_edits: Optional[int] = None
    seed: int = 0
    context_len: Optional[int] = None


class FactWorldOutput(BaseModel):
    world: FactWorld
    corpus: list[list[str]]
    benchmark: list[EditRequest]


class FactWorldService(BaseService):
    settings: FactWorldSettings

    def generate_world(self, n_entities: int, n_relations: int, n_facts: int, seed: int) -> FactWorld:
        """
        Generate a closed world of functional facts over synthetic entities.

        Args:
            n_entities (int): number of entity names
            n_relations (int): number of relations, each with its own templates
            n_facts (int): number of (subject, relation, object) triples
            seed (int): generation seed

        Returns:
            FactWorld: the generated world

        Raises:
            CapacityError: the counts cannot be satisfied; the binding constraint is named
        """
        max_facts = n_entities * n_relations
        if n_facts > max_facts:
            raise CapacityError(
                f'n_facts={n_facts} exceeds n_entities * n_relations (max {max_facts} facts)',
                details={'constraint': 'n_facts <= n_entities * n_relations', 'max_facts': max_facts},
            )
        if n_entities < 4:
            raise CapacityError(
                f'n_entities={n_entities} is below the minimum of 4',
                details={'constraint': 'n_entities >= 4'},
            )
        if n_relations < 2:
            raise CapacityError(
                f'n_relations={n_relations} is below the minimum of 2',
                details={'constraint': 'n_relations >= 2'},
            )
        if n_relations > len(RELATION_NOUNS):
            raise CapacityError(
                f'n_relations={n_relations} exceeds the {len(RELATION_NOUNS)} available relation nouns',
                details={'constraint': f'n_relations <= {len(RELATION_NOUNS)}'},
            )
        lo, hi = self.settings.min_syllables, self.settings.max_syllables
        if n_entities > name_capacity(lo, hi):
            raise CapacityError(
                f'n_entities={n_entities} exceeds the name grammar capacity',
                details={'constraint': 'n_entities <= name capacity', 'capacity': name_capacity(lo, hi)},
            )

        rng = make_rng(seed, 'factworld', 'world')
        entities = entity_names(n_entities, rng, lo, hi)

        nouns = RELATION_NOUNS[:n_relations]
        relations = [
            RelationSpec(
                id=relation_id(noun),
                noun=noun,
                templates=relation_templates(noun),
                partners=[relation_id(nouns[(i + 1) % n_relations])],
            )
            for i, noun in enumerate(nouns)
        ]

        chosen = sorted(rng.permutation(max_facts)[:n_facts].tolist())
        facts: list[FactTriple] = []
        for pair in chosen:
            s_idx, r_idx = divmod(pair, n_relations)
            o_idx = int(rng.integers(n_entities - 1))
            if o_idx >= s_idx:
                o_idx += 1
            facts.append(
                FactTriple(subject=entities[s_idx], relation=relations[r_idx].id, object=entities[o_idx]),
            )

        logger.info(
            'Generated fact world',
            extra={'n_entities': n_entities, 'n_relations': n_relations, 'n_facts': n_facts, 'seed': seed},
        )
        return FactWorld(entities=entities, relations=relations, facts=facts, seed=seed)

    def emit_training_corpus(self, world: FactWorld, seed: int, context_len: int | None = None) -> list[list[str]]:
        """
        Plain statements (one per fact and template) mixed with counterfactual
        context-reading items, shuffled deterministically.
        """
        plain = [
            training_statement(world.relation(fact.relation), fact.subject, fact.object, t)
            for fact in world.facts
            for t in range(len(world.relation(fact.relation).templates))
        ]

        ratio = self.settings.context_ratio
        n_context = 0
        if ratio > 0.0 and plain:
            n_context = max(1, round(len(plain) * ratio / (1.0 - ratio)))

        rng = make_rng(seed, 'factworld', 'corpus')
        context = [self._context_item(world, rng, context_len) for _ in range(n_context)]

        corpus = plain + context
        order = rng.permutation(len(corpus))
        logger.info(
            'Emitted training corpus',
            extra={'plain': len(plain), 'context_reading': len(context), 'seed': seed},
        )
        return [corpus[i] for i in order]

    def _context_item(self, world: FactWorld, rng, context_len: int | None) -> list[str]:
        n_demos = int(rng.integers(0, self.settings.max_demos + 1))
        n_subjects = min(n_demos + 1, len(world.entities))
        subjects = [world.entities[i] for i in rng.choice(len(world.entities), size=n_subjects, replace=False)]
        n_templates = len(world.relations[0].templates)

        parts = []
        for subject in subjects:
            relation = world.relations[int(rng.integers(len(world.relations)))]
            obj = self._counterfactual_object(world, rng, subject, relation.id)
            parts.append((relation, subject, obj, int(rng.integers(n_templates))))

        *demo_parts, (relation, subject, obj, template) = parts
        demos = [demonstration(*part) for part in demo_parts]
        while True:
            item = context_prefix(demos, statement(relation, subject, obj)) + relation.render(subject, template) + [obj, END]
            if context_len is None or len(item) <= context_len or not demos:
                return item
            demos = demos[1:]

    @staticmethod
    def _counterfactual_object(world: FactWorld, rng, subject: str, relation: str) -> str:
        true_object = world.lookup(subject, relation)
        pool = [e for e in world.entities if e != subject and e != true_object]
        return pool[int(rng.integers(len(pool)))]

    def generate_edit_benchmark(self, world: FactWorld, n_edits: int, seed: int) -> list[EditRequest]:
        """
        Flip `n_edits` existing facts to new objects and attach rephrase,
        locality and portability probes.

        Raises:
            CapacityError: more edits than facts
            GenerationError: a relation has no composition partner facts, or
                too few feasible edits / untouched facts remain
        """
        if n_edits > len(world.facts):
            raise CapacityError(
                f'n_edits={n_edits} exceeds the {len(world.facts)} facts of the world',
                details={'constraint': 'n_edits <= n_facts'},
            )
        rng = make_rng(seed, 'factworld', 'benchmark')
        index = world.index()
        objects_of: dict[str, set[str]] = {}
        for fact in world.facts:
            objects_of.setdefault(fact.subject, set()).add(fact.object)

        planned: list[tuple[FactTriple, str]] = []
        for i in rng.permutation(len(world.facts)).tolist():
            if len(planned) == n_edits:
                break
            fact = world.facts[i]
            relation = world.relation(fact.relation)
            partner = relation.partners[0]
            with_partner = [e for e in world.entities if (e, partner) in index]
            if not with_partner:
                raise GenerationError(
                    f'Relation {relation.id} has no composition partner facts',
                    details={'relation': relation.id, 'partner': partner},
                )
            used = objects_of.get(fact.subject, set()) | {fact.subject}
            pool = [e for e in with_partner if e not in used]
            if not pool:
                continue
            planned.append((fact, pool[int(rng.integers(len(pool)))]))

        if len(planned) < n_edits:
            raise GenerationError(
                f'Only {len(planned)} of {n_edits} edits are feasible in this world',
                details={'feasible': len(planned), 'requested': n_edits},
            )

        edited = {(fact.subject, fact.relation) for fact, _ in planned}
        requests = [
            self._build_request(world, index, edited, fact, new_object, case_id, rng)
            for case_id, (fact, new_object) in enumerate(planned)
        ]
        logger.info('Generated edit benchmark', extra={'n_edits': n_edits, 'seed': seed})
        return requests

    def _build_request(self, world, index, edited, fact: FactTriple, new_object: str, case_id: int, rng) -> EditRequest:
        relation = world.relation(fact.relation)
        partner = world.relation(relation.partners[0])
        edit_prompt = relation.render(fact.subject, 0)
        start = edit_prompt.index(fact.subject)

        untouched = [
            f for f in world.facts
            if f.subject != fact.subject and (f.subject, f.relation) not in edited
        ]
        if len(untouched) < self.settings.n_locality:
            raise GenerationError(
                f'Only {len(untouched)} untouched facts available for locality probes',
                details={'relation': relation.id, 'needed': self.settings.n_locality},
            )
        locality = []
        for j in rng.choice(len(untouched), size=self.settings.n_locality, replace=False).tolist():
            probe_fact = untouched[j]
            probe_relation = world.relation(probe_fact.relation)
            template = int(rng.integers(len(probe_relation.templates)))
            locality.append(
                Probe(prompt=probe_relation.render(probe_fact.subject, template), expected=[probe_fact.object]),
            )

        portability = []
        if (new_object, partner.id) in index:
            portability.append(
                Probe(
                    prompt=composition_prompt(fact.subject, relation.noun, partner.noun),
                    expected=[index[(new_object, partner.id)]],
                ),
            )
        return EditRequest(
            case_id=case_id,
            subject=fact.subject,
            relation=relation.id,
            old_object=fact.object,
            new_object=new_object,
            edit_prompt=edit_prompt,
            target=[new_object],
            subject_span=(start, start + 1),
            old_target=[fact.object],
            rephrases=[relation.render(fact.subject, t) for t in range(1, len(relation.templates))],
            locality_probes=locality,
            portability_probes=portability,
            new_statement=statement(relation, fact.subject, new_object),
        )

    def edit_request(self, world: FactWorld, subject: str, relation_id: str, new_object: str, case_id: int = 0, seed: int = 0) -> EditRequest:
        """
        An ad-hoc edit of (subject, relation) to `new_object` with the same probe
        structure as benchmark requests.

        Raises:
            GenerationError: unknown subject, relation or object; no existing
                fact to edit; `new_object` already holds; or `new_object` has no
                partner-relation fact to build a portability probe from
        """
        try:
            relation = world.relation(relation_id)
        except KeyError as e:
            raise GenerationError(f'Unknown relation {relation_id!r}', details={'relation': relation_id}) from e
        for entity in (subject, new_object):
            if entity not in world.entities:
                raise GenerationError(f'Unknown entity {entity!r}', details={'entity': entity})
        old_object = world.lookup(subject, relation_id)
        if old_object is None:
            raise GenerationError(
                f'No fact ({subject}, {relation_id}) to edit',
                details={'subject': subject, 'relation': relation_id},
            )
        if old_object == new_object:
            raise GenerationError(
                f'({subject}, {relation_id}) is already {new_object}',
                details={'subject': subject, 'relation': relation_id, 'object': new_object},
            )
        index = world.index()
        partner = relation.partners[0]
        if (new_object, partner) not in index:
            raise GenerationError(
                f'{new_object} has no {partner} fact to compose with',
                details={'object': new_object, 'partner': partner},
            )
        rng = make_rng(seed, 'factworld', 'edit', f'{subject}|{relation_id}|{new_object}')
        fact = FactTriple(subject=subject, relation=relation_id, object=old_object)
        return self._build_request(world, index, {(subject, relation_id)}, fact, new_object, case_id, rng)

    def process(self, inputs: FactWorldInput) -> FactWorldOutput:
        """
        Generate the world, its training corpus and its edit benchmark.

        Args:
            inputs (FactWorldInput): counts (settings defaults when omitted) and the seed

        Returns:
            FactWorldOutput: world, shuffled corpus and edit requests
        """
        world = self.generate_world(
            n_entities=inputs.n_entities or self.settings.n_entities,
            n_relations=inputs.n_relations or self.settings.n_relations,
            n_facts=inputs.n_facts or self.settings.n_facts,
            seed=inputs.seed,
        )
        corpus = self.emit_training_corpus(world, inputs.seed, context_len=inputs.context_len)
        n_edits = self.settings.n_edits if inputs.n_edits is None else inputs.n_edits
        benchmark = self.generate_edit_benchmark(world, n_edits, inputs.seed)
        return FactWorldOutput(world=world, corpus=corpus, benchmark=benchmark)
