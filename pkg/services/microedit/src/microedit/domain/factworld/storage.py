"""Line-delimited world and benchmark files, one flat record per line."""
from __future__ import annotations

import json
from collections.abc import Iterable
from pathlib import Path

from logger import get_logger
from microedit.shared import canonical_json
from microedit.shared.exception import CheckpointError

from .models import EditRequest
from .models import FactTriple
from .models import FactWorld
from .models import Probe
from .models import RelationSpec

logger = get_logger(__name__)


def _join(tokens: Iterable[str]) -> str:
    return ' '.join(tokens)


def _split(text: str) -> list[str]:
    return text.split()


def world_records(world: FactWorld) -> list[dict]:
    records: list[dict] = [{'kind': 'world', 'seed': world.seed}]
    records.extend({'kind': 'entity', 'name': name} for name in world.entities)
    records.extend(
        {
            'kind': 'relation',
            'id': spec.id,
            'noun': spec.noun,
            'templates': list(spec.templates),
            'partners': list(spec.partners),
        }
        for spec in world.relations
    )
    records.extend(
        {'kind': 'fact', 'subject': f.subject, 'relation': f.relation, 'object': f.object}
        for f in world.facts
    )
    return records


def request_record(request: EditRequest) -> dict:
    return {
        'kind': 'edit',
        'case_id': request.case_id,
        'subject': request.subject,
        'relation': request.relation,
        'object': request.new_object,
        'old_object': request.old_object,
        'edit_prompt': _join(request.edit_prompt),
        'target': _join(request.target),
        'old_target': _join(request.old_target),
        'subject_span': list(request.subject_span),
        'rephrases': [_join(p) for p in request.rephrases],
        'locality_probes': [[_join(p.prompt), _join(p.expected)] for p in request.locality_probes],
        'portability_probes': [[_join(p.prompt), _join(p.expected)] for p in request.portability_probes],
        'new_statement': _join(request.new_statement),
    }


def parse_request(record: dict) -> EditRequest:
    return EditRequest(
        case_id=record['case_id'],
        subject=record['subject'],
        relation=record['relation'],
        old_object=record['old_object'],
        new_object=record['object'],
        edit_prompt=_split(record['edit_prompt']),
        target=_split(record['target']),
        subject_span=tuple(record['subject_span']),
        old_target=_split(record['old_target']),
        rephrases=[_split(p) for p in record['rephrases']],
        locality_probes=[Probe(prompt=_split(p), expected=_split(e)) for p, e in record['locality_probes']],
        portability_probes=[Probe(prompt=_split(p), expected=_split(e)) for p, e in record['portability_probes']],
        new_statement=_split(record['new_statement']),
    )


def dumps_world(world: FactWorld, benchmark: list[EditRequest] | None = None) -> str:
    records = world_records(world) + [request_record(r) for r in benchmark or []]
    return ''.join(canonical_json(record) + '\n' for record in records)


def _read_records(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f'File not found: {path}', details={'path': str(path)})
    records = []
    for line_no, line in enumerate(path.read_text(encoding='utf-8').splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise CheckpointError(
                f'Malformed record at {path}:{line_no}',
                details={'path': str(path), 'line': line_no},
            ) from e
    return records


def save_world(path: str | Path, world: FactWorld, benchmark: list[EditRequest] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_world(world, benchmark), encoding='utf-8')
    logger.info('Saved fact world', extra={'path': str(path), 'edits': len(benchmark or [])})
    return path


def loads_world(records: list[dict]) -> FactWorld:
    seed = None
    entities: list[str] = []
    relations: list[RelationSpec] = []
    facts: list[FactTriple] = []
    for record in records:
        kind = record.get('kind')
        if kind == 'world':
            seed = record['seed']
        elif kind == 'entity':
            entities.append(record['name'])
        elif kind == 'relation':
            relations.append(
                RelationSpec(
                    id=record['id'],
                    noun=record['noun'],
                    templates=record['templates'],
                    partners=record['partners'],
                ),
            )
        elif kind == 'fact':
            facts.append(FactTriple(subject=record['subject'], relation=record['relation'], object=record['object']))
    if seed is None:
        raise CheckpointError('World header record missing')
    return FactWorld(entities=entities, relations=relations, facts=facts, seed=seed)


def load_world(path: str | Path) -> FactWorld:
    return loads_world(_read_records(path))


def save_benchmark(path: str | Path, benchmark: list[EditRequest]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(''.join(canonical_json(request_record(r)) + '\n' for r in benchmark), encoding='utf-8')
    return path


def load_benchmark(path: str | Path) -> list[EditRequest]:
    """Edit records of a benchmark file, or of a world file that embeds them."""
    return [parse_request(r) for r in _read_records(path) if r.get('kind') == 'edit']
