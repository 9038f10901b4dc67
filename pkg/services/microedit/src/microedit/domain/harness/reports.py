from __future__ import annotations

import json
from pathlib import Path

from microedit.domain.evaluate import MetricReport
from microedit.shared.exception import CheckpointError
from microedit.shared.utils import canonical_json

from .models import BenchReport
from .models import RegimeKind


def report_lines(report: BenchReport, timing: bool = True) -> list[str]:
    """Header, one record per edit, then the aggregate; canonical JSON per line."""
    lines = [canonical_json({**report.header(), 'content_hash': report.content_hash()})]
    lines.extend(canonical_json({'kind': 'edit', **r.record(timing)}) for r in report.reports)
    if report.aggregate is not None:
        aggregate = {'kind': 'aggregate', **report.aggregate.record(timing)}
        if timing:
            aggregate['wall_s'] = report.wall_seconds
        lines.append(canonical_json(aggregate))
    return lines


def dumps_report(report: BenchReport, timing: bool = True) -> str:
    return ''.join(f'{line}\n' for line in report_lines(report, timing))


def save_report(path: str | Path, report: BenchReport, timing: bool = True) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_report(report, timing), encoding='utf-8')
    return path


def _metric(row: dict) -> MetricReport:
    return MetricReport(
        case_id=row.get('case_id'),
        reliability=row['reliability'],
        generalization=row['generalization'],
        locality=row['locality'],
        portability=row['portability'],
        fluency=row['fluency'],
        elapsed_seconds=row.get('time_s', 0.0),
        extra_state_bytes=row['extra_bytes'],
        token_overlap=row.get('token_overlap', 0.0),
        degenerate=row.get('degenerate', False),
        error=row.get('error'),
    )


def load_report(path: str | Path) -> BenchReport:
    """
    Raises:
        CheckpointError: missing or malformed report file
    """
    path = Path(path)
    try:
        rows = [json.loads(line) for line in path.read_text(encoding='utf-8').splitlines() if line.strip()]
        header = rows[0]
        if header.get('kind') != 'bench':
            raise ValueError('first record is not a bench header')
        edits = [_metric(r) for r in rows[1:] if r.get('kind') == 'edit']
        aggregates = [r for r in rows[1:] if r.get('kind') == 'aggregate']
        return BenchReport(
            method=header['method'],
            regime=RegimeKind(header['regime']),
            batch_size=header['batch_size'],
            hparams_fingerprint=header['hparams_fingerprint'],
            update_form=header.get('update_form'),
            world_seed=header['world_seed'],
            reports=edits,
            aggregate=_metric(aggregates[0]) if aggregates else None,
            wall_seconds=aggregates[0].get('wall_s', 0.0) if aggregates else 0.0,
        )
    except FileNotFoundError as e:
        raise CheckpointError(f'Report file not found: {path}', details={'path': str(path)}) from e
    except (ValueError, KeyError, IndexError) as e:
        raise CheckpointError(f'Malformed report file {path}: {e}', details={'path': str(path)}) from e
