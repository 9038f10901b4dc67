"""Plain-text renderers for bench tables, causal traces and the method capability matrix."""
from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from microedit.domain.editors import METHODS
from microedit.domain.microlm import TraceResult

from .models import BenchReport

COLUMNS = ('Reliability', 'Generalization', 'Locality', 'Portability', 'Fluency')
EFFICIENCY_COLUMNS = ('Time (s)', 'Extra bytes')
SHADES = ' .:-=+*#%@'


def display_name(method: str) -> str:
    info = METHODS.get(method)
    return info.display if info is not None else method


def render_table(reports: BenchReport | Sequence[BenchReport], efficiency: bool = False) -> str:
    """
    Fixed-width table, one method per row: fractions as percentages, fluency in
    bits, two decimals. Reports without an aggregate contribute no row.
    """
    if isinstance(reports, BenchReport):
        reports = [reports]
    columns = COLUMNS + (EFFICIENCY_COLUMNS if efficiency else ())
    rows = []
    for report in reports:
        agg = report.aggregate
        if agg is None:
            continue
        cells = [
            f'{agg.reliability * 100:.2f}',
            f'{agg.generalization * 100:.2f}',
            f'{agg.locality * 100:.2f}',
            f'{agg.portability * 100:.2f}',
            f'{agg.fluency:.2f}',
        ]
        if efficiency:
            cells += [f'{agg.elapsed_seconds:.2f}', str(agg.extra_state_bytes)]
        rows.append([display_name(report.method), *cells])

    name_width = max([len('Method')] + [len(r[0]) for r in rows])
    widths = [max([len(c)] + [len(r[i + 1]) for r in rows]) for i, c in enumerate(columns)]
    lines = ['  '.join([f'{"Method":<{name_width}}'] + [f'{c:>{w}}' for c, w in zip(columns, widths)])]
    for row in rows:
        lines.append('  '.join([f'{row[0]:<{name_width}}'] + [f'{v:>{w}}' for v, w in zip(row[1:], widths)]))
    return '\n'.join(lines) + '\n'


def render_trace(trace: TraceResult) -> str:
    """Heat map of indirect effects: one row per token, one column per layer."""
    grid = np.asarray(trace.grid)
    n_layers, length = grid.shape
    peak = float(np.max(np.abs(grid))) if grid.size else 0.0
    token_width = max(len(t) for t in trace.tokens) + 2
    lines = [
        f'restore={trace.restore} clean_p={trace.clean_prob:.4f} corrupted_p={trace.corrupted_prob:.4f} peak={peak:.4f}',
        ' ' * token_width + ''.join(f'{layer:>3}' for layer in range(n_layers)),
    ]
    for pos in range(length):
        marker = '*' if pos == trace.subject_last else ' '
        label = f'{marker}{trace.tokens[pos]}'
        cells = []
        for layer in range(n_layers):
            level = 0 if peak == 0.0 else int(round(max(0.0, grid[layer, pos]) / peak * (len(SHADES) - 1)))
            cells.append(f'{SHADES[level] * 2:>3}')
        lines.append(f'{label:<{token_width}}' + ''.join(cells))
    return '\n'.join(lines) + '\n'


def render_capabilities(rows: Sequence[dict]) -> str:
    headers = ('Method', 'Family', 'Batch', 'Sequential', 'Additional train', 'Edit area', 'Status')
    body = [
        (
            r['method'],
            r['family'],
            'yes' if r['batch'] else 'no',
            'yes' if r['sequential'] else 'no',
            'yes' if r['additional_train'] else 'no',
            r['edit_area'],
            'available' if r['implemented'] else 'unimplemented',
        )
        for r in rows
    ]
    widths = [max([len(h)] + [len(b[i]) for b in body]) for i, h in enumerate(headers)]
    lines = ['  '.join(f'{h:<{w}}' for h, w in zip(headers, widths)).rstrip()]
    lines += ['  '.join(f'{c:<{w}}' for c, w in zip(b, widths)).rstrip() for b in body]
    return '\n'.join(lines) + '\n'
