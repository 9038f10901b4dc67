"""Token-sequence formats shared by the corpus, IKE and the benchmark."""
from __future__ import annotations

from collections.abc import Sequence

from .grammar import END
from .grammar import SEP
from .models import RelationSpec


def statement(relation: RelationSpec, subject: str, obj: str) -> list[str]:
    return relation.render(subject, 0) + [obj]


def training_statement(relation: RelationSpec, subject: str, obj: str, template: int) -> list[str]:
    return relation.render(subject, template) + [obj, END]


def demonstration(relation: RelationSpec, subject: str, obj: str, template: int) -> list[str]:
    """`<statement> <sep> <question> <answer> <sep>`."""
    return statement(relation, subject, obj) + [SEP] + relation.render(subject, template) + [obj, SEP]


def context_prefix(demos: Sequence[Sequence[str]], new_statement: Sequence[str]) -> list[str]:
    tokens: list[str] = []
    for demo in demos:
        tokens.extend(demo)
    tokens.extend(new_statement)
    tokens.append(SEP)
    return tokens
