from __future__ import annotations

from base import BaseModel
from base import FrozenModel
from pydantic import Field


class FactTriple(FrozenModel):
    subject: str
    relation: str
    object: str


class RelationSpec(FrozenModel):
    id: str = Field(..., description='Relation id, `<noun>_of`')
    noun: str = Field(..., description='Surface noun used by every template')
    templates: list[str] = Field(..., description="Cloze templates with a '{s}' subject slot")
    partners: list[str] = Field(..., description='Relations composable after this one')

    def render(self, subject: str, template: int = 0) -> list[str]:
        return self.templates[template].format(s=subject).split()


class FactWorld(BaseModel):
    entities: list[str]
    relations: list[RelationSpec]
    facts: list[FactTriple]
    seed: int

    def relation(self, relation_id: str) -> RelationSpec:
        for spec in self.relations:
            if spec.id == relation_id:
                return spec
        raise KeyError(relation_id)

    def lookup(self, subject: str, relation_id: str) -> str | None:
        for fact in self.facts:
            if fact.subject == subject and fact.relation == relation_id:
                return fact.object
        return None

    def index(self) -> dict[tuple[str, str], str]:
        return {(f.subject, f.relation): f.object for f in self.facts}


class Probe(FrozenModel):
    prompt: list[str]
    expected: list[str]


class EditScope(BaseModel):
    in_scope: list[list[str]]
    out_of_scope: list[list[str]]


class EditRequest(BaseModel):
    case_id: int = Field(..., description='Position of the request in its benchmark')
    subject: str
    relation: str
    old_object: str
    new_object: str
    edit_prompt: list[str] = Field(..., description='Edit descriptor x_e')
    target: list[str] = Field(..., description='Edit target y_e')
    subject_span: tuple[int, int] = Field(..., description='Half-open token range of the subject in x_e')
    old_target: list[str]
    rephrases: list[list[str]]
    locality_probes: list[Probe]
    portability_probes: list[Probe]
    new_statement: list[str] = Field(..., description='The post-edit fact rendered as a statement')

    @property
    def scope(self) -> EditScope:
        return EditScope(
            in_scope=[list(p) for p in self.rephrases],
            out_of_scope=[list(p.prompt) for p in self.locality_probes],
        )

    @property
    def key(self) -> str:
        return f'{self.subject}|{self.relation}|{self.new_object}'
