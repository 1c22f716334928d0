"""Core value types shared across the package."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple


class ItemKind(str, enum.Enum):
    ENTITY = "entity"
    PREDICATE = "predicate"
    TYPE = "type"
    LITERAL = "literal"


class RawTriple(NamedTuple):
    subject: str
    predicate: str
    object: str


class RawFact(NamedTuple):
    """A fact over external identifiers, before integer encoding."""

    subject: str
    predicate: str
    object: str
    qualifiers: tuple[tuple[str, str], ...] = ()


class Fact(NamedTuple):
    """A fact over item codes: main triple plus ordered qualifier pairs."""

    fact_id: int
    subject: int
    predicate: int
    object: int
    qualifiers: tuple[tuple[int, int], ...] = ()

    def items(self) -> tuple[int, ...]:
        out = [self.subject, self.predicate, self.object]
        for qp, qo in self.qualifiers:
            out.append(qp)
            out.append(qo)
        return tuple(out)


@dataclass
class ItemRecord:
    external_id: str
    label: str
    aliases: list[str] = field(default_factory=list)
    description: str = ""
    kind: ItemKind = ItemKind.ENTITY

    def __post_init__(self):
        self.kind = ItemKind(self.kind)
        if not self.external_id:
            raise ValueError("item record without external_id")
        if not self.label and self.kind is not ItemKind.LITERAL:
            raise ValueError(f"item {self.external_id!r} has an empty label")

    def to_dict(self) -> dict:
        return {
            "id": self.external_id,
            "label": self.label,
            "aliases": list(self.aliases),
            "description": self.description,
            "kind": self.kind.value,
        }

    @classmethod
    def from_dict(cls, row: dict) -> "ItemRecord":
        return cls(
            external_id=row["id"],
            label=row.get("label", ""),
            aliases=list(row.get("aliases", ())),
            description=row.get("description", ""),
            kind=row.get("kind", "entity"),
        )


@dataclass(frozen=True)
class KBItem:
    code: int
    external_id: str
    label: str
    aliases: tuple[str, ...]
    description: str
    kind: ItemKind


class FrequencyProfile(NamedTuple):
    """Number of facts in which an item plays each role."""

    subject_count: int
    object_count: int
    qualifier_object_count: int
    total: int


class Distance(enum.Enum):
    HOP1 = 1
    HOP2 = 2
    FAR = 3

    @property
    def connectivity(self) -> float:
        return {Distance.HOP1: 1.0, Distance.HOP2: 0.5, Distance.FAR: 0.0}[self]
