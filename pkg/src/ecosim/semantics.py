"""Semantic descriptions, agents, requests and the fitness arithmetic.

A service is abstracted as a small set of integer ``(attribute_id, value)``
tuples. Requests are lists of such sets. Fitness of an agent-sequence
against a request is ``1 / (1 + total distance)`` where each required tuple
is matched against its closest tuple anywhere in the sequence.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

ATTR_MIN = 1
ATTR_MAX = 100
# An attribute absent from the sequence costs as much as the worst in-range match.
MISSING_PENALTY = 100


class SemanticError(ValueError):
    """Raised when a tuple, description or request violates its bounds."""


class AttributeTuple(NamedTuple):
    attribute_id: int
    value: int

    @classmethod
    def of(cls, attribute_id: int, value: int) -> "AttributeTuple":
        if not ATTR_MIN <= attribute_id <= ATTR_MAX:
            raise SemanticError(f"attribute_id {attribute_id} outside [1, 100]")
        if not ATTR_MIN <= value <= ATTR_MAX:
            raise SemanticError(f"value {value} outside [1, 100]")
        return cls(int(attribute_id), int(value))

    def __str__(self) -> str:
        return f"({self.attribute_id},{self.value})"


def _canonical(tuples: Iterable) -> tuple[AttributeTuple, ...]:
    out = tuple(sorted(AttributeTuple.of(*t) for t in tuples))
    ids = [t.attribute_id for t in out]
    if len(set(ids)) != len(ids):
        raise SemanticError(f"duplicate attribute ids in {ids}")
    return out


@dataclass(frozen=True)
class SemanticDescription:
    """Attribute set of one service, stored sorted by attribute id.

    ``strict=False`` skips the 3..6 size rule; used for request groups and
    for small hand-built fixtures.
    """

    tuples: tuple[AttributeTuple, ...]

    def __init__(self, tuples: Iterable, strict: bool = True):
        canon = _canonical(tuples)
        if strict and not 3 <= len(canon) <= 6:
            raise SemanticError(f"description must hold 3..6 tuples, got {len(canon)}")
        object.__setattr__(self, "tuples", canon)

    def __iter__(self):
        return iter(self.tuples)

    def __len__(self) -> int:
        return len(self.tuples)

    def as_dict(self) -> dict[int, int]:
        return {t.attribute_id: t.value for t in self.tuples}

    def __str__(self) -> str:
        return "{" + ",".join(str(t) for t in self.tuples) + "}"


@dataclass(eq=False)
class Agent:
    """A migrating representative of one service.

    Copies of the same deployed service share ``lineage``; each copy has its
    own ``agent_id`` and migration history.
    """

    agent_id: int
    service_ref: str
    description: SemanticDescription
    origin_habitat: int
    migration_history: list[int] = field(default_factory=list)
    usage_count: int = 0
    idle_request_count: int = 0
    escape_remaining: int = 0
    lineage: int | None = None

    def __post_init__(self):
        if not self.migration_history:
            self.migration_history = [self.origin_habitat]
        if self.migration_history[0] != self.origin_habitat:
            raise SemanticError("migration history must start at the origin habitat")
        if self.lineage is None:
            self.lineage = self.agent_id

    @property
    def location(self) -> int:
        return self.migration_history[-1]

    def __repr__(self) -> str:
        return f"Agent({self.agent_id}, {self.description}, at={self.location})"


@dataclass(frozen=True)
class AgentSequence:
    members: tuple[Agent, ...]
    provenance: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "provenance", tuple(self.provenance))
        if not self.members:
            raise SemanticError("an agent-sequence needs at least one member")

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @property
    def key(self) -> tuple[int, ...]:
        return tuple(a.agent_id for a in self.members)

    def attribute_tuples(self) -> list[AttributeTuple]:
        return [t for a in self.members for t in a.description]


@dataclass(frozen=True)
class UserRequest:
    groups: tuple[SemanticDescription, ...]

    def __init__(self, groups: Iterable, strict: bool = True):
        gs = tuple(
            g if isinstance(g, SemanticDescription) else SemanticDescription(g, strict=False)
            for g in groups
        )
        if strict:
            if not 2 <= len(gs) <= 8:
                raise SemanticError(f"request must hold 2..8 groups, got {len(gs)}")
            for g in gs:
                if not 3 <= len(g) <= 7:
                    raise SemanticError(f"request group must hold 3..7 tuples, got {len(g)}")
        elif not gs:
            raise SemanticError("request has no groups")
        object.__setattr__(self, "groups", gs)

    def __str__(self) -> str:
        return "[" + ",".join(str(g) for g in self.groups) + "]"


def tuple_distance(r: AttributeTuple, a: AttributeTuple) -> int:
    if r[0] == a[0]:
        return abs(r[1] - a[1])
    return MISSING_PENALTY


def flatten(request: UserRequest) -> list[AttributeTuple]:
    return [t for g in request.groups for t in g.tuples]


def min_distance(r: AttributeTuple, candidates: Sequence[AttributeTuple]) -> int:
    return min((tuple_distance(r, a) for a in candidates), default=MISSING_PENALTY)


def total_distance(seq: AgentSequence, request: UserRequest) -> int:
    cands = seq.attribute_tuples()
    return sum(min_distance(r, cands) for r in flatten(request))


def raw_fitness(seq: AgentSequence, request: UserRequest) -> float:
    return 1.0 / (1.0 + total_distance(seq, request))


def description_distance(s1: SemanticDescription, s2: SemanticDescription) -> float:
    """Mean per-attribute difference over the union of ids, in [0, 1].

    Shared ids contribute ``|v1 - v2| / 100``; an id held by only one side
    contributes 1.
    """
    d1, d2 = s1.as_dict(), s2.as_dict()
    ids = d1.keys() | d2.keys()
    if not ids:
        return 0.0
    total = 0
    for i in ids:
        if i in d1 and i in d2:
            total += abs(d1[i] - d2[i])
        else:
            total += 100
    return total / (100 * len(ids))


# -- tuple text syntax: {(id,val),...} and [{...},{...}] -------------------

_TUPLE_RE = re.compile(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)")
_SET_RE = re.compile(r"\{([^{}]*)\}")


def _parse_set_body(body: str) -> list[AttributeTuple]:
    rest = _TUPLE_RE.sub("", body)
    if rest.replace(",", "").strip():
        raise SemanticError(f"unexpected text in tuple set: {rest.strip()!r}")
    return [AttributeTuple.of(int(i), int(v)) for i, v in _TUPLE_RE.findall(body)]


def parse_item(text: str, strict: bool = False) -> SemanticDescription | UserRequest:
    """Parse ``{(1,25),(2,35)}`` as a description or ``[{..},{..}]`` as a request."""
    s = text.strip()
    if s.startswith("[") and s.endswith("]"):
        inner = s[1:-1]
        sets = _SET_RE.findall(inner)
        if _SET_RE.sub("", inner).replace(",", "").strip() or not sets:
            raise SemanticError(f"malformed request: {text!r}")
        return UserRequest([_parse_set_body(b) for b in sets], strict=strict)
    if s.startswith("{") and s.endswith("}") and s.count("{") == 1:
        return SemanticDescription(_parse_set_body(s[1:-1]), strict=strict)
    raise SemanticError(f"malformed tuple set: {text!r}")


# -- semantic filter --------------------------------------------------------

@dataclass
class SemanticFilter:
    field_names: dict[int, str] = field(default_factory=dict)
    labels: dict[tuple[int, int], str] = field(default_factory=dict)

    def __post_init__(self):
        for attr_id, _ in self.labels:
            if attr_id not in self.field_names:
                raise SemanticError(f"label for attribute {attr_id} has no field name")

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "SemanticFilter":
        names: dict[int, str] = {}
        labels: dict[tuple[int, int], str] = {}
        rows = (ln for ln in lines if ln.strip() and not ln.lstrip().startswith("#"))
        for lineno, row in enumerate(csv.reader(rows), 1):
            if len(row) != 4:
                raise SemanticError(f"filter row {lineno}: expected 4 fields, got {len(row)}")
            attr_id, value, name, label = (c.strip() for c in row)
            names[int(attr_id)] = name
            if value != "*":
                labels[(int(attr_id), int(value))] = label
        return cls(names, labels)

    @classmethod
    def load(cls, path: str | Path) -> "SemanticFilter":
        with open(path, encoding="utf-8") as fh:
            return cls.from_lines(fh)

    def render(self, t: AttributeTuple) -> str:
        attr_id, value = t
        name = self.field_names.get(attr_id)
        if name is None:
            return f"(attr{attr_id}, {value})"
        return f"({name}, {self.labels.get((attr_id, value), value)})"


def travel_filter() -> SemanticFilter:
    """The shipped travel-industry table."""
    text = resources.files("ecosim").joinpath("data/travel_filter.csv").read_text("utf-8")
    return SemanticFilter.from_lines(text.splitlines())


def filter_translate(item: SemanticDescription | UserRequest, f: SemanticFilter) -> str:
    if isinstance(item, UserRequest):
        return "[" + ", ".join(filter_translate(g, f) for g in item.groups) + "]"
    return "{" + ", ".join(f.render(t) for t in item.tuples) + "}"
