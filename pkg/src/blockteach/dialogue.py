"""Yes/no teaching dialogue over a ranked pattern queue.

Every mined pattern becomes one question.  Confirming a question marks all
still-pending questions it entails as implied_true (they are never asked);
denying one marks the pending questions that would force it as
implied_false.  The explicitly confirmed patterns form the learned concept.

Questions are rendered by a table-driven slot filler; the sentence frames
live in ``data/nlg_templates.json`` keyed by (template, kind, comparator)
and are editable without code changes.  Unknown cells fail loudly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

from .features import DYNAMIC_ROLES
from .mining import MinedPattern
from .patterns import Pattern, entails, serialize_pattern
from .scene import ActionSignature, Demonstration, RoleBinding

PENDING = "pending"
ASKED = "asked"
CONFIRMED = "confirmed"
DENIED = "denied"
IMPLIED_TRUE = "implied_true"
IMPLIED_FALSE = "implied_false"

RESOLVED = frozenset({CONFIRMED, DENIED, IMPLIED_TRUE, IMPLIED_FALSE})

#: Stand-in descriptors for the dynamic binding, which names no fixed object.
DYNAMIC_DESCRIPTORS = {"L": "the previously moved block",
                       "C": "the block being moved"}


class UnknownTemplateCell(KeyError):
    """No sentence frame exists for a (template, kind, comparator) cell."""


def _load_table() -> dict:
    with resources.files("blockteach.data").joinpath(
            "nlg_templates.json").open("r") as fh:
        return json.load(fh)


_TABLE = _load_table()


def render_question(p: Pattern, roles: RoleBinding,
                    warnings: list[str] | None = None) -> str:
    """Deterministic English question for one pattern.

    Role slots fill with the binding's descriptors; a missing descriptor
    falls back to the raw object id and records a warning.
    """
    key = f"{p.template.value}|{p.feature.kind.value}|{p.comparator.value}"
    cell = _TABLE["cells"].get(key)
    if cell is None:
        raise UnknownTemplateCell(key)

    def describe(role: str) -> str:
        if role in DYNAMIC_ROLES:
            return DYNAMIC_DESCRIPTORS[role]
        obj = roles.object_for(role)
        if obj not in roles.descriptors and warnings is not None:
            warnings.append(f"no descriptor for {obj!r}; using its id")
        return roles.describe(obj)

    slots = {"subject": describe(p.feature.binding[0])}
    if len(p.feature.binding) > 1:
        slots["object"] = describe(p.feature.binding[1])
    if p.rhs_value is not None:
        kind = p.feature.kind.value
        slots["value_phrase"] = _TABLE["values"][kind][p.rhs_value]
        band = _TABLE["bands"].get(kind, {}).get(p.rhs_value)
        if band is not None:
            slots["value_band"] = band
    return cell.format(**slots)


@dataclass
class Question:
    id: str
    mined: MinedPattern
    text: str
    status: str = PENDING

    @property
    def pattern(self) -> Pattern:
        return self.mined.pattern


@dataclass
class TeachingSession:
    """State of one confirmation dialogue.  Single-writer; apply answers
    sequentially."""

    signature: ActionSignature | None
    roles: RoleBinding
    queue: list[Question]
    demos: tuple[Demonstration, ...] = ()
    confirmed: list[Pattern] = field(default_factory=list)
    transcript: list[tuple[str, str]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def pending(self) -> list[Question]:
        return [q for q in self.queue if q.status == PENDING]

    def unresolved(self) -> list[Question]:
        return [q for q in self.queue if q.status not in RESOLVED]

    def question(self, question_id: str) -> Question:
        for q in self.queue:
            if q.id == question_id:
                return q
        raise KeyError(f"unknown question id {question_id!r}")

    @property
    def complete(self) -> bool:
        return not self.unresolved()


def build_queue(mined: Sequence[MinedPattern], roles: RoleBinding,
                signature: ActionSignature | None = None,
                demos: Sequence[Demonstration] = ()) -> TeachingSession:
    """One pending question per mined pattern, in mined (queue) order."""
    session = TeachingSession(signature=signature, roles=roles, queue=[],
                              demos=tuple(demos))
    seen: set[Pattern] = set()
    for i, m in enumerate(mined):
        if m.pattern in seen:
            raise ValueError(f"duplicate pattern {serialize_pattern(m.pattern)}")
        seen.add(m.pattern)
        text = render_question(m.pattern, roles, session.warnings)
        session.queue.append(Question(id=f"q{i + 1:03d}", mined=m, text=text))
    return session


def next_question(s: TeachingSession) -> Question | None:
    """First pending question, marked asked; None when teaching is complete."""
    for q in s.queue:
        if q.status == PENDING:
            q.status = ASKED
            s.transcript.append(("agent", q.text))
            return q
    return None


def apply_answer(s: TeachingSession, question_id: str,
                 answer: str) -> TeachingSession:
    """Record a yes/no answer and prune the queue accordingly."""
    if answer not in ("yes", "no"):
        raise ValueError(f"answer must be 'yes' or 'no', got {answer!r}")
    q = s.question(question_id)
    if q.status in RESOLVED:
        raise ValueError(f"question {question_id} already resolved ({q.status})")
    s.transcript.append(("teacher", answer))
    if answer == "yes":
        q.status = CONFIRMED
        s.confirmed.append(q.pattern)
        for other in s.queue:
            if other.status == PENDING and entails(q.pattern, other.pattern):
                other.status = IMPLIED_TRUE
    else:
        q.status = DENIED
        for other in s.queue:
            if other.status == PENDING and entails(other.pattern, q.pattern):
                other.status = IMPLIED_FALSE
    return s
