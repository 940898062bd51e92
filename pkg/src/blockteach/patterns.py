"""Pattern templates over feature functions, their evaluation and entailment.

Five templates describe a feature's behaviour over a demonstration:

===================  =============================================  example text
InitialState         value at the first frame                       ``QDC(A,B)[0] <= 1``
FinalState           value at the last frame                        ``CD(A,B)[F] = N``
ConstantAcrossFrames value at every frame                           ``forall_t MV(A)[t] = 1``
ConsecutiveRelation  relation between adjacent frames               ``forall_t QTC_C3(A,B)[t] = QTC_C3(A,B)[t+1]``
StartEndRelation     relation between first and last frame          ``CD(A,B)[0] = CD(A,B)[F]``
===================  =============================================  example text

The text forms above are the canonical serialization used in concept files,
reports and protocol messages; :func:`parse_pattern` inverts
:func:`serialize_pattern` exactly.

``entails(p1, p2)`` is a syntactic preorder: true when confirming p1 makes
p2 trivially true.  It is deliberately pairwise (no multi-premise closure)
but transitively closed, so queue pruning can chain confirmations.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Sequence

from .features import (
    DOMAINS,
    DYNAMIC_ROLES,
    ORDERED_KINDS,
    FeatureFunction,
    FeatureKind,
    QuantizationConfig,
    check_value,
    feature_entries,
    ordinal,
)
from .scene import Demonstration, MoveEpisode


class Comparator(enum.Enum):
    EQ = "="
    NE = "!="
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="


ORDER_COMPARATORS = frozenset({Comparator.LT, Comparator.LE,
                               Comparator.GT, Comparator.GE})


class Template(enum.Enum):
    INITIAL = "initial"
    FINAL = "final"
    CONSTANT = "constant"
    CONSECUTIVE = "consecutive"
    START_END = "start_end"


CONSTANT_TEMPLATES = frozenset({Template.INITIAL, Template.FINAL, Template.CONSTANT})
RELATION_TEMPLATES = frozenset({Template.CONSECUTIVE, Template.START_END})


def compare(kind: FeatureKind, a: str, b: str, cmp: Comparator) -> bool:
    if cmp is Comparator.EQ:
        return a == b
    if cmp is Comparator.NE:
        return a != b
    ia, ib = ordinal(kind, a), ordinal(kind, b)
    if cmp is Comparator.LT:
        return ia < ib
    if cmp is Comparator.LE:
        return ia <= ib
    if cmp is Comparator.GT:
        return ia > ib
    return ia >= ib


@dataclass(frozen=True)
class Pattern:
    """One instantiated template.

    Constant templates carry ``rhs_value``; relation templates carry
    ``rhs_feature`` (normally the same feature function, but a different
    binding is representable for start/end relations).
    """

    template: Template
    feature: FeatureFunction
    comparator: Comparator
    rhs_value: str | None = None
    rhs_feature: FeatureFunction | None = None

    def __post_init__(self):
        if self.template in CONSTANT_TEMPLATES:
            if self.rhs_value is None or self.rhs_feature is not None:
                raise ValueError(f"{self.template.value} pattern needs a constant rhs")
            check_value(self.feature.kind, self.rhs_value)
        else:
            if self.rhs_value is not None:
                raise ValueError(f"{self.template.value} pattern takes no constant")
            if self.rhs_feature is None:
                object.__setattr__(self, "rhs_feature", self.feature)
            if self.rhs_feature.kind is not self.feature.kind:
                raise ValueError("relation sides must share a feature kind")
        if (self.comparator in ORDER_COMPARATORS
                and self.feature.kind not in ORDERED_KINDS):
            raise ValueError(
                f"comparator {self.comparator.value} is not defined on "
                f"{self.feature.kind.value} (unordered domain)"
            )

    @property
    def is_constant(self) -> bool:
        return self.template in CONSTANT_TEMPLATES

    def text(self) -> str:
        return serialize_pattern(self)

    def __str__(self) -> str:  # pragma: no cover - convenience
        return serialize_pattern(self)


def satisfying_set(p: Pattern) -> tuple[str, ...]:
    """Domain values consistent with a constant-rhs pattern, in domain order."""
    if not p.is_constant:
        raise ValueError("satisfying_set is defined for constant-rhs patterns")
    kind = p.feature.kind
    return tuple(v for v in DOMAINS[kind]
                 if compare(kind, v, p.rhs_value, p.comparator))


# --------------------------------------------------------------------------
# canonical text form

def serialize_pattern(p: Pattern) -> str:
    f = p.feature.text()
    cmp = p.comparator.value
    if p.template is Template.INITIAL:
        return f"{f}[0] {cmp} {p.rhs_value}"
    if p.template is Template.FINAL:
        return f"{f}[F] {cmp} {p.rhs_value}"
    if p.template is Template.CONSTANT:
        return f"forall_t {f}[t] {cmp} {p.rhs_value}"
    rhs = p.rhs_feature.text()
    if p.template is Template.CONSECUTIVE:
        return f"forall_t {f}[t] {cmp} {rhs}[t+1]"
    return f"{f}[0] {cmp} {rhs}[F]"


_PATTERN_RE = re.compile(
    r"^(?P<forall>forall_t )?"
    r"(?P<kind>[A-Z][A-Z0-9_]*)\((?P<args>[^)]+)\)\[(?P<idx>t|0|F)\]"
    r" (?P<cmp>=|!=|<=|>=|<|>) "
    r"(?P<rhs>.+)$"
)
_RHS_FEATURE_RE = re.compile(
    r"^(?P<kind>[A-Z][A-Z0-9_]*)\((?P<args>[^)]+)\)\[(?P<idx>t\+1|F)\]$"
)


def _parse_feature(kind_name: str, args: str) -> FeatureFunction:
    try:
        kind = FeatureKind(kind_name)
    except ValueError:
        raise ValueError(f"unknown feature kind {kind_name!r}") from None
    binding = tuple(a.strip() for a in args.split(","))
    dynamic = binding == DYNAMIC_ROLES
    return FeatureFunction(kind, binding, dynamic=dynamic)


def parse_pattern(text: str) -> Pattern:
    """Parse the canonical text form produced by :func:`serialize_pattern`."""
    m = _PATTERN_RE.match(text.strip())
    if not m:
        raise ValueError(f"unparseable pattern: {text!r}")
    feature = _parse_feature(m["kind"], m["args"])
    cmp = Comparator(m["cmp"])
    idx = m["idx"]
    forall = bool(m["forall"])
    rhs = m["rhs"].strip()
    rm = _RHS_FEATURE_RE.match(rhs)
    if rm:
        rhs_feature = _parse_feature(rm["kind"], rm["args"])
        if forall and idx == "t" and rm["idx"] == "t+1":
            return Pattern(Template.CONSECUTIVE, feature, cmp,
                           rhs_feature=rhs_feature)
        if not forall and idx == "0" and rm["idx"] == "F":
            return Pattern(Template.START_END, feature, cmp,
                           rhs_feature=rhs_feature)
        raise ValueError(f"inconsistent relation indices in {text!r}")
    if forall and idx == "t":
        return Pattern(Template.CONSTANT, feature, cmp, rhs_value=rhs)
    if not forall and idx == "0":
        return Pattern(Template.INITIAL, feature, cmp, rhs_value=rhs)
    if not forall and idx == "F":
        return Pattern(Template.FINAL, feature, cmp, rhs_value=rhs)
    raise ValueError(f"inconsistent template shape in {text!r}")


# --------------------------------------------------------------------------
# evaluation

SATISFIED = "satisfied"
VIOLATED = "violated"
INAPPLICABLE = "inapplicable"


@dataclass(frozen=True)
class EvaluationReport:
    """Counts plus per-evaluation-point outcomes for one (pattern, demo)."""

    applicable: int
    satisfied: int
    outcomes: tuple[str, ...]

    def __post_init__(self):
        if self.satisfied > self.applicable:
            raise ValueError("satisfied cannot exceed applicable")

    @property
    def fully_satisfied(self) -> bool:
        return self.satisfied == self.applicable


def _outcome(ok: bool) -> str:
    return SATISFIED if ok else VIOLATED


def evaluate_pattern(p: Pattern, d: Demonstration, cfg: QuantizationConfig,
                     episodes: Sequence[MoveEpisode] | None = None,
                     ) -> EvaluationReport:
    """Evaluate a pattern over one demonstration.

    Frames (or frame pairs) where a dynamic binding does not resolve, or
    where the two sides of a consecutive relation resolve to different object
    pairs, are counted inapplicable and excluded from both tallies.
    """
    kind = p.feature.kind
    entries = feature_entries(d, p.feature, cfg, episodes)
    outcomes: list[str] = []

    if p.template in (Template.INITIAL, Template.FINAL):
        e = entries[0] if p.template is Template.INITIAL else entries[-1]
        if e.value is None:
            outcomes.append(INAPPLICABLE)
        else:
            outcomes.append(_outcome(compare(kind, e.value, p.rhs_value,
                                             p.comparator)))
    elif p.template is Template.CONSTANT:
        for e in entries:
            if e.value is None:
                outcomes.append(INAPPLICABLE)
            else:
                outcomes.append(_outcome(compare(kind, e.value, p.rhs_value,
                                                 p.comparator)))
    elif p.template is Template.CONSECUTIVE:
        rhs_entries = (entries if p.rhs_feature == p.feature
                       else feature_entries(d, p.rhs_feature, cfg, episodes))
        for t in range(len(entries) - 1):
            a, b = entries[t], rhs_entries[t + 1]
            if a.value is None or b.value is None or a.objects != b.objects:
                outcomes.append(INAPPLICABLE)
            else:
                outcomes.append(_outcome(compare(kind, a.value, b.value,
                                                 p.comparator)))
    else:  # START_END
        rhs_entries = (entries if p.rhs_feature == p.feature
                       else feature_entries(d, p.rhs_feature, cfg, episodes))
        a, b = entries[0], rhs_entries[-1]
        same_pair_required = p.rhs_feature == p.feature and p.feature.dynamic
        if (a.value is None or b.value is None
                or (same_pair_required and a.objects != b.objects)):
            outcomes.append(INAPPLICABLE)
        else:
            outcomes.append(_outcome(compare(kind, a.value, b.value,
                                             p.comparator)))

    applicable = sum(1 for o in outcomes if o != INAPPLICABLE)
    satisfied = sum(1 for o in outcomes if o == SATISFIED)
    return EvaluationReport(applicable, satisfied, tuple(outcomes))


# --------------------------------------------------------------------------
# entailment (precedence)

def entails(p1: Pattern, p2: Pattern) -> bool:
    """True when confirming p1 makes p2 trivially true.

    Rules (each value-wise sound, and together transitively closed):

    * reflexivity;
    * same template, same feature, both constant-rhs: satisfying-set subset;
    * constant-across-frames additionally entails initial/final-state
      patterns on the same feature by the same subset test, and, when its
      satisfying set is a single value, the consecutive and start/end
      equality relations;
    * a statically bound consecutive equality entails the start/end equality
      (equality chained over every adjacent pair forces first = last).

    Nothing else is claimed.
    """
    if p1 == p2:
        return True
    if p1.feature != p2.feature:
        return False
    if p1.is_constant and p2.is_constant:
        if p1.template is p2.template or (
                p1.template is Template.CONSTANT
                and p2.template in (Template.INITIAL, Template.FINAL)):
            s1, s2 = set(satisfying_set(p1)), set(satisfying_set(p2))
            return s1 <= s2
        return False
    if not p2.is_constant and p2.comparator is Comparator.EQ \
            and p2.rhs_feature == p2.feature:
        if p1.is_constant and p1.template is Template.CONSTANT \
                and len(satisfying_set(p1)) == 1:
            return True
        if (not p1.is_constant and p1.template is Template.CONSECUTIVE
                and p1.comparator is Comparator.EQ
                and p1.rhs_feature == p1.feature
                and p2.template is Template.START_END
                and not p1.feature.dynamic):
            return True
    return False
