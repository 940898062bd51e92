"""Candidate pattern enumeration, confidence scoring and the ranked queue.

Mining walks every enabled feature function over the demonstration set,
instantiates the five templates with values actually observed in the data,
pools frame-level evaluations into a support probability, scores each
candidate with

    confidence = probability * bias_sum / domain_size

(bias_sum sums the per-value recognizability weights over the satisfying
set; relation patterns use 1/|feature domain| as their specificity), filters
by a confidence threshold, and orders the survivors so that patterns that
entail others come first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import permutations
from typing import Mapping, Sequence

from .features import (
    ARITY,
    DOMAINS,
    ORDERED_KINDS,
    FeatureFunction,
    FeatureKind,
    QuantizationConfig,
    dynamic_pair_function,
    feature_entries,
)
from .patterns import (
    Comparator,
    Pattern,
    Template,
    entails,
    evaluate_pattern,
    parse_pattern,
    satisfying_set,
    serialize_pattern,
)
from .scene import Demonstration, segment_move_episodes


def _default_weights() -> dict:
    # Lower distance bands are easier to recognize; weight 1/(ordinal+1).
    return {(FeatureKind.QDC, v): 1.0 / (i + 1)
            for i, v in enumerate(DOMAINS[FeatureKind.QDC])}


@dataclass(frozen=True)
class BiasModel:
    """Per-value recognizability weights; unlisted values weigh 1.0."""

    weights: Mapping[tuple[FeatureKind, str], float] = field(
        default_factory=_default_weights)

    def __post_init__(self):
        object.__setattr__(self, "weights", dict(self.weights))
        if any(w <= 0 for w in self.weights.values()):
            raise ValueError("bias weights must be positive")

    def weight(self, kind: FeatureKind, value: str) -> float:
        return self.weights.get((kind, value), 1.0)


ALL_KINDS = tuple(FeatureKind)

ORDERED_CUT_COMPARATORS = (Comparator.LT, Comparator.LE, Comparator.GT,
                           Comparator.GE, Comparator.NE)


@dataclass(frozen=True)
class MinerConfig:
    """What to enumerate and how strictly to filter.

    ``pairs=None`` enumerates every ordered pair of signature roles; pass an
    explicit tuple of (x, y) role pairs to narrow the search.
    """

    confidence_threshold: float = 0.6
    kinds: tuple[FeatureKind, ...] = ALL_KINDS
    pairs: tuple[tuple[str, str], ...] | None = None
    unary_roles: bool = True
    dynamic_pair: bool = True
    bias: BiasModel = field(default_factory=BiasModel)

    def __post_init__(self):
        object.__setattr__(self, "kinds", tuple(self.kinds))
        if self.pairs is not None:
            object.__setattr__(
                self, "pairs", tuple((a, b) for a, b in self.pairs))
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValueError("confidence_threshold must be in [0, 1]")


@dataclass(frozen=True)
class MinedPattern:
    """A pattern with its pooled support and confidence score."""

    pattern: Pattern
    probability: float
    bias_sum: float
    domain_size: int
    confidence: float
    applicable: int
    satisfied: int

    def to_document(self) -> dict:
        return {
            "pattern": serialize_pattern(self.pattern),
            "probability": self.probability,
            "bias_sum": self.bias_sum,
            "domain_size": self.domain_size,
            "q": self.confidence,
            "support": {"applicable": self.applicable,
                        "satisfied": self.satisfied},
        }

    @classmethod
    def from_document(cls, doc: Mapping) -> "MinedPattern":
        return cls(
            pattern=parse_pattern(doc["pattern"]),
            probability=doc["probability"],
            bias_sum=doc["bias_sum"],
            domain_size=doc["domain_size"],
            confidence=doc["q"],
            applicable=doc["support"]["applicable"],
            satisfied=doc["support"]["satisfied"],
        )


def report_to_json(mined: Sequence[MinedPattern], *, indent: int = 2) -> str:
    return json.dumps({"patterns": [m.to_document() for m in mined]},
                      indent=indent) + "\n"


def report_from_json(text: str) -> list[MinedPattern]:
    return [MinedPattern.from_document(doc)
            for doc in json.loads(text)["patterns"]]


# --------------------------------------------------------------------------
# enumeration

def feature_functions(signature, cfg: MinerConfig) -> list[FeatureFunction]:
    fns: list[FeatureFunction] = []
    for kind in cfg.kinds:
        if ARITY[kind] == 1:
            if cfg.unary_roles:
                fns.extend(FeatureFunction(kind, (r,)) for r in signature.roles)
        else:
            pairs = (cfg.pairs if cfg.pairs is not None
                     else tuple(permutations(signature.roles, 2)))
            fns.extend(FeatureFunction(kind, p) for p in pairs)
            if cfg.dynamic_pair:
                fns.append(dynamic_pair_function(kind))
    return fns


def enumerate_candidates(demos: Sequence[Demonstration], cfg: MinerConfig,
                         qcfg: QuantizationConfig) -> list[Pattern]:
    """All template instantiations supported by at least one observed value."""
    if not demos:
        return []
    slots = demos[0].signature.roles
    for d in demos[1:]:
        if d.signature.roles != slots:
            raise ValueError(
                f"demonstrations disagree on role slots: {slots} vs "
                f"{d.signature.roles}")

    episodes = {id(d): segment_move_episodes(d, qcfg.motion_threshold)
                for d in demos}
    out: list[Pattern] = []
    seen: set[Pattern] = set()

    def add(p: Pattern) -> None:
        if p not in seen:
            seen.add(p)
            out.append(p)

    for fn in feature_functions(demos[0].signature, cfg):
        all_entries = [feature_entries(d, fn, qcfg, episodes[id(d)])
                       for d in demos]
        observed = {e.value for entries in all_entries for e in entries
                    if e.value is not None}
        if not observed:
            continue
        domain = DOMAINS[fn.kind]
        observed_ordered = [v for v in domain if v in observed]

        for template in (Template.INITIAL, Template.FINAL, Template.CONSTANT):
            for v in observed_ordered:
                add(Pattern(template, fn, Comparator.EQ, rhs_value=v))
            if fn.kind in ORDERED_KINDS:
                for cmp in ORDERED_CUT_COMPARATORS:
                    for rhs in domain:
                        p = Pattern(template, fn, cmp, rhs_value=rhs)
                        sat = satisfying_set(p)
                        if sat and observed & set(sat):
                            add(p)

        add(Pattern(Template.CONSECUTIVE, fn, Comparator.EQ))
        if any(a.value is not None and b.value is not None
               and a.objects == b.objects and a.value != b.value
               for entries in all_entries
               for a, b in zip(entries, entries[1:])):
            add(Pattern(Template.CONSECUTIVE, fn, Comparator.NE))
        add(Pattern(Template.START_END, fn, Comparator.EQ))
        if any(entries[0].value is not None and entries[-1].value is not None
               and entries[0].value != entries[-1].value
               for entries in all_entries):
            add(Pattern(Template.START_END, fn, Comparator.NE))
    return out


# --------------------------------------------------------------------------
# scoring

def pooled_support(p: Pattern, demos: Sequence[Demonstration],
                   qcfg: QuantizationConfig,
                   episodes: Mapping | None = None) -> tuple[int, int]:
    applicable = satisfied = 0
    for d in demos:
        eps = episodes[id(d)] if episodes else None
        report = evaluate_pattern(p, d, qcfg, eps)
        applicable += report.applicable
        satisfied += report.satisfied
    return applicable, satisfied


def probability(p: Pattern, demos: Sequence[Demonstration],
                qcfg: QuantizationConfig) -> float:
    """Fraction of applicable evaluations the pattern satisfies, pooled."""
    applicable, satisfied = pooled_support(p, demos, qcfg)
    if applicable == 0:
        raise ValueError(f"pattern {serialize_pattern(p)} is never applicable")
    return satisfied / applicable


def score_parts(p: Pattern, bias: BiasModel) -> tuple[float, int]:
    """(bias_sum, domain_size) of the confidence formula for one pattern."""
    if p.is_constant:
        sat = satisfying_set(p)
        return sum(bias.weight(p.feature.kind, v) for v in sat), len(sat)
    # Relation patterns carry no concrete value; their specificity is one
    # part in the feature's whole value domain.
    return 1.0, len(DOMAINS[p.feature.kind])


def confidence_score(p: Pattern, prob: float, bias: BiasModel) -> float:
    bias_sum, domain_size = score_parts(p, bias)
    return prob * bias_sum / domain_size


# --------------------------------------------------------------------------
# ranking

def _entailment_layers(patterns: Sequence[Pattern]) -> list[int]:
    """Longest-path depth per pattern in the strict-entailment DAG.

    Mutually entailing patterns (equal satisfying sets under one template)
    share a layer; a pattern that strictly entails another always lands in an
    earlier layer.
    """
    n = len(patterns)
    fwd = [[entails(patterns[i], patterns[j]) for j in range(n)]
           for i in range(n)]
    # condense mutual-entailment classes
    comp = [-1] * n
    classes: list[list[int]] = []
    for i in range(n):
        if comp[i] >= 0:
            continue
        cls = [i]
        comp[i] = len(classes)
        for j in range(i + 1, n):
            if comp[j] < 0 and fwd[i][j] and fwd[j][i]:
                comp[j] = len(classes)
                cls.append(j)
        classes.append(cls)
    k = len(classes)
    edges = [set() for _ in range(k)]
    for i in range(n):
        for j in range(n):
            if fwd[i][j] and comp[i] != comp[j]:
                edges[comp[i]].add(comp[j])

    depth = [-1] * k

    def resolve(c: int) -> int:
        if depth[c] >= 0:
            return depth[c]
        depth[c] = 0  # entailment is a preorder; condensed graph is acyclic
        best = 0
        for prev in range(k):
            if c in edges[prev]:
                best = max(best, resolve(prev) + 1)
        depth[c] = best
        return best

    return [resolve(comp[i]) for i in range(n)]


def mine(demos: Sequence[Demonstration], cfg: MinerConfig,
         qcfg: QuantizationConfig) -> list[MinedPattern]:
    """Enumerate, score and rank patterns over a demonstration set.

    The queue is ordered by entailment layer (entailing patterns first),
    then confidence descending, then canonical text for determinism.
    """
    if not demos:
        raise ValueError("mine needs at least one demonstration")
    candidates = enumerate_candidates(demos, cfg, qcfg)
    episodes = {id(d): segment_move_episodes(d, qcfg.motion_threshold)
                for d in demos}
    mined: list[MinedPattern] = []
    for p in candidates:
        applicable, satisfied = pooled_support(p, demos, qcfg, episodes)
        if applicable == 0:
            continue
        prob = satisfied / applicable
        bias_sum, domain_size = score_parts(p, cfg.bias)
        conf = prob * bias_sum / domain_size
        if conf < cfg.confidence_threshold:
            continue
        mined.append(MinedPattern(p, prob, bias_sum, domain_size, conf,
                                  applicable, satisfied))

    layers = _entailment_layers([m.pattern for m in mined])
    order = sorted(
        range(len(mined)),
        key=lambda i: (layers[i], -mined[i].confidence,
                       serialize_pattern(mined[i].pattern)),
    )
    return [mined[i] for i in order]
