"""Reenact a learned concept in a novel scene by constraint-checked search.

The confirmed pattern set splits into three constraint groups: initial
(checked once against the scene), during (checked on every planned
transition), and terminal (checked between the first and last frame when
deciding completion).  Search proposes random single-object move steps,
keeps only those whose transition passes every during constraint, and stops
at the first partial plan that satisfies the termination test.  Beam and
best-first strategies share the scoring; everything is deterministic for a
fixed seed.
"""

from __future__ import annotations

import heapq
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .concepts import ConceptRecord
from .features import (
    FeatureKind,
    QuantizationConfig,
    STATE_KINDS,
    bearing_degrees,
    eval_cd,
    eval_qdc,
)
from .patterns import (
    Comparator,
    Pattern,
    Template,
    compare,
    evaluate_pattern,
    serialize_pattern,
)
from .scene import (
    ActionSignature,
    Demonstration,
    Frame,
    ObjectPose,
    RoleBinding,
)


class PlanNotFound(RuntimeError):
    def __init__(self, expansions: int, reason: str = "budget exhausted"):
        super().__init__(f"no plan found after {expansions} expansions ({reason})")
        self.expansions = expansions


class InitialStateViolation(ValueError):
    """The novel scene contradicts the concept before any step is taken."""


@dataclass(frozen=True)
class MoveStep:
    object_id: str
    target: tuple[float, float]

    def text(self) -> str:
        return f"move({self.object_id},{self.target[0]:.6f},{self.target[1]:.6f})"


@dataclass(frozen=True)
class RotateStep:
    # Present for completeness; never sampled while no learned feature
    # constrains orientation.
    object_id: str
    delta_yaw: float

    def text(self) -> str:
        return f"rotate({self.object_id},{self.delta_yaw:.6f})"


StepPrimitive = MoveStep | RotateStep


@dataclass(frozen=True)
class SearchConfig:
    strategy: str = "beam"
    beam_width: int = 16
    candidates_per_expansion: int = 32
    max_step: float = 0.25
    max_expansions: int = 20000
    rng_seed: int = 0
    min_progress: float = 0.9
    min_steps: int = 8

    def __post_init__(self):
        if self.strategy not in ("beam", "best_first"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if (self.beam_width < 1 or self.candidates_per_expansion < 1
                or self.max_step <= 0 or self.max_expansions < 1
                or self.min_steps < 0 or self.min_progress < 0):
            raise ValueError("search bounds must be positive")


@dataclass(frozen=True)
class ConstraintSet:
    """Confirmed patterns partitioned by when they are checked."""

    during: tuple[Pattern, ...]
    terminal: tuple[Pattern, ...]
    initial: tuple[Pattern, ...]


def split_constraints(confirmed: Sequence[Pattern]) -> ConstraintSet:
    during, terminal, initial = [], [], []
    for p in confirmed:
        if p.template in (Template.CONSTANT, Template.CONSECUTIVE):
            during.append(p)
        elif p.template in (Template.FINAL, Template.START_END):
            terminal.append(p)
        else:
            initial.append(p)
    return ConstraintSet(tuple(during), tuple(terminal), tuple(initial))


@dataclass(frozen=True)
class PlanTrace:
    frames: tuple[Frame, ...]
    steps: tuple[StepPrimitive, ...]
    during_audit: tuple[dict, ...]
    terminal_audit: dict
    progress_revolutions: float
    expansions: int

    @property
    def initial(self) -> Frame:
        return self.frames[0]


# --------------------------------------------------------------------------
# constraint machinery

def _resolve(p: Pattern, roles: RoleBinding) -> tuple[str, ...]:
    if p.feature.dynamic:
        raise ValueError(
            f"cannot reenact dynamically bound pattern {serialize_pattern(p)}")
    return tuple(roles.object_for(r) for r in p.feature.binding)


def movable_object_ids(during: Sequence[Pattern], roles: RoleBinding) -> list[str]:
    """Objects the plan may move: those constrained to be always moving.

    Objects pinned by an always-stationary constraint are excluded even if
    another pattern marks them moving.
    """
    moving, pinned = set(), set()
    for p in during:
        if (p.template is Template.CONSTANT and p.feature.kind is FeatureKind.MV
                and p.comparator is Comparator.EQ):
            obj = roles.object_for(p.feature.binding[0])
            (moving if p.rhs_value == "1" else pinned).add(obj)
    return sorted(moving - pinned)


def _state_value(p: Pattern, frame: Frame, objs: Sequence[str],
                 qcfg: QuantizationConfig) -> str:
    if p.feature.kind is FeatureKind.CD:
        return eval_cd(frame.pose(objs[0]), frame.pose(objs[1]), qcfg)
    return eval_qdc(frame.pose(objs[0]), frame.pose(objs[1]), qcfg)


def _transition_value(p: Pattern, prev: Frame, nxt: Frame, objs: Sequence[str],
                      qcfg: QuantizationConfig) -> str:
    from .features import eval_mv, eval_mv_dir, eval_qtc_c1, eval_qtc_c3
    kind = p.feature.kind
    if kind is FeatureKind.MV:
        return eval_mv(objs[0], prev, nxt, qcfg)
    if kind is FeatureKind.MV_DIR:
        return eval_mv_dir(objs[0], prev, nxt, qcfg)
    if kind is FeatureKind.QTC_C1:
        return eval_qtc_c1(objs[0], objs[1], prev, nxt, qcfg)
    return eval_qtc_c3(objs[0], objs[1], prev, nxt, qcfg)


def check_transition(prev: Frame, nxt: Frame, cs: ConstraintSet,
                     roles: RoleBinding, qcfg: QuantizationConfig,
                     prior: Frame | None = None,
                     ) -> tuple[bool, Pattern | None]:
    """Check every during-constraint on one transition; fail fast.

    Consecutive relations over transition-based kinds compare this
    transition's value with the previous one, so they need the frame before
    ``prev`` and pass vacuously on the first step.
    """
    for p in cs.during:
        objs = _resolve(p, roles)
        kind = p.feature.kind
        if p.template is Template.CONSTANT:
            if kind in STATE_KINDS:
                value = _state_value(p, nxt, objs, qcfg)
            else:
                value = _transition_value(p, prev, nxt, objs, qcfg)
            if not compare(kind, value, p.rhs_value, p.comparator):
                return False, p
        else:  # CONSECUTIVE
            if kind in STATE_KINDS:
                a = _state_value(p, prev, objs, qcfg)
                b = _state_value(p, nxt, objs, qcfg)
            else:
                if prior is None:
                    continue
                a = _transition_value(p, prior, prev, objs, qcfg)
                b = _transition_value(p, prev, nxt, objs, qcfg)
            if not compare(kind, a, b, p.comparator):
                return False, p
    return True, None


def _sweep_reference(cs: ConstraintSet, roles: RoleBinding,
                     ) -> tuple[str, str] | None:
    """(subject, reference) pair of an active rotation-constancy constraint.

    Constant '0' means radial motion and must not demand swept angle.
    """
    for p in cs.during:
        if p.feature.kind is not FeatureKind.QTC_C3 or p.feature.dynamic:
            continue
        constancy = (
            (p.template is Template.CONSECUTIVE and p.comparator is Comparator.EQ)
            or (p.template is Template.CONSTANT
                and p.comparator is Comparator.EQ and p.rhs_value in ("-", "+"))
        )
        if constancy:
            objs = _resolve(p, roles)
            return objs[0], objs[1]
    return None


def _swept_degrees(frames: Sequence[Frame], subject: str, reference: str) -> float:
    total = 0.0
    prev_bearing = None
    for fr in frames:
        ps, pr = fr.pose(subject).position, fr.pose(reference).position
        b = bearing_degrees(ps[0] - pr[0], ps[1] - pr[1])
        if prev_bearing is not None:
            total += ((b - prev_bearing + 180.0) % 360.0) - 180.0
        prev_bearing = b
    return total


def _trace_demo(frames: Sequence[Frame], roles: RoleBinding) -> Demonstration:
    return Demonstration(
        name="plan",
        signature=ActionSignature("plan", tuple(roles.roles)),
        frames=tuple(frames),
        roles=roles,
    )


def terminal_holds(p: Pattern, frames: Sequence[Frame], roles: RoleBinding,
                   qcfg: QuantizationConfig) -> bool:
    """One terminal pattern between the first and last frame (>= 2 frames).

    Transition-based kinds take the first transition as the start value and
    the last transition as the end value, matching sequence extraction.
    """
    objs = _resolve(p, roles)
    kind = p.feature.kind
    if kind in STATE_KINDS:
        first = _state_value(p, frames[0], objs, qcfg)
        last = _state_value(p, frames[-1], objs, qcfg)
    else:
        first = _transition_value(p, frames[0], frames[1], objs, qcfg)
        last = _transition_value(p, frames[-2], frames[-1], objs, qcfg)
    if p.template is Template.START_END:
        return compare(kind, first, last, p.comparator)
    return compare(kind, last, p.rhs_value, p.comparator)


def termination_satisfied(trace: PlanTrace, cs: ConstraintSet,
                          cfg: SearchConfig, roles: RoleBinding,
                          qcfg: QuantizationConfig) -> bool:
    """Terminal patterns hold start-to-end, enough steps were taken, and an
    active rotation constraint has swept at least ``min_progress`` turns."""
    if len(trace.steps) < max(cfg.min_steps, 1):
        return False
    sweep = _sweep_reference(cs, roles)
    if sweep is not None:
        swept = abs(_swept_degrees(trace.frames, *sweep)) / 360.0
        if swept < cfg.min_progress:
            return False
    return all(terminal_holds(p, trace.frames, roles, qcfg)
               for p in cs.terminal)


def generate_candidate_steps(state: Frame, movable: Sequence[str],
                             cfg: SearchConfig,
                             rng: random.Random) -> list[MoveStep]:
    """K random single-object steps, magnitude in (0, max_step]."""
    if not movable:
        raise ValueError("no movable object: nothing is constrained to move")
    steps = []
    for _ in range(cfg.candidates_per_expansion):
        obj = movable[rng.randrange(len(movable))] if len(movable) > 1 else movable[0]
        angle = math.radians(rng.uniform(0.0, 360.0))
        magnitude = cfg.max_step * (1.0 - rng.random())  # uniform in (0, max]
        pos = state.pose(obj).position
        steps.append(MoveStep(obj, (pos[0] + magnitude * math.sin(angle),
                                    pos[1] + magnitude * math.cos(angle))))
    return steps


def apply_step(frame: Frame, step: StepPrimitive) -> Frame:
    poses = []
    for p in frame.poses:
        if p.object_id != step.object_id:
            poses.append(p)
        elif isinstance(step, MoveStep):
            poses.append(ObjectPose(p.object_id, step.target, p.yaw))
        else:
            poses.append(ObjectPose(p.object_id, p.position,
                                    p.yaw + step.delta_yaw))
    return Frame(frame.t + 1.0, tuple(poses))


# --------------------------------------------------------------------------
# search

@dataclass
class _Node:
    frames: list[Frame]
    steps: list[StepPrimitive]
    audit: list[dict]
    swept: float = 0.0

    def key(self) -> str:
        return ";".join(s.text() for s in self.steps)


def _check_scene(scene: Frame, cs: ConstraintSet, roles: RoleBinding,
                 qcfg: QuantizationConfig) -> None:
    for p in cs.initial:
        objs = _resolve(p, roles)
        if p.feature.kind in STATE_KINDS:
            value = _state_value(p, scene, objs, qcfg)
            if not compare(p.feature.kind, value, p.rhs_value, p.comparator):
                raise InitialStateViolation(
                    f"scene violates initial state: {serialize_pattern(p)}")
        # Transition-based initial states are enforced on the first step.
    for p in cs.during:
        if p.template is Template.CONSTANT and p.feature.kind in STATE_KINDS:
            objs = _resolve(p, roles)
            value = _state_value(p, scene, objs, qcfg)
            if not compare(p.feature.kind, value, p.rhs_value, p.comparator):
                raise InitialStateViolation(
                    f"scene violates initial state: {serialize_pattern(p)}")
    for p in (*cs.during, *cs.terminal):
        if p.feature.kind is FeatureKind.QTC_C3 and not p.feature.dynamic:
            a, b = _resolve(p, roles)
            pa, pb = scene.pose(a).position, scene.pose(b).position
            if pa == pb:
                raise ValueError(
                    f"QTC_C3 undefined: {a!r} and {b!r} coincide in the scene")


def _first_step_initial_ok(cs: ConstraintSet, prev: Frame, nxt: Frame,
                           roles: RoleBinding, qcfg: QuantizationConfig) -> bool:
    for p in cs.initial:
        if p.feature.kind in STATE_KINDS:
            continue
        objs = _resolve(p, roles)
        value = _transition_value(p, prev, nxt, objs, qcfg)
        if not compare(p.feature.kind, value, p.rhs_value, p.comparator):
            return False
    return True


def plan(scene: Frame, concept: ConceptRecord, roles: RoleBinding,
         cfg: SearchConfig) -> PlanTrace:
    """Search for a frame sequence performing the concept in the scene."""
    qcfg = concept.quantization
    cs = split_constraints(concept.confirmed)
    _check_scene(scene, cs, roles, qcfg)
    movable = movable_object_ids(cs.during, roles)
    if not movable:
        raise ValueError("no movable object: concept pins every role")
    sweep = _sweep_reference(cs, roles)
    rng = random.Random(cfg.rng_seed)
    during_texts = [serialize_pattern(p) for p in cs.during]

    def expand(node: _Node) -> list[_Node]:
        children = []
        prior = node.frames[-2] if len(node.frames) >= 2 else None
        for step in generate_candidate_steps(node.frames[-1], movable, cfg, rng):
            nxt = apply_step(node.frames[-1], step)
            if len(node.frames) == 1 and not _first_step_initial_ok(
                    cs, node.frames[-1], nxt, roles, qcfg):
                continue
            ok, _violated = check_transition(node.frames[-1], nxt, cs, roles,
                                             qcfg, prior)
            if not ok:
                continue
            swept = node.swept
            if sweep is not None:
                ps = nxt.pose(sweep[0]).position
                pr = nxt.pose(sweep[1]).position
                prev_ps = node.frames[-1].pose(sweep[0]).position
                prev_pr = node.frames[-1].pose(sweep[1]).position
                b_now = bearing_degrees(ps[0] - pr[0], ps[1] - pr[1])
                b_prev = bearing_degrees(prev_ps[0] - prev_pr[0],
                                         prev_ps[1] - prev_pr[1])
                swept += ((b_now - b_prev + 180.0) % 360.0) - 180.0
            children.append(_Node(
                frames=node.frames + [nxt],
                steps=node.steps + [step],
                audit=node.audit + [dict.fromkeys(during_texts, True)],
                swept=swept,
            ))
        return children

    def score(node: _Node) -> tuple:
        # Terminal patterns only earn credit once the progress guard is met;
        # otherwise a start/end equality that is trivially true of the
        # untouched scene pins greedy search to the start state.
        terminal_ok = 0
        guard_met = (sweep is None
                     or abs(node.swept) / 360.0 >= cfg.min_progress)
        if guard_met and cs.terminal and len(node.frames) >= 2:
            terminal_ok = sum(1 for p in cs.terminal
                              if terminal_holds(p, node.frames, roles, qcfg))
        return (terminal_ok, abs(node.swept), -len(node.steps))

    def _as_trace(node: _Node, expansions: int) -> PlanTrace:
        return PlanTrace(
            frames=tuple(node.frames),
            steps=tuple(node.steps),
            during_audit=tuple(node.audit),
            terminal_audit={},
            progress_revolutions=abs(node.swept) / 360.0,
            expansions=expansions,
        )

    def finish(node: _Node, expansions: int) -> PlanTrace:
        demo = _trace_demo(node.frames, roles)
        terminal_audit = {
            serialize_pattern(p): evaluate_pattern(p, demo, qcfg).fully_satisfied
            for p in cs.terminal
        }
        return PlanTrace(
            frames=tuple(node.frames),
            steps=tuple(node.steps),
            during_audit=tuple(node.audit),
            terminal_audit=terminal_audit,
            progress_revolutions=abs(node.swept) / 360.0,
            expansions=expansions,
        )

    root = _Node(frames=[scene], steps=[], audit=[])
    expansions = 0

    if cfg.strategy == "beam":
        beam = [root]
        while beam and expansions < cfg.max_expansions:
            children: list[_Node] = []
            for node in beam:
                if expansions >= cfg.max_expansions:
                    break
                expansions += 1
                children.extend(expand(node))
            children.sort(key=lambda n: (*_neg(score(n)), n.key()))
            for child in children:
                if termination_satisfied(_as_trace(child, expansions), cs, cfg,
                                         roles, qcfg):
                    return finish(child, expansions)
            beam = children[:cfg.beam_width]
        raise PlanNotFound(expansions,
                           "beam exhausted" if not beam else "budget exhausted")

    # best-first
    counter = 0
    heap: list[tuple] = []
    heapq.heappush(heap, ((*_neg(score(root)), root.key()), counter, root))
    while heap and expansions < cfg.max_expansions:
        _, _, node = heapq.heappop(heap)
        if node.steps and termination_satisfied(_as_trace(node, expansions), cs,
                                                cfg, roles, qcfg):
            return finish(node, expansions)
        expansions += 1
        for child in expand(node):
            counter += 1
            heapq.heappush(heap, ((*_neg(score(child)), child.key()),
                                  counter, child))
    raise PlanNotFound(expansions,
                       "frontier exhausted" if not heap else "budget exhausted")


def _neg(score: tuple) -> tuple:
    # sort() and heapq are ascending; flip the maximized components
    return (-score[0], -score[1], -score[2])


# --------------------------------------------------------------------------
# trace export

def trace_to_document(trace: PlanTrace, signature: ActionSignature,
                      roles: RoleBinding) -> dict:
    """Demonstration-format document plus step and audit sections.

    The result round-trips through load_demonstration, which accepts and
    ignores the extra keys.
    """
    steps = []
    for s in trace.steps:
        if isinstance(s, MoveStep):
            steps.append({"op": "move", "object": s.object_id,
                          "to": [s.target[0], s.target[1]]})
        else:
            steps.append({"op": "rotate", "object": s.object_id,
                          "delta_yaw": s.delta_yaw})
    return {
        "name": "reenactment",
        "signature": {
            "verb": signature.verb,
            "roles": list(signature.roles),
            "modifiers": list(signature.modifiers),
        },
        "roles": dict(roles.roles),
        "descriptors": dict(roles.descriptors),
        "source": "dense_stream",
        "frames": [
            {"t": fr.t,
             "objects": [{"id": p.object_id,
                          "pos": [p.position[0], p.position[1]],
                          "yaw": p.yaw} for p in fr.poses]}
            for fr in trace.frames
        ],
        "steps": steps,
        "audit": {
            "during": [dict(a) for a in trace.during_audit],
            "terminal": dict(trace.terminal_audit),
            "progress_revolutions": trace.progress_revolutions,
            "expansions": trace.expansions,
        },
    }


def write_trace(trace: PlanTrace, signature: ActionSignature,
                roles: RoleBinding, path) -> None:
    Path(path).write_text(
        json.dumps(trace_to_document(trace, signature, roles), indent=2) + "\n")
