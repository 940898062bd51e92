import math
import random

import pytest

from blockteach.concepts import ConceptRecord
from blockteach.features import FeatureKind, QuantizationConfig
from blockteach.patterns import evaluate_pattern, parse_pattern
from blockteach.reenact import (
    ConstraintSet,
    InitialStateViolation,
    MoveStep,
    PlanNotFound,
    PlanTrace,
    SearchConfig,
    check_transition,
    generate_candidate_steps,
    movable_object_ids,
    plan,
    split_constraints,
    termination_satisfied,
    trace_to_document,
)
from blockteach.scene import (
    ActionSignature,
    Demonstration,
    Frame,
    ObjectPose,
    RoleBinding,
    load_demonstration,
)

from helpers import MOVE_AROUND_PATTERNS

CFG = QuantizationConfig()

ROLES = RoleBinding({"A": "red", "B": "green"},
                    {"red": "the red block", "green": "the green block"})


def move_around_concept(extra=()):
    return ConceptRecord(
        signature=ActionSignature("move_around", ("A", "B")),
        confirmed=tuple(parse_pattern(t)
                        for t in (*MOVE_AROUND_PATTERNS, *extra)),
        quantization=CFG,
    )


def scene(a=(1.2, -0.7), b=(0.3, 0.4)):
    return Frame(0.0, (ObjectPose("red", a), ObjectPose("green", b)))


def circle_frames(n=24, radius=1.5, clockwise=True):
    frames = []
    for i in range(n):
        theta = math.radians((360.0 * i / (n - 1)) * (1 if clockwise else -1))
        frames.append(Frame(float(i), (
            ObjectPose("red", (radius * math.sin(theta),
                               radius * math.cos(theta))),
            ObjectPose("green", (0.0, 0.0)),
        )))
    return frames


def as_trace(frames, steps=None):
    steps = steps if steps is not None else tuple(
        MoveStep("red", f.pose("red").position) for f in frames[1:])
    return PlanTrace(frames=tuple(frames), steps=tuple(steps),
                     during_audit=tuple({} for _ in frames[1:]),
                     terminal_audit={}, progress_revolutions=0.0, expansions=0)


class TestSplit:
    def test_move_around_partition(self):
        cs = split_constraints(move_around_concept().confirmed)
        assert {p.text() for p in cs.during} == {
            "forall_t MV(A)[t] = 1", "forall_t MV(B)[t] = 0",
            "forall_t QTC_C3(A,B)[t] = QTC_C3(A,B)[t+1]"}
        assert {p.text() for p in cs.terminal} == {"CD(A,B)[0] = CD(A,B)[F]"}
        assert cs.initial == ()

    def test_initial_only(self):
        cs = split_constraints([parse_pattern("QDC(A,B)[0] = 1")])
        assert cs.during == () and cs.terminal == ()
        assert len(cs.initial) == 1

    def test_empty(self):
        cs = split_constraints([])
        assert cs == ConstraintSet((), (), ())


class TestCandidates:
    def test_count_and_bounds(self):
        cfg = SearchConfig(candidates_per_expansion=32)
        steps = generate_candidate_steps(scene(), ["red"], cfg,
                                         random.Random(1))
        assert len(steps) == 32
        origin = scene().pose("red").position
        for s in steps:
            assert math.dist(origin, s.target) <= cfg.max_step + 1e-12
            assert math.dist(origin, s.target) > 0

    def test_deterministic_for_same_seed(self):
        cfg = SearchConfig()
        a = generate_candidate_steps(scene(), ["red"], cfg, random.Random(7))
        b = generate_candidate_steps(scene(), ["red"], cfg, random.Random(7))
        assert a == b

    def test_pinned_object_never_moves(self):
        cs = split_constraints(move_around_concept().confirmed)
        movable = movable_object_ids(cs.during, ROLES)
        assert movable == ["red"]
        steps = generate_candidate_steps(scene(), movable, SearchConfig(),
                                         random.Random(3))
        assert all(s.object_id == "red" for s in steps)

    def test_no_movable_object_rejected(self):
        with pytest.raises(ValueError, match="movable"):
            generate_candidate_steps(scene(), [], SearchConfig(),
                                     random.Random(0))


class TestCheckTransition:
    def setup_method(self):
        self.cs = split_constraints(move_around_concept().confirmed)

    def test_radial_step_breaks_rotation_constancy(self):
        # prior transition was clockwise (-); a radially outward step (scaled
        # away from the reference at the origin, so the cross product is
        # exactly zero) evaluates to 0 and violates consecutive equality
        prior = Frame(0.0, (ObjectPose("red", (1.5, 0.0)),
                            ObjectPose("green", (0.0, 0.0))))
        prev = Frame(1.0, (ObjectPose("red", (1.45, -0.35)),
                           ObjectPose("green", (0.0, 0.0))))
        nxt = Frame(2.0, (ObjectPose("red", (1.45 * 1.1, -0.35 * 1.1)),
                          ObjectPose("green", (0.0, 0.0))))
        ok, violated = check_transition(prev, nxt, self.cs, ROLES, CFG, prior)
        assert not ok
        assert violated.feature.kind is FeatureKind.QTC_C3

    def test_tangential_step_keeps_constraints(self):
        frames = circle_frames()
        ok, violated = check_transition(frames[1], frames[2], self.cs, ROLES,
                                        CFG, prior=frames[0])
        assert ok and violated is None

    def test_empty_during_set_passes_vacuously(self):
        cs = ConstraintSet((), (), ())
        ok, violated = check_transition(scene(), scene((9, 9)), cs, ROLES, CFG)
        assert ok and violated is None

    def test_moving_the_pinned_block_fails(self):
        # red makes a legal step so the first violation is the pinned block
        prev = scene()
        moved_b = Frame(1.0, (ObjectPose("red", (1.3, -0.8)),
                              ObjectPose("green", (0.9, 0.4))))
        ok, violated = check_transition(prev, moved_b, self.cs, ROLES, CFG)
        assert not ok
        assert violated.text() == "forall_t MV(B)[t] = 0"


class TestTermination:
    def setup_method(self):
        self.cs = split_constraints(move_around_concept().confirmed)
        self.cfg = SearchConfig()

    def test_zero_step_trace_rejected(self):
        trace = as_trace([scene()], steps=())
        assert not termination_satisfied(trace, self.cs, self.cfg, ROLES, CFG)

    def test_full_circle_accepted(self):
        frames = circle_frames(24)
        # independent sweep oracle: accumulate bearing deltas
        total = 0.0
        for a, b in zip(frames, frames[1:]):
            pa, pb = a.pose("red").position, b.pose("red").position
            ba = math.degrees(math.atan2(pa[0], pa[1]))
            bb = math.degrees(math.atan2(pb[0], pb[1]))
            total += ((bb - ba + 180.0) % 360.0) - 180.0
        assert abs(total) == pytest.approx(360.0, abs=1e-6)
        assert termination_satisfied(as_trace(frames), self.cs, self.cfg,
                                     ROLES, CFG)

    def test_half_circle_rejected(self):
        frames = circle_frames(24)[:13]  # about half a revolution
        assert not termination_satisfied(as_trace(frames), self.cs, self.cfg,
                                         ROLES, CFG)

    def test_min_steps_guard(self):
        frames = circle_frames(6)  # full circle in 5 steps < min_steps
        assert not termination_satisfied(as_trace(frames), self.cs,
                                         SearchConfig(min_steps=8), ROLES, CFG)
        assert termination_satisfied(as_trace(frames), self.cs,
                                     SearchConfig(min_steps=5), ROLES, CFG)


class TestPlan:
    def test_self_consistent_trace(self):
        concept = move_around_concept()
        trace = plan(scene(), concept, ROLES, SearchConfig(rng_seed=7))
        demo = Demonstration("replay", concept.signature, trace.frames, ROLES)
        for p in concept.confirmed:
            report = evaluate_pattern(p, demo, CFG)
            assert report.fully_satisfied, p.text()
        assert trace.progress_revolutions >= 0.9
        assert len(trace.steps) >= 8

    def test_audit_fully_populated(self):
        concept = move_around_concept()
        trace = plan(scene(), concept, ROLES, SearchConfig(rng_seed=7))
        assert len(trace.during_audit) == len(trace.steps)
        during_texts = {p.text() for p in
                        split_constraints(concept.confirmed).during}
        for row in trace.during_audit:
            assert set(row) == during_texts
            assert all(row.values())
        assert trace.terminal_audit == {"CD(A,B)[0] = CD(A,B)[F]": True}

    def test_deterministic(self):
        concept = move_around_concept()
        t1 = plan(scene(), concept, ROLES, SearchConfig(rng_seed=7))
        t2 = plan(scene(), concept, ROLES, SearchConfig(rng_seed=7))
        assert trace_to_document(t1, concept.signature, ROLES) == \
            trace_to_document(t2, concept.signature, ROLES)

    def test_budget_respected(self):
        concept = move_around_concept()
        with pytest.raises(PlanNotFound) as exc:
            plan(scene(), concept, ROLES,
                 SearchConfig(rng_seed=7, max_expansions=1))
        assert exc.value.expansions <= 1

    def test_step_magnitudes_bounded(self):
        concept = move_around_concept()
        cfg = SearchConfig(rng_seed=3)
        trace = plan(scene(), concept, ROLES, cfg)
        for prev, nxt in zip(trace.frames, trace.frames[1:]):
            d = math.dist(prev.pose("red").position, nxt.pose("red").position)
            assert d <= cfg.max_step + 1e-12

    def test_best_first_also_solves(self):
        concept = move_around_concept()
        trace = plan(scene(), concept, ROLES,
                     SearchConfig(strategy="best_first", rng_seed=7))
        demo = Demonstration("replay", concept.signature, trace.frames, ROLES)
        for p in concept.confirmed:
            assert evaluate_pattern(p, demo, CFG).fully_satisfied

    def test_coincident_blocks_rejected(self):
        concept = move_around_concept()
        degenerate = Frame(0.0, (ObjectPose("red", (1.0, 1.0)),
                                 ObjectPose("green", (1.0, 1.0))))
        with pytest.raises(ValueError, match="coincide"):
            plan(degenerate, concept, ROLES, SearchConfig(rng_seed=7))

    def test_scene_violating_initial_state_rejected(self):
        concept = ConceptRecord(
            signature=ActionSignature("move_around", ("A", "B")),
            confirmed=(*move_around_concept().confirmed,
                       parse_pattern("QDC(A,B)[0] = 0")),
            quantization=CFG,
        )
        with pytest.raises(InitialStateViolation, match="initial state"):
            plan(scene((4.0, 0.0), (0.0, 0.0)), concept, ROLES,
                 SearchConfig(rng_seed=7))

    def test_qdc_band_constraint_keeps_distance(self):
        concept = move_around_concept(
            extra=("forall_t QDC(A,B)[t] = QDC(A,B)[t+1]",))
        trace = plan(scene(), concept, ROLES, SearchConfig(rng_seed=7))
        bands = set()
        for fr in trace.frames:
            d = math.dist(fr.pose("red").position, fr.pose("green").position)
            bands.add(sum(d >= t for t in CFG.qdc_thresholds))
        assert len(bands) == 1

    def test_trace_document_loads_as_demonstration(self, tmp_path):
        concept = move_around_concept()
        trace = plan(scene(), concept, ROLES, SearchConfig(rng_seed=7))
        doc = trace_to_document(trace, concept.signature, ROLES)
        path = tmp_path / "trace.json"
        import json
        path.write_text(json.dumps(doc))
        demo = load_demonstration(path, strict=True)
        assert demo.n_frames == len(trace.frames)
