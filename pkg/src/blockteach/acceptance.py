"""End-to-end acceptance checks, runnable via ``blockteach eval``.

Each check verifies one headline behaviour of the pipeline against an
oracle computed here with nothing but local arithmetic (distances, cross
products, compass sectors recomputed from scratch), so a regression in the
library cannot hide behind itself.  Checks with a time budget fail when
they exceed it.
"""

from __future__ import annotations

import math
import random
import time

from .concepts import ConceptRecord, relate_concepts
from .dialogue import IMPLIED_TRUE, apply_answer, build_queue, next_question, render_question
from .features import (
    COMPASS,
    DOMAINS,
    FeatureFunction,
    FeatureKind,
    QuantizationConfig,
    eval_cd,
    eval_mv,
    eval_qdc,
    eval_qtc_c1,
    eval_qtc_c3,
)
from .mining import BiasModel, MinerConfig, confidence_score, mine
from .patterns import (
    Comparator,
    Pattern,
    Template,
    compare,
    entails,
    parse_pattern,
    satisfying_set,
    serialize_pattern,
)
from .reenact import SearchConfig, plan, trace_to_document
from .scene import (
    ActionSignature,
    Frame,
    ObjectPose,
    RoleBinding,
    demonstration_to_document,
    generate_synthetic,
)
from .service import LEARNED, ServiceContext, handle_message, replay_transcript

MOVE_AROUND = (
    "forall_t MV(A)[t] = 1",
    "forall_t MV(B)[t] = 0",
    "forall_t QTC_C3(A,B)[t] = QTC_C3(A,B)[t+1]",
    "CD(A,B)[0] = CD(A,B)[F]",
)

SCENARIO_QUESTIONS = (
    ("forall_t MV(B)[t] = 0", "Is the green block always stationary?"),
    ("forall_t MV(A)[t] = 1", "Is the red block always moving?"),
    ("forall_t QDC(A,B)[t] = QDC(A,B)[t+1]",
     "Is the red block always about the same distance from the green block?"),
    ("forall_t QTC_C3(A,B)[t] = QTC_C3(A,B)[t+1]",
     "Does the red block always move in the same direction relative to "
     "the green block?"),
)


class CheckFailure(AssertionError):
    pass


def _require(cond, message):
    if not cond:
        raise CheckFailure(message)


# ---------------------------------------------------------------------------
# local-arithmetic oracles

def _dist(a, b):
    return math.hypot(b[0] - a[0], b[1] - a[1])


def _sector_index(dx, dy):
    bearing = math.degrees(math.atan2(dx, dy))
    return int(math.floor((bearing + 22.5) / 45.0)) % 8


def _cross_about(reference, point, displacement):
    rx, ry = point[0] - reference[0], point[1] - reference[1]
    return rx * displacement[1] - ry * displacement[0]


def _scan_move_around(demo, qcfg):
    """Frame-by-frame re-derivation of the four expected regularities."""
    a = demo.roles.object_for("A")
    b = demo.roles.object_for("B")
    rotation_signs = set()
    for prev, nxt in zip(demo.frames, demo.frames[1:]):
        pa, qa = prev.pose(a).position, nxt.pose(a).position
        pb, qb = prev.pose(b).position, nxt.pose(b).position
        _require(_dist(pa, qa) > qcfg.motion_threshold,
                 "mover paused during the orbit")
        _require(_dist(pb, qb) <= qcfg.motion_threshold,
                 "reference block moved")
        cross = _cross_about(pb, pa, (qa[0] - pa[0], qa[1] - pa[1]))
        limit = qcfg.qtc_deadband * _dist(pa, pb)
        _require(abs(cross) > limit, "rotation fell inside the deadband")
        rotation_signs.add(cross > 0)
    _require(len(rotation_signs) == 1, "rotation changed direction")
    first, last = demo.frames[0], demo.frames[-1]
    s0 = _sector_index(first.pose(a).position[0] - first.pose(b).position[0],
                       first.pose(a).position[1] - first.pose(b).position[1])
    s1 = _sector_index(last.pose(a).position[0] - last.pose(b).position[0],
                       last.pose(a).position[1] - last.pose(b).position[1])
    _require(s0 == s1, "orbit did not close its compass sector")


# ---------------------------------------------------------------------------
# checks

def check_confidence_golden_values():
    """Confidence formula reproduces the worked distance-band scores."""
    bias = BiasModel()
    q_eq0 = confidence_score(parse_pattern("QDC(A,B)[0] = 0"), 0.8, bias)
    q_le1 = confidence_score(parse_pattern("QDC(A,B)[0] <= 1"), 1.0, bias)
    _require(abs(q_eq0 - 0.8) <= 1e-12, f"q(=0) = {q_eq0}, expected 0.8")
    _require(abs(q_le1 - 0.75) <= 1e-12, f"q(<=1) = {q_le1}, expected 0.75")
    q_eq0_even = confidence_score(parse_pattern("QDC(A,B)[0] = 0"), 0.5, bias)
    _require(abs(q_eq0_even - 0.5) <= 1e-12, "even split q(=0) != 0.5")
    _require(q_le1 > q_eq0_even, "even split must favour the weaker pattern")
    return "0.8 / 0.75 exact; even split ranks <=1 first"


def check_move_around_mining():
    """Orbit demonstration mines the four expected patterns at support 1."""
    qcfg = QuantizationConfig()
    demo = generate_synthetic("circle_around", {"radius": 2, "frames": 64},
                              seed=7)
    _scan_move_around(demo, qcfg)
    mined = mine([demo], MinerConfig(confidence_threshold=0.1), qcfg)
    by_text = {serialize_pattern(m.pattern): m for m in mined}
    for want in MOVE_AROUND:
        _require(want in by_text, f"queue is missing {want}")
        _require(by_text[want].probability == 1.0,
                 f"{want} has probability {by_text[want].probability}")
    return f"all 4 patterns present among {len(mined)} mined"


def check_row_building_mining():
    """Row demonstration mines the dynamic-binding relations."""
    qcfg = QuantizationConfig()
    demo = generate_synthetic("build_row", {"blocks": 3, "spacing": 1.5},
                              seed=3)
    mined = mine([demo], MinerConfig(confidence_threshold=0.1), qcfg)
    texts = {serialize_pattern(m.pattern) for m in mined}
    for want in ("forall_t QDC(L,C)[t] = QDC(L,C)[t+1]",
                 "forall_t CD(L,C)[t] = CD(L,C)[t+1]"):
        _require(want in texts, f"queue is missing {want}")
    return f"both dynamic relations present among {len(mined)} mined"


def check_dialogue_pruning_and_rendering():
    """Confirming the specific direction pattern silences the generic one;
    the four scenario questions render byte-identically."""
    qcfg = QuantizationConfig()
    demo = generate_synthetic("translate_east", {}, seed=5)
    mined = mine([demo], MinerConfig(confidence_threshold=0.1,
                                     kinds=(FeatureKind.MV_DIR,)), qcfg)
    session = build_queue(mined, demo.roles, signature=demo.signature)
    target = "forall_t MV_DIR(X)[t] = E"
    generic = "forall_t MV_DIR(X)[t] = MV_DIR(X)[t+1]"
    asked = []
    q = next_question(session)
    while q is not None:
        asked.append(q.pattern.text())
        apply_answer(session, q.id, "yes" if q.pattern.text() == target else "no")
        q = next_question(session)
    _require(target in asked, "specific direction pattern never asked")
    _require(generic not in asked, "generic pattern was asked despite pruning")
    generic_q = next(x for x in session.queue
                     if x.pattern.text() == generic)
    _require(generic_q.status == IMPLIED_TRUE,
             f"generic pattern status {generic_q.status}")

    roles = RoleBinding(
        {"A": "block_red", "B": "block_green"},
        {"block_red": "the red block", "block_green": "the green block"})
    for text, expected in SCENARIO_QUESTIONS:
        got = render_question(parse_pattern(text), roles)
        _require(got == expected, f"rendered {got!r}, expected {expected!r}")
    return "pruning correct; 4 scenario questions byte-identical"


def check_entailment_oracle_equivalence():
    """Entailment matches value-wise implication; preorder laws hold."""
    f = FeatureFunction(FeatureKind.QDC, ("A", "B"))
    patterns = []
    for template in (Template.INITIAL, Template.FINAL, Template.CONSTANT):
        for cmp in Comparator:
            for value in DOMAINS[FeatureKind.QDC]:
                p = Pattern(template, f, cmp, rhs_value=value)
                if satisfying_set(p):
                    patterns.append(p)
    for template in (Template.CONSECUTIVE, Template.START_END):
        for cmp in (Comparator.EQ, Comparator.NE):
            patterns.append(Pattern(template, f, cmp))

    pairs = 0
    for p1 in patterns:
        for p2 in patterns:
            if (p1.is_constant and p2.is_constant
                    and p1.template is p2.template):
                brute = all(compare(FeatureKind.QDC, v, p2.rhs_value,
                                    p2.comparator)
                            for v in satisfying_set(p1))
                _require(entails(p1, p2) == brute,
                         f"oracle mismatch: {p1.text()} vs {p2.text()}")
                pairs += 1
    _require(pairs >= 500, f"only {pairs} pairs checked")

    n = len(patterns)
    matrix = [[entails(a, b) for b in patterns] for a in patterns]
    for i in range(n):
        _require(matrix[i][i], f"not reflexive: {patterns[i].text()}")
    for i in range(n):
        for j in range(n):
            if matrix[i][j]:
                for k in range(n):
                    if matrix[j][k]:
                        _require(matrix[i][k],
                                 "transitivity broken: "
                                 f"{patterns[i].text()} -> {patterns[j].text()}"
                                 f" -> {patterns[k].text()}")
    return f"{pairs} value-wise pairs agree; preorder laws hold over {n}"


def check_reenactment_self_consistency():
    """A planned orbit satisfies every constraint under re-derivation."""
    qcfg = QuantizationConfig()
    concept = ConceptRecord(
        signature=ActionSignature("move_around", ("A", "B")),
        confirmed=tuple(parse_pattern(t) for t in MOVE_AROUND),
        quantization=qcfg,
    )
    scene = Frame(0.0, (ObjectPose("block_red", (1.2, -0.7)),
                        ObjectPose("block_green", (0.3, 0.4))))
    roles = RoleBinding({"A": "block_red", "B": "block_green"})
    cfg = SearchConfig(rng_seed=7)
    trace = plan(scene, concept, roles, cfg)

    # independent re-derivation with local arithmetic
    a, b = "block_red", "block_green"
    signs = set()
    swept = 0.0
    prev_bearing = None
    for fr in trace.frames:
        pa, pb = fr.pose(a).position, fr.pose(b).position
        bearing = math.degrees(math.atan2(pa[0] - pb[0], pa[1] - pb[1]))
        if prev_bearing is not None:
            swept += ((bearing - prev_bearing + 180.0) % 360.0) - 180.0
        prev_bearing = bearing
    for prev, nxt in zip(trace.frames, trace.frames[1:]):
        pa, qa = prev.pose(a).position, nxt.pose(a).position
        pb, qb = prev.pose(b).position, nxt.pose(b).position
        _require(_dist(pa, qa) > qcfg.motion_threshold, "mover paused")
        _require(_dist(pb, qb) <= qcfg.motion_threshold, "pinned block moved")
        cross = _cross_about(pb, pa, (qa[0] - pa[0], qa[1] - pa[1]))
        _require(abs(cross) > qcfg.qtc_deadband * _dist(pa, pb),
                 "rotation fell in the deadband")
        signs.add(cross > 0)
    _require(len(signs) == 1, "rotation direction changed mid-plan")
    first, last = trace.frames[0], trace.frames[-1]
    s0 = _sector_index(first.pose(a).position[0] - first.pose(b).position[0],
                       first.pose(a).position[1] - first.pose(b).position[1])
    s1 = _sector_index(last.pose(a).position[0] - last.pose(b).position[0],
                       last.pose(a).position[1] - last.pose(b).position[1])
    _require(s0 == s1, "start and end compass sectors differ")
    _require(abs(swept) / 360.0 >= 0.9,
             f"swept only {abs(swept) / 360.0:.3f} revolutions")

    again = plan(scene, concept, roles, cfg)
    _require(trace_to_document(trace, concept.signature, roles)
             == trace_to_document(again, concept.signature, roles),
             "identical seeds produced different traces")
    return (f"{len(trace.steps)} steps, {abs(swept) / 360.0:.2f} revolutions, "
            "re-derived constraints hold, deterministic")


def check_feature_calculus_properties():
    """Randomized feature-calculus properties, 1000 cases each."""
    qcfg = QuantizationConfig()
    rng = random.Random(20240)

    def grid(lo=-4096, hi=4096):
        return rng.randrange(lo, hi) / 256.0

    def gp():
        return (grid(), grid())

    # totality: every finite pair lands in exactly one of the nine values
    for _ in range(1000):
        value = eval_cd(ObjectPose("a", gp()), ObjectPose("b", gp()), qcfg)
        _require(value in DOMAINS[FeatureKind.CD], f"CD produced {value!r}")

    # rotation covariance: a clockwise quarter turn advances the compass
    for _ in range(1000):
        a, b = gp(), gp()
        before = eval_cd(ObjectPose("a", a), ObjectPose("b", b), qcfg)
        after = eval_cd(ObjectPose("a", (a[1], -a[0])),
                        ObjectPose("b", (b[1], -b[0])), qcfg)
        if before == "EQ":
            _require(after == "EQ", "EQ not preserved by rotation")
        else:
            want = COMPASS[(COMPASS.index(before) + 2) % 8]
            _require(after == want, f"{before} rotated to {after}, not {want}")

    # translation invariance of binary features (grid keeps sums exact)
    for _ in range(1000):
        a, b, a2, b2, shift = gp(), gp(), gp(), gp(), gp()
        if a == b:
            continue

        def mv(p):
            return (p[0] + shift[0], p[1] + shift[1])

        f0 = Frame(0.0, (ObjectPose("k", a), ObjectPose("l", b)))
        f1 = Frame(1.0, (ObjectPose("k", a2), ObjectPose("l", b2)))
        g0 = Frame(0.0, (ObjectPose("k", mv(a)), ObjectPose("l", mv(b))))
        g1 = Frame(1.0, (ObjectPose("k", mv(a2)), ObjectPose("l", mv(b2))))
        _require(eval_cd(f0.pose("k"), f0.pose("l"), qcfg)
                 == eval_cd(g0.pose("k"), g0.pose("l"), qcfg), "CD shifted")
        _require(eval_qdc(f0.pose("k"), f0.pose("l"), qcfg)
                 == eval_qdc(g0.pose("k"), g0.pose("l"), qcfg), "QDC shifted")
        _require(eval_qtc_c1("k", "l", f0, f1, qcfg)
                 == eval_qtc_c1("k", "l", g0, g1, qcfg), "QTC_C1 shifted")
        _require(eval_qtc_c3("k", "l", f0, f1, qcfg)
                 == eval_qtc_c3("k", "l", g0, g1, qcfg), "QTC_C3 shifted")

    # scale coherence: scaling lengths and config together changes nothing
    for _ in range(1000):
        a, b, a2 = gp(), gp(), gp()
        if a == b:
            continue
        s = 2.0 ** rng.randrange(-3, 4)
        scaled = qcfg.scaled(s)

        def mul(p):
            return (p[0] * s, p[1] * s)

        f0 = Frame(0.0, (ObjectPose("k", a), ObjectPose("l", b)))
        f1 = Frame(1.0, (ObjectPose("k", a2), ObjectPose("l", b)))
        g0 = Frame(0.0, (ObjectPose("k", mul(a)), ObjectPose("l", mul(b))))
        g1 = Frame(1.0, (ObjectPose("k", mul(a2)), ObjectPose("l", mul(b))))
        _require(eval_qdc(f0.pose("k"), f0.pose("l"), qcfg)
                 == eval_qdc(g0.pose("k"), g0.pose("l"), scaled), "QDC rescaled")
        _require(eval_mv("k", f0, f1, qcfg)
                 == eval_mv("k", g0, g1, scaled), "MV rescaled")
        _require(eval_qtc_c3("k", "l", f0, f1, qcfg)
                 == eval_qtc_c3("k", "l", g0, g1, scaled), "QTC_C3 rescaled")

    # boundary rules: exact thresholds stay on the documented side
    for _ in range(1000):
        axis = rng.choice(((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)))
        i = rng.randrange(3)
        t = qcfg.qdc_thresholds[i]
        p = (axis[0] * t, axis[1] * t)
        band = eval_qdc(ObjectPose("a", (0.0, 0.0)), ObjectPose("b", p), qcfg)
        _require(band == str(i + 1),
                 f"distance exactly {t} fell in band {band}")
        f0 = Frame(0.0, (ObjectPose("k", (0.0, 0.0)),))
        f1 = Frame(1.0, (ObjectPose("k", (axis[0] * qcfg.motion_threshold,
                                          axis[1] * qcfg.motion_threshold)),))
        _require(eval_mv("k", f0, f1, qcfg) == "0",
                 "exact-threshold displacement counted as motion")
    return "totality, rotation, translation, scale, boundaries x1000"


def check_concept_hierarchy():
    """The clockwise variant is detected as a subclass."""
    qcfg = QuantizationConfig()
    general = ConceptRecord(
        signature=ActionSignature("move_around", ("A", "B")),
        confirmed=tuple(parse_pattern(t) for t in MOVE_AROUND),
        quantization=qcfg,
    )
    specific = ConceptRecord(
        signature=ActionSignature("move_around", ("A", "B"), ("clockwise",)),
        confirmed=tuple(parse_pattern(t) for t in
                        (*MOVE_AROUND, "forall_t QTC_C3(A,B)[t] = -")),
        quantization=qcfg,
    )
    relation = relate_concepts(general, specific)
    _require(relation is not None, "subclass relation not detected")
    _require(relate_concepts(specific, general) is None,
             "reverse relation should not hold")
    return f"{relation.specific} is a subclass of {relation.general}"


def golden_session_script(demo=None, confirm=MOVE_AROUND):
    """Client message log of the scripted teaching session.

    Recorded by driving the handler once with a fixed answer policy (yes
    exactly for the target patterns); the log replays standalone.
    """
    demo = demo or generate_synthetic("circle_around",
                                      {"radius": 2, "frames": 64}, seed=7)
    doc = demonstration_to_document(demo)
    confirm = set(confirm)
    ctx = ServiceContext()
    script = []
    state = None
    seq = 0

    def send(msg):
        nonlocal state, seq
        seq += 1
        msg = {"proto": 1, "seq": seq, **msg}
        if state is not None:
            msg["session"] = state.session_id
        script.append(msg)
        new_state, replies = handle_message(state, msg, ctx)
        state = new_state
        for r in replies:
            if r["type"] == "error":
                raise CheckFailure(f"script construction hit {r}")
        return replies

    send({"type": "create_session"})
    send({"type": "begin_demo", "name": doc["name"],
          "signature": doc["signature"], "roles": doc["roles"],
          "descriptors": doc["descriptors"], "source": "dense_stream"})
    for fr in doc["frames"]:
        send({"type": "demo_frame", "t": fr["t"], "objects": fr["objects"]})
    send({"type": "end_demo"})
    replies = send({"type": "start_mining",
                    "miner": {"threshold": 0.1,
                              "kinds": ["MV", "QTC_C3", "CD"],
                              "pairs": [["A", "B"]],
                              "dynamic": False}})
    while replies and replies[-1]["type"] == "question":
        q = replies[-1]
        answer = "yes" if q["pattern"] in confirm else "no"
        replies = send({"type": "answer", "id": q["id"], "answer": answer})
    if replies[-1]["type"] != "concept_learned":
        raise CheckFailure("scripted session did not finish learning")
    return script


def check_golden_session_replay():
    """Replaying the scripted session learns exactly the orbit concept."""
    script = golden_session_script()
    final = replay_transcript(script)
    _require(final.phase == LEARNED, f"ended in phase {final.phase}")
    confirmed = {serialize_pattern(p) for p in final.concept.confirmed}
    _require(confirmed == set(MOVE_AROUND),
             f"confirmed set was {sorted(confirmed)}")
    again = replay_transcript(script)
    _require(again.concept.to_document() == final.concept.to_document(),
             "replay was not deterministic")
    return f"{len(script)} messages -> learned, exactly the 4 patterns"


#: (name, check, time budget in seconds or None)
CHECKS = (
    ("confidence-golden-values", check_confidence_golden_values, 1.0),
    ("move-around-mining", check_move_around_mining, 5.0),
    ("row-building-mining", check_row_building_mining, 5.0),
    ("dialogue-pruning-and-rendering", check_dialogue_pruning_and_rendering,
     None),
    ("entailment-oracle-equivalence", check_entailment_oracle_equivalence,
     1.0),
    ("reenactment-self-consistency", check_reenactment_self_consistency,
     10.0),
    ("feature-calculus-properties", check_feature_calculus_properties, 30.0),
    ("concept-hierarchy", check_concept_hierarchy, None),
    ("golden-session-replay", check_golden_session_replay, None),
)


def run_check(name):
    for check_name, fn, budget in CHECKS:
        if check_name == name:
            start = time.perf_counter()
            detail = fn()
            elapsed = time.perf_counter() - start
            if budget is not None and elapsed > budget:
                raise CheckFailure(
                    f"{name} took {elapsed:.2f}s, budget {budget:.0f}s")
            return detail, elapsed
    raise KeyError(name)


def run_all() -> bool:
    ok = True
    for name, _fn, _budget in CHECKS:
        try:
            detail, elapsed = run_check(name)
            print(f"PASS {name} ({elapsed:.2f}s): {detail}")
        except CheckFailure as exc:
            ok = False
            print(f"FAIL {name}: {exc}")
    return ok
