"""Session protocol: the teach-and-reenact loop as a pure message handler.

Clients drive a session through newline-delimited JSON messages (or the same
messages over WebSocket); ``handle_message`` is the whole behaviour — the
transport shells in :mod:`blockteach.server` only frame bytes.  Messages
carry a session id (except create_session) and gapless per-direction
sequence numbers.  Phase order: recording -> mining (transient, completes
inside start_mining) -> teaching -> learned -> reenacting; a learned session
may record more demonstrations and mine again.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from . import dialogue
from .concepts import (
    ConceptRecord,
    ConceptStore,
    ConceptStoreError,
    transcript_digest,
)
from .features import FeatureKind, QuantizationConfig
from .mining import MinerConfig, mine
from .reenact import (
    InitialStateViolation,
    PlanNotFound,
    SearchConfig,
    plan,
    trace_to_document,
)
from .scene import (
    ActionSignature,
    Demonstration,
    DemonstrationFormatError,
    Frame,
    ObjectPose,
    RoleBinding,
    parse_demonstration,
)

PROTO_VERSION = 1

RECORDING = "recording"
MINING = "mining"
TEACHING = "teaching"
LEARNED = "learned"
REENACTING = "reenacting"

CLIENT_TYPES = frozenset({
    "create_session", "begin_demo", "demo_frame", "end_demo", "start_mining",
    "answer", "reenact_request", "save_concept", "load_concept",
})


class ProtocolError(Exception):
    def __init__(self, rule: str, detail: str = ""):
        super().__init__(detail or rule)
        self.rule = rule
        self.detail = detail or rule


@dataclass
class DemoBuffer:
    name: str
    signature: ActionSignature
    roles: Mapping[str, str]
    descriptors: Mapping[str, str]
    source: str
    frames: list[dict] = field(default_factory=list)


@dataclass
class SessionState:
    session_id: str
    phase: str = RECORDING
    next_client_seq: int = 2  # create_session consumed seq 1
    next_server_seq: int = 1
    buffer: DemoBuffer | None = None
    demos: list[Demonstration] = field(default_factory=list)
    teaching: dialogue.TeachingSession | None = None
    concept: ConceptRecord | None = None
    last_trace_doc: dict | None = None
    quantization: QuantizationConfig = field(default_factory=QuantizationConfig)
    throttle_ms: int = 0


def _fixed_clock() -> str:
    return "1970-01-01T00:00:00Z"


@dataclass
class ServiceContext:
    """Shared resources for a handler: the concept store and a clock."""

    store: ConceptStore | None = None
    clock: Callable[[], str] = _fixed_clock
    _session_counter: int = 0

    def new_session_id(self) -> str:
        self._session_counter += 1
        return f"s{self._session_counter:03d}"


def _reply(state: SessionState, msg_type: str, **payload) -> dict:
    out = {"proto": PROTO_VERSION, "type": msg_type,
           "session": state.session_id, "seq": state.next_server_seq}
    state.next_server_seq += 1
    out.update(payload)
    return out


def _error(state: SessionState, rule: str, detail: str) -> dict:
    return _reply(state, "error", rule=rule, detail=detail)


def _queue_snapshot(teaching: dialogue.TeachingSession) -> list[dict]:
    return [{"id": q.id, "text": q.text, "status": q.status}
            for q in teaching.queue]


def _question_reply(state: SessionState, ctx: "ServiceContext") -> dict:
    q = dialogue.next_question(state.teaching)
    if q is not None:
        remaining = len(state.teaching.pending())
        return _reply(state, "question", id=q.id, text=q.text,
                      pattern=q.pattern.text(), remaining=remaining,
                      queue=_queue_snapshot(state.teaching))
    record = ConceptRecord(
        signature=state.teaching.signature,
        confirmed=tuple(state.teaching.confirmed),
        quantization=state.quantization,
        demo_names=tuple(d.name for d in state.demos),
        answer_digest=transcript_digest(state.teaching.transcript),
        created_at=ctx.clock(),
    )
    state.concept = record
    state.phase = LEARNED
    return _reply(state, "concept_learned", concept=record.to_document(),
                  queue=_queue_snapshot(state.teaching))


def _parse_miner_config(payload: Mapping) -> MinerConfig:
    kwargs = {}
    if "threshold" in payload:
        kwargs["confidence_threshold"] = float(payload["threshold"])
    if "kinds" in payload:
        kwargs["kinds"] = tuple(FeatureKind(k) for k in payload["kinds"])
    if "pairs" in payload:
        kwargs["pairs"] = tuple((a, b) for a, b in payload["pairs"])
    if "unary" in payload:
        kwargs["unary_roles"] = bool(payload["unary"])
    if "dynamic" in payload:
        kwargs["dynamic_pair"] = bool(payload["dynamic"])
    return MinerConfig(**kwargs)


def _parse_search_config(payload: Mapping) -> SearchConfig:
    allowed = {"strategy", "beam_width", "candidates_per_expansion", "max_step",
               "max_expansions", "rng_seed", "min_progress", "min_steps"}
    unknown = set(payload) - allowed
    if unknown:
        raise ProtocolError("malformed payload",
                            f"unknown search config keys {sorted(unknown)}")
    return SearchConfig(**payload)


def handle_message(state: SessionState | None, msg: Mapping,
                   ctx: ServiceContext | None = None,
                   ) -> tuple[SessionState, list[dict]]:
    """Advance one session by one client message.

    Returns the (possibly new) state and the server messages to emit.
    Protocol violations produce an error message and leave the domain state
    untouched (only the server sequence counter advances).
    """
    ctx = ctx or ServiceContext()
    msg_type = msg.get("type")

    if state is None:
        if msg_type != "create_session":
            bootstrap = SessionState(session_id="")
            return bootstrap, [_error(bootstrap, "no create_session",
                                      "first message must be create_session")]
        if msg.get("seq") != 1:
            bootstrap = SessionState(session_id="")
            return bootstrap, [_error(bootstrap, "sequence gap",
                                      "create_session must carry seq 1")]
        state = SessionState(session_id=ctx.new_session_id())
        return state, [_reply(state, "session_created",
                              phase=state.phase)]

    try:
        _validate_envelope(state, msg)
        handler = _HANDLERS.get(msg_type)
        if handler is None:
            raise ProtocolError("unknown type", f"unknown message type {msg_type!r}")
        state.next_client_seq += 1
        return handler(state, msg, ctx)
    except ProtocolError as exc:
        return state, [_error(state, exc.rule, exc.detail)]


def _validate_envelope(state: SessionState, msg: Mapping) -> None:
    if msg.get("type") == "create_session":
        raise ProtocolError("session exists",
                            "create_session on an existing session")
    if msg.get("session") != state.session_id:
        raise ProtocolError("wrong session",
                            f"message for session {msg.get('session')!r}")
    if msg.get("seq") != state.next_client_seq:
        raise ProtocolError(
            "sequence gap",
            f"expected seq {state.next_client_seq}, got {msg.get('seq')}")


def _require_phase(state: SessionState, allowed: Sequence[str],
                   rule: str) -> None:
    if state.phase not in allowed:
        raise ProtocolError(rule, f"not allowed in phase {state.phase!r}")


def _handle_begin_demo(state, msg, ctx):
    _require_phase(state, (RECORDING, LEARNED), "not recording")
    sig = msg.get("signature") or {}
    try:
        signature = ActionSignature(sig.get("verb", ""),
                                    tuple(sig.get("roles", ())),
                                    tuple(sig.get("modifiers", ())))
    except ValueError as exc:
        raise ProtocolError("malformed payload", str(exc)) from None
    state.buffer = DemoBuffer(
        name=msg.get("name", f"demo{len(state.demos) + 1}"),
        signature=signature,
        roles=msg.get("roles", {}),
        descriptors=msg.get("descriptors", {}),
        source=msg.get("source", "dense_stream"),
    )
    state.phase = RECORDING
    return state, []


def _handle_demo_frame(state, msg, ctx):
    if state.phase != RECORDING or state.buffer is None:
        raise ProtocolError("not recording", "demo_frame outside recording")
    frame = {"t": msg.get("t"), "objects": msg.get("objects", [])}
    if frame["t"] is None:
        raise ProtocolError("malformed payload", "demo_frame needs t")
    state.buffer.frames.append(frame)
    return state, []


def _handle_end_demo(state, msg, ctx):
    if state.phase != RECORDING or state.buffer is None:
        raise ProtocolError("not recording", "end_demo outside recording")
    buf = state.buffer
    doc = {
        "name": buf.name,
        "signature": {"verb": buf.signature.verb,
                      "roles": list(buf.signature.roles),
                      "modifiers": list(buf.signature.modifiers)},
        "roles": dict(buf.roles),
        "descriptors": dict(buf.descriptors),
        "source": buf.source,
        "frames": buf.frames,
    }
    try:
        demo = parse_demonstration(doc, keyframe_dt=float(msg.get("dt", 0.25)))
    except (DemonstrationFormatError, ValueError) as exc:
        raise ProtocolError("invalid demonstration", str(exc)) from None
    state.demos.append(demo)
    state.buffer = None
    return state, []


def _handle_start_mining(state, msg, ctx):
    _require_phase(state, (RECORDING, LEARNED), "cannot mine")
    if not state.demos:
        raise ProtocolError("no demonstrations", "record a demonstration first")
    try:
        miner_cfg = _parse_miner_config(msg.get("miner", {}))
        if "quantization" in msg:
            state.quantization = QuantizationConfig.from_document(
                msg["quantization"])
    except (ValueError, KeyError) as exc:
        raise ProtocolError("malformed payload", str(exc)) from None
    state.phase = MINING
    mined = mine(state.demos, miner_cfg, state.quantization)
    state.teaching = dialogue.build_queue(
        mined, state.demos[-1].roles,
        signature=state.demos[-1].signature, demos=state.demos)
    state.phase = TEACHING
    replies = []
    if not mined:
        replies.append(_reply(state, "warning", detail="nothing to confirm"))
    replies.append(_question_reply(state, ctx))
    return state, replies


def _handle_answer(state, msg, ctx):
    _require_phase(state, (TEACHING,), "not teaching")
    try:
        dialogue.apply_answer(state.teaching, msg.get("id", ""),
                              msg.get("answer", ""))
    except (KeyError, ValueError) as exc:
        raise ProtocolError("bad answer", str(exc)) from None
    return state, [_question_reply(state, ctx)]


def _scene_frame(payload: Mapping) -> Frame:
    poses = []
    for odoc in payload.get("objects", ()):
        pos = odoc.get("pos", ())
        if len(pos) != 2:
            raise ProtocolError("malformed payload", "scene pos needs 2 components")
        poses.append(ObjectPose(odoc.get("id", ""), (pos[0], pos[1]),
                                odoc.get("yaw", 0.0)))
    if not poses:
        raise ProtocolError("malformed payload", "scene has no objects")
    return Frame(0.0, tuple(poses))


def _handle_reenact_request(state, msg, ctx):
    if state.concept is None:
        raise ProtocolError("no concept", "teach or load a concept first")
    _require_phase(state, (LEARNED, REENACTING), "no concept")
    scene = _scene_frame(msg.get("scene", {}))
    roles = RoleBinding(msg.get("roles", {}), msg.get("descriptors", {}))
    try:
        cfg = _parse_search_config(msg.get("config", {}))
        state.throttle_ms = int(msg.get("throttle_ms", 0))
        trace = plan(scene, state.concept, roles, cfg)
    except PlanNotFound as exc:
        raise ProtocolError("plan not found", str(exc)) from None
    except (InitialStateViolation, ValueError, KeyError) as exc:
        raise ProtocolError("invalid reenactment", str(exc)) from None
    state.phase = REENACTING
    doc = trace_to_document(trace, state.concept.signature, roles)
    replies = []
    for i, frame_doc in enumerate(doc["frames"]):
        audit = doc["audit"]["during"][i - 1] if i > 0 else {}
        replies.append(_reply(state, "plan_frame", index=i, frame=frame_doc,
                              audit=audit))
    replies.append(_reply(state, "plan_done",
                          steps=len(doc["steps"]),
                          audit=doc["audit"],
                          trace=doc))
    state.last_trace_doc = doc
    return state, replies


def _handle_save_concept(state, msg, ctx):
    if state.concept is None:
        raise ProtocolError("no concept", "nothing learned yet")
    if ctx.store is None:
        raise ProtocolError("no store", "server has no concept store configured")
    try:
        cid = ctx.store.save_concept(state.concept,
                                     overwrite=bool(msg.get("overwrite", False)))
    except ConceptStoreError as exc:
        raise ProtocolError("store error", str(exc)) from None
    return state, [_reply(state, "concept_learned", id=cid, saved=True,
                          concept=state.concept.to_document())]


def _handle_load_concept(state, msg, ctx):
    if ctx.store is None:
        raise ProtocolError("no store", "server has no concept store configured")
    try:
        record = ctx.store.load_concept(msg.get("id", ""))
    except ConceptStoreError as exc:
        raise ProtocolError("store error", str(exc)) from None
    state.concept = record
    state.quantization = record.quantization
    state.phase = LEARNED
    return state, [_reply(state, "concept_learned", id=msg.get("id", ""),
                          concept=record.to_document())]


_HANDLERS = {
    "begin_demo": _handle_begin_demo,
    "demo_frame": _handle_demo_frame,
    "end_demo": _handle_end_demo,
    "start_mining": _handle_start_mining,
    "answer": _handle_answer,
    "reenact_request": _handle_reenact_request,
    "save_concept": _handle_save_concept,
    "load_concept": _handle_load_concept,
}


class ReplayError(Exception):
    def __init__(self, position: int, rule: str, detail: str):
        super().__init__(f"protocol error at message {position}: {rule} ({detail})")
        self.position = position
        self.rule = rule


def replay_transcript(script: Sequence[Mapping],
                      ctx: ServiceContext | None = None) -> SessionState:
    """Fold handle_message over a client message log; abort on first error."""
    if not script or script[0].get("type") != "create_session":
        raise ReplayError(0, "no create_session",
                          "script must start with create_session")
    ctx = ctx or ServiceContext()
    state: SessionState | None = None
    for i, msg in enumerate(script):
        state, replies = handle_message(state, msg, ctx)
        for reply in replies:
            if reply["type"] == "error":
                raise ReplayError(i, reply["rule"], reply["detail"])
    return state
