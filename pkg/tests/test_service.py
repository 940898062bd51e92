import asyncio
import json

import pytest

from blockteach.concepts import ConceptStore
from blockteach.patterns import serialize_pattern
from blockteach.scene import demonstration_to_document
from blockteach.service import (
    LEARNED,
    RECORDING,
    REENACTING,
    TEACHING,
    ReplayError,
    ServiceContext,
    handle_message,
    replay_transcript,
)

from helpers import MOVE_AROUND_PATTERNS, circle_demo, golden_session_script


class Driver:
    """Sequenced client against the pure handler."""

    def __init__(self, ctx=None):
        self.ctx = ctx or ServiceContext()
        self.state = None
        self.seq = 0

    def send(self, **msg):
        self.seq += 1
        msg = {"proto": 1, "seq": self.seq, **msg}
        if self.state is not None and "session" not in msg:
            msg["session"] = self.state.session_id
        self.state, replies = handle_message(self.state, msg, self.ctx)
        return replies

    def create(self):
        return self.send(type="create_session")

    def record_demo(self, demo):
        doc = demonstration_to_document(demo)
        self.send(type="begin_demo", name=doc["name"],
                  signature=doc["signature"], roles=doc["roles"],
                  descriptors=doc["descriptors"], source=doc["source"])
        for fr in doc["frames"]:
            self.send(type="demo_frame", t=fr["t"], objects=fr["objects"])
        return self.send(type="end_demo")

    def mine(self, **miner):
        return self.send(type="start_mining", miner=miner or {
            "threshold": 0.1, "kinds": ["MV", "QTC_C3", "CD"],
            "pairs": [["A", "B"]], "dynamic": False})

    def teach_through(self, confirm):
        replies = self.mine()
        while replies and replies[-1]["type"] == "question":
            q = replies[-1]
            answer = "yes" if q["pattern"] in confirm else "no"
            replies = self.send(type="answer", id=q["id"], answer=answer)
        return replies


class TestLifecycle:
    def test_create_session(self):
        d = Driver()
        replies = d.create()
        assert replies[0]["type"] == "session_created"
        assert replies[0]["session"] == d.state.session_id
        assert d.state.phase == RECORDING

    def test_full_teaching_flow(self):
        d = Driver()
        d.create()
        assert d.record_demo(circle_demo()) == []
        replies = d.teach_through(set(MOVE_AROUND_PATTERNS))
        assert replies[-1]["type"] == "concept_learned"
        assert d.state.phase == LEARNED
        assert sorted(replies[-1]["concept"]["confirmed"]) == \
            sorted(MOVE_AROUND_PATTERNS)
        snapshot = replies[-1]["queue"]
        assert {q["status"] for q in snapshot} <= {
            "confirmed", "denied", "implied_true", "implied_false"}
        confirmed_texts = [q["text"] for q in snapshot
                           if q["status"] == "confirmed"]
        assert len(confirmed_texts) == 4

    def test_question_reply_carries_queue_snapshot(self):
        d = Driver()
        d.create()
        d.record_demo(circle_demo())
        replies = d.mine()
        q = replies[-1]
        assert q["type"] == "question"
        snapshot = {item["id"]: item["status"] for item in q["queue"]}
        assert snapshot[q["id"]] == "asked"
        assert "pending" in snapshot.values()

    def test_reenact_flow_streams_frames(self):
        d = Driver()
        d.create()
        d.record_demo(circle_demo())
        d.teach_through(set(MOVE_AROUND_PATTERNS))
        replies = d.send(
            type="reenact_request",
            scene={"objects": [
                {"id": "block_red", "pos": [1.2, -0.7]},
                {"id": "block_green", "pos": [0.3, 0.4]},
            ]},
            roles={"A": "block_red", "B": "block_green"},
            config={"rng_seed": 7},
        )
        assert replies[-1]["type"] == "plan_done"
        frames = [r for r in replies if r["type"] == "plan_frame"]
        assert len(frames) == len(replies[-1]["trace"]["frames"])
        assert frames[0]["index"] == 0
        assert d.state.phase == REENACTING
        audit = replies[-1]["audit"]
        assert all(all(row.values()) for row in audit["during"])
        assert all(audit["terminal"].values())

    def test_save_and_load_concept(self, tmp_path):
        ctx = ServiceContext(store=ConceptStore(tmp_path / "store"))
        d = Driver(ctx)
        d.create()
        d.record_demo(circle_demo())
        d.teach_through(set(MOVE_AROUND_PATTERNS))
        replies = d.send(type="save_concept")
        assert replies[0]["type"] == "concept_learned"
        assert replies[0]["saved"] is True
        cid = replies[0]["id"]

        d2 = Driver(ctx)
        d2.create()
        replies = d2.send(type="load_concept", id=cid)
        assert replies[0]["type"] == "concept_learned"
        assert d2.state.phase == LEARNED
        assert sorted(replies[0]["concept"]["confirmed"]) == \
            sorted(MOVE_AROUND_PATTERNS)


class TestGuards:
    def test_reenact_before_learning(self):
        d = Driver()
        d.create()
        replies = d.send(type="reenact_request", scene={"objects": []})
        assert replies[0]["type"] == "error"
        assert replies[0]["rule"] == "no concept"

    def test_demo_frame_during_teaching(self):
        d = Driver()
        d.create()
        d.record_demo(circle_demo())
        d.mine()
        assert d.state.phase == TEACHING
        replies = d.send(type="demo_frame", t=0.0, objects=[])
        assert replies[0]["type"] == "error"
        assert replies[0]["rule"] == "not recording"
        assert d.state.phase == TEACHING

    def test_sequence_gap_detected(self):
        d = Driver()
        d.create()
        d.seq += 5  # skip numbers
        replies = d.send(type="begin_demo",
                         signature={"verb": "a", "roles": ["A"]})
        assert replies[0]["type"] == "error"
        assert replies[0]["rule"] == "sequence gap"

    def test_wrong_session_id(self):
        d = Driver()
        d.create()
        replies = d.send(type="end_demo", session="nope")
        assert replies[0]["type"] == "error"
        assert replies[0]["rule"] == "wrong session"

    def test_invalid_demo_rejected(self):
        d = Driver()
        d.create()
        d.send(type="begin_demo", signature={"verb": "a", "roles": ["A"]},
               roles={"A": "o"})
        d.send(type="demo_frame", t=0.0,
               objects=[{"id": "o", "pos": [0, 0]}])
        replies = d.send(type="end_demo")
        assert replies[0]["type"] == "error"
        assert replies[0]["rule"] == "invalid demonstration"

    def test_answer_with_unknown_id(self):
        d = Driver()
        d.create()
        d.record_demo(circle_demo())
        d.mine()
        replies = d.send(type="answer", id="q999", answer="yes")
        assert replies[0]["type"] == "error"
        assert replies[0]["rule"] == "bad answer"

    def test_server_seq_gapless(self):
        d = Driver()
        seen = []
        for replies in (d.create(),
                        d.record_demo(circle_demo()) or [],
                        d.mine()):
            seen.extend(r["seq"] for r in replies)
        assert seen == list(range(1, len(seen) + 1))


class TestReplay:
    def test_golden_session(self):
        script = golden_session_script()
        final = replay_transcript(script)
        assert final.phase == LEARNED
        confirmed = {serialize_pattern(p) for p in final.concept.confirmed}
        assert confirmed == set(MOVE_AROUND_PATTERNS)

    def test_replay_deterministic(self):
        script = golden_session_script()
        a = replay_transcript(script)
        b = replay_transcript(script)
        assert a.concept.to_document() == b.concept.to_document()

    def test_out_of_order_sequence_aborts_with_position(self):
        script = golden_session_script()
        script[10] = dict(script[10], seq=999)
        with pytest.raises(ReplayError) as exc:
            replay_transcript(script)
        assert exc.value.position == 10
        assert exc.value.rule == "sequence gap"

    def test_empty_script_rejected(self):
        with pytest.raises(ReplayError, match="create_session"):
            replay_transcript([])

    def test_script_must_open_with_create(self):
        with pytest.raises(ReplayError, match="create_session"):
            replay_transcript([{"type": "end_demo", "seq": 1}])


class TestWsServer:
    def test_same_protocol_over_websocket(self):
        pytest.importorskip("fastapi")
        from starlette.testclient import TestClient

        from blockteach.server import make_ws_app

        client = TestClient(make_ws_app())
        with client.websocket_connect("/session") as ws:
            ws.send_text(json.dumps(
                {"proto": 1, "type": "create_session", "seq": 1}))
            created = ws.receive_json()
            assert created["type"] == "session_created"
            ws.send_text(json.dumps(
                {"proto": 1, "type": "reenact_request", "seq": 2,
                 "session": created["session"], "scene": {"objects": []}}))
            err = ws.receive_json()
            assert err["type"] == "error" and err["rule"] == "no concept"


class TestTcpServer:
    def test_ndjson_round_trip(self):
        async def run():
            from blockteach.server import make_context, _serve_tcp_connection

            ctx = make_context()

            async def on_connect(reader, writer):
                await _serve_tcp_connection(reader, writer, ctx)

            server = await asyncio.start_server(on_connect, "127.0.0.1", 0)
            port = server.sockets[0].getsockname()[1]
            reader, writer = await asyncio.open_connection("127.0.0.1", port)

            async def rpc(msg):
                text = msg if isinstance(msg, str) else json.dumps(msg)
                writer.write((text + "\n").encode())
                await writer.drain()
                line = await asyncio.wait_for(reader.readline(), timeout=5)
                return json.loads(line)

            created = await rpc({"proto": 1, "type": "create_session", "seq": 1})
            assert created["type"] == "session_created"
            sid = created["session"]
            bad = await rpc({"proto": 1, "type": "demo_frame", "seq": 3,
                             "session": sid, "t": 0.0, "objects": []})
            assert bad["type"] == "error" and bad["rule"] == "sequence gap"
            mangled = await rpc("this is not json")
            assert mangled["rule"] == "malformed json"
            writer.close()
            server.close()
            await server.wait_closed()

        asyncio.run(run())
