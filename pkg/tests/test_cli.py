import json

import pytest

from blockteach.cli import main
from blockteach.concepts import load_concept_file
from blockteach.features import QuantizationConfig
from blockteach.mining import report_from_json
from blockteach.patterns import evaluate_pattern, parse_pattern
from blockteach.scene import load_demonstration

from helpers import MOVE_AROUND_PATTERNS


def run(*argv):
    return main([str(a) for a in argv])


class TestRecord:
    def test_writes_demo(self, tmp_path, capsys):
        out = tmp_path / "demo.json"
        assert run("record", "--kind", "circle_around", "--seed", 7,
                   "--out", out) == 0
        demo = load_demonstration(out)
        assert demo.n_frames == 64
        assert "wrote" in capsys.readouterr().out

    def test_same_seed_reproducible(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run("record", "--kind", "build_row", "--seed", 3, "--out", a)
        run("record", "--kind", "build_row", "--seed", 3, "--out", b)
        assert a.read_text() == b.read_text()

    def test_bad_params_exit_one(self, tmp_path):
        assert run("record", "--kind", "circle_around", "--seed", 1,
                   "--radius", -4, "--out", tmp_path / "x.json") == 1

    def test_missing_flags_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            run("record", "--kind", "circle_around")
        assert exc.value.code == 2


class TestMine:
    def test_report_contains_move_around_patterns(self, tmp_path):
        demo = tmp_path / "demo.json"
        report = tmp_path / "report.json"
        run("record", "--kind", "circle_around", "--seed", 7, "--out", demo)
        assert run("mine", demo, "--threshold", 0.1, "--report", report) == 0
        mined = report_from_json(report.read_text())
        texts = {m.pattern.text() for m in mined}
        assert set(MOVE_AROUND_PATTERNS) <= texts

    def test_missing_file_exit_one(self, tmp_path):
        assert run("mine", tmp_path / "ghost.json",
                   "--report", tmp_path / "r.json") == 1


class TestTeach:
    def test_piped_answers_match_replay_semantics(self, tmp_path, monkeypatch,
                                                  capsys):
        import io
        import sys

        demo = tmp_path / "demo.json"
        concept_path = tmp_path / "concept.json"
        run("record", "--kind", "circle_around", "--seed", 7, "--out", demo)

        # First pass: collect the questions to derive the answer script,
        # exactly like a teacher reading the prompts.
        questions = []
        from blockteach.dialogue import build_queue, next_question, apply_answer
        from blockteach.mining import MinerConfig, mine as run_mine
        from blockteach.features import FeatureKind
        demo_obj = load_demonstration(demo)
        mined = run_mine([demo_obj],
                         MinerConfig(confidence_threshold=0.1,
                                     kinds=(FeatureKind.MV, FeatureKind.QTC_C3,
                                            FeatureKind.CD),
                                     pairs=(("A", "B"),), dynamic_pair=False),
                         QuantizationConfig())
        session = build_queue(mined, demo_obj.roles,
                              signature=demo_obj.signature)
        answers = []
        q = next_question(session)
        while q is not None:
            yes = q.pattern.text() in MOVE_AROUND_PATTERNS
            answers.append("y" if yes else "n")
            apply_answer(session, q.id, "yes" if yes else "no")
            q = next_question(session)

        monkeypatch.setattr(sys, "stdin", io.StringIO("\n".join(answers) + "\n"))
        assert run("teach", demo, "--threshold", 0.1,
                   "--kinds", "MV", "QTC_C3", "CD", "--pairs", "A,B",
                   "--no-dynamic", "--out", concept_path) == 0
        record = load_concept_file(concept_path)
        assert sorted(p.text() for p in record.confirmed) == \
            sorted(MOVE_AROUND_PATTERNS)


class TestReenact:
    def test_end_to_end_constraints_hold(self, tmp_path):
        demo = tmp_path / "demo.json"
        concept_path = tmp_path / "concept.json"
        scene_path = tmp_path / "scene.json"
        trace_path = tmp_path / "trace.json"
        run("record", "--kind", "circle_around", "--seed", 7, "--out", demo)

        from blockteach.concepts import ConceptRecord, write_concept_file
        from blockteach.scene import ActionSignature
        record = ConceptRecord(
            signature=ActionSignature("move_around", ("A", "B")),
            confirmed=tuple(parse_pattern(t) for t in MOVE_AROUND_PATTERNS),
            quantization=QuantizationConfig(),
        )
        write_concept_file(record, concept_path)
        scene_path.write_text(json.dumps({
            "objects": [{"id": "block_red", "pos": [1.2, -0.7]},
                        {"id": "block_green", "pos": [0.3, 0.4]}],
            "roles": {"A": "block_red", "B": "block_green"},
        }))
        assert run("reenact", concept_path, scene_path, "--seed", 7,
                   "--out", trace_path) == 0

        # the written trace is itself a loadable demonstration whose
        # re-extracted features satisfy every confirmed pattern
        replay = load_demonstration(trace_path)
        for text in MOVE_AROUND_PATTERNS:
            report = evaluate_pattern(parse_pattern(text), replay,
                                      QuantizationConfig())
            assert report.fully_satisfied, text

    def test_plan_not_found_exit_one(self, tmp_path):
        concept_path = tmp_path / "concept.json"
        scene_path = tmp_path / "scene.json"
        from blockteach.concepts import ConceptRecord, write_concept_file
        from blockteach.scene import ActionSignature
        record = ConceptRecord(
            signature=ActionSignature("move_around", ("A", "B")),
            confirmed=tuple(parse_pattern(t) for t in MOVE_AROUND_PATTERNS),
            quantization=QuantizationConfig(),
        )
        write_concept_file(record, concept_path)
        scene_path.write_text(json.dumps({
            "objects": [{"id": "block_red", "pos": [1.2, -0.7]},
                        {"id": "block_green", "pos": [0.3, 0.4]}],
            "roles": {"A": "block_red", "B": "block_green"},
        }))
        assert run("reenact", concept_path, scene_path, "--seed", 7,
                   "--max-expansions", 1,
                   "--out", tmp_path / "trace.json") == 1
