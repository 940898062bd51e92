import pytest

from blockteach.concepts import (
    ConceptRecord,
    ConceptStore,
    ConceptStoreError,
    concept_id,
    load_concept_file,
    relate_concepts,
    transcript_digest,
    write_concept_file,
)
from blockteach.features import QuantizationConfig
from blockteach.patterns import evaluate_pattern, parse_pattern
from blockteach.scene import ActionSignature

from helpers import MOVE_AROUND_PATTERNS, circle_demo

CFG = QuantizationConfig()


def move_around_record(extra=(), modifiers=()):
    return ConceptRecord(
        signature=ActionSignature("move_around", ("A", "B"), tuple(modifiers)),
        confirmed=tuple(parse_pattern(t)
                        for t in (*MOVE_AROUND_PATTERNS, *extra)),
        quantization=CFG,
        demo_names=("circle_around",),
        answer_digest=transcript_digest([("agent", "q"), ("teacher", "yes")]),
        created_at="2024-01-01T00:00:00Z",
    )


class TestRecord:
    def test_duplicate_confirmed_patterns_rejected(self):
        with pytest.raises(ValueError, match="distinct"):
            ConceptRecord(
                signature=ActionSignature("a", ("A",)),
                confirmed=(parse_pattern("forall_t MV(A)[t] = 1"),
                           parse_pattern("forall_t MV(A)[t] = 1")),
                quantization=CFG,
            )

    def test_document_round_trip(self):
        record = move_around_record()
        again = ConceptRecord.from_document(record.to_document())
        assert again == record

    def test_file_round_trip(self, tmp_path):
        record = move_around_record()
        path = tmp_path / "concept.json"
        write_concept_file(record, path)
        assert load_concept_file(path) == record

    def test_unsupported_schema_version(self):
        doc = move_around_record().to_document()
        doc["schema_version"] = 99
        with pytest.raises(ConceptStoreError, match="schema"):
            ConceptRecord.from_document(doc)


class TestStore:
    def test_save_then_load_round_trip(self, tmp_path):
        store = ConceptStore(tmp_path / "store")
        record = move_around_record()
        cid = store.save_concept(record)
        assert store.load_concept(cid) == record

    def test_duplicate_signature_needs_overwrite(self, tmp_path):
        store = ConceptStore(tmp_path / "store")
        record = move_around_record()
        store.save_concept(record)
        with pytest.raises(ConceptStoreError, match="exists"):
            store.save_concept(record)
        store.save_concept(record, overwrite=True)

    def test_corrupted_file_rejected(self, tmp_path):
        store = ConceptStore(tmp_path / "store")
        cid = store.save_concept(move_around_record())
        (tmp_path / "store" / f"{cid}.json").write_text("{broken")
        with pytest.raises(ConceptStoreError, match="unreadable"):
            store.load_concept(cid)

    def test_missing_concept(self, tmp_path):
        store = ConceptStore(tmp_path / "store")
        with pytest.raises(ConceptStoreError, match="no concept"):
            store.load_concept("ghost")

    def test_listing_ordered_by_signature(self, tmp_path):
        store = ConceptStore(tmp_path / "store")
        store.save_concept(move_around_record(
            extra=("forall_t QTC_C3(A,B)[t] = -",), modifiers=("clockwise",)))
        store.save_concept(move_around_record())
        listing = store.list_concepts()
        assert listing == sorted(listing)
        assert len(listing) == 2

    def test_atomic_write_leaves_no_temp_files(self, tmp_path):
        store = ConceptStore(tmp_path / "store")
        store.save_concept(move_around_record())
        assert not list((tmp_path / "store").glob("*.tmp"))


class TestHierarchy:
    def test_clockwise_variant_is_subclass(self):
        general = move_around_record()
        specific = move_around_record(
            extra=("forall_t QTC_C3(A,B)[t] = -",), modifiers=("clockwise",))
        relation = relate_concepts(general, specific)
        assert relation is not None
        assert relation.general == concept_id(general.signature)
        assert relation.specific == concept_id(specific.signature)
        # the reverse direction does not hold
        assert relate_concepts(specific, general) is None

    def test_identical_concepts_relate_both_ways(self):
        a, b = move_around_record(), move_around_record()
        assert relate_concepts(a, b) is not None
        assert relate_concepts(b, a) is not None

    def test_unrelated_pattern_sets(self):
        general = move_around_record()
        other = ConceptRecord(
            signature=ActionSignature("move_around", ("A", "B"), ("away",)),
            confirmed=(parse_pattern("forall_t QTC_C1(A,B)[t] = +"),),
            quantization=CFG,
        )
        assert relate_concepts(general, other) is None

    def test_arity_mismatch_rejected(self):
        general = move_around_record()
        unary = ConceptRecord(
            signature=ActionSignature("move_around", ("A",)),
            confirmed=(parse_pattern("forall_t MV(A)[t] = 1"),),
            quantization=CFG,
        )
        with pytest.raises(ValueError, match="arity"):
            relate_concepts(general, unary)

    def test_different_verbs_do_not_relate(self):
        general = move_around_record()
        other = ConceptRecord(
            signature=ActionSignature("orbit", ("A", "B")),
            confirmed=general.confirmed,
            quantization=CFG,
        )
        assert relate_concepts(general, other) is None

    def test_subsumption_consistency_on_data(self):
        # every demo satisfying the specific concept satisfies the general one
        general = move_around_record()
        specific = move_around_record(
            extra=("forall_t QTC_C3(A,B)[t] = -",), modifiers=("clockwise",))
        assert relate_concepts(general, specific) is not None
        for seed in (1, 5, 9):
            demo = circle_demo(seed=seed, frames=32)
            if all(evaluate_pattern(p, demo, CFG).fully_satisfied
                   for p in specific.confirmed):
                for p in general.confirmed:
                    assert evaluate_pattern(p, demo, CFG).fully_satisfied
