"""Persist learned concepts and link them into a superclass hierarchy.

A concept is a signature plus the teacher-confirmed pattern set and the
quantization it was mined under.  Storage is a directory of one JSON file
per concept with an index file; writes go through a temp file and rename so
concurrent readers never observe a torn document.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .features import QuantizationConfig
from .patterns import Pattern, entails, parse_pattern, serialize_pattern
from .scene import ActionSignature

SCHEMA_VERSION = 1


class ConceptStoreError(ValueError):
    pass


def transcript_digest(transcript: Sequence[tuple[str, str]]) -> str:
    blob = json.dumps(list(map(list, transcript)), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class ConceptRecord:
    signature: ActionSignature
    confirmed: tuple[Pattern, ...]
    quantization: QuantizationConfig
    demo_names: tuple[str, ...] = ()
    answer_digest: str = ""
    created_at: str = ""

    def __post_init__(self):
        object.__setattr__(self, "confirmed", tuple(self.confirmed))
        object.__setattr__(self, "demo_names", tuple(self.demo_names))
        texts = [serialize_pattern(p) for p in self.confirmed]
        if len(set(texts)) != len(texts):
            raise ValueError("confirmed patterns must be distinct")

    def to_document(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "signature": {
                "verb": self.signature.verb,
                "roles": list(self.signature.roles),
                "modifiers": list(self.signature.modifiers),
            },
            "confirmed": [serialize_pattern(p) for p in self.confirmed],
            "quantization": self.quantization.to_document(),
            "provenance": {
                "demos": list(self.demo_names),
                "answer_digest": self.answer_digest,
            },
            "created_at": self.created_at,
        }

    @classmethod
    def from_document(cls, doc) -> "ConceptRecord":
        try:
            version = doc.get("schema_version")
            if version != SCHEMA_VERSION:
                raise ConceptStoreError(f"unsupported schema version {version!r}")
            sig = doc["signature"]
            prov = doc.get("provenance", {})
            return cls(
                signature=ActionSignature(sig["verb"], tuple(sig["roles"]),
                                          tuple(sig.get("modifiers", ()))),
                confirmed=tuple(parse_pattern(t) for t in doc["confirmed"]),
                quantization=QuantizationConfig.from_document(
                    doc.get("quantization", {})),
                demo_names=tuple(prov.get("demos", ())),
                answer_digest=prov.get("answer_digest", ""),
                created_at=doc.get("created_at", ""),
            )
        except ConceptStoreError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConceptStoreError(f"unreadable concept: {exc}") from None


def concept_id(signature: ActionSignature) -> str:
    parts = [signature.verb, *signature.roles, *signature.modifiers]
    slug = "-".join(parts)
    return re.sub(r"[^A-Za-z0-9_-]+", "_", slug)


@dataclass(frozen=True)
class ConceptRelation:
    general: str
    specific: str
    kind: str = "superclass"


class ConceptStore:
    """Directory-backed store; concurrent readers, single writer."""

    def __init__(self, root) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    @property
    def _index_path(self) -> Path:
        return self.root / "index.json"

    def _read_index(self) -> dict:
        if not self._index_path.exists():
            return {"concepts": {}}
        return json.loads(self._index_path.read_text())

    def _atomic_write(self, path: Path, payload: dict) -> None:
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(json.dumps(payload, indent=2) + "\n")
        os.replace(tmp, path)

    def save_concept(self, record: ConceptRecord, *, overwrite: bool = False) -> str:
        cid = concept_id(record.signature)
        path = self.root / f"{cid}.json"
        if path.exists() and not overwrite:
            raise ConceptStoreError(
                f"concept {cid!r} already exists; pass overwrite to replace")
        self._atomic_write(path, record.to_document())
        index = self._read_index()
        index["concepts"][cid] = {
            "file": path.name,
            "signature": record.to_document()["signature"],
        }
        self._atomic_write(self._index_path, index)
        return cid

    def load_concept(self, cid: str) -> ConceptRecord:
        path = self.root / f"{cid}.json"
        if not path.exists():
            raise ConceptStoreError(f"no concept {cid!r}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConceptStoreError(f"unreadable concept {cid!r}: {exc}") from None
        return ConceptRecord.from_document(doc)

    def list_concepts(self) -> list[str]:
        index = self._read_index()
        def sig_key(cid):
            sig = index["concepts"][cid]["signature"]
            return (sig["verb"], sig["roles"], sig["modifiers"], cid)
        return sorted(index["concepts"], key=sig_key)


def relate_concepts(general: ConceptRecord,
                    specific: ConceptRecord) -> ConceptRelation | None:
    """Superclass relation when every pattern of general is forced by specific.

    That is, each confirmed pattern of the general concept must be entailed
    by some confirmed pattern of the specific one.
    """
    if len(general.signature.roles) != len(specific.signature.roles):
        raise ValueError("concepts differ in role arity")
    if general.signature.verb != specific.signature.verb:
        return None
    for gp in general.confirmed:
        if not any(entails(sp, gp) for sp in specific.confirmed):
            return None
    return ConceptRelation(general=concept_id(general.signature),
                           specific=concept_id(specific.signature))


def load_concept_file(path) -> ConceptRecord:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConceptStoreError(f"unreadable concept: {exc}") from None
    return ConceptRecord.from_document(doc)


def write_concept_file(record: ConceptRecord, path) -> None:
    Path(path).write_text(json.dumps(record.to_document(), indent=2) + "\n")
