"""Pages, records, blocks and labeled words, plus the JSON interchange format.

A page holds one or more marriage records.  Each record (block D) is a
margin block A, a body block B, and zero or more marginal notes C.
Words are whitespace-free and carry an optional :class:`EntityLabel`.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence, Union

from .ontology import (LAYOUT_MARKERS, EntityLabel, LabelError, TagOntology, canonical_label,
                       default_ontology)

BLOCK_KINDS = ("A", "B", "C")
SPLITS = ("train", "valid", "test")
MANIFEST = "manifest.json"

# the serialized shape of a combined tag; never allowed inside word text
_COMBINED_SHAPE = re.compile(r"<[a-z0-9_]+>")


class DocumentError(ValueError):
    pass


@dataclass(frozen=True)
class Word:
    text: str
    label: EntityLabel | None = None

    def __post_init__(self):
        if not self.text:
            raise DocumentError("empty word")
        if any(c.isspace() for c in self.text):
            raise DocumentError(f"word contains whitespace: {self.text!r}")


@dataclass(frozen=True)
class Block:
    kind: str
    words: tuple[Word, ...] = ()

    def __post_init__(self):
        if self.kind not in BLOCK_KINDS:
            raise DocumentError(f"unknown block kind {self.kind!r}")
        if not isinstance(self.words, tuple):
            object.__setattr__(self, "words", tuple(self.words))


@dataclass(frozen=True)
class RecordD:
    a: Block
    b: Block
    c: tuple[Block, ...] = ()

    def __post_init__(self):
        if not isinstance(self.c, tuple):
            object.__setattr__(self, "c", tuple(self.c))
        if self.a.kind != "A" or self.b.kind != "B" or any(blk.kind != "C" for blk in self.c):
            raise DocumentError("record blocks must be one A, one B, then C blocks")

    @property
    def blocks(self) -> tuple[Block, ...]:
        return (self.a, self.b) + self.c


@dataclass(frozen=True)
class Page:
    id: str
    records: tuple[RecordD, ...] = ()

    def __post_init__(self):
        if not isinstance(self.records, tuple):
            object.__setattr__(self, "records", tuple(self.records))

    def blocks(self) -> Iterator[Block]:
        for rec in self.records:
            yield from rec.blocks


@dataclass
class StatsReport:
    pages: int = 0
    records: int = 0
    words: int = 0
    characters: int = 0
    entities: int = 0
    tag_counts: Counter = field(default_factory=Counter)
    category_counts: Counter = field(default_factory=Counter)

    def __add__(self, other: "StatsReport") -> "StatsReport":
        return StatsReport(self.pages + other.pages, self.records + other.records,
                           self.words + other.words, self.characters + other.characters,
                           self.entities + other.entities, self.tag_counts + other.tag_counts,
                           self.category_counts + other.category_counts)

    def _avg(self, total):
        return total / self.records if self.records else 0.0

    @property
    def avg_characters(self) -> float:
        return self._avg(self.characters)

    @property
    def avg_words(self) -> float:
        return self._avg(self.words)

    @property
    def avg_entities(self) -> float:
        return self._avg(self.entities)

    def to_dict(self) -> dict:
        return {
            "totals": {"pages": self.pages, "records": self.records, "words": self.words,
                       "characters": self.characters, "entities": self.entities},
            "per_record": {"characters": round(self.avg_characters, 4),
                           "words": round(self.avg_words, 4),
                           "entities": round(self.avg_entities, 4)},
            "tag_counts": dict(sorted(self.tag_counts.items())),
            "category_counts": dict(sorted(self.category_counts.items())),
        }


def reserved_reason(text: str, ont: TagOntology) -> str | None:
    """Why ``text`` cannot be used as word text, or None if it can."""
    if any(c.isspace() for c in text):
        return "word contains whitespace"
    for c in text:
        if ont.is_reserved(c):
            return f"word contains reserved tag token U+{ord(c):04X}"
    for marker in LAYOUT_MARKERS:
        if marker in text:
            return f"word contains layout marker {marker}"
    if _COMBINED_SHAPE.search(text):
        return "word contains a combined-tag marker"
    return None


def validate_page(page: Page, ont: TagOntology | None = None) -> list[str]:
    """All invariant violations of ``page``, located by record and word index."""
    ont = ont or default_ontology()
    problems = []
    if not page.records:
        problems.append("page has no records")
    for ri, rec in enumerate(page.records):
        for blk in rec.blocks:
            for wi, w in enumerate(blk.words):
                why = reserved_reason(w.text, ont)
                if why:
                    problems.append(f"record {ri} block {blk.kind} word {wi}: {why}")
                if w.label is not None:
                    try:
                        if canonical_label(w.label.components, ont) != w.label:
                            raise LabelError("label is not canonical")
                    except LabelError as exc:
                        problems.append(f"record {ri} block {blk.kind} word {wi}: {exc}")
    return problems


def _read_word(item, ont, where) -> Word:
    if isinstance(item, str):
        text, names = item, None
    elif isinstance(item, dict) and isinstance(item.get("t"), str):
        text, names = item["t"], item.get("l")
        if names is not None and (not isinstance(names, list) or not names):
            raise DocumentError(f"{where}: label must be a non-empty list of tag names")
    else:
        raise DocumentError(f"{where}: word must be a string or {{t, l}} object")
    if not text:
        raise DocumentError(f"{where}: empty word")
    why = reserved_reason(text, ont)
    if why:
        raise DocumentError(f"{where}: {why}")
    label = None
    if names:
        try:
            label = canonical_label(names, ont)
        except LabelError as exc:
            raise DocumentError(f"{where}: {exc}") from None
    return Word(text, label)


def _read_block(obj, kind, ont, where) -> Block:
    if not isinstance(obj, dict) or not isinstance(obj.get("words"), list):
        raise DocumentError(f"{where}: block {kind} needs a 'words' array")
    return Block(kind, tuple(_read_word(item, ont, f"{where} word {wi}")
                             for wi, item in enumerate(obj["words"])))


def page_from_dict(doc, ont: TagOntology | None = None) -> Page:
    ont = ont or default_ontology()
    if not isinstance(doc, dict) or not isinstance(doc.get("records"), list):
        raise DocumentError("page needs a 'records' array")
    page_id = doc.get("id", "")
    if not isinstance(page_id, str):
        raise DocumentError("page id must be a string")
    if not doc["records"]:
        raise DocumentError("page has no records")
    records = []
    for ri, rec in enumerate(doc["records"]):
        where = f"record {ri}"
        if not isinstance(rec, dict):
            raise DocumentError(f"{where}: not an object")
        for key in ("A", "B"):
            if key not in rec:
                raise DocumentError(f"{where}: missing block {key}")
        extra = set(rec) - {"A", "B", "C"}
        if extra:
            raise DocumentError(f"{where}: unexpected keys {sorted(extra)}")
        c_items = rec.get("C", [])
        if not isinstance(c_items, list):
            raise DocumentError(f"{where}: C must be an array of blocks")
        records.append(RecordD(
            _read_block(rec["A"], "A", ont, where),
            _read_block(rec["B"], "B", ont, where),
            tuple(_read_block(c, "C", ont, f"{where} C{ci}") for ci, c in enumerate(c_items)),
        ))
    return Page(page_id, tuple(records))


def read_document(content: str | bytes, ont: TagOntology | None = None) -> Page:
    """Parse and validate one interchange JSON document."""
    try:
        doc = json.loads(content)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"malformed JSON: {exc}") from None
    return page_from_dict(doc, ont)


def _word_obj(w: Word):
    if w.label is None:
        return w.text
    return {"l": list(w.label.names), "t": w.text}


def page_to_dict(page: Page) -> dict:
    return {
        "id": page.id,
        "records": [
            {"A": {"words": [_word_obj(w) for w in rec.a.words]},
             "B": {"words": [_word_obj(w) for w in rec.b.words]},
             "C": [{"words": [_word_obj(w) for w in blk.words]} for blk in rec.c]}
            for rec in page.records
        ],
    }


def write_document(page: Page) -> str:
    return json.dumps(page_to_dict(page), ensure_ascii=False, sort_keys=True, indent=1) + "\n"


Scope = Union[Page, RecordD, Block]


def block_text(words: Sequence[Word]) -> str:
    return " ".join(w.text for w in words)


def plain_text(scope: Scope | Sequence[Word]) -> str:
    """Tag-free text: words joined by spaces, non-empty blocks and records by newlines."""
    if isinstance(scope, Block):
        return block_text(scope.words)
    if isinstance(scope, RecordD):
        return "\n".join(block_text(b.words) for b in scope.blocks if b.words)
    if isinstance(scope, Page):
        return "\n".join(t for t in (plain_text(r) for r in scope.records) if t)
    return block_text(scope)


def entity_runs(words: Sequence[Word]) -> list[tuple[int, int, EntityLabel]]:
    """Maximal runs of consecutive words sharing an identical label, as (start, end, label)."""
    runs = []
    start = 0
    n = len(words)
    while start < n:
        label = words[start].label
        end = start + 1
        while end < n and words[end].label == label:
            end += 1
        if label is not None:
            runs.append((start, end, label))
        start = end
    return runs


def page_stats(page: Page) -> StatsReport:
    rep = StatsReport(pages=1, records=len(page.records))
    for rec in page.records:
        rep.characters += len(plain_text(rec))
        for blk in rec.blocks:
            rep.words += len(blk.words)
            for _, _, label in entity_runs(blk.words):
                rep.entities += 1
                rep.category_counts[str(label)] += 1
                for t in label.components:
                    rep.tag_counts[t.name] += 1
    return rep


def corpus_stats(pages: Iterable[Page]) -> StatsReport:
    """Per-record averages and tag occurrence counts over a collection of pages."""
    total = StatsReport()
    for page in pages:
        total = total + page_stats(page)
    return total


# -- corpus directories ------------------------------------------------------

def read_manifest(directory: str | Path) -> dict | None:
    path = Path(directory) / MANIFEST
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


def write_manifest(directory: str | Path, entries: list[dict], meta: dict | None = None) -> str:
    doc = {"pages": entries}
    if meta:
        doc["meta"] = meta
    text = json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=1) + "\n"
    (Path(directory) / MANIFEST).write_text(text, encoding="utf-8")
    return text


def corpus_entries(directory: str | Path, suffix: str = ".json") -> list[dict]:
    """Manifest entries of a corpus directory; falls back to listing files."""
    manifest = read_manifest(directory)
    if manifest is not None:
        return list(manifest.get("pages", []))
    files = sorted(p.name for p in Path(directory).glob(f"*{suffix}") if p.name != MANIFEST
                   and not p.name.endswith(".diagnostics.json"))
    return [{"file": f, "id": Path(f).stem, "split": "train"} for f in files]


def read_corpus(directory: str | Path, ont: TagOntology | None = None) -> list[tuple[dict, Page]]:
    directory = Path(directory)
    out = []
    for entry in corpus_entries(directory):
        page = read_document((directory / entry["file"]).read_text(encoding="utf-8"), ont)
        out.append((entry, page))
    return out
