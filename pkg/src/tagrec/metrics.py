"""Evaluation of tagged transcriptions.

* :func:`edit_distance` gives a deterministic minimal character alignment.
* :func:`cer` / :func:`wer` score tag-free text.
* :func:`nerval_eval` aligns hypothesis and reference text at the character
  level, projects reference entities onto the hypothesis, and accepts a
  hypothesis entity when a same-category reference entity overlaps it and
  their transcriptions differ by at most ``threshold`` CER (0.30 by default).
* :func:`iehhr_eval` scores each reference entity by ``100 * (1 - CER)`` of
  its matched transcription: *basic* needs the information category to
  match, *complete* needs the whole person/relation chain as well.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, NamedTuple, Sequence, Union

import numpy as np

from . import _align
from .codecs import DecodePolicy, TaggedString, decode
from .docmodel import Page, RecordD, Word, entity_runs
from .ontology import LAYOUT_MARKERS, PUA_END, PUA_START, EntityLabel, TagOntology, default_ontology

MATCH, SUBSTITUTE, INSERT, DELETE = "MATCH", "SUBSTITUTE", "INSERT", "DELETE"
OP_NAMES = (MATCH, SUBSTITUTE, INSERT, DELETE)


class MetricError(ValueError):
    pass


class EditOp(NamedTuple):
    op: str
    ref_pos: int  # position in ref before the op is applied
    hyp_pos: int


@dataclass(frozen=True, eq=False)
class Alignment:
    """Edit operations in order; ``codes`` holds 0..3 for MATCH..DELETE."""

    codes: np.ndarray
    cost: int
    ref_len: int
    hyp_len: int

    def __len__(self):
        return len(self.codes)

    def __iter__(self) -> Iterator[EditOp]:
        r = h = 0
        for c in self.codes.tolist():
            yield EditOp(OP_NAMES[c], r, h)
            if c != 2:
                r += 1
            if c != 3:
                h += 1

    @property
    def ops(self) -> list[EditOp]:
        return list(self)

    def counts(self) -> dict[str, int]:
        hist = np.bincount(self.codes, minlength=4) if len(self.codes) else np.zeros(4, int)
        return {name: int(hist[i]) for i, name in enumerate(OP_NAMES)}

    def ref_to_hyp(self) -> tuple[np.ndarray, np.ndarray]:
        """Per reference position: aligned hyp index (-1 if deleted) and hyp cursor."""
        codes = self.codes
        consumes_ref = codes != 2
        consumes_hyp = codes != 3
        hyp_before = np.cumsum(consumes_hyp) - consumes_hyp
        ref_ops = np.nonzero(consumes_ref)[0]
        cursor = hyp_before[ref_ops]
        aligned = np.where(codes[ref_ops] <= 1, cursor, -1)
        return aligned, cursor


def _codes(seq) -> np.ndarray:
    if isinstance(seq, str):
        return np.frombuffer(seq.encode("utf-32-le"), dtype=np.uint32).astype(np.int64)
    return np.asarray(seq, dtype=np.int64)


def _token_codes(ref: Sequence, hyp: Sequence) -> tuple[np.ndarray, np.ndarray]:
    ids: dict = {}
    a = [ids.setdefault(t, len(ids)) for t in ref]
    b = [ids.setdefault(t, len(ids)) for t in hyp]
    return np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)


def edit_distance(ref: str | Sequence, hyp: str | Sequence) -> Alignment:
    """Minimal unit-cost alignment of two strings (or two token sequences)."""
    if isinstance(ref, str) and isinstance(hyp, str):
        a, b = _codes(ref), _codes(hyp)
    else:
        a, b = _token_codes(ref, hyp)
    cost, ops = _align.align_codes(a, b)
    return Alignment(ops, cost, len(a), len(b))


def distance(ref: str, hyp: str) -> int:
    """Edit cost only; skips the backtrace."""
    if ref == hyp:
        return 0
    return _align.distance_codes(_codes(ref), _codes(hyp))


_LAYOUT_RE = re.compile("|".join(re.escape(m) for m in LAYOUT_MARKERS))


_RESERVED: dict = {}


def _check_stripped(text: str, ont: TagOntology | None) -> None:
    ont = ont or default_ontology()
    pat = _RESERVED.get(ont)
    if pat is None:
        toks = "".join(re.escape(t) for t in sorted(ont.tokens))
        pat = re.compile(f"[{toks}\\u{PUA_START:04x}-\\u{PUA_END:04x}]")
        _RESERVED[ont] = pat
    if pat.search(text) or _LAYOUT_RE.search(text):
        raise MetricError("unstripped tag token")


def cer(ref: str, hyp: str, ont: TagOntology | None = None) -> float:
    _check_stripped(ref, ont)
    _check_stripped(hyp, ont)
    return distance(ref, hyp) / max(1, len(ref))


def wer(ref: str, hyp: str, ont: TagOntology | None = None) -> float:
    _check_stripped(ref, ont)
    _check_stripped(hyp, ont)
    r, h = ref.split(), hyp.split()
    if r == h:
        return 0.0
    a, b = _token_codes(r, h)
    return _align.distance_codes(a, b) / max(1, len(r))


class Span(NamedTuple):
    start: int
    end: int
    deleted: bool = False


def project_spans(al: Alignment, ref_spans: Sequence[tuple[int, int]]) -> list[Span]:
    """Map reference character spans onto the hypothesis through an alignment.

    A span maps to the smallest hypothesis interval covering every position
    matched or substituted with one of its characters.  A span whose
    characters were all deleted becomes an empty span at the point where
    they would have been, with ``deleted`` set.
    """
    aligned, cursor = al.ref_to_hyp()
    aligned = aligned.tolist()
    cursor = cursor.tolist()
    out = []
    for start, end in ref_spans:
        if not 0 <= start <= end <= al.ref_len:
            raise MetricError(f"span ({start}, {end}) out of bounds for length {al.ref_len}")
        hits = [p for p in aligned[start:end] if p >= 0]
        if hits:
            out.append(Span(hits[0], hits[-1] + 1))
        else:
            point = cursor[start] if start < al.ref_len else al.hyp_len
            out.append(Span(point, point, end > start))
    return out


# -- entities ----------------------------------------------------------------

@dataclass(frozen=True)
class Entity:
    label: EntityLabel
    category: str
    start: int
    end: int
    text: str


Segments = Sequence[Sequence[Word]]


def segments_of(scope) -> list[Sequence[Word]]:
    if isinstance(scope, Page):
        return [blk.words for rec in scope.records for blk in rec.blocks]
    if isinstance(scope, RecordD):
        return [blk.words for blk in scope.blocks]
    return [scope]


def extract_entities(segments: Segments) -> tuple[str, list[Entity]]:
    """Plain text of the segments and every entity with its character span.

    Non-empty segments are joined with newlines, so for a page the text is
    identical to ``docmodel.plain_text``.  Entities never cross segments.
    """
    parts = []
    entities = []
    offset = 0
    for words in segments:
        if not words:
            continue
        if parts:
            offset += 1
        starts = []
        pos = offset
        for w in words:
            starts.append(pos)
            pos += len(w.text) + 1
        text = " ".join(w.text for w in words)
        for i, j, label in entity_runs(words):
            s = starts[i]
            e = starts[j - 1] + len(words[j - 1].text)
            entities.append(Entity(label, str(label), s, e, text[s - offset:e - offset]))
        parts.append(text)
        offset += len(text)
    return "\n".join(parts), entities


# -- entity F1 ---------------------------------------------------------------

@dataclass
class CategoryScore:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def support(self) -> int:
        return self.tp + self.fn

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "support": self.support,
                "precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass
class EvalReport:
    categories: dict[str, CategoryScore] = field(default_factory=dict)

    def score(self, category: str) -> CategoryScore:
        return self.categories.setdefault(category, CategoryScore())

    @property
    def micro(self) -> CategoryScore:
        total = CategoryScore()
        for s in self.categories.values():
            total.tp += s.tp
            total.fp += s.fp
            total.fn += s.fn
        return total

    @property
    def precision(self) -> float:
        return self.micro.precision

    @property
    def recall(self) -> float:
        return self.micro.recall

    @property
    def f1(self) -> float:
        return self.micro.f1

    def merge(self, other: "EvalReport") -> "EvalReport":
        out = EvalReport()
        for rep in (self, other):
            for cat, s in rep.categories.items():
                t = out.score(cat)
                t.tp += s.tp
                t.fp += s.fp
                t.fn += s.fn
        return out

    def to_dict(self) -> dict:
        return {"categories": {k: v.to_dict() for k, v in sorted(self.categories.items())},
                "micro": self.micro.to_dict()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def to_table(self) -> str:
        rows = sorted(self.categories.items()) + [("micro", self.micro)]
        width = max([len(k) for k, _ in rows] + [8])
        lines = [f"{'category':<{width}} {'tp':>6} {'fp':>6} {'fn':>6} {'support':>7} "
                 f"{'P(%)':>7} {'R(%)':>7} {'F1(%)':>7}"]
        for name, s in rows:
            lines.append(f"{name:<{width}} {s.tp:>6} {s.fp:>6} {s.fn:>6} {s.support:>7} "
                         f"{100 * s.precision:>7.2f} {100 * s.recall:>7.2f} {100 * s.f1:>7.2f}")
        return "\n".join(lines)


def _overlaps(span: Span, ent: Entity) -> bool:
    return span.start < ent.end and ent.start < span.end


def _entity_cost(ref: Entity, hyp: Entity, cache: dict) -> float:
    key = (ref.text, hyp.text)
    if key not in cache:
        cache[key] = distance(ref.text, hyp.text) / max(1, len(ref.text))
    return cache[key]


def _prepare(ref_segments: Segments, hyp_segments: Segments):
    ref_text, ref_ents = extract_entities(ref_segments)
    hyp_text, hyp_ents = extract_entities(hyp_segments)
    al = edit_distance(ref_text, hyp_text)
    projected = project_spans(al, [(e.start, e.end) for e in ref_ents])
    return ref_ents, hyp_ents, projected


def score_segments(ref_segments: Segments, hyp_segments: Segments,
                   threshold: float = 0.30) -> EvalReport:
    """Entity F1 counts for already-decoded reference and hypothesis."""
    ref_ents, hyp_ents, projected = _prepare(ref_segments, hyp_segments)
    by_cat: dict[str, list[int]] = {}
    for i, e in enumerate(ref_ents):
        by_cat.setdefault(e.category, []).append(i)
    matched = [False] * len(ref_ents)
    cache: dict = {}
    report = EvalReport()
    for h in hyp_ents:
        hit = None
        for i in by_cat.get(h.category, ()):
            if matched[i] or not _overlaps(projected[i], h):
                continue
            # float guard so that e.g. 3 edits over 10 characters meets 0.30
            if _entity_cost(ref_ents[i], h, cache) <= threshold + 1e-9:
                hit = i
                break
        if hit is None:
            report.score(h.category).fp += 1
        else:
            matched[hit] = True
            report.score(h.category).tp += 1
    for i, e in enumerate(ref_ents):
        if not matched[i]:
            report.score(e.category).fn += 1
    return report


Scope = Union[Page, Sequence[Word]]


def decode_hypothesis(ref: Scope, hyp, policy=DecodePolicy.LENIENT,
                      ont: TagOntology | None = None):
    """Decode a hypothesis to the same shape as ``ref`` (page or word list)."""
    if not isinstance(hyp, TaggedString):
        return hyp
    if isinstance(ref, Page):
        from .layout import parse_page
        return parse_page(hyp.text, policy, hyp.scheme, ont, page_id=ref.id)
    return decode(hyp, policy, ont)


def nerval_eval(ref: Scope, hyp, threshold: float = 0.30, policy=DecodePolicy.LENIENT,
                ont: TagOntology | None = None) -> EvalReport:
    """Alignment-based entity precision/recall/F1.

    ``ref`` is a page or a word list.  ``hyp`` is a :class:`TaggedString`
    (layout-tagged when ``ref`` is a page) or an already decoded page/word list.
    """
    decoded = decode_hypothesis(ref, hyp, policy, ont)
    return score_segments(segments_of(ref), segments_of(decoded), threshold)


# -- IEHHR -------------------------------------------------------------------

@dataclass
class RecordScore:
    basic: float
    complete: float
    entities: int


@dataclass
class IehhrReport:
    records: list[RecordScore] = field(default_factory=list)

    def _mean(self, attr: str) -> float:
        scored = [getattr(r, attr) for r in self.records if r.entities]
        return sum(scored) / len(scored) if scored else 100.0

    @property
    def basic(self) -> float:
        return self._mean("basic")

    @property
    def complete(self) -> float:
        return self._mean("complete")

    def merge(self, other: "IehhrReport") -> "IehhrReport":
        return IehhrReport(self.records + other.records)

    def to_dict(self) -> dict:
        return {"basic": self.basic, "complete": self.complete,
                "records": [{"basic": r.basic, "complete": r.complete, "entities": r.entities}
                            for r in self.records]}


@lru_cache(maxsize=4096)
def _info_key(label: EntityLabel) -> tuple[str, ...]:
    finest = max(t.level for t in label.components)
    return tuple(t.name for t in label.components if t.level == finest)


def iehhr_record(ref_segments: Segments, hyp_segments: Segments) -> RecordScore:
    ref_ents, hyp_ents, projected = _prepare(ref_segments, hyp_segments)
    if not ref_ents:
        return RecordScore(100.0, 100.0, 0)
    matched: list[Entity | None] = [None] * len(ref_ents)
    by_key: dict[tuple, list[int]] = {}
    for i, r in enumerate(ref_ents):
        by_key.setdefault(_info_key(r.label), []).append(i)
    for h in hyp_ents:
        cands = [i for i in by_key.get(_info_key(h.label), ())
                 if matched[i] is None and _overlaps(projected[i], h)]
        if not cands:
            continue
        exact = [i for i in cands if ref_ents[i].category == h.category]
        matched[(exact or cands)[0]] = h
    cache: dict = {}
    basic = complete = 0.0
    for r, h in zip(ref_ents, matched):
        if h is None:
            continue
        score = 100.0 * max(0.0, 1.0 - _entity_cost(r, h, cache))
        basic += score
        if h.category == r.category:
            complete += score
    n = len(ref_ents)
    return RecordScore(basic / n, complete / n, n)


def iehhr_eval(ref, hyp, policy=DecodePolicy.LENIENT, ont: TagOntology | None = None) -> IehhrReport:
    """IEHHR basic/complete scores, averaged per record then over records.

    Pages are compared record by record (paired by position); word lists are
    treated as a single record.
    """
    hyp = decode_hypothesis(ref, hyp, policy, ont)
    if isinstance(ref, Page):
        hyp_records = hyp.records if isinstance(hyp, Page) else ()
        report = IehhrReport()
        for i, rec in enumerate(ref.records):
            other = segments_of(hyp_records[i]) if i < len(hyp_records) else []
            report.records.append(iehhr_record(segments_of(rec), other))
        return report
    return IehhrReport([iehhr_record([ref], [hyp])])
