"""Page-level layout markup: records ``<D>`` holding blocks ``<A>``, ``<B>``, ``<C>``.

The grammar is::

    page   := record+
    record := "<D>" block_A block_B block_C* "</D>"
    block_X := "<X>" content "</X>"

Whitespace between markers is insignificant.  Block content is either
plain words or an entity-tagged string in one of the codec schemes.
"""

from __future__ import annotations

import re
from typing import Sequence

from .codecs import (DEFAULT_OPTIONS, CodecOptions, DecodeError, DecodePolicy, Diagnostic,
                     EncodingScheme, TaggedString, as_policy, as_scheme, decode_report, encode)
from .docmodel import Block, Page, RecordD, Word
from .ontology import TagOntology, default_ontology

_MARKER = re.compile(r"<(/?)([ABCD])>")


class LayoutError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.message = message
        self.offset = offset


def _block_content(words: Sequence[Word], scheme, ont, options) -> str:
    if scheme is None:
        return " ".join(w.text for w in words)
    return encode(words, scheme, ont, options).text


def serialize_page(page: Page, entity_scheme=None, ont: TagOntology | None = None,
                   options: CodecOptions = DEFAULT_OPTIONS) -> str:
    """One line per record: ``<D><A>..</A><B>..</B><C>..</C></D>``."""
    ont = ont or default_ontology()
    scheme = as_scheme(entity_scheme) if entity_scheme is not None else None
    lines = []
    for rec in page.records:
        parts = ["<D>"]
        for blk in rec.blocks:
            parts.append(f"<{blk.kind}>{_block_content(blk.words, scheme, ont, options)}</{blk.kind}>")
        parts.append("</D>")
        lines.append("".join(parts))
    return "\n".join(lines)


class _RecordBuilder:
    def __init__(self, synthetic: bool = False):
        self.a: list[Block] = []
        self.b: list[Block] = []
        self.c: list[Block] = []
        self.synthetic = synthetic

    def add(self, blk: Block) -> None:
        getattr(self, blk.kind.lower()).append(blk)


class _PageParser:
    def __init__(self, text, policy, scheme, ont, options):
        self.text = text
        self.strict = as_policy(policy) is DecodePolicy.STRICT
        self.scheme = as_scheme(scheme) if scheme is not None else None
        self.ont = ont
        self.options = options
        self.diagnostics: list[Diagnostic] = []
        self.records: list[RecordD] = []

    def offset(self, pos: int) -> int:
        return len(self.text[:pos].encode("utf-8"))

    def problem(self, message: str, pos: int) -> None:
        if self.strict:
            raise LayoutError(message, self.offset(pos))
        self.diagnostics.append(Diagnostic(self.offset(pos), message))

    def words(self, content: str, start: int) -> tuple[Word, ...]:
        if self.scheme is None:
            return tuple(Word(t) for t in content.split())
        words, diags = decode_report(TaggedString(content, self.scheme, self.ont.name),
                                     DecodePolicy.STRICT if self.strict else DecodePolicy.LENIENT,
                                     self.ont)
        for d in diags:
            self.diagnostics.append(Diagnostic(self.offset(start + d.position), d.message))
        return tuple(words)

    def parse(self) -> list[RecordD]:
        rec: _RecordBuilder | None = None
        block: str | None = None
        block_start = 0
        cursor = 0

        def finish_block(end: int):
            nonlocal block
            content = self.text[block_start:end]
            try:
                words = self.words(content, block_start)
            except DecodeError as exc:
                raise LayoutError(f"block {block}: {exc.message}",
                                  self.offset(block_start + exc.position)) from None
            rec.add(Block(block, words))
            block = None

        def finish_record(pos: int):
            nonlocal rec
            if rec.synthetic and not rec.a:
                rec.a.append(Block("A"))
            for kind in ("a", "b"):
                blocks = getattr(rec, kind)
                if not blocks:
                    self.problem(f"record missing block {kind.upper()}", pos)
                    blocks.append(Block(kind.upper()))
                elif len(blocks) > 1:
                    self.problem(f"record has {len(blocks)} {kind.upper()} blocks", pos)
                    merged = tuple(w for blk in blocks for w in blk.words)
                    blocks[:] = [Block(kind.upper(), merged)]
            self.records.append(RecordD(rec.a[0], rec.b[0], tuple(rec.c)))
            rec = None

        for m in _MARKER.finditer(self.text):
            pos = m.start()
            closing, kind = m.group(1) == "/", m.group(2)
            between = self.text[cursor:pos]
            if block is None and between.strip():
                self.problem("text outside a block", cursor + len(between) - len(between.lstrip()))
            cursor = m.end()
            if kind == "D":
                if not closing:
                    if block is not None:
                        self.problem(f"missing </{block}> before <D>", pos)
                        finish_block(pos)
                    if rec is not None:
                        if not rec.synthetic:
                            self.problem("missing </D> before <D>", pos)
                        finish_record(pos)
                    rec = _RecordBuilder()
                else:
                    if rec is None or rec.synthetic:
                        self.problem("stray </D>", pos)
                        if rec is None:
                            continue
                    if block is not None:
                        self.problem(f"missing </{block}> before </D>", pos)
                        finish_block(pos)
                    finish_record(pos)
                continue
            # A, B or C
            if not closing:
                if block is not None:
                    self.problem(f"missing </{block}> before <{kind}>", pos)
                    finish_block(pos)
                if rec is None:
                    self.problem(f"block {kind} outside a record", pos)
                    rec = _RecordBuilder(synthetic=True)
                if self.strict:
                    if kind == "A" and (rec.a or rec.b or rec.c):
                        self.problem("two A blocks in one record" if rec.a else "block A out of order", pos)
                    if kind == "B" and (rec.b or rec.c):
                        self.problem("two B blocks in one record" if rec.b else "block B out of order", pos)
                    if kind == "B" and not rec.a:
                        self.problem("record missing block A", pos)
                    if kind == "C" and not rec.b:
                        self.problem("record missing block B", pos)
                block, block_start = kind, m.end()
            else:
                if block == kind:
                    finish_block(pos)
                else:
                    self.problem(f"stray </{kind}>", pos)
        tail = self.text[cursor:]
        end = len(self.text)
        if block is None and tail.strip():
            self.problem("text outside a block", cursor + len(tail) - len(tail.lstrip()))
        if block is not None:
            self.problem(f"missing </{block}> at end of input", end)
            finish_block(end)
        if rec is not None:
            if not rec.synthetic:
                self.problem("missing </D> at end of input", end)
            finish_record(end)
        if self.strict and not self.records:
            raise LayoutError("page has no records", 0)
        return self.records


def parse_page_report(text: str, policy=DecodePolicy.STRICT, entity_scheme=None,
                      ont: TagOntology | None = None, page_id: str = "",
                      options: CodecOptions = DEFAULT_OPTIONS) -> tuple[Page, list[Diagnostic]]:
    parser = _PageParser(text, policy, entity_scheme, ont or default_ontology(), options)
    records = parser.parse()
    return Page(page_id, tuple(records)), parser.diagnostics


def parse_page(text: str, policy=DecodePolicy.STRICT, entity_scheme=None,
               ont: TagOntology | None = None, page_id: str = "",
               options: CodecOptions = DEFAULT_OPTIONS) -> Page:
    """Parse a layout-tagged page.  Diagnostic positions are UTF-8 byte offsets."""
    return parse_page_report(text, policy, entity_scheme, ont, page_id, options)[0]


__all__ = ["LayoutError", "serialize_page", "parse_page", "parse_page_report", "EncodingScheme"]
