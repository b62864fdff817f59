"""Entity tag encodings for labeled word sequences.

Five ways of interleaving tags with words are supported:

1. ``BEFORE``: tag tokens, fine to coarse, glued before each word.
2. ``AFTER``: tag tokens, coarse to fine, glued after each word.
3. ``OPEN_CLOSE``: every labeled word wrapped in ``<t>`` ... ``</t>`` markers.
4. ``OPEN_CLOSE_NESTED``: markers open when a tag starts applying and close
   when it stops, properly nested.
5. ``COMBINED_AFTER``: one ``<wife_father_first_name>`` marker after each word.

Decoding is whitespace-insensitive.  In STRICT mode malformed input raises
:class:`DecodeError`; in LENIENT mode decoding never fails and repairs are
reported as :class:`Diagnostic` entries.  An unclosed marker in schemes 3
and 4 keeps applying to every following word, which is how a recognizer
that forgets a closing tag is scored.
"""

from __future__ import annotations

import enum
import functools
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .docmodel import Word
from .ontology import (PUA_END, PUA_START, EntityLabel, LabelError, Tag, TagOntology,
                       canonical_label, composite_name, default_ontology, parse_composite)


class EncodingScheme(enum.IntEnum):
    BEFORE = 1
    AFTER = 2
    OPEN_CLOSE = 3
    OPEN_CLOSE_NESTED = 4
    COMBINED_AFTER = 5


class DecodePolicy(enum.Enum):
    STRICT = "strict"
    LENIENT = "lenient"


@dataclass(frozen=True)
class CodecOptions:
    # "\\" reproduces the typeset closing marker "<\t>"
    close_mark: str = "/"
    # scheme 1 only: put a space between the tag tokens and the word
    space_after_tags: bool = False


DEFAULT_OPTIONS = CodecOptions()


@dataclass(frozen=True)
class TaggedString:
    text: str
    scheme: EncodingScheme
    ontology: str = "default"


@dataclass(frozen=True)
class Diagnostic:
    position: int
    message: str

    def to_dict(self) -> dict:
        return {"position": self.position, "message": self.message}


class DecodeError(ValueError):
    def __init__(self, message: str, position: int = 0):
        super().__init__(f"{message} (at offset {position})")
        self.message = message
        self.position = position


def as_scheme(value) -> EncodingScheme:
    if isinstance(value, EncodingScheme):
        return value
    if isinstance(value, str) and not value.isdigit():
        return EncodingScheme[value.upper()]
    return EncodingScheme(int(value))


def as_policy(value) -> DecodePolicy:
    return value if isinstance(value, DecodePolicy) else DecodePolicy(str(value).lower())


# -- encoding ----------------------------------------------------------------

@functools.lru_cache(maxsize=4096)
def _affixes(label: EntityLabel, scheme: EncodingScheme, options: CodecOptions) -> tuple[str, str]:
    comps = label.components
    if scheme is EncodingScheme.BEFORE:
        sep = " " if options.space_after_tags else ""
        return "".join(t.token for t in reversed(comps)) + sep, ""
    if scheme is EncodingScheme.AFTER:
        return "", "".join(t.token for t in comps)
    if scheme is EncodingScheme.OPEN_CLOSE:
        opens = " ".join(f"<{t.token}>" for t in comps)
        closes = " ".join(f"<{options.close_mark}{t.token}>" for t in reversed(comps))
        return opens + " ", " " + closes
    if scheme is EncodingScheme.COMBINED_AFTER:
        return "", f"<{composite_name(label)}>"
    raise ValueError(f"no per-word affixes for scheme {scheme!r}")


def _check_canonical(label: EntityLabel, ont: TagOntology) -> None:
    if canonical_label(label.components, ont) != label:
        raise LabelError(f"non-canonical label {label.names}")


def _encode_nested(words: Sequence[Word], options: CodecOptions) -> str:
    units: list[str] = []
    stack: list[Tag] = []
    close = options.close_mark
    for w in words:
        comps = w.label.components if w.label is not None else ()
        keep = 0
        while keep < len(stack) and keep < len(comps) and stack[keep] == comps[keep]:
            keep += 1
        while len(stack) > keep:
            units.append(f"<{close}{stack.pop().token}>")
        for t in comps[keep:]:
            units.append(f"<{t.token}>")
            stack.append(t)
        units.append(w.text)
    while stack:
        units.append(f"<{close}{stack.pop().token}>")
    return " ".join(units)


def encode(words: Sequence[Word], scheme, ont: TagOntology | None = None,
           options: CodecOptions = DEFAULT_OPTIONS) -> TaggedString:
    """Serialize labeled words under one of the five schemes."""
    ont = ont or default_ontology()
    scheme = as_scheme(scheme)
    seen: set = set()
    for w in words:
        if w.label is not None and w.label not in seen:
            _check_canonical(w.label, ont)
            seen.add(w.label)
    if scheme is EncodingScheme.OPEN_CLOSE_NESTED:
        return TaggedString(_encode_nested(words, options), scheme, ont.name)
    parts = []
    for w in words:
        if w.label is None:
            parts.append(w.text)
        else:
            pre, post = _affixes(w.label, scheme, options)
            parts.append(pre + w.text + post)
    return TaggedString(" ".join(parts), scheme, ont.name)


# -- lexing ------------------------------------------------------------------

WORD, TAG, OPEN, CLOSE, COMB, BAD = range(6)


@functools.lru_cache(maxsize=64)
def _lexer(ont: TagOntology, scheme: EncodingScheme) -> re.Pattern:
    toks = "".join(re.escape(t) for t in sorted(ont.tokens))
    cls = f"[{toks}\\u{PUA_START:04x}-\\u{PUA_END:04x}]"
    if scheme in (EncodingScheme.BEFORE, EncodingScheme.AFTER):
        pat = rf"(?P<b>{cls})|(?P<w>(?:(?!{cls})\S)+)"
    elif scheme in (EncodingScheme.OPEN_CLOSE, EncodingScheme.OPEN_CLOSE_NESTED):
        marker = rf"<(?P<c>[/\\])?(?P<t>{cls})>"
        pat = rf"(?P<m>{marker})|(?P<b>{cls})|(?P<w>(?:(?!<[/\\]?{cls}>)(?!{cls})\S)+)"
    else:
        pat = rf"(?P<m><(?P<n>[a-z0-9_]+)>)|(?P<b>{cls})|(?P<w>(?:(?!<[a-z0-9_]+>)(?!{cls})\S)+)"
    return re.compile(pat)


def _lex(text: str, scheme: EncodingScheme, ont: TagOntology) -> list[tuple]:
    """Events ``(kind, value, position)`` in text order."""
    events = []
    by_token = ont.by_token
    for m in _lexer(ont, scheme).finditer(text):
        kind = m.lastgroup
        pos = m.start()
        if kind == "w":
            events.append((WORD, m.group(), pos))
        elif kind == "b":
            tag = by_token.get(m.group())
            events.append((TAG, tag, pos) if tag is not None else (BAD, m.group(), pos))
        elif scheme is EncodingScheme.COMBINED_AFTER:
            events.append((COMB, m.group("n"), pos))
        else:
            tag = by_token.get(m.group("t"))
            if tag is None:
                events.append((BAD, m.group(), pos))
            else:
                events.append((CLOSE if m.group("c") else OPEN, tag, pos))
    return events


# -- decoding ----------------------------------------------------------------

class _Decoder:
    def __init__(self, ts: TaggedString, policy: DecodePolicy, ont: TagOntology):
        self.scheme = as_scheme(ts.scheme)
        self.text = ts.text
        self.strict = as_policy(policy) is DecodePolicy.STRICT
        self.ont = ont
        self.diagnostics: list[Diagnostic] = []
        self._labels: dict[tuple, EntityLabel | None] = {}

    def problem(self, message: str, pos: int) -> None:
        if self.strict:
            raise DecodeError(message, pos)
        self.diagnostics.append(Diagnostic(pos, message))

    def label(self, tags: tuple, pos: int) -> EntityLabel | None:
        """Label for tags listed oldest first; lenient mode drops the newest conflicts."""
        if not tags:
            return None
        if tags in self._labels:
            return self._labels[tags]
        try:
            result = canonical_label(tags, self.ont)
        except LabelError as exc:
            if self.strict:
                raise DecodeError(str(exc), pos) from None
            result = self._repair(tags, pos)
        # repairs must be re-reported for every word, so only cache clean labels
        if result is not None and len(result.components) == len(tags):
            self._labels[tags] = result
        return result

    def _repair(self, tags: tuple, pos: int) -> EntityLabel | None:
        kept: list[Tag] = []
        counts = {1: 0, 2: 0, 3: 0, 4: 0}
        for t in tags:
            if t in kept:
                self.problem(f"dropped duplicate tag {t.name}", pos)
                continue
            hi = self.ont.cardinality.get(t.level, (0, 0))[1]
            if counts[t.level] >= hi:
                self.problem(f"dropped conflicting tag {t.name}", pos)
                continue
            kept.append(t)
            counts[t.level] += 1
        try:
            return canonical_label(kept, self.ont)
        except LabelError as exc:
            self.problem(f"dropped incomplete label ({exc})", pos)
            return None

    def run(self) -> list[Word]:
        events = _lex(self.text, self.scheme, self.ont)
        if self.scheme is EncodingScheme.BEFORE:
            return self._before(events)
        if self.scheme is EncodingScheme.AFTER:
            return self._after(events)
        if self.scheme is EncodingScheme.COMBINED_AFTER:
            return self._combined(events)
        return self._markers(events)

    def _before(self, events) -> list[Word]:
        words = []
        pending: list[Tag] = []
        pending_pos = 0
        for kind, value, pos in events:
            if kind == TAG:
                if not pending:
                    pending_pos = pos
                pending.append(value)
            elif kind == WORD:
                words.append(Word(value, self.label(tuple(pending), pos)))
                pending = []
            else:
                self.problem(f"unknown token {value!r}", pos)
        if pending:
            self.problem("tag token adjacent to nothing", pending_pos)
        return words

    def _after(self, events) -> list[Word]:
        texts: list[tuple[str, int]] = []
        tags: list[list[Tag]] = []
        for kind, value, pos in events:
            if kind == WORD:
                texts.append((value, pos))
                tags.append([])
            elif kind == TAG:
                if texts:
                    tags[-1].append(value)
                else:
                    self.problem("tag token adjacent to nothing", pos)
            else:
                self.problem(f"unknown token {value!r}", pos)
        return [Word(text, self.label(tuple(t), pos)) for (text, pos), t in zip(texts, tags)]

    def _combined(self, events) -> list[Word]:
        words: list[Word] = []
        tagged = False
        prev = None
        for kind, value, pos in events:
            if kind == WORD:
                words.append(Word(value))
                tagged = False
            elif kind == COMB:
                if prev != WORD and not (prev == COMB and tagged):
                    self.problem(f"tag marker <{value}> adjacent to nothing", pos)
                elif tagged:
                    self.problem(f"extra combined marker <{value}>", pos)
                else:
                    try:
                        label = parse_composite(value, self.ont)
                    except LabelError as exc:
                        self.problem(str(exc), pos)
                    else:
                        words[-1] = Word(words[-1].text, label)
                        tagged = True
            elif kind == TAG:
                self.problem(f"bare tag token {value.name} in scheme 5", pos)
            else:
                self.problem(f"unknown token {value!r}", pos)
            prev = kind
        return words

    def _markers(self, events) -> list[Word]:
        words = []
        stack: list[tuple[Tag, int]] = []
        current: tuple = ()
        for kind, value, pos in events:
            if kind == WORD:
                words.append(Word(value, self.label(current, pos)))
                continue
            if kind == OPEN:
                if any(t == value for t, _ in stack):
                    self.problem(f"duplicate open marker {value.name}", pos)
                    continue
                stack.append((value, pos))
            elif kind == CLOSE:
                if stack and stack[-1][0] == value:
                    stack.pop()
                elif any(t == value for t, _ in stack):
                    self.problem(f"improperly nested close marker {value.name}", pos)
                    stack = [(t, p) for t, p in stack if t != value]
                else:
                    self.problem(f"orphan close marker {value.name}", pos)
                    continue
            elif kind == TAG:
                self.problem(f"bare tag token {value.name} outside a marker", pos)
                continue
            else:
                self.problem(f"unknown token {value!r}", pos)
                continue
            current = tuple(t for t, _ in stack)
        if stack:
            if self.strict:
                names = ", ".join(t.name for t, _ in stack)
                raise DecodeError(f"unclosed marker {names} at end of text", stack[0][1])
            for t, p in stack:
                self.diagnostics.append(Diagnostic(p, f"unclosed marker {t.name} applied to end of text"))
        return words


def decode_report(ts: TaggedString, policy=DecodePolicy.STRICT,
                  ont: TagOntology | None = None) -> tuple[list[Word], list[Diagnostic]]:
    """Decode and also return the lenient-mode repair log."""
    dec = _Decoder(ts, policy, ont or default_ontology())
    words = dec.run()
    return words, dec.diagnostics


def decode(ts: TaggedString, policy=DecodePolicy.STRICT, ont: TagOntology | None = None) -> list[Word]:
    return decode_report(ts, policy, ont)[0]


def convert(ts: TaggedString, to, policy=DecodePolicy.STRICT, ont: TagOntology | None = None,
            options: CodecOptions = DEFAULT_OPTIONS) -> TaggedString:
    ont = ont or default_ontology()
    return encode(decode(ts, policy, ont), to, ont, options)


def strip_tags(ts: TaggedString | str, ont: TagOntology | None = None, scheme=None) -> str:
    """Plain words of a tagged string, single-space separated; never fails."""
    if isinstance(ts, str):
        ts = TaggedString(ts, as_scheme(scheme or EncodingScheme.COMBINED_AFTER))
    return " ".join(w.text for w in decode(ts, DecodePolicy.LENIENT, ont))


def to_bio(words: Iterable[Word]) -> list[tuple[str, str]]:
    """BIO tags over composite names: maximal runs of identical labels form one entity."""
    out = []
    prev = None
    for w in words:
        if w.label is None:
            out.append((w.text, "O"))
        else:
            prefix = "I-" if w.label == prev else "B-"
            out.append((w.text, prefix + composite_name(w.label)))
        prev = w.label
    return out


def bio_is_valid(bio: Sequence[tuple[str, str]]) -> bool:
    """An I-X tag must follow B-X or I-X."""
    prev = "O"
    for _, tag in bio:
        if tag.startswith("I-") and (prev == "O" or prev[2:] != tag[2:]):
            return False
        prev = tag
    return True
