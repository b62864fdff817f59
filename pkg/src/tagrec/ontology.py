"""Hierarchical tag vocabulary for entity annotation.

Entities are annotated as combinations of sub-element tags drawn from four
levels: the person (level 1), the relative (level 2), the event (level 3)
and the information category itself (level 4).  ``first name of the wife's
father`` is the combination ``wife + father + first_name``.

Each tag is serialized as a single reserved codepoint.  The default
ontology assigns consecutive codepoints from the Private Use Area so tag
tokens cannot collide with transcription text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

LAYOUT_MARKERS = ("<A>", "</A>", "<B>", "</B>", "<C>", "</C>", "<D>", "</D>")

# characters a tag token may never be: they appear in layout or tag markers
_MARKER_CHARS = frozenset("<>/\\ABCD")

PUA_START = 0xE000
PUA_END = 0xF8FF

DEFAULT_CARDINALITY = {1: (1, 1), 2: (0, 2), 3: (0, 1), 4: (1, 1)}

# (name, level, display) in declaration order
_DEFAULT_TAGS = [
    ("administrative", 1, "Administrative"),
    ("husband", 1, "Husband"),
    ("wife", 1, "Wife"),
    ("witness", 1, "Witness"),
    ("father", 2, "Father"),
    ("mother", 2, "Mother"),
    ("ex_husband", 2, "Ex-husband"),
    ("birth", 3, "Birth"),
    ("residence", 3, "Residence"),
    ("first_name", 4, "First name"),
    ("family_name", 4, "Family name"),
    ("age", 4, "Age"),
    ("occupation", 4, "Occupation"),
    ("street_number", 4, "Street number"),
    ("street_type", 4, "Street type"),
    ("street_name", 4, "Street name"),
    ("city", 4, "City"),
    ("departement", 4, "Département"),
    ("country", 4, "Country"),
    ("day", 4, "Day"),
    ("month", 4, "Month"),
    ("year", 4, "Year"),
    ("hour", 4, "Hour"),
    ("minute", 4, "Minute"),
]


class OntologyError(ValueError):
    pass


class LabelError(ValueError):
    pass


@dataclass(frozen=True)
class Tag:
    id: int
    name: str
    level: int
    token: str
    display: str
    order: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class EntityLabel:
    """A canonical, coarse-to-fine combination of tags attached to a word."""

    components: tuple[Tag, ...]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.components)

    def level(self, n: int) -> tuple[Tag, ...]:
        return tuple(t for t in self.components if t.level == n)

    def __str__(self) -> str:
        return composite_name(self)


class TagOntology:
    """Immutable tag vocabulary with per-level cardinality rules."""

    def __init__(self, tags: Iterable[Tag], cardinality: Mapping[int, tuple[int, int]] | None = None,
                 name: str = "default"):
        self.name = name
        ordered = []
        for i, t in enumerate(tags):
            ordered.append(Tag(t.id, t.name, t.level, t.token, t.display, order=i))
        self.tags: tuple[Tag, ...] = tuple(ordered)
        card = dict(DEFAULT_CARDINALITY)
        if cardinality:
            card.update({int(k): (int(v[0]), int(v[1])) for k, v in cardinality.items()})
        self.cardinality: dict[int, tuple[int, int]] = card
        self._validate()
        self.by_id = {t.id: t for t in self.tags}
        self.by_name = {t.name: t for t in self.tags}
        self.by_token = {t.token: t for t in self.tags}
        self.tokens = frozenset(self.by_token)
        self.layout_tokens = LAYOUT_MARKERS
        # longest first so greedy composite parsing prefers "ex_husband" over "husband"
        self._names_longest_first = sorted(self.by_name, key=lambda n: (-len(n), n))
        self._label_cache: dict[frozenset, EntityLabel] = {}

    def _validate(self) -> None:
        seen: dict[str, set] = {"id": set(), "name": set(), "token": set()}
        for t in self.tags:
            for attr in ("id", "name", "token"):
                value = getattr(t, attr)
                if value in seen[attr]:
                    raise OntologyError(f"duplicate {attr}: {value!r}")
                seen[attr].add(value)
            if t.level not in (1, 2, 3, 4):
                raise OntologyError(f"tag {t.name!r}: level {t.level} outside 1..4")
            if not t.name or not all(c.islower() or c.isdigit() or c == "_" for c in t.name):
                raise OntologyError(f"tag name {t.name!r} is not a lowercase identifier")
            if t.name.startswith("_") or t.name.endswith("_") or "__" in t.name:
                raise OntologyError(f"tag name {t.name!r} has a stray underscore")
            if len(t.token) != 1:
                raise OntologyError(f"tag {t.name!r}: token must be a single codepoint")
            if t.token in _MARKER_CHARS or t.token.isspace():
                raise OntologyError(f"tag {t.name!r}: token {t.token!r} collides with layout tokens")
        for level, (lo, hi) in self.cardinality.items():
            if lo < 0 or hi < lo:
                raise OntologyError(f"level {level}: invalid cardinality [{lo}, {hi}]")

    @property
    def level_counts(self) -> dict[int, int]:
        counts = {1: 0, 2: 0, 3: 0, 4: 0}
        for t in self.tags:
            counts[t.level] += 1
        return counts

    def tag(self, key: int | str) -> Tag:
        try:
            return self.by_id[key] if isinstance(key, int) else self.by_name[key]
        except KeyError:
            raise LabelError(f"unknown tag {key!r}") from None

    def is_reserved(self, ch: str) -> bool:
        """True for tag tokens and any unassigned Private Use Area codepoint."""
        return ch in self.tokens or PUA_START <= ord(ch) <= PUA_END

    def to_json(self) -> str:
        doc = {
            "name": self.name,
            "tags": [{"id": t.id, "name": t.name, "level": t.level, "token": t.token,
                      "display": t.display} for t in self.tags],
            "level_cardinality": {str(k): list(v) for k, v in sorted(self.cardinality.items())},
        }
        return json.dumps(doc, ensure_ascii=False, indent=2, sort_keys=True)

    def __eq__(self, other):
        if not isinstance(other, TagOntology):
            return NotImplemented
        return self.tags == other.tags and self.cardinality == other.cardinality

    def __hash__(self):
        return hash(self.tags)

    def __repr__(self):
        return f"TagOntology({self.name!r}, {len(self.tags)} tags)"


def _default_tags() -> list[Tag]:
    return [Tag(i, name, level, chr(PUA_START + i), display)
            for i, (name, level, display) in enumerate(_DEFAULT_TAGS)]


_DEFAULT: TagOntology | None = None


def default_ontology() -> TagOntology:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = TagOntology(_default_tags())
    return _DEFAULT


def load_ontology(source: str | bytes | None = None) -> TagOntology:
    """Build an ontology from a JSON document, or the built-in default.

    Tags missing a ``token`` get the next free Private Use Area codepoint
    after the highest one in use.
    """
    if source is None:
        return default_ontology()
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise OntologyError(f"malformed ontology document: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("tags"), list):
        raise OntologyError("ontology document needs a 'tags' array")
    used = {e.get("token") for e in doc["tags"] if isinstance(e, dict) and e.get("token")}
    next_cp = PUA_START
    tags = []
    for i, entry in enumerate(doc["tags"]):
        if not isinstance(entry, dict):
            raise OntologyError(f"tag entry {i} is not an object")
        try:
            name = entry["name"]
            level = int(entry["level"])
        except (KeyError, TypeError, ValueError):
            raise OntologyError(f"tag entry {i} needs 'name' and an integer 'level'") from None
        token = entry.get("token")
        if not token:
            while chr(next_cp) in used:
                next_cp += 1
            token = chr(next_cp)
            used.add(token)
        tags.append(Tag(int(entry.get("id", i)), name, level, token, entry.get("display", name)))
    card = doc.get("level_cardinality")
    if card is not None and not isinstance(card, dict):
        raise OntologyError("level_cardinality must be an object")
    return TagOntology(tags, card, name=doc.get("name", "custom"))


def canonical_label(tags: Iterable[int | str | Tag], ont: TagOntology | None = None) -> EntityLabel:
    """Sort and validate a set of tags into an :class:`EntityLabel`.

    Tags may be given as ids, names or :class:`Tag` objects.  Raises
    :class:`LabelError` on duplicates or per-level cardinality violations.
    """
    ont = ont or default_ontology()
    resolved = [t if isinstance(t, Tag) else ont.tag(t) for t in tags]
    key = frozenset(resolved)
    cached = ont._label_cache.get(key)
    if cached is not None and len(key) == len(resolved):
        return cached
    if not resolved:
        raise LabelError("empty label")
    if len(key) != len(resolved):
        dup = next(t for t in resolved if resolved.count(t) > 1)
        raise LabelError(f"duplicate component {dup.name!r}")
    counts = {1: 0, 2: 0, 3: 0, 4: 0}
    for t in resolved:
        if ont.by_id.get(t.id) != t:
            raise LabelError(f"tag {t.name!r} is not part of ontology {ont.name!r}")
        counts[t.level] += 1
    for level in (1, 2, 3, 4):
        lo, hi = ont.cardinality.get(level, (0, 0))
        if counts[level] < lo:
            raise LabelError(f"missing level-{level} component")
        if counts[level] > hi:
            raise LabelError(f"too many level-{level} components ({counts[level]} > {hi})")
    ordered = sorted((ont.by_id[t.id] for t in resolved), key=lambda t: (t.level, t.order))
    label = EntityLabel(tuple(ordered))
    ont._label_cache[key] = label
    return label


def check_label(tags: Iterable[Tag], ont: TagOntology) -> str | None:
    """Return the reason a tag collection is not a valid label, or None."""
    try:
        canonical_label(tags, ont)
    except LabelError as exc:
        return str(exc)
    return None


def composite_name(label: EntityLabel) -> str:
    return "_".join(t.name for t in label.components)


def parse_composite(name: str, ont: TagOntology | None = None) -> EntityLabel:
    """Inverse of :func:`composite_name`; greedy longest match over tag names."""
    ont = ont or default_ontology()
    parts: list[Tag] = []
    pos = 0
    while pos < len(name):
        for cand in ont._names_longest_first:
            end = pos + len(cand)
            if name.startswith(cand, pos) and (end == len(name) or name[end] == "_"):
                parts.append(ont.by_name[cand])
                pos = end + 1
                break
        else:
            raise LabelError(f"unknown component at {name[pos:]!r} in {name!r}")
    if not parts or name.endswith("_"):
        raise LabelError(f"malformed composite name {name!r}")
    label = canonical_label(parts, ont)
    if label.components != tuple(parts):
        raise LabelError(f"components of {name!r} are not in canonical order")
    return label
