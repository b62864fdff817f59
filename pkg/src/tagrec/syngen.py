"""Seeded generator of synthetic labeled pages.

Each record body follows the usual order of a marriage act: date and time
of the marriage, the husband and his parents, the wife and hers, then two
witnesses.  Labeled value slots are separated by fixed connector words and
by carrier sentences drawn from a plain-text sentence corpus; marginal C
blocks hold carrier sentences only.

Every page is generated from its own ``random.Random`` (MT19937) seeded by
``sha256("<seed>:<page index>")``, so pages can be produced in any order or
in parallel with identical results.
"""

from __future__ import annotations

import hashlib
import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

from .docmodel import (Block, DocumentError, Page, RecordD, Word, reserved_reason, write_document,
                       write_manifest)
from .ontology import EntityLabel, TagOntology, canonical_label, default_ontology

PRNG_ID = "python-random-mt19937/sha256-page-seed"
TEMPLATE_VERSION = 1


class LexiconError(ValueError):
    pass


class Lexicons:
    """Value pools (word lists or integer ranges) for every level-4 tag."""

    def __init__(self, pools: Mapping[str, list[str]], ranges: Mapping[str, tuple[int, int]]):
        self.pools = {k: [v.split() for v in vals] for k, vals in pools.items()}
        self.ranges = dict(ranges)

    def sample(self, tag: str, rng: random.Random) -> list[str]:
        if tag in self.ranges:
            lo, hi = self.ranges[tag]
            return [str(rng.randint(lo, hi))]
        return self.pools[tag][rng.randrange(len(self.pools[tag]))]

    def covers(self, tag: str) -> bool:
        return tag in self.ranges or tag in self.pools


def load_lexicons(source: str | bytes | None = None, ont: TagOntology | None = None) -> Lexicons:
    ont = ont or default_ontology()
    if source is None:
        source = resources.files("tagrec").joinpath("data/lexicons.json").read_text(encoding="utf-8")
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise LexiconError(f"malformed lexicon file: {exc}") from None
    if not isinstance(doc, dict):
        raise LexiconError("lexicon file must map tag names to values")
    pools, ranges = {}, {}
    for name, value in doc.items():
        if isinstance(value, dict):
            try:
                lo, hi = int(value["min"]), int(value["max"])
            except (KeyError, TypeError, ValueError):
                raise LexiconError(f"range for {name!r} needs integer min and max") from None
            if lo > hi:
                raise LexiconError(f"empty range for {name!r}")
            ranges[name] = (lo, hi)
        elif isinstance(value, list):
            if not value:
                raise LexiconError(f"empty pool for {name!r}")
            for v in value:
                if not isinstance(v, str) or not v.split():
                    raise LexiconError(f"pool {name!r} has an empty or non-string value")
                for word in v.split():
                    why = reserved_reason(word, ont)
                    if why:
                        raise LexiconError(f"pool {name!r}: {why}")
            pools[name] = value
        else:
            raise LexiconError(f"pool {name!r} must be an array or a {{min, max}} range")
    for tag in ont.tags:
        if tag.level == 4 and tag.name not in pools and tag.name not in ranges:
            raise LexiconError(f"missing pool for level-4 tag {tag.name!r}")
    return Lexicons(pools, ranges)


def load_carriers(source: str | None = None, ont: TagOntology | None = None) -> list[tuple[str, ...]]:
    """Carrier sentences, one per line, as word tuples."""
    ont = ont or default_ontology()
    if source is None:
        source = resources.files("tagrec").joinpath("data/carriers.txt").read_text(encoding="utf-8")
    sentences = []
    for n, line in enumerate(source.splitlines(), 1):
        words = tuple(line.split())
        if not words:
            continue
        for w in words:
            why = reserved_reason(w, ont)
            if why:
                raise LexiconError(f"carrier sentence line {n}: {why}")
        sentences.append(words)
    if not sentences:
        raise LexiconError("carrier corpus is empty")
    return sentences


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    records_min: int = 1
    records_max: int = 3
    c_prob: float = 0.5
    label_prob: float = 1.0
    repeat_prob: float = 0.3
    carriers_min: int = 0
    carriers_max: int = 2
    carrier_path: str | None = None

    def __post_init__(self):
        for name in ("c_prob", "label_prob", "repeat_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if not 1 <= self.records_min <= self.records_max:
            raise ValueError("need 1 <= records_min <= records_max")
        if not 0 <= self.carriers_min <= self.carriers_max:
            raise ValueError("need 0 <= carriers_min <= carriers_max")


# Record body template.  A string is a run of connector words, a tuple is a
# labeled value slot, and GAP is where carrier sentences may go.
GAP = None


def _person(role: str, child: str, spouse_of: str | None) -> list:
    items = [
        (role, "first_name"), (role, "family_name"), ",",
        (role, "occupation"), "né à" if role == "husband" else "née à",
        (role, "birth", "city"),
    ]
    items += ["département de la", (role, "birth", "departement")] if role == "husband" \
        else ["en", (role, "birth", "country")]
    items += [
        "le", (role, "birth", "day"), (role, "birth", "month"), (role, "birth", "year"),
        "âgé de" if role == "husband" else "âgée de", (role, "age"), "ans demeurant",
        (role, "residence", "street_number"), (role, "residence", "street_type"),
        (role, "residence", "street_name"), "à", (role, "residence", "city"), GAP,
    ]
    if spouse_of:
        items += ["veuve de", (role, spouse_of, "first_name"), (role, spouse_of, "family_name"), GAP]
    items += [
        f"{child} de", (role, "father", "first_name"), (role, "father", "family_name"),
        (role, "father", "occupation"), "et de", (role, "mother", "first_name"),
        (role, "mother", "family_name"), "demeurant ensemble à",
        (role, "father", "mother", "residence", "city"), GAP,
    ]
    return items


def _witness() -> list:
    return [("witness", "first_name"), ("witness", "family_name"), ",",
            ("witness", "occupation"), "âgé de", ("witness", "age"), "ans demeurant à",
            ("witness", "residence", "city")]


RECORD_TEMPLATE: list = (
    ["L'an", ("administrative", "year"), "le", ("administrative", "day"),
     ("administrative", "month"), "à", ("administrative", "hour"), "heures",
     ("administrative", "minute"), "devant nous ont comparu publiquement", GAP]
    + _person("husband", "fils", None)
    + ["et"]
    + _person("wife", "fille", "ex_husband")
    + ["en présence de"] + _witness() + ["et de"] + _witness()
    + [GAP, "lesquels ont signé avec nous après lecture."]
)


def template_slot_count() -> int:
    return sum(1 for item in RECORD_TEMPLATE if isinstance(item, tuple))


def page_seed(seed: int, index: int) -> int:
    digest = hashlib.sha256(f"{seed}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class _Generator:
    def __init__(self, cfg: GenConfig, lex: Lexicons, ont: TagOntology, carriers):
        self.cfg = cfg
        self.lex = lex
        self.ont = ont
        self.carriers = carriers
        self.labels: dict[tuple, EntityLabel] = {
            item: canonical_label(item, ont) for item in RECORD_TEMPLATE if isinstance(item, tuple)
        }
        self.fixed = {item: tuple(Word(w) for w in item.split())
                      for item in RECORD_TEMPLATE if isinstance(item, str)}

    def sentence(self, rng) -> tuple[Word, ...]:
        return tuple(Word(w) for w in self.carriers[rng.randrange(len(self.carriers))])

    def body(self, rng, extra: dict[int, tuple[Word, ...]], gap_base: int) -> tuple[list[Word], dict]:
        cfg = self.cfg
        words: list[Word] = []
        names: dict[str, str] = {}
        gap = gap_base
        for item in RECORD_TEMPLATE:
            if item is GAP:
                for _ in range(rng.randint(cfg.carriers_min, cfg.carriers_max)):
                    words.extend(self.sentence(rng))
                words.extend(extra.get(gap, ()))
                gap += 1
            elif isinstance(item, str):
                words.extend(self.fixed[item])
            else:
                value = self.lex.sample(item[-1], rng)
                label = self.labels[item] if rng.random() < cfg.label_prob else None
                words.extend(Word(v, label) for v in value)
                if item[-1] == "family_name" and len(item) == 2 and item[0] in ("husband", "wife"):
                    names[item[0]] = " ".join(value)
        return words, names

    def page(self, index: int) -> Page:
        cfg = self.cfg
        rng = random.Random(page_seed(cfg.seed, index))
        n_records = rng.randint(cfg.records_min, cfg.records_max)
        gaps_per_record = sum(1 for item in RECORD_TEMPLATE if item is GAP)
        extra: dict[int, tuple[Word, ...]] = {}
        if rng.random() < cfg.repeat_prob:
            total = gaps_per_record * n_records
            repeated = self.sentence(rng)
            for g in rng.sample(range(total), min(total, rng.randint(2, 3))):
                extra[g] = repeated
        records = []
        for r in range(n_records):
            body, names = self.body(rng, extra, r * gaps_per_record)
            margin = [str(rng.randint(1, 999))] + names.get("husband", "X").split() + ["et"] \
                + names.get("wife", "X").split()
            notes = []
            if rng.random() < cfg.c_prob:
                for _ in range(1 if rng.random() < 0.8 else 2):
                    note: list[Word] = []
                    for _ in range(rng.randint(1, 3)):
                        note.extend(self.sentence(rng))
                    notes.append(Block("C", tuple(note)))
            records.append(RecordD(Block("A", tuple(Word(w) for w in margin)),
                                   Block("B", tuple(body)), tuple(notes)))
        return Page(f"page_{index:05d}", tuple(records))


_CARRIERS: dict = {}
_LEXICONS: dict = {}


def _generator(cfg: GenConfig, lex: Lexicons | None, ont: TagOntology | None) -> _Generator:
    ont = ont or default_ontology()
    key = (cfg.carrier_path, ont)
    if key not in _CARRIERS:
        text = Path(cfg.carrier_path).read_text(encoding="utf-8") if cfg.carrier_path else None
        _CARRIERS[key] = load_carriers(text, ont)
    if lex is None:
        if ont not in _LEXICONS:
            _LEXICONS[ont] = load_lexicons(None, ont)
        lex = _LEXICONS[ont]
    return _Generator(cfg, lex, ont, _CARRIERS[key])


def generate_page(cfg: GenConfig, lex: Lexicons | None = None, ont: TagOntology | None = None,
                  index: int = 0) -> Page:
    """The ``index``-th page of the corpus described by ``cfg``."""
    return _generator(cfg, lex, ont).page(index)


def generate_pages(cfg: GenConfig, n: int, lex: Lexicons | None = None,
                   ont: TagOntology | None = None, start: int = 0) -> list[Page]:
    gen = _generator(cfg, lex, ont)
    return [gen.page(i) for i in range(start, start + n)]


def assign_splits(n: int, seed: int) -> list[str]:
    """80/10/10 split; pages are ranked by a seed-derived hash of their index."""
    order = sorted(range(n), key=lambda i: (page_seed(seed ^ 0x5EED, i), i))
    n_valid = n_test = n // 10
    splits = ["train"] * n
    for rank, i in enumerate(order):
        if rank < n_valid:
            splits[i] = "valid"
        elif rank < n_valid + n_test:
            splits[i] = "test"
    return splits


def _write_chunk(args) -> None:
    cfg, start, stop, out = args
    gen = _generator(cfg, None, None)
    for i in range(start, stop):
        page = gen.page(i)
        (Path(out) / f"{page.id}.json").write_text(write_document(page), encoding="utf-8")


def generate_corpus(cfg: GenConfig, n: int, out: str | Path, lex: Lexicons | None = None,
                    ont: TagOntology | None = None, jobs: int = 1) -> dict:
    """Write ``n`` page files and a manifest into ``out``; returns the manifest."""
    if n < 1:
        raise ValueError("corpus needs at least one page")
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DocumentError(f"cannot create {out}: {exc}") from None
    if jobs > 1 and lex is None and ont is None:
        step = -(-n // jobs)
        chunks = [(cfg, s, min(n, s + step), str(out)) for s in range(0, n, step)]
        with ProcessPoolExecutor(jobs) as pool:
            list(pool.map(_write_chunk, chunks))
    else:
        gen = _generator(cfg, lex, ont)
        for i in range(n):
            page = gen.page(i)
            (out / f"{page.id}.json").write_text(write_document(page), encoding="utf-8")
    splits = assign_splits(n, cfg.seed)
    entries = [{"file": f"page_{i:05d}.json", "id": f"page_{i:05d}", "split": splits[i]}
               for i in range(n)]
    meta = {"generator": "tagrec.syngen", "template_version": TEMPLATE_VERSION,
            "prng": PRNG_ID, "config": asdict(cfg)}
    write_manifest(out, entries, meta)
    return {"pages": entries, "meta": meta}
