"""Command line interface.

Exit codes: 0 success, 1 validation or evaluation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .codecs import CodecOptions, DecodeError, DecodePolicy, EncodingScheme
from .docmodel import (DocumentError, StatsReport, corpus_entries, page_stats, plain_text,
                       read_document, read_manifest, validate_page, write_document,
                       write_manifest)
from .layout import LayoutError, parse_page, parse_page_report, serialize_page
from .metrics import (EvalReport, IehhrReport, _token_codes, distance, iehhr_eval, segments_of,
                      score_segments)
from . import _align
from .ontology import OntologyError, TagOntology, load_ontology
from .syngen import GenConfig, LexiconError, generate_corpus, load_lexicons

ENV_ONTOLOGY = "TAGREC_ONTOLOGY"


class CliFailure(Exception):
    pass


def _ontology(path: str | None) -> TagOntology:
    path = path or os.environ.get(ENV_ONTOLOGY)
    if not path:
        return load_ontology()
    return load_ontology(Path(path).read_text(encoding="utf-8"))


def _pmap(fn, items: list, jobs: int) -> list:
    """Ordered map, optionally over worker processes."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _label_entries(directory: Path) -> list[dict]:
    return corpus_entries(directory, suffix=".txt")


def _options(args) -> CodecOptions:
    return CodecOptions(close_mark=getattr(args, "close_mark", "/"))


# -- encode ------------------------------------------------------------------

def _encode_one(job):
    path, entry, scheme, ont, options = job
    try:
        page = read_document(Path(path).read_text(encoding="utf-8"), ont)
    except (DocumentError, OSError) as exc:
        return entry, None, str(exc)
    return entry, serialize_page(page, scheme, ont, options), None


def cmd_encode(args) -> int:
    ont = _ontology(args.ontology)
    src, out = Path(args.input), Path(args.out)
    entries = corpus_entries(src) if src.is_dir() else []
    if not entries:
        _err(f"{src}: no pages found")
        return 1
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(str(src / e["file"]), e, args.scheme, ont, _options(args)) for e in entries]
    failed = 0
    label_entries = []
    for entry, text, error in _pmap(_encode_one, jobs, args.jobs):
        if error:
            _err(f"{entry['file']}: {error}")
            failed += 1
            continue
        name = f"{Path(entry['file']).stem}.txt"
        (out / name).write_text(text + "\n", encoding="utf-8")
        label_entries.append({**entry, "file": name})
    manifest = read_manifest(src) or {}
    meta = dict(manifest.get("meta", {}))
    meta["scheme"] = int(args.scheme)
    write_manifest(out, label_entries, meta)
    return 1 if failed else 0


# -- decode ------------------------------------------------------------------

def _decode_one(job):
    path, entry, scheme, policy, ont = job
    try:
        text = Path(path).read_text(encoding="utf-8")
        page, diags = parse_page_report(text, policy, scheme, ont, page_id=entry["id"])
    except (LayoutError, OSError) as exc:
        return entry, None, None, str(exc)
    if policy is DecodePolicy.STRICT:
        problems = validate_page(page, ont)
        if problems:
            return entry, None, None, "; ".join(problems)
    return entry, write_document(page), [d.to_dict() for d in diags], None


def cmd_decode(args) -> int:
    ont = _ontology(args.ontology)
    src, out = Path(args.input), Path(args.out)
    entries = _label_entries(src) if src.is_dir() else []
    if not entries:
        _err(f"{src}: no pages found")
        return 1
    scheme = args.scheme or (read_manifest(src) or {}).get("meta", {}).get("scheme")
    if scheme is None:
        _err("--scheme is required (no scheme recorded in the label manifest)")
        return 2
    policy = DecodePolicy(args.policy)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(str(src / e["file"]), e, EncodingScheme(int(scheme)), policy, ont) for e in entries]
    failed = 0
    page_entries = []
    for entry, doc, diags, error in _pmap(_decode_one, jobs, args.jobs):
        if error:
            _err(f"{entry['file']}: {error}")
            failed += 1
            continue
        name = f"{Path(entry['file']).stem}.json"
        (out / name).write_text(doc, encoding="utf-8")
        if diags:
            sidecar = out / f"{Path(entry['file']).stem}.diagnostics.json"
            sidecar.write_text(json.dumps({"file": entry["file"], "diagnostics": diags},
                                          ensure_ascii=False, indent=1, sort_keys=True) + "\n",
                               encoding="utf-8")
        page_entries.append({**entry, "file": name})
    meta = dict((read_manifest(src) or {}).get("meta", {}))
    meta.pop("scheme", None)
    write_manifest(out, page_entries, meta)
    return 1 if failed else 0


# -- convert -----------------------------------------------------------------

def _convert_one(job):
    path, entry, src_scheme, dst_scheme, policy, ont, options = job
    try:
        text = Path(path).read_text(encoding="utf-8")
        page = parse_page(text, policy, src_scheme, ont, page_id=entry["id"])
    except (LayoutError, OSError) as exc:
        return entry, None, str(exc)
    return entry, serialize_page(page, dst_scheme, ont, options), None


def cmd_convert(args) -> int:
    ont = _ontology(args.ontology)
    src, out = Path(args.input), Path(args.out)
    entries = _label_entries(src) if src.is_dir() else []
    if not entries:
        _err(f"{src}: no pages found")
        return 1
    src_scheme = args.from_scheme or (read_manifest(src) or {}).get("meta", {}).get("scheme")
    if src_scheme is None:
        _err("--from is required (no scheme recorded in the label manifest)")
        return 2
    out.mkdir(parents=True, exist_ok=True)
    policy = DecodePolicy(args.policy)
    jobs = [(str(src / e["file"]), e, EncodingScheme(int(src_scheme)), args.scheme, policy, ont,
             _options(args)) for e in entries]
    failed = 0
    kept = []
    for entry, text, error in _pmap(_convert_one, jobs, args.jobs):
        if error:
            _err(f"{entry['file']}: {error}")
            failed += 1
            continue
        (out / entry["file"]).write_text(text + "\n", encoding="utf-8")
        kept.append(entry)
    meta = dict((read_manifest(src) or {}).get("meta", {}))
    meta["scheme"] = int(args.scheme)
    write_manifest(out, kept, meta)
    return 1 if failed else 0


# -- eval --------------------------------------------------------------------

def _eval_one(job):
    ref_path, hyp_path, page_id, scheme, policy, threshold, ont = job
    ref = read_document(Path(ref_path).read_text(encoding="utf-8"), ont)
    hyp_text = Path(hyp_path).read_text(encoding="utf-8")
    hyp, diags = parse_page_report(hyp_text, policy, scheme, ont, page_id=page_id)
    entities = score_segments(segments_of(ref), segments_of(hyp), threshold)
    ref_plain, hyp_plain = plain_text(ref), plain_text(hyp)
    ref_tokens, hyp_tokens = ref_plain.split(), hyp_plain.split()
    char_edits = distance(ref_plain, hyp_plain)
    word_edits = 0 if ref_tokens == hyp_tokens else _align.distance_codes(
        *_token_codes(ref_tokens, hyp_tokens))
    iehhr = iehhr_eval(ref, hyp)
    return (page_id, entities, char_edits, len(ref_plain), word_edits, len(ref_tokens), iehhr,
            len(diags))


def build_eval_report(results, scheme, policy, threshold) -> dict:
    entities = EvalReport()
    iehhr = IehhrReport()
    char_edits = ref_chars = word_edits = ref_words = diagnostics = 0
    for _, ents, ce, rc, we, rw, ie, nd in results:
        entities = entities.merge(ents)
        iehhr = iehhr.merge(ie)
        char_edits += ce
        ref_chars += rc
        word_edits += we
        ref_words += rw
        diagnostics += nd
    return {
        "pages": len(results),
        "scheme": int(scheme),
        "policy": policy.value,
        "threshold": threshold,
        "cer": char_edits / max(1, ref_chars),
        "wer": word_edits / max(1, ref_words),
        "char_edits": char_edits,
        "ref_chars": ref_chars,
        "word_edits": word_edits,
        "ref_words": ref_words,
        "entities": entities.to_dict(),
        "iehhr": {"basic": iehhr.basic, "complete": iehhr.complete, "records": len(iehhr.records)},
        "diagnostics": diagnostics,
    }


def report_table(report: dict) -> str:
    ents = EvalReport()
    for name, row in report["entities"]["categories"].items():
        s = ents.score(name)
        s.tp, s.fp, s.fn = row["tp"], row["fp"], row["fn"]
    lines = [ents.to_table(), "",
             f"pages        {report['pages']:>8}",
             f"CER (%)      {100 * report['cer']:>8.2f}",
             f"WER (%)      {100 * report['wer']:>8.2f}",
             f"F1 (%)       {100 * report['entities']['micro']['f1']:>8.2f}",
             f"IEHHR basic  {report['iehhr']['basic']:>8.2f}",
             f"IEHHR compl. {report['iehhr']['complete']:>8.2f}"]
    return "\n".join(lines) + "\n"


def cmd_eval(args) -> int:
    ont = _ontology(args.ontology)
    ref_dir, hyp_dir = Path(args.ref), Path(args.hyp)
    ref_entries = corpus_entries(ref_dir) if ref_dir.is_dir() else []
    hyp_entries = _label_entries(hyp_dir) if hyp_dir.is_dir() else []
    if not ref_entries:
        _err(f"{ref_dir}: no pages found")
        return 1
    ref_ids = {e["id"]: e for e in ref_entries}
    hyp_ids = {e["id"]: e for e in hyp_entries}
    if set(ref_ids) != set(hyp_ids):
        missing = sorted(set(ref_ids) - set(hyp_ids))
        extra = sorted(set(hyp_ids) - set(ref_ids))
        _err(f"page id mismatch: missing hypotheses {missing[:5]}, unexpected {extra[:5]}")
        return 1
    scheme = args.scheme or (read_manifest(hyp_dir) or {}).get("meta", {}).get("scheme")
    if scheme is None:
        _err("--scheme is required (no scheme recorded in the label manifest)")
        return 2
    scheme = EncodingScheme(int(scheme))
    policy = DecodePolicy(args.policy)
    jobs = [(str(ref_dir / e["file"]), str(hyp_dir / hyp_ids[e["id"]]["file"]), e["id"], scheme,
             policy, args.threshold, ont) for e in ref_entries]
    try:
        results = _pmap(_eval_one, jobs, args.jobs)
    except (DocumentError, LayoutError, DecodeError) as exc:
        _err(str(exc))
        return 1
    report = build_eval_report(results, scheme, policy, args.threshold)
    text = json.dumps(report, sort_keys=True, indent=1) + "\n"
    table = report_table(report)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(text, encoding="utf-8")
        (out / "report.txt").write_text(table, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.out:
        sys.stdout.write(table)
    else:
        sys.stderr.write(table)
    return 0


# -- gen / stats / validate --------------------------------------------------

def cmd_gen(args) -> int:
    ont = _ontology(args.ontology)
    try:
        cfg = GenConfig(seed=args.seed, records_min=args.records_min, records_max=args.records_max,
                        c_prob=args.c_prob, label_prob=args.label_prob,
                        repeat_prob=args.repeat_prob, carrier_path=args.carriers)
        lex = load_lexicons(Path(args.lexicons).read_text(encoding="utf-8"), ont) \
            if args.lexicons else None
    except (ValueError, LexiconError) as exc:
        _err(str(exc))
        return 2
    custom = lex is not None or args.ontology or os.environ.get(ENV_ONTOLOGY)
    generate_corpus(cfg, args.n, args.out, lex, ont if custom else None,
                    jobs=1 if custom else args.jobs)
    return 0


def _stats_one(job):
    path, ont = job
    return page_stats(read_document(Path(path).read_text(encoding="utf-8"), ont))


def cmd_stats(args) -> int:
    ont = _ontology(args.ontology)
    src = Path(args.input)
    entries = corpus_entries(src) if src.is_dir() else []
    if not entries:
        _err(f"{src}: no pages found")
        return 1
    try:
        parts = _pmap(_stats_one, [(str(src / e["file"]), ont) for e in entries], args.jobs)
    except DocumentError as exc:
        _err(str(exc))
        return 1
    total = StatsReport()
    for p in parts:
        total = total + p
    text = json.dumps(total.to_dict(), ensure_ascii=False, sort_keys=True, indent=1) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _validate_one(job):
    path, scheme, ont = job
    problems = []
    try:
        text = Path(path).read_text(encoding="utf-8")
        if scheme is None:
            page = read_document(text, ont)
        else:
            page = parse_page(text, DecodePolicy.STRICT, scheme, ont)
    except (DocumentError, LayoutError, OSError) as exc:
        return [str(exc)]
    problems.extend(validate_page(page, ont))
    if problems:
        return problems
    for s in [scheme] if scheme is not None else list(EncodingScheme):
        try:
            again = parse_page(serialize_page(page, s, ont), DecodePolicy.STRICT, s, ont,
                               page_id=page.id)
        except LayoutError as exc:
            again = None
            problems.append(f"scheme {int(s)}: {exc}")
        if again is not None and again != page:
            problems.append(f"scheme {int(s)}: round trip changed the page")
    return problems


def cmd_validate(args) -> int:
    ont = _ontology(args.ontology)
    src = Path(args.input)
    scheme = EncodingScheme(int(args.scheme)) if args.scheme else None
    entries = (corpus_entries(src) if scheme is None else _label_entries(src)) if src.is_dir() else []
    if not entries:
        _err(f"{src}: no pages found")
        return 1
    results = _pmap(_validate_one, [(str(src / e["file"]), scheme, ont) for e in entries], args.jobs)
    count = 0
    for entry, problems in zip(entries, results):
        for p in problems:
            print(f"{entry['file']}: {p}")
            count += 1
    print(f"{len(entries)} pages, {count} problems", file=sys.stderr)
    return 1 if count else 0


# -- argument parsing --------------------------------------------------------

def _scheme(value: str) -> EncodingScheme:
    try:
        return EncodingScheme(int(value))
    except ValueError:
        raise argparse.ArgumentTypeError(f"scheme must be one of 1..5, got {value!r}") from None


def _probability(value: str) -> float:
    p = float(value)
    if not 0.0 <= p <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {value}")
    return p


def argparser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--ontology", metavar="PATH",
                        help=f"ontology JSON file (default: ${ENV_ONTOLOGY} or built-in)")
    common.add_argument("--jobs", type=int, default=1, metavar="INT", help="worker processes")

    ap = argparse.ArgumentParser(prog="tagrec", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"tagrec {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", parents=[common], help="corpus -> layout/entity label files")
    p.add_argument("--in", dest="input", required=True, metavar="DIR")
    p.add_argument("--scheme", type=_scheme, required=True)
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--close-mark", choices=["/", "\\"], default="/")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", parents=[common], help="label files -> corpus")
    p.add_argument("--in", dest="input", required=True, metavar="DIR")
    p.add_argument("--scheme", type=_scheme)
    p.add_argument("--policy", choices=["strict", "lenient"], default="strict")
    p.add_argument("--out", required=True, metavar="DIR")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("convert", parents=[common], help="label files between schemes")
    p.add_argument("--in", dest="input", required=True, metavar="DIR")
    p.add_argument("--from", dest="from_scheme", type=_scheme)
    p.add_argument("--scheme", type=_scheme, required=True)
    p.add_argument("--policy", choices=["strict", "lenient"], default="strict")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--close-mark", choices=["/", "\\"], default="/")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("eval", parents=[common], help="score hypotheses against a corpus")
    p.add_argument("--ref", required=True, metavar="DIR")
    p.add_argument("--hyp", required=True, metavar="DIR")
    p.add_argument("--scheme", type=_scheme)
    p.add_argument("--policy", choices=["strict", "lenient"], default="lenient")
    p.add_argument("--threshold", type=_probability, default=0.30)
    p.add_argument("--out", metavar="DIR")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--records-min", type=int, default=1)
    p.add_argument("--records-max", type=int, default=3)
    p.add_argument("--c-prob", type=_probability, default=0.5)
    p.add_argument("--label-prob", type=_probability, default=1.0)
    p.add_argument("--repeat-prob", type=_probability, default=0.3)
    p.add_argument("--carriers", metavar="PATH", help="sentence file, one sentence per line")
    p.add_argument("--lexicons", metavar="PATH")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("stats", parents=[common], help="corpus statistics")
    p.add_argument("--in", dest="input", required=True, metavar="DIR")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("validate", parents=[common], help="check a corpus or label files")
    p.add_argument("--in", dest="input", required=True, metavar="DIR")
    p.add_argument("--scheme", type=_scheme, help="validate label files in this scheme")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = argparser().parse_args(argv)
    if args.command == "gen" and args.n < 1:
        argparser().error("--n must be at least 1")
    try:
        return args.func(args)
    except (OntologyError, DocumentError, OSError) as exc:
        _err(str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
