import pytest

from tagrec.docmodel import Word
from tagrec.ontology import canonical_label, default_ontology

# Two records as printed in a sample page annotation (long passages elided).
SAMPLE_PAGE = """\
<D><A>595 Jegou et Boulin</A>
<B>Le vingt Février mil neuf cent vingt, seize heures devant
[...] époux et nous Alphonse Louis Malètre maire-adjoint du
dix-septième arrondissement de Paris</B>
<C>680. Mariage dissous par Jugement de divorce rendu le
[...] Le Maire</C></D>
<D><A>787 Delagarde et Meslé</A>
<B>L'an mil huit cent quatre vingt-dix le quatre novembre
à dix, [...] le père de l'épouse et Nous, après lecture.</B>
<C>Approuvé la rature de quinze mots nuls.</C></D>
"""

_TOKENS = {t.name: t.token for t in default_ontology().tags}
W, F, FN, FAM = (_TOKENS[n] for n in ("wife", "father", "first_name", "family_name"))

# The father-of-the-bride fragment in each of the five encodings.
EXPECTED = {
    1: f"{FN}{F}{W}Louis {FN}{F}{W}Alexandre {FAM}{F}{W}MOUDEL",
    2: f"Louis{W}{F}{FN} Alexandre{W}{F}{FN} MOUDEL{W}{F}{FAM}",
    3: (f"<{W}> <{F}> <{FN}> Louis </{FN}> </{F}> </{W}> "
        f"<{W}> <{F}> <{FN}> Alexandre </{FN}> </{F}> </{W}> "
        f"<{W}> <{F}> <{FAM}> MOUDEL </{FAM}> </{F}> </{W}>"),
    4: f"<{W}> <{F}> <{FN}> Louis Alexandre </{FN}> <{FAM}> MOUDEL </{FAM}> </{F}> </{W}>",
    5: "Louis<wife_father_first_name> Alexandre<wife_father_first_name> "
       "MOUDEL<wife_father_family_name>",
}

# "wife" is opened on the first word and never closed.
UNCLOSED = (f"<{W}> <{FN}> Marie </{FN}> <{FAM}> Dupont </{FAM}> <{_TOKENS['age']}> 24 "
            f"</{_TOKENS['age']}> <{_TOKENS['occupation']}> couturière </{_TOKENS['occupation']}> "
            f"<{_TOKENS['city']}> Paris </{_TOKENS['city']}>")
UNCLOSED_LABELS = ["wife_first_name", "wife_family_name", "wife_age", "wife_occupation",
                   "wife_city"]


@pytest.fixture(scope="session")
def ont():
    return default_ontology()


def tok(name, ont=None):
    """Serialized token of a tag given by name."""
    return (ont or default_ontology()).by_name[name].token


def lab(*names):
    return canonical_label(names)


def words(*pairs):
    """Build words from ``text`` strings or ``(text, [tag names])`` pairs."""
    out = []
    for p in pairs:
        if isinstance(p, str):
            out.append(Word(p))
        else:
            out.append(Word(p[0], lab(*p[1])))
    return out


@pytest.fixture
def moudel():
    first = ["wife", "father", "first_name"]
    return words(("Louis", first), ("Alexandre", first),
                 ("MOUDEL", ["wife", "father", "family_name"]))


def dp_oracle(a, b):
    """Full-matrix Levenshtein with the diagonal > insert > delete backtrace."""
    n, m = len(a), len(b)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d[i][j] = min(d[i - 1][j - 1] + (a[i - 1] != b[j - 1]), d[i][j - 1] + 1,
                          d[i - 1][j] + 1)
    ops = []
    i, j = n, m
    while i or j:
        if i and j and d[i - 1][j - 1] + (a[i - 1] != b[j - 1]) == d[i][j]:
            ops.append(0 if a[i - 1] == b[j - 1] else 1)
            i, j = i - 1, j - 1
        elif j and d[i][j - 1] + 1 == d[i][j]:
            ops.append(2)
            j -= 1
        else:
            ops.append(3)
            i -= 1
    return d[n][m], ops[::-1]


def noisy_page(page, seed, char_rate=0.05, label_rate=0.05):
    """A perturbed copy of ``page``: random character edits and label swaps."""
    import random
    from tagrec.docmodel import Block, Page, RecordD, Word
    from tagrec.ontology import canonical_label

    rng = random.Random(seed)
    alphabet = "abcdefghijklmnopqrstuvwxyzéè0123456789"

    def text(t):
        chars = list(t)
        out = []
        for c in chars:
            r = rng.random()
            if r < char_rate / 3:
                continue
            if r < 2 * char_rate / 3:
                out.append(rng.choice(alphabet))
            elif r < char_rate:
                out.extend([c, rng.choice(alphabet)])
            else:
                out.append(c)
        return "".join(out) or t

    def label(l):
        if l is None or rng.random() >= label_rate:
            return l
        comps = list(l.components)
        comps[0] = rng.choice([n for n in ("husband", "wife", "witness") if n != comps[0].name])
        return canonical_label([c if isinstance(c, str) else c.name for c in comps])

    def block(b):
        return Block(b.kind, tuple(Word(text(w.text), label(w.label)) for w in b.words))

    return Page(page.id, tuple(RecordD(block(r.a), block(r.b), tuple(block(c) for c in r.c))
                               for r in page.records))


# One line per acceptance criterion, echoed at the end of the pytest run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
