"""If-then knowledge bases: parsing, grouping, head-level splits, and a
deterministic synthetic corpus generator for desk-scale experiments.

A knowledge base is a flat list of (head event, relation, tail event)
triples.  All event text is normalized (trimmed, single-spaced,
lowercased) so that grouping keys are stable.
"""
from __future__ import annotations

import io
import random
from dataclasses import dataclass, field
from enum import IntEnum
from typing import BinaryIO, Iterable, TextIO, Union


class KgError(ValueError):
    """Base class for knowledge-base parsing and construction errors."""


class MalformedLine(KgError):
    def __init__(self, line_no: int, reason: str = "expected 3 tab-separated fields"):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class UnknownRelation(KgError):
    def __init__(self, line_no: int, token: str):
        super().__init__(f"line {line_no}: unknown relation {token!r}")
        self.line_no = line_no
        self.token = token


class BadRatios(KgError):
    pass


class Relation(IntEnum):
    """The nine if-then inference dimensions, with stable integer codes."""

    xIntent = 0
    xNeed = 1
    xAttr = 2
    xReact = 3
    xWant = 4
    xEffect = 5
    oReact = 6
    oWant = 7
    oEffect = 8


RELATIONS: tuple[Relation, ...] = tuple(Relation)


def normalize_event(text: str) -> str:
    """Trim, collapse internal whitespace runs, and lowercase."""
    return " ".join(text.split()).lower()


@dataclass(frozen=True)
class Triple:
    """One if-then fact: if `head` and `relation` then `tail`."""

    head: str
    relation: Relation
    tail: str


@dataclass
class TripleStore:
    """Deduplicated triples plus a (head, relation) -> triple-index map.

    Immutable by convention after construction; safe for concurrent reads.
    """

    triples: list[Triple] = field(default_factory=list)
    skipped_count: int = 0
    duplicate_count: int = 0
    _index: dict[tuple[str, Relation], list[int]] = field(default_factory=dict, repr=False)

    @classmethod
    def from_triples(
        cls, triples: Iterable[Triple], skipped_count: int = 0
    ) -> "TripleStore":
        store = cls(skipped_count=skipped_count)
        seen: set[tuple[str, Relation, str]] = set()
        for t in triples:
            if not t.head or not t.tail:
                raise KgError(f"empty head or tail in {t!r}")
            key = (t.head, t.relation, t.tail)
            if key in seen:
                store.duplicate_count += 1
                continue
            seen.add(key)
            store._index.setdefault((t.head, t.relation), []).append(len(store.triples))
            store.triples.append(t)
        return store

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TripleStore):
            return NotImplemented
        return self.triples == other.triples

    def __len__(self) -> int:
        return len(self.triples)

    def heads(self) -> list[str]:
        """Distinct head events in first-seen order."""
        out: list[str] = []
        seen: set[str] = set()
        for t in self.triples:
            if t.head not in seen:
                seen.add(t.head)
                out.append(t.head)
        return out

    def output_sets(self) -> list[tuple[str, Relation, list[str]]]:
        """Group tails by (head, relation), preserving first-seen order."""
        return [
            (head, rel, [self.triples[i].tail for i in idxs])
            for (head, rel), idxs in self._index.items()
        ]

    def tails_for(self, head: str, relation: Relation) -> list[str]:
        return [self.triples[i].tail for i in self._index.get((head, relation), [])]

    def split(
        self, ratios: tuple[float, float, float], seed: int
    ) -> tuple["TripleStore", "TripleStore", "TripleStore"]:
        """Partition by head event so no output set straddles two splits."""
        if any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
            raise BadRatios(f"ratios must be non-negative and sum to 1, got {ratios}")
        heads = self.heads()
        rng = random.Random(seed)
        rng.shuffle(heads)
        n = len(heads)
        b1 = int(n * ratios[0])
        b2 = int(n * (ratios[0] + ratios[1]))
        groups = (set(heads[:b1]), set(heads[b1:b2]), set(heads[b2:]))
        return tuple(
            TripleStore.from_triples(t for t in self.triples if t.head in g)
            for g in groups
        )  # type: ignore[return-value]

    def to_tsv(self, stream: TextIO) -> None:
        for t in self.triples:
            stream.write(f"{t.head}\t{t.relation.name}\t{t.tail}\n")

    def to_tsv_bytes(self) -> bytes:
        buf = io.StringIO()
        self.to_tsv(buf)
        return buf.getvalue().encode("utf-8")


def parse_kg_tsv(stream: Union[BinaryIO, TextIO, Iterable[Union[str, bytes]]]) -> TripleStore:
    """Parse a 3-column TSV (head, relation, tail) into a TripleStore.

    Records whose tail normalizes to "" or "none" are skipped and counted.
    Relation strings are case-sensitive.  Blank lines are ignored.
    """
    triples: list[Triple] = []
    skipped = 0
    for line_no, raw in enumerate(stream, start=1):
        line = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        line = line.rstrip("\r\n")
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise MalformedLine(line_no)
        head = normalize_event(fields[0])
        rel_token = fields[1]
        tail = normalize_event(fields[2])
        if rel_token not in Relation.__members__:
            raise UnknownRelation(line_no, rel_token)
        if not head:
            raise MalformedLine(line_no, "empty head event")
        if not tail or tail == "none":
            skipped += 1
            continue
        triples.append(Triple(head, Relation[rel_token], tail))
    return TripleStore.from_triples(triples, skipped_count=skipped)


# Synthetic corpus grammar.  Heads are "<name> [modifier] <verb> the <object>";
# tails are per-relation mode templates, some referencing the head's object so
# that a trained model can generalize to unseen heads.  Two of the eight mode
# slots draw from a relation-agnostic generic pool: natural corpora contain
# frequent phrases that fit almost any context, and likelihood-based answer
# scoring must face that imbalance here too.

_NAMES = (
    "alex", "bailey", "casey", "devon", "emery", "finley", "harper", "jordan",
    "kendall", "logan", "morgan", "parker", "quinn", "riley", "sage", "taylor",
)
_VERBS = ("paints", "repairs", "organizes", "decorates", "cleans", "builds")
_OBJECTS = ("fence", "boat", "kitchen", "garden", "bookshelf", "cabin", "workshop", "porch")
_MODIFIERS = ("", "often", "carefully", "quietly", "happily", "eagerly", "proudly", "calmly")

# frequent context-independent phrases: two mode slots of the others-oriented
# relations draw from this shared pool, so the trained model faces the same
# phrase-frequency imbalance natural corpora have
GENERIC_TAILS = (
    "everyone spends the evening together",
    "the day goes really well",
    "it becomes a nice story to tell",
    "everything works out just fine",
)

_N_GENERIC_MODES = 2  # o-relation mode slots 6 and 7 draw from GENERIC_TAILS

# every head carries a unique trailing time tag (unique up to 64 heads) in
# its object-bearing tails, so a head-level split leaves genuinely novel
# wording in held-out tails without touching the head text itself
_TIME_TAGS = (
    "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday",
    "january", "february", "march", "april", "may", "june", "july",
    "august", "september", "october", "november", "december",
    "springtime", "summertime", "wintertime", "midyear", "midweek",
    "today", "tomorrow", "tonight", "yesterday", "soon", "later", "early",
    "overnight", "someday", "sometime", "shortly", "eventually", "annually",
    "monthly", "weekly", "daily", "nightly", "quarterly", "forever", "awhile",
    "noon", "midnight", "dawn", "dusk", "sunrise", "sunset", "midday",
    "daybreak", "nightfall", "teatime", "suppertime", "lunchtime", "bedtime",
    "midmorning", "midafternoon", "midnights", "sundown", "sunup", "twilight",
    "afterwards",
)

# per relation: object-bearing templates end with the head's {tag} slot;
# plain templates are head-agnostic.  x-relations list 8 specific modes;
# o-relations list 6, with two mode slots reserved for the generic pool.
_TAIL_TEMPLATES: dict[Relation, tuple[str, ...]] = {
    Relation.xIntent: (
        "keen to make the {obj} look perfect {tag}",
        "keen to keep the {obj} in good shape {tag}",
        "keen to surprise the family with the {obj} {tag}",
        "keen to practice a new skill on the {obj} {tag}",
        "keen to finish the overdue {obj} chore {tag}",
        "keen to feel useful around the house",
        "keen to repay an old favor with the {obj} {tag}",
        "keen to enjoy some quiet work",
    ),
    Relation.xNeed: (
        "to first clear space around the {obj} {tag}",
        "to first buy supplies for the {obj} {tag}",
        "to first measure the {obj} twice {tag}",
        "to first study the {obj} plans {tag}",
        "to first borrow tools for the {obj} {tag}",
        "to first set aside a free afternoon",
        "to first sketch the {obj} layout {tag}",
        "to first roll up both sleeves",
    ),
    Relation.xAttr: (
        "truly proud of the {obj} {tag}",
        "truly devoted to the {obj} {tag}",
        "truly fussy about the {obj} {tag}",
        "truly protective of the {obj} {tag}",
        "truly knowledgeable about the {obj} {tag}",
        "truly hardworking by nature",
        "truly obsessed with the {obj} {tag}",
        "truly fond of steady routines",
    ),
    Relation.xReact: (
        "feels satisfied with the {obj} {tag}",
        "feels glad the {obj} looks better {tag}",
        "feels amazed how the {obj} turned out {tag}",
        "feels relieved the {obj} is finally done {tag}",
        "feels quite attached to the {obj} {tag}",
        "feels tired but happy",
        "feels hopeful about the {obj} {tag}",
        "feels calm and accomplished",
    ),
    Relation.xWant: (
        "hopes to show the {obj} to everyone {tag}",
        "hopes to admire the finished {obj} {tag}",
        "hopes to photograph the {obj} {tag}",
        "hopes to guard the {obj} from rain {tag}",
        "hopes to decorate the {obj} further {tag}",
        "hopes to take a long break",
        "hopes to repaint the {obj} twice {tag}",
        "hopes to rest for the evening",
    ),
    Relation.xEffect: (
        "ends up praised for the {obj} {tag}",
        "ends up with a reputation for the {obj} {tag}",
        "ends up spending the whole day on the {obj} {tag}",
        "ends up with dust from the {obj} everywhere {tag}",
        "ends up thinking about the {obj} all night {tag}",
        "ends up quite tired",
        "ends up winning a prize for the {obj} {tag}",
        "ends up with new confidence",
    ),
    Relation.oReact: (
        "others feel impressed by the {obj} {tag}",
        "others feel curious about the {obj} {tag}",
        "others feel envious of the {obj} {tag}",
        "others feel delighted with the {obj} {tag}",
        "others feel astonished by the {obj} {tag}",
        "others feel grateful for the effort",
    ),
    Relation.oWant: (
        "others hope to borrow the {obj} for a while {tag}",
        "others hope to visit the {obj} in person {tag}",
        "others hope to copy the {obj} design {tag}",
        "others hope to inspect the {obj} closely {tag}",
        "others hope to celebrate near the {obj} {tag}",
        "others hope to learn how it was done",
    ),
    Relation.oEffect: (
        "others get to enjoy the improved {obj} {tag}",
        "others get to gather around the {obj} {tag}",
        "others get to compliment the {obj} often {tag}",
        "others get to take pictures of the {obj} {tag}",
        "others get to meet beside the {obj} {tag}",
        "others get to benefit from the work",
    ),
}

_O_RELATIONS = frozenset({Relation.oReact, Relation.oWant, Relation.oEffect})

_MAX_SYNTH_HEADS = len(_NAMES) * len(_VERBS) * len(_OBJECTS) * len(_MODIFIERS)


def _synth_head(i: int) -> tuple[str, str, str]:
    """Deterministic distinct head for index i: (text, object, time tag).

    The tag appears only in tails, never in the head text, so tails carry
    head-specific wording a model must associate with the head rather than
    copy from it.
    """
    base = len(_NAMES) * len(_VERBS) * len(_OBJECTS)
    mod = _MODIFIERS[i // base]
    j = (i % base) * 541 % base  # coprime scramble spreads objects/verbs early
    name = _NAMES[j % len(_NAMES)]
    verb = _VERBS[(j // len(_NAMES)) % len(_VERBS)]
    obj = _OBJECTS[(j // (len(_NAMES) * len(_VERBS))) % len(_OBJECTS)]
    text = " ".join(p for p in (name, mod, verb, "the", obj) if p)
    return text, obj, _TIME_TAGS[i % len(_TIME_TAGS)]


def synth_kg(n_heads: int, tails_per_set: tuple[int, int], seed: int) -> TripleStore:
    """Deterministic template-grammar corpus.

    Every (head, relation) group receives a tail count drawn uniformly from
    `tails_per_set` (inclusive range within [1, 8]); tails inside a group are
    pairwise distinct token sequences.
    """
    lo, hi = tails_per_set
    if n_heads < 1:
        raise KgError("n_heads must be >= 1")
    if n_heads > _MAX_SYNTH_HEADS:
        raise KgError(f"n_heads must be <= {_MAX_SYNTH_HEADS}")
    if not (1 <= lo <= hi <= 8):
        raise KgError("tails_per_set must satisfy 1 <= lo <= hi <= 8")
    rng = random.Random(seed)
    triples: list[Triple] = []
    generic_start = 8 - _N_GENERIC_MODES
    for i in range(n_heads):
        head, obj, tag = _synth_head(i)
        for rel in RELATIONS:
            generic_slots = rel in _O_RELATIONS
            count = rng.randint(lo, hi)
            modes = rng.sample(range(8), count)
            n_generic = sum(1 for m in modes if m >= generic_start) if generic_slots else 0
            generic_picks = iter(rng.sample(range(len(GENERIC_TAILS)), n_generic))
            for m in modes:
                if generic_slots and m >= generic_start:
                    tail = GENERIC_TAILS[next(generic_picks)]
                else:
                    tail = _TAIL_TEMPLATES[rel][m].format(obj=obj, tag=tag)
                triples.append(Triple(head, rel, tail))
    return TripleStore.from_triples(triples)
