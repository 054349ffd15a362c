"""Tokenization and vocabulary construction.

The vocabulary carries three families of reserved symbols as first-class
tokens: PAD/BOS/EOS/UNK specials, the nine relation symbols, and K latent
symbols.  Reserved surface forms contain the bracket characters "⟨⟩",
which are filtered out of corpus text, so collisions are impossible.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .kg import RELATIONS, Relation, TripleStore

_SPLIT_PUNCT = ".,!?';"
_RESERVED_CHARS = "⟨⟩"

PAD_TOKEN = "⟨pad⟩"
BOS_TOKEN = "⟨bos⟩"
EOS_TOKEN = "⟨eos⟩"
UNK_TOKEN = "⟨unk⟩"


class EmptyCorpus(ValueError):
    pass


class LatentOutOfRange(IndexError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, and split ".,!?';" into own tokens."""
    out = []
    for ch in text.lower():
        if ch in _SPLIT_PUNCT:
            out.append(f" {ch} ")
        else:
            out.append(ch)
    return "".join(out).split()


def latent_token(k: int) -> str:
    return f"⟨lat_{k}⟩"


def relation_token(relation: Relation) -> str:
    return f"⟨rel_{relation.name}⟩"


@dataclass
class Vocab:
    """Dense token<->id map with reserved special/relation/latent symbols.

    Layout: corpus tokens first (by descending count, then alphabetical),
    then PAD, BOS, EOS, UNK, then the 9 relations, then K latents.
    Immutable after construction.
    """

    id_to_token: list[str]
    k_latents: int
    token_to_id: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self.id_to_token)

    @property
    def pad_id(self) -> int:
        return self.token_to_id[PAD_TOKEN]

    @property
    def bos_id(self) -> int:
        return self.token_to_id[BOS_TOKEN]

    @property
    def eos_id(self) -> int:
        return self.token_to_id[EOS_TOKEN]

    @property
    def unk_id(self) -> int:
        return self.token_to_id[UNK_TOKEN]

    def relation_id(self, relation: Relation) -> int:
        return self.token_to_id[relation_token(relation)]

    def latent_id(self, k: int) -> int:
        if not 0 <= k < self.k_latents:
            raise LatentOutOfRange(f"latent index {k} outside [0, {self.k_latents})")
        return self.token_to_id[latent_token(k)]

    def token_id(self, token: str) -> int:
        return self.token_to_id.get(token, self.unk_id)

    def encode_source(self, x: Sequence[str], relation: Relation, k: Optional[int]) -> list[int]:
        """[LAT_k] ++ ids(x) ++ [REL_r]; k=None omits the latent symbol."""
        ids = [] if k is None else [self.latent_id(k)]
        ids.extend(self.token_id(t) for t in x)
        ids.append(self.relation_id(relation))
        return ids

    def encode_target(self, z: Sequence[str]) -> list[int]:
        return [self.bos_id] + [self.token_id(t) for t in z] + [self.eos_id]

    def decode_ids(self, ids: Iterable[int]) -> list[str]:
        """Drop PAD/BOS/EOS; UNK decodes to its literal surface form."""
        specials = {self.pad_id, self.bos_id, self.eos_id}
        return [self.id_to_token[i] for i in ids if i not in specials]

    def to_dict(self) -> dict:
        return {"tokens": self.id_to_token, "k_latents": self.k_latents}

    @classmethod
    def from_dict(cls, data: dict) -> "Vocab":
        return cls(id_to_token=list(data["tokens"]), k_latents=int(data["k_latents"]))


def build_vocab(corpus: TripleStore, k_latents: int, min_count: int = 1) -> Vocab:
    """Vocabulary over corpus head/tail tokens with frequency >= min_count."""
    if k_latents < 1:
        raise ValueError("k_latents must be >= 1")
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    if not corpus.triples:
        raise EmptyCorpus("cannot build a vocabulary from an empty store")
    counts: Counter[str] = Counter()
    for t in corpus.triples:
        counts.update(tokenize(t.head))
        counts.update(tokenize(t.tail))
    kept = sorted(
        (
            tok
            for tok, c in counts.items()
            if c >= min_count and not any(ch in tok for ch in _RESERVED_CHARS)
        ),
        key=lambda tok: (-counts[tok], tok),
    )
    tokens = list(kept)
    tokens += [PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN]
    tokens += [relation_token(r) for r in RELATIONS]
    tokens += [latent_token(k) for k in range(k_latents)]
    return Vocab(id_to_token=tokens, k_latents=k_latents)
