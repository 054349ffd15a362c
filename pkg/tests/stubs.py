"""Hand-fixed stub models for beam-search and reasoning oracles.

A stub's next-token distribution depends only on the previous token (and
optionally on the source ids), so every sequence probability can be
enumerated exactly without the neural backbone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from types import SimpleNamespace
from typing import Callable

import numpy as np

from mixpath.kg import RELATIONS
from mixpath.text import (
    BOS_TOKEN,
    EOS_TOKEN,
    PAD_TOKEN,
    UNK_TOKEN,
    Vocab,
    latent_token,
    relation_token,
)

NEG = -np.inf


def tiny_vocab(corpus_tokens: list[str], k_latents: int = 1) -> Vocab:
    tokens = list(corpus_tokens)
    tokens += [PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN]
    tokens += [relation_token(r) for r in RELATIONS]
    tokens += [latent_token(k) for k in range(k_latents)]
    return Vocab(id_to_token=tokens, k_latents=k_latents)


# A transition table maps previous-token string -> {next token: probability}.
Table = dict[str, dict[str, float]]


def _row_logps(vocab: Vocab, dist: dict[str, float]) -> np.ndarray:
    row = np.full(len(vocab), NEG)
    for tok, p in dist.items():
        tok_id = vocab.eos_id if tok == "<eos>" else vocab.token_to_id[tok]
        row[tok_id] = math.log(p)
    return row


class StubSession:
    def __init__(self, vocab: Vocab, table: Table):
        self.vocab = vocab
        self.vocab_size = len(vocab)
        self.rows = {
            ("<bos>" if key == "<bos>" else key): _row_logps(vocab, dist)
            for key, dist in table.items()
        }

    def _logps(self, last_tokens: np.ndarray) -> np.ndarray:
        out = []
        for t in last_tokens:
            key = "<bos>" if t == self.vocab.bos_id else self.vocab.id_to_token[int(t)]
            out.append(self.rows[key])
        return np.stack(out)

    def initial(self):
        state = np.array([self.vocab.bos_id])
        return (state, self._logps(state))

    def advance(self, state, parent_rows: np.ndarray, tokens: np.ndarray):
        new = np.asarray(tokens, dtype=np.int64)
        return (new, self._logps(new))


@dataclass
class StubModel:
    """Duck-types the parts of BackboneModel that beam search and the
    reasoning engine touch; `table_fn` maps source ids to a table."""

    vocab: Vocab
    table_fn: Callable[[list[int]], Table]
    max_target_len: int = 8
    uses_latent: bool = True

    @property
    def config(self):
        return SimpleNamespace(
            vocab=self.vocab,
            max_target_len=self.max_target_len,
            uses_latent=self.uses_latent,
        )

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    @property
    def eos_token_id(self) -> int:
        return self.vocab.eos_id

    def decode_session(self, src_ids) -> StubSession:
        return StubSession(self.vocab, self.table_fn(list(src_ids)))


def enumerate_sequences(
    vocab: Vocab, table: Table, max_len: int
) -> list[tuple[tuple[int, ...], float]]:
    """All EOS-terminated (len <= max_len incl. EOS) and length-capped
    sequences with their exact log-probabilities, best first."""
    results: list[tuple[tuple[int, ...], float]] = []

    def options(prev_key: str) -> list[tuple[str, float]]:
        return sorted(table[prev_key].items())

    def walk(prefix: tuple[int, ...], prev_key: str, logp: float) -> None:
        if len(prefix) == max_len:
            results.append((prefix, logp))
            return
        for tok, p in options(prev_key):
            lp = logp + math.log(p)
            if tok == "<eos>":
                results.append((prefix + (vocab.eos_id,), lp))
            else:
                walk(prefix + (vocab.token_to_id[tok],), tok, lp)

    walk((), "<bos>", 0.0)
    results.sort(key=lambda r: (-r[1], r[0]))
    return results
