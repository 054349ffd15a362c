"""mixpath: distill an if-then knowledge base into a latent-mixture
seq2seq model, generate multi-hop reasoning paths, and answer
multiple-choice questions zero-shot by similarity of path endpoints."""

__version__ = "0.1.0"

from .kg import Relation, Triple, TripleStore, parse_kg_tsv, synth_kg
from .text import Vocab, build_vocab, tokenize

__all__ = [
    "Relation",
    "Triple",
    "TripleStore",
    "Vocab",
    "build_vocab",
    "parse_kg_tsv",
    "synth_kg",
    "tokenize",
]
