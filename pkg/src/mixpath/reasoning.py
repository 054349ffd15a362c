"""Multi-hop reasoning-path generation.

Hop 0 generates candidate events from the context; every later hop
conditions only on the previous event and the relation (Markov
assumption).  A path-level beam keeps the best `top_paths` paths by total
log-probability after each hop; the token-level beam width is a separate
knob.
"""
from __future__ import annotations

from dataclasses import dataclass
from . import backbone as bb
from .kg import Relation
from .text import tokenize


@dataclass
class HopCandidate:
    event: str
    log_prob: float
    latent: int


@dataclass
class ReasoningPath:
    """Events z_0..z_T with per-hop log-probs and latent choices."""

    events: list[str]
    hop_log_probs: list[float]
    latents: list[int]

    @property
    def total_log_prob(self) -> float:
        return sum(self.hop_log_probs)

    def extended(self, cand: HopCandidate) -> "ReasoningPath":
        return ReasoningPath(
            events=self.events + [cand.event],
            hop_log_probs=self.hop_log_probs + [cand.log_prob],
            latents=self.latents + [cand.latent],
        )

    def to_dict(self) -> dict:
        return {
            "events": self.events,
            "hop_log_probs": self.hop_log_probs,
            "latents": self.latents,
            "total_log_prob": self.total_log_prob,
        }


def generate_hop(
    model,
    text: str,
    relation: Relation,
    k_latents: int,
    beam_width: int,
    max_len: int | None = None,
) -> list[HopCandidate]:
    """Pool beam hypotheses across all latent values for one input event.

    Identical decoded texts are merged keeping the best log-prob (smaller
    latent id on exact ties).  Sorted by log-prob descending, ties by
    event text.  An immediate-EOS decode appears as the empty event "".
    """
    if k_latents < 1 or beam_width < 1:
        raise ValueError("k_latents and beam_width must be >= 1")
    vocab = model.vocab
    x = tokenize(text)
    uses_latent = getattr(model.config, "uses_latent", True)
    latents = range(k_latents) if uses_latent else (0,)
    best: dict[str, HopCandidate] = {}
    for k in latents:
        src = vocab.encode_source(x, relation, k if uses_latent else None)
        for hyp in bb.beam_search(model, src, beam_width, max_len):
            event = " ".join(vocab.decode_ids(hyp.tokens))
            cur = best.get(event)
            if cur is None or hyp.log_prob > cur.log_prob:
                best[event] = HopCandidate(event=event, log_prob=hyp.log_prob, latent=k)
    return sorted(best.values(), key=lambda c: (-c.log_prob, c.event))


def _hop_beam(
    model,
    paths: list[ReasoningPath],
    relation: Relation,
    k_latents: int,
    beam_width: int,
    top_paths: int,
    cache: dict[str, list[HopCandidate]],
) -> list[ReasoningPath]:
    extended: list[ReasoningPath] = []
    for path in paths:
        prev = path.events[-1]
        if prev not in cache:
            cache[prev] = generate_hop(model, prev, relation, k_latents, beam_width)
        # empty events cannot carry a path (nothing to condition the next hop on)
        extended.extend(path.extended(c) for c in cache[prev] if c.event)
    extended.sort(key=lambda p: (-p.total_log_prob, tuple(p.events)))
    return extended[:top_paths]


def reason(
    model,
    context: str,
    relation: Relation,
    hops: int,
    k_latents: int,
    beam_width: int,
    top_paths: int,
) -> list[ReasoningPath]:
    """Top reasoning paths of exactly `hops` + 1 events."""
    per_depth = reason_all_depths(model, context, relation, hops, k_latents, beam_width, top_paths)
    return per_depth[hops]


def reason_all_depths(
    model,
    context: str,
    relation: Relation,
    hops: int,
    k_latents: int,
    beam_width: int,
    top_paths: int,
) -> list[list[ReasoningPath]]:
    """Path beams for every depth 0..hops (the answer pipeline pools them)."""
    if hops < 0:
        raise ValueError("hops must be >= 0")
    if top_paths < 1:
        raise ValueError("top_paths must be >= 1")
    first = [c for c in generate_hop(model, context, relation, k_latents, beam_width) if c.event]
    depth0 = [
        ReasoningPath(events=[c.event], hop_log_probs=[c.log_prob], latents=[c.latent])
        for c in first[:top_paths]
    ]
    per_depth = [depth0]
    cache: dict[str, list[HopCandidate]] = {}
    for _ in range(hops):
        per_depth.append(
            _hop_beam(model, per_depth[-1], relation, k_latents, beam_width, top_paths, cache)
        )
    return per_depth
