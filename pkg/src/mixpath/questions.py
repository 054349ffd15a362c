"""Pattern-based mapping from question text to a relation.

Nine question templates (shipped as package data so tests pin content,
not code) each name one relation.  Matching normalizes the question,
substitutes the agent's name with a placeholder, and falls back to
nearest-template token overlap when no template matches exactly, so the
mapping is total.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Optional

from .kg import Relation
from .text import tokenize

AGENT_SLOT = "AGENT"
_NAME_RE = re.compile(r"^[A-Z][a-z]+$")
_PUNCT_STRIP = ".,!?';"


@dataclass(frozen=True)
class QuestionPattern:
    template: str
    relation: Relation
    category: str


@dataclass(frozen=True)
class MappedQuestion:
    relation: Relation
    exact: bool
    template: str
    category: str


@lru_cache(maxsize=1)
def load_templates() -> tuple[QuestionPattern, ...]:
    raw = resources.files("mixpath").joinpath("question_templates.json").read_text("utf-8")
    return tuple(
        QuestionPattern(
            template=entry["template"],
            relation=Relation[entry["relation"]],
            category=entry["category"],
        )
        for entry in json.loads(raw)
    )


def _norm_tokens(text: str) -> tuple[str, ...]:
    return tuple(t for t in tokenize(text) if t not in _PUNCT_STRIP)


@lru_cache(maxsize=1)
def _template_token_vocab() -> frozenset[str]:
    vocab: set[str] = set()
    for pat in load_templates():
        vocab.update(_norm_tokens(pat.template))
    return frozenset(vocab)


def _substitute_agent(question: str, agent: Optional[str]) -> str:
    """Replace the agent's name with the AGENT slot.

    With no explicit agent, the first capitalized name-like token after the
    question word is used, skipping words that belong to the templates
    themselves (e.g. "Others").
    """
    words = question.split()
    out: list[str] = []
    replaced = False
    agent_cf = agent.casefold() if agent else None
    for i, word in enumerate(words):
        core = word.strip(_PUNCT_STRIP)
        trailing = word[len(core):] if word.startswith(core) else ""
        if agent_cf is not None:
            if core.casefold() == agent_cf:
                out.append(AGENT_SLOT + trailing)
                continue
        elif (
            not replaced
            and i > 0
            and _NAME_RE.match(core)
            and core.lower() not in _template_token_vocab()
        ):
            out.append(AGENT_SLOT + trailing)
            replaced = True
            continue
        out.append(word)
    return " ".join(out)


def map_question(question: str, agent: Optional[str] = None) -> MappedQuestion:
    """Total, deterministic mapping; `exact` is False on a fuzzy fallback."""
    templates = load_templates()
    normalized = _norm_tokens(_substitute_agent(question, agent))
    for pat in templates:
        if normalized == _norm_tokens(pat.template):
            return MappedQuestion(pat.relation, True, pat.template, pat.category)
    q_set = set(normalized)
    best = templates[0]
    best_score = -1.0
    for pat in templates:
        t_set = set(_norm_tokens(pat.template))
        union = q_set | t_set
        score = len(q_set & t_set) / len(union) if union else 0.0
        if score > best_score:
            best, best_score = pat, score
    return MappedQuestion(best.relation, False, best.template, best.category)
