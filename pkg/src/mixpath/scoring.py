"""Answer scoring: distance functions between candidate answers and a
path's final event, a temperature softmax over negated distances, and
joint answer selection over reasoning paths.

The selection score of (answer, path) is the path's total log-probability
plus the log posterior of the answer given the path's last event; each
answer keeps its best path (or a log-marginal over paths) and the argmax
answer wins, ties to the smallest index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import backbone as bb
from .diversity import bleu_smoothing1
from .kg import Relation
from .reasoning import ReasoningPath
from .text import tokenize

DISTANCES = ("cosine", "bleu", "seq2seq_likelihood", "avg_word_prob")
COMBINE_MODES = ("max", "marginal")


class ZeroVector(ValueError):
    pass


class EmptyAnswer(ValueError):
    pass


class NoPaths(ValueError):
    pass


@dataclass(frozen=True)
class ScorerConfig:
    distance: str = "cosine"
    gamma: float = 1.0
    combine: str = "max"  # max over paths, or log-marginal over paths

    def validate(self) -> None:
        if self.distance not in DISTANCES:
            raise ValueError(f"distance must be one of {DISTANCES}")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.combine not in COMBINE_MODES:
            raise ValueError(f"combine must be one of {COMBINE_MODES}")


def distance_cosine(u: np.ndarray, v: np.ndarray) -> float:
    """1 - cos(u, v); in [0, 2]."""
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine distance undefined for zero vectors")
    return 1.0 - float(np.dot(u, v)) / (nu * nv)


def distance_bleu(answer_tokens: Sequence[str], event_tokens: Sequence[str]) -> float:
    """1 - BLEU with the answer as hypothesis and the event as reference."""
    return 1.0 - bleu_smoothing1(answer_tokens, event_tokens)


def avg_word_prob(
    model: bb.BackboneModel,
    source_text: str,
    relation: Relation,
    answer_tokens: Sequence[str],
) -> float:
    """Uniform-prior mixture log-prob of the answer, per predicted token."""
    if not answer_tokens:
        raise EmptyAnswer("answer must be non-empty")
    lp = bb.mixture_log_prob(model, tokenize(source_text), relation, list(answer_tokens))
    return lp / (len(answer_tokens) + 1)  # predicted positions include EOS


def answer_posterior(distances: Sequence[float], gamma: float = 1.0) -> np.ndarray:
    """softmax(-gamma * d): strictly positive, sums to one."""
    d = np.asarray(distances, dtype=np.float64)
    if not np.all(np.isfinite(d)):
        raise ValueError("distances must be finite")
    s = -gamma * d
    s = s - s.max()
    e = np.exp(s)
    return e / e.sum()


@dataclass
class AnswerDecision:
    chosen: int
    answer_scores: list[float]  # per answer, combined over paths
    best_paths: list[ReasoningPath]  # per answer, the path achieving its score

    def to_dict(self, example_id: Optional[str] = None) -> dict:
        out = {
            "chosen": self.chosen,
            "scores": self.answer_scores,
            "best_path_events": [p.events for p in self.best_paths],
        }
        if example_id is not None:
            out = {"example_id": example_id, **out}
        return out


def _answer_distances(
    path: ReasoningPath,
    answers_tokens: list[list[str]],
    model: bb.BackboneModel,
    config: ScorerConfig,
    relation: Optional[Relation],
) -> list[float]:
    last = path.events[-1]
    if config.distance == "cosine":
        event_vec = bb.embed_text(model, tokenize(last))
        return [distance_cosine(bb.embed_text(model, a), event_vec) for a in answers_tokens]
    if config.distance == "bleu":
        last_tokens = tokenize(last)
        return [distance_bleu(a, last_tokens) for a in answers_tokens]
    if relation is None:
        raise ValueError(f"distance {config.distance!r} needs the question relation")
    if config.distance == "seq2seq_likelihood":
        return [
            -bb.mixture_log_prob(model, tokenize(last), relation, a) for a in answers_tokens
        ]
    return [-avg_word_prob(model, last, relation, a) for a in answers_tokens]


def select_answer(
    paths: Sequence[ReasoningPath],
    answers: Sequence[str],
    model: bb.BackboneModel,
    config: ScorerConfig,
    relation: Optional[Relation] = None,
) -> AnswerDecision:
    """Joint argmax over answers and paths (or marginal over paths)."""
    config.validate()
    if not paths:
        raise NoPaths("need at least one reasoning path")
    if len(answers) < 2:
        raise ValueError("need at least two candidate answers")
    answers_tokens = [tokenize(a) for a in answers]
    if any(not a for a in answers_tokens):
        raise EmptyAnswer("answers must contain at least one token")

    n = len(answers)
    per_answer_scores: list[list[float]] = [[] for _ in range(n)]
    for path in paths:
        dists = _answer_distances(path, answers_tokens, model, config, relation)
        log_post = np.log(answer_posterior(dists, config.gamma))
        for i in range(n):
            per_answer_scores[i].append(path.total_log_prob + float(log_post[i]))

    best_scores: list[float] = []
    best_paths: list[ReasoningPath] = []
    for i in range(n):
        scores = per_answer_scores[i]
        best_idx = int(np.argmax(scores))
        best_paths.append(paths[best_idx])
        if config.combine == "max":
            best_scores.append(scores[best_idx])
        else:
            m = max(scores)
            best_scores.append(m + math.log(sum(math.exp(s - m) for s in scores)))
    chosen = int(np.argmax(best_scores))  # argmax takes the smallest index on ties
    return AnswerDecision(chosen=chosen, answer_scores=best_scores, best_paths=best_paths)
