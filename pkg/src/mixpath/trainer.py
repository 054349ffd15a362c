"""Training loops: constrained hard-EM over latent components, plain
(unconstrained) hard-EM, and a no-latent baseline.

The constrained E-step assigns each target in an output set to a distinct
latent symbol by greedily scanning all (target, latent) log-probabilities
in descending order.  The M-step minimizes teacher-forced cross-entropy
on the assigned pairs with Adam; E-step scores are computed with the
parameters frozen at the start of each mini-batch.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import autodiff as ad
from . import backbone as bb
from .kg import Relation, TripleStore
from .text import tokenize

MODES = ("constrained_em", "hard_em", "no_latent")


class InfeasibleK(ValueError):
    def __init__(self, n_targets: int, k: int, set_id: str = ""):
        where = f" in set {set_id!r}" if set_id else ""
        super().__init__(f"{n_targets} targets but only {k} latent values{where}")
        self.n_targets = n_targets
        self.k = k


@dataclass
class AssignmentProblem:
    """Log-probability matrix scores[j][k] for targets j and latents k."""

    scores: np.ndarray  # (J, K)

    def __post_init__(self) -> None:
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 2:
            raise ValueError("scores must be a J x K matrix")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("scores must be finite")

    @property
    def n_targets(self) -> int:
        return self.scores.shape[0]

    @property
    def n_latents(self) -> int:
        return self.scores.shape[1]


def score_matrix(
    model: bb.BackboneModel,
    x_tokens: Sequence[str],
    relation: Relation,
    targets: Sequence[Sequence[str]],
    k_latents: int,
) -> AssignmentProblem:
    """Teacher-forced log-probabilities for every (target, latent) pair.

    Exactly J*K evaluations; each entry equals an independent
    `sequence_log_prob` call bit-for-bit (shared batched code path).
    """
    if not targets:
        raise ValueError("targets must be non-empty")
    if k_latents < len(targets):
        raise InfeasibleK(len(targets), k_latents)
    vocab = model.vocab
    sources = [vocab.encode_source(x_tokens, relation, k) for k in range(k_latents)]
    enc = bb.encode_sources(model, sources)
    src_map: list[int] = []
    tgt_ids: list[list[int]] = []
    for z in targets:
        encoded = vocab.encode_target(z)
        for k in range(k_latents):
            src_map.append(k)
            tgt_ids.append(encoded)
    nll, _ = bb.batch_target_nll(model, enc, src_map, tgt_ids)
    return AssignmentProblem(scores=-nll.values[:, 0].reshape(len(targets), k_latents))


def constrained_assign(problem: AssignmentProblem) -> dict[int, int]:
    """Greedy one-to-one assignment of targets to latents.

    All (j, k) pairs are sorted by score descending (ties: smaller j, then
    smaller k) and accepted when neither j nor k is taken.  Injective and
    total; requires K >= J.  This is the sorted-scan heuristic, not the
    exhaustive optimum.
    """
    j_n, k_n = problem.n_targets, problem.n_latents
    if k_n < j_n:
        raise InfeasibleK(j_n, k_n)
    order = sorted(
        ((j, k) for j in range(j_n) for k in range(k_n)),
        key=lambda jk: (-problem.scores[jk[0], jk[1]], jk[0], jk[1]),
    )
    assign: dict[int, int] = {}
    used_k: set[int] = set()
    for j, k in order:
        if j in assign or k in used_k:
            continue
        assign[j] = k
        used_k.add(k)
        if len(assign) == j_n:
            break
    return assign


def hard_assign(problem: AssignmentProblem) -> dict[int, int]:
    """Row-wise argmax (unconstrained hard E-step); ties to smaller k."""
    return {j: int(np.argmax(problem.scores[j])) for j in range(problem.n_targets)}


@dataclass
class TrainConfig:
    mode: str = "constrained_em"
    epochs: int = 50
    max_sets_per_batch: int = 8
    lr: float = 1e-2
    warmup_epochs: int = 0
    k_latents: int = 5
    seed: int = 0

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.epochs < 1 or self.max_sets_per_batch < 1:
            raise ValueError("epochs and max_sets_per_batch must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")


OutputSet = tuple[str, Relation, list[str]]


def bucket_batches(
    store: TripleStore, max_sets_per_batch: int, seed: int
) -> list[list[OutputSet]]:
    """Shuffle output sets and chunk them; a set never spans two batches."""
    sets = store.output_sets()
    rng = random.Random(seed)
    rng.shuffle(sets)
    return [
        sets[i : i + max_sets_per_batch] for i in range(0, len(sets), max_sets_per_batch)
    ]


@dataclass
class EpochMetrics:
    epoch: int
    mean_loss: float
    mean_distinct_latents: float
    batch_records: list[dict] = field(default_factory=list)


def _epoch_lr(config: TrainConfig, epoch: int) -> float:
    if epoch < config.warmup_epochs:
        return config.lr * (epoch + 1) / config.warmup_epochs
    return config.lr


def _batch_score_problems(
    model: bb.BackboneModel,
    batch: Sequence[OutputSet],
    k_latents: int,
) -> list[AssignmentProblem]:
    """Score every (target, latent) pair of every set in one forward pass.

    Row-stable batched ops make each entry bit-identical to the per-set
    `score_matrix` (and hence to single `sequence_log_prob` calls).
    """
    vocab = model.vocab
    sources: list[list[int]] = []
    src_map: list[int] = []
    tgt_ids: list[list[int]] = []
    spans: list[tuple[int, int]] = []
    row = 0
    for head, rel, tails in batch:
        x = tokenize(head)
        base = len(sources)
        sources.extend(vocab.encode_source(x, rel, k) for k in range(k_latents))
        start = row
        for tail in tails:
            encoded = vocab.encode_target(tokenize(tail))
            for k in range(k_latents):
                src_map.append(base + k)
                tgt_ids.append(encoded)
                row += 1
        spans.append((start, row))
    enc = bb.encode_sources(model, sources)
    nll, _ = bb.batch_target_nll(model, enc, src_map, tgt_ids)
    scores = -nll.values[:, 0]
    return [
        AssignmentProblem(scores=scores[a:b].reshape(-1, k_latents)) for a, b in spans
    ]


def train_epoch(
    model: bb.BackboneModel,
    store: TripleStore,
    config: TrainConfig,
    epoch: int,
    adam_state: ad.AdamState,
) -> EpochMetrics:
    """One pass over the store: per-batch E-step (mode-dependent) then one
    Adam update on the batch's assigned (source, target) pairs."""
    config.validate()
    if not store.triples:
        raise ValueError("cannot train on an empty store")
    vocab = model.vocab
    use_latent = config.mode != "no_latent"
    lr = _epoch_lr(config, epoch)
    batches = bucket_batches(store, config.max_sets_per_batch, seed=config.seed + epoch)

    total_ce = 0.0
    total_tokens = 0
    total_distinct = 0
    n_sets = 0
    records: list[dict] = []
    for batch_no, batch in enumerate(batches):
        # E-step on frozen parameters: one (source text, latent) per target.
        pairs: list[tuple[list[int], list[int]]] = []
        batch_distinct = 0
        if use_latent:
            for head, rel, tails in batch:
                if config.k_latents < len(tails):
                    raise InfeasibleK(
                        len(tails), config.k_latents, set_id=f"{head}/{rel.name}"
                    )
            problems = _batch_score_problems(model, batch, config.k_latents)
        for i, (head, rel, tails) in enumerate(batch):
            x = tokenize(head)
            targets = [tokenize(t) for t in tails]
            if not use_latent:
                src = vocab.encode_source(x, rel, None)
                pairs.extend((src, vocab.encode_target(z)) for z in targets)
                batch_distinct += 1
                continue
            if config.mode == "constrained_em":
                assignment = constrained_assign(problems[i])
            else:
                assignment = hard_assign(problems[i])
            batch_distinct += len(set(assignment.values()))
            for j, z in enumerate(targets):
                src = vocab.encode_source(x, rel, assignment[j])
                pairs.append((src, vocab.encode_target(z)))

        # M-step: one Adam update on all assigned pairs of the batch.
        sources = [src for src, _ in pairs]
        targets_ids = [tgt for _, tgt in pairs]
        with ad.Tape() as tape:
            enc = bb.encode_sources(model, sources)
            nll, counts = bb.batch_target_nll(model, enc, list(range(len(pairs))), targets_ids)
            n_tokens = int(counts.sum())
            loss = ad.scale(ad.sum_all(nll), 1.0 / n_tokens)
        grads = ad.backward(tape, loss)
        named = {name: grads.get(t) for name, t in model.params.items()}
        named = {n: g for n, g in named.items() if g is not None}
        ad.adam_step(model.params, named, adam_state, lr=lr)

        batch_loss = loss.item()
        total_ce += batch_loss * n_tokens
        total_tokens += n_tokens
        total_distinct += batch_distinct
        n_sets += len(batch)
        records.append(
            {
                "epoch": epoch,
                "batch": batch_no,
                "loss": batch_loss,
                "distinct_latents_used": batch_distinct,
            }
        )
    return EpochMetrics(
        epoch=epoch,
        mean_loss=total_ce / total_tokens,
        mean_distinct_latents=total_distinct / n_sets,
        batch_records=records,
    )


def train(
    model: bb.BackboneModel,
    store: TripleStore,
    config: TrainConfig,
    on_epoch: Optional[Callable[[EpochMetrics], None]] = None,
) -> list[EpochMetrics]:
    """Run the configured number of epochs; returns per-epoch metrics."""
    config.validate()
    adam_state = ad.AdamState()
    history: list[EpochMetrics] = []
    for epoch in range(config.epochs):
        metrics = train_epoch(model, store, config, epoch, adam_state)
        history.append(metrics)
        if on_epoch is not None:
            on_epoch(metrics)
    return history
