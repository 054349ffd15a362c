"""Command-line surface and end-to-end pipelines.

Commands: synth-kg, train, generate, answer, eval-qa, eval-div.  Results
stream as line-delimited JSON on stdout (synth-kg emits the TSV knowledge
format); diagnostics go to stderr.  A JSON config file can supply any
option; explicit flags override it.  `--report-dir` additionally writes
the streamed records and matplotlib figures to a directory.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, TextIO

from . import backbone as bb
from . import reasoning, report, scoring, trainer
from .checkpoint import load_checkpoint, save_checkpoint
from .kg import KgError, Relation, TripleStore, parse_kg_tsv, synth_kg
from .questions import map_question
from .text import build_vocab

_DEFAULTS = {
    "hops": 1,
    "latents": 5,
    "beam": 10,
    "top_paths": 10,
    "gamma": 1.0,
    "distance": "cosine",
    "combine": "max",
    "mode": "constrained_em",
    "seed": 0,
    "epochs": 50,
    "lr": 1e-2,
    "batch_sets": 8,
    "embed_dim": 32,
    "hidden_dim": 48,
    "enc_layers": 1,
    "dec_layers": 1,
    "max_target_len": 16,
    "min_count": 1,
    "top_m": 10,
}


@dataclass
class QAExample:
    """One multiple-choice question: context, question, 2+ distinct answers."""

    example_id: str
    context: str
    question: str
    answers: list[str]
    gold: Optional[int] = None
    agent: Optional[str] = None

    @classmethod
    def from_dict(cls, data: dict) -> "QAExample":
        answers = list(data["answers"])
        if len(answers) < 2 or len(set(answers)) != len(answers):
            raise ValueError("need at least two distinct answers")
        gold = data.get("gold")
        if gold is not None and not 0 <= int(gold) < len(answers):
            raise ValueError("gold index out of range")
        return cls(
            example_id=str(data.get("id", "")),
            context=str(data["context"]),
            question=str(data["question"]),
            answers=answers,
            gold=None if gold is None else int(gold),
            agent=data.get("agent"),
        )


def parse_qa_jsonl(stream: Iterable[str]) -> tuple[list[QAExample], int]:
    """Parse QA examples; malformed records are skipped and counted."""
    examples: list[QAExample] = []
    skipped = 0
    for line in stream:
        line = line.strip()
        if not line:
            continue
        try:
            examples.append(QAExample.from_dict(json.loads(line)))
        except (ValueError, KeyError, TypeError):
            skipped += 1
    return examples, skipped


def pooled_paths(
    model: bb.BackboneModel,
    context: str,
    relation: Relation,
    hops: int,
    k_latents: int,
    beam: int,
    top_paths: int,
) -> list[reasoning.ReasoningPath]:
    """Union of the path beams of every depth 0..hops.

    Answers are scored against clauses generated at each step, so one-hop
    answering still sees the zero-hop clauses.
    """
    per_depth = reasoning.reason_all_depths(
        model, context, relation, hops, k_latents, beam, top_paths
    )
    return [p for depth in per_depth for p in depth]


def answer_examples(
    model: bb.BackboneModel,
    examples: Sequence[QAExample],
    hops: int,
    k_latents: int,
    beam: int,
    top_paths: int,
    scorer_cfg: scoring.ScorerConfig,
) -> list[tuple[QAExample, scoring.AnswerDecision]]:
    out = []
    for ex in examples:
        mapped = map_question(ex.question, agent=ex.agent)
        paths = pooled_paths(model, ex.context, mapped.relation, hops, k_latents, beam, top_paths)
        decision = scoring.select_answer(
            paths, ex.answers, model, scorer_cfg, relation=mapped.relation
        )
        out.append((ex, decision))
    return out


def qa_accuracy(pairs: Sequence[tuple[QAExample, scoring.AnswerDecision]]) -> Optional[float]:
    """Fraction correct over gold-labeled examples; None if none are labeled."""
    labeled = [(ex, d) for ex, d in pairs if ex.gold is not None]
    if not labeled:
        return None
    return sum(1 for ex, d in labeled if d.chosen == ex.gold) / len(labeled)


def head_diversity(
    model: bb.BackboneModel,
    head: str,
    relation: Relation,
    k_latents: int,
    beam: int,
    top_m: int,
) -> dict:
    """Diversity metrics over the top-M pooled generations for one head."""
    from . import diversity as div
    from .text import tokenize

    cands = [c for c in reasoning.generate_hop(model, head, relation, k_latents, beam) if c.event]
    seqs = [tokenize(c.event) for c in cands[:top_m]]
    rec: dict = {"head": head, "m": len(seqs)}
    if not seqs:
        rec.update({"div_ngram": None, "div_bleu": None})
        return rec
    rec.update(div.diversity_report(seqs))
    return rec


def _emit(record: dict, sink: TextIO, collected: Optional[list] = None) -> None:
    sink.write(json.dumps(record, sort_keys=True) + "\n")
    if collected is not None:
        collected.append(record)


def _load_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text("utf-8"))


class _Options:
    """Option resolution: CLI flag > config file > built-in default."""

    def __init__(self, args: argparse.Namespace):
        self._args = vars(args)
        self._file = _load_config_file(self._args.get("config"))

    def get(self, key: str, default=None):
        flag = self._args.get(key)
        if flag is not None:
            return flag
        if key in self._file:
            return self._file[key]
        if key in _DEFAULTS:
            return _DEFAULTS[key]
        return default

    def require(self, key: str):
        value = self.get(key)
        if value is None:
            raise SystemExit(f"error: missing required option --{key.replace('_', '-')}")
        return value


def _relation_from(name: str) -> Relation:
    if name not in Relation.__members__:
        raise ValueError(f"unknown relation {name!r}")
    return Relation[name]


def _load_store(path: str) -> TripleStore:
    with open(path, "rb") as fh:
        return parse_kg_tsv(fh)


def _scorer_config(opt: _Options) -> scoring.ScorerConfig:
    cfg = scoring.ScorerConfig(
        distance=str(opt.get("distance")),
        gamma=float(opt.get("gamma")),
        combine=str(opt.get("combine")),
    )
    cfg.validate()
    return cfg


def _report_dir(opt: _Options) -> Optional[Path]:
    rd = opt.get("report_dir")
    if not rd:
        return None
    path = Path(rd)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_synth_kg(opt: _Options, stdout: TextIO, stderr: TextIO) -> int:
    store = synth_kg(
        n_heads=int(opt.require("heads")),
        tails_per_set=(int(opt.get("tails_min", 3)), int(opt.get("tails_max", 3))),
        seed=int(opt.get("seed")),
    )
    out = opt.get("out")
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            store.to_tsv(fh)
    else:
        store.to_tsv(stdout)
    print(f"synth-kg: {len(store)} triples, {len(store.heads())} heads", file=stderr)
    return 0


def cmd_train(opt: _Options, stdout: TextIO, stderr: TextIO) -> int:
    store = _load_store(opt.require("kg"))
    seed = int(opt.get("seed"))
    k_latents = int(opt.get("latents"))
    vocab = build_vocab(store, k_latents=k_latents, min_count=int(opt.get("min_count")))
    mode = str(opt.get("mode"))
    model_cfg = bb.BackboneConfig(
        vocab=vocab,
        embed_dim=int(opt.get("embed_dim")),
        hidden_dim=int(opt.get("hidden_dim")),
        enc_layers=int(opt.get("enc_layers")),
        dec_layers=int(opt.get("dec_layers")),
        max_target_len=int(opt.get("max_target_len")),
        seed=seed,
        uses_latent=mode != "no_latent",
    )
    model = bb.init_model(model_cfg)
    train_cfg = trainer.TrainConfig(
        mode=mode,
        epochs=int(opt.get("epochs")),
        max_sets_per_batch=int(opt.get("batch_sets")),
        lr=float(opt.get("lr")),
        k_latents=k_latents,
        seed=seed,
    )
    records: list[dict] = []

    def on_epoch(metrics: trainer.EpochMetrics) -> None:
        for rec in metrics.batch_records:
            _emit(rec, stdout, records)
        print(
            f"epoch {metrics.epoch}: loss {metrics.mean_loss:.4f} "
            f"latents/set {metrics.mean_distinct_latents:.2f}",
            file=stderr,
        )

    trainer.train(model, store, train_cfg, on_epoch=on_epoch)
    ckpt = opt.require("ckpt")
    provenance = {
        "mode": mode,
        "seed": seed,
        "epochs": train_cfg.epochs,
        "kg": str(opt.get("kg")),
        "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    save_checkpoint(model, ckpt, provenance=provenance)
    print(f"saved checkpoint to {ckpt}", file=stderr)
    rd = _report_dir(opt)
    if rd is not None:
        report.write_jsonl(records, rd / "metrics.jsonl")
        for p in report.save_training_figures(records, rd):
            print(f"wrote {p}", file=stderr)
    return 0


def cmd_generate(opt: _Options, stdout: TextIO, stderr: TextIO) -> int:
    model, _ = load_checkpoint(opt.require("ckpt"))
    relation = _relation_from(str(opt.require("relation")))
    k = int(opt.get("latents", model.vocab.k_latents) or model.vocab.k_latents)
    k = min(k, model.vocab.k_latents)
    cands = reasoning.generate_hop(
        model, str(opt.require("text")), relation, k, int(opt.get("beam"))
    )
    for c in cands:
        _emit({"event": c.event, "log_prob": c.log_prob, "latent": c.latent}, stdout)
    return 0


def _run_answers(opt: _Options, stdout: TextIO, stderr: TextIO, with_accuracy: bool) -> int:
    model, _ = load_checkpoint(opt.require("ckpt"))
    with open(opt.require("qa"), "r", encoding="utf-8") as fh:
        examples, skipped = parse_qa_jsonl(fh)
    if skipped:
        print(f"skipped {skipped} malformed records", file=stderr)
    pairs = answer_examples(
        model,
        examples,
        hops=int(opt.get("hops")),
        k_latents=min(int(opt.get("latents")), model.vocab.k_latents),
        beam=int(opt.get("beam")),
        top_paths=int(opt.get("top_paths")),
        scorer_cfg=_scorer_config(opt),
    )
    records: list[dict] = []
    for ex, decision in pairs:
        _emit(decision.to_dict(example_id=ex.example_id), stdout, records)
    summary = None
    if with_accuracy:
        accuracy = qa_accuracy(pairs)
        labeled = sum(1 for ex, _ in pairs if ex.gold is not None)
        summary = {
            "accuracy": accuracy,
            "n_labeled": labeled,
            "n_examples": len(pairs),
            "skipped": skipped,
        }
        _emit(summary, stdout)
    rd = _report_dir(opt)
    if rd is not None:
        report.write_jsonl(records + ([summary] if summary else []), rd / "decisions.jsonl")
        print(f"wrote {report.save_qa_figure(records, rd)}", file=stderr)
    return 0


def cmd_answer(opt: _Options, stdout: TextIO, stderr: TextIO) -> int:
    return _run_answers(opt, stdout, stderr, with_accuracy=False)


def cmd_eval_qa(opt: _Options, stdout: TextIO, stderr: TextIO) -> int:
    return _run_answers(opt, stdout, stderr, with_accuracy=True)


def cmd_eval_div(opt: _Options, stdout: TextIO, stderr: TextIO) -> int:
    model, _ = load_checkpoint(opt.require("ckpt"))
    relation = _relation_from(str(opt.require("relation")))
    heads = [
        line.strip()
        for line in Path(opt.require("heads")).read_text("utf-8").splitlines()
        if line.strip()
    ]
    k = min(int(opt.get("latents")), model.vocab.k_latents)
    records: list[dict] = []
    excluded_bleu = 0
    for head in heads:
        rec = head_diversity(
            model, head, relation, k, int(opt.get("beam")), int(opt.get("top_m"))
        )
        if rec.get("div_bleu") is None:
            excluded_bleu += 1
        _emit(rec, stdout, records)
    ngram_vals = [r["div_ngram"] for r in records if r.get("div_ngram") is not None]
    bleu_vals = [r["div_bleu"] for r in records if r.get("div_bleu") is not None]
    summary = {
        "heads": len(heads),
        "excluded_from_div_bleu": excluded_bleu,
        "mean_div_ngram": sum(ngram_vals) / len(ngram_vals) if ngram_vals else None,
        "mean_div_bleu": sum(bleu_vals) / len(bleu_vals) if bleu_vals else None,
    }
    _emit(summary, stdout)
    rd = _report_dir(opt)
    if rd is not None:
        report.write_jsonl(records + [summary], rd / "diversity.jsonl")
        print(f"wrote {report.save_diversity_figure(records, rd)}", file=stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixpath",
        description="Train a latent-mixture seq2seq on an if-then knowledge base, "
        "generate reasoning paths, and answer multiple-choice questions zero-shot.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--seed", type=int)
        p.add_argument("--report-dir", dest="report_dir", help="write records + figures here")

    p = sub.add_parser("synth-kg", help="write a synthetic knowledge base as TSV")
    common(p)
    p.add_argument("--heads", type=int)
    p.add_argument("--tails-min", dest="tails_min", type=int)
    p.add_argument("--tails-max", dest="tails_max", type=int)
    p.add_argument("--out")

    p = sub.add_parser("train", help="distill a knowledge base into a checkpoint")
    common(p)
    p.add_argument("--kg")
    p.add_argument("--ckpt")
    p.add_argument("--mode", choices=trainer.MODES)
    p.add_argument("--latents", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-sets", dest="batch_sets", type=int)
    p.add_argument("--embed-dim", dest="embed_dim", type=int)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--enc-layers", dest="enc_layers", type=int)
    p.add_argument("--dec-layers", dest="dec_layers", type=int)
    p.add_argument("--max-target-len", dest="max_target_len", type=int)
    p.add_argument("--min-count", dest="min_count", type=int)

    p = sub.add_parser("generate", help="generate events for a text and relation")
    common(p)
    p.add_argument("--ckpt")
    p.add_argument("--text")
    p.add_argument("--relation")
    p.add_argument("--latents", type=int)
    p.add_argument("--beam", type=int)

    for name, help_text in (
        ("answer", "answer QA examples"),
        ("eval-qa", "answer QA examples and report accuracy"),
    ):
        p = sub.add_parser(name, help=help_text)
        common(p)
        p.add_argument("--ckpt")
        p.add_argument("--qa")
        p.add_argument("--hops", type=int)
        p.add_argument("--latents", type=int)
        p.add_argument("--beam", type=int)
        p.add_argument("--top-paths", dest="top_paths", type=int)
        p.add_argument("--gamma", type=float)
        p.add_argument("--distance", choices=scoring.DISTANCES)
        p.add_argument("--combine", choices=scoring.COMBINE_MODES)

    p = sub.add_parser("eval-div", help="diversity metrics over generations per head")
    common(p)
    p.add_argument("--ckpt")
    p.add_argument("--heads")
    p.add_argument("--relation")
    p.add_argument("--latents", type=int)
    p.add_argument("--beam", type=int)
    p.add_argument("--top-m", dest="top_m", type=int)

    return parser


_COMMANDS = {
    "synth-kg": cmd_synth_kg,
    "train": cmd_train,
    "generate": cmd_generate,
    "answer": cmd_answer,
    "eval-qa": cmd_eval_qa,
    "eval-div": cmd_eval_div,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    opt = _Options(args)
    try:
        return _COMMANDS[args.command](opt, sys.stdout, sys.stderr)
    except (KgError, trainer.InfeasibleK, bb.BadConfig, bb.BadTarget, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
