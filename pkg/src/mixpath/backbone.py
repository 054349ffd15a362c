"""Recurrent encoder-decoder with additive attention over an enriched
vocabulary (latent symbols + relation symbols prepended/appended to the
source).  Provides teacher-forced sequence scoring, uniform-prior mixture
scoring across latent components, length-capped beam search, and
mean-pooled text embedding.

All scoring goes through one batched code path whose per-row results are
bit-identical to single-sequence calls (see autodiff module notes), so a
score matrix over (target, latent) pairs can be computed in one pass.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .kg import Relation
from .text import Vocab

_INIT_RANGE = 0.08
_MASK_NEG = -1e9


class BadConfig(ValueError):
    pass


class BadTarget(ValueError):
    pass


class EmptyText(ValueError):
    pass


@dataclass(frozen=True)
class BackboneConfig:
    vocab: Vocab
    embed_dim: int = 32
    hidden_dim: int = 48
    enc_layers: int = 1
    dec_layers: int = 1
    max_target_len: int = 16
    seed: int = 0
    uses_latent: bool = True

    def validate(self) -> None:
        if self.embed_dim < 2 or self.hidden_dim < 2:
            raise BadConfig("embed_dim and hidden_dim must be >= 2")
        if self.enc_layers < 1 or self.dec_layers < 1:
            raise BadConfig("layer counts must be >= 1")
        if self.max_target_len < 2:
            raise BadConfig("max_target_len must be >= 2 (BOS + EOS)")

    def to_dict(self) -> dict:
        return {
            "embed_dim": self.embed_dim,
            "hidden_dim": self.hidden_dim,
            "enc_layers": self.enc_layers,
            "dec_layers": self.dec_layers,
            "max_target_len": self.max_target_len,
            "seed": self.seed,
            "uses_latent": self.uses_latent,
        }

    @classmethod
    def from_dict(cls, data: dict, vocab: Vocab) -> "BackboneConfig":
        return cls(vocab=vocab, **data)


def _param_specs(config: BackboneConfig) -> list[tuple[str, tuple[int, int]]]:
    """Parameter names and shapes in a fixed order (init and checkpoint order)."""
    e, h = config.embed_dim, config.hidden_dim
    v = len(config.vocab)
    specs: list[tuple[str, tuple[int, int]]] = [("emb", (v, e))]
    for layer in range(config.enc_layers):
        in_dim = e if layer == 0 else h
        specs += [
            (f"enc{layer}.wx", (in_dim, 3 * h)),
            (f"enc{layer}.wh", (h, 3 * h)),
            (f"enc{layer}.bx", (1, 3 * h)),
            (f"enc{layer}.bh", (1, 3 * h)),
        ]
    for layer in range(config.dec_layers):
        in_dim = e + h if layer == 0 else h
        specs += [
            (f"dec{layer}.wx", (in_dim, 3 * h)),
            (f"dec{layer}.wh", (h, 3 * h)),
            (f"dec{layer}.bx", (1, 3 * h)),
            (f"dec{layer}.bh", (1, 3 * h)),
        ]
        specs += [(f"bridge{layer}.w", (h, h)), (f"bridge{layer}.b", (1, h))]
    specs += [
        ("attn.wa", (h, h)),
        ("attn.ua", (h, h)),
        ("attn.v", (h, 1)),
        ("attn.b", (1, h)),
        ("out.w", (2 * h, v)),
        ("out.b", (1, v)),
    ]
    return specs


@dataclass
class Hypothesis:
    """Beam-search result: EOS-terminated or length-capped token ids (no BOS)."""

    tokens: tuple[int, ...]
    log_prob: float


@dataclass
class BackboneModel:
    config: BackboneConfig
    params: dict[str, Tensor]

    @property
    def vocab(self) -> Vocab:
        return self.config.vocab

    @property
    def vocab_size(self) -> int:
        return len(self.config.vocab)

    @property
    def eos_token_id(self) -> int:
        return self.config.vocab.eos_id

    def decode_session(self, src_ids: Sequence[int]) -> "_DecodeSession":
        return _DecodeSession(self, list(src_ids))


def init_model(config: BackboneConfig) -> BackboneModel:
    """Seeded uniform init in [-0.08, 0.08]; output projection bias zero."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    params: dict[str, Tensor] = {}
    for name, shape in _param_specs(config):
        if name == "out.b":
            values = np.zeros(shape)
        else:
            values = rng.uniform(-_INIT_RANGE, _INIT_RANGE, size=shape)
        params[name] = Tensor(values, is_param=True, name=name)
    return BackboneModel(config=config, params=params)


def _gru_step(
    params: dict[str, Tensor], prefix: str, inp: Tensor, h: Tensor, hidden: int
) -> Tensor:
    gx = ad.add(ad.matmul(inp, params[f"{prefix}.wx"]), params[f"{prefix}.bx"])
    gh = ad.add(ad.matmul(h, params[f"{prefix}.wh"]), params[f"{prefix}.bh"])
    z = ad.sigmoid(ad.add(ad.slice_cols(gx, 0, hidden), ad.slice_cols(gh, 0, hidden)))
    r = ad.sigmoid(
        ad.add(ad.slice_cols(gx, hidden, 2 * hidden), ad.slice_cols(gh, hidden, 2 * hidden))
    )
    n = ad.tanh(
        ad.add(
            ad.slice_cols(gx, 2 * hidden, 3 * hidden),
            ad.mul(r, ad.slice_cols(gh, 2 * hidden, 3 * hidden)),
        )
    )
    return ad.add(ad.mul(z, h), ad.mul(ad.one_minus(z), n))


@dataclass
class EncodedBatch:
    """Encoder outputs for n_src sources, right-padded to a common length."""

    n_src: int
    padded_len: int
    lengths: np.ndarray
    top_states: Tensor  # (n_src * padded_len, H), row = src * padded_len + step
    att_pre: Tensor  # top_states @ Wa + ba
    init_dec: list[Tensor]  # per decoder layer (n_src, H)


def encode_sources(model: BackboneModel, sources: Sequence[Sequence[int]]) -> EncodedBatch:
    cfg = model.config
    p = model.params
    h_dim = cfg.hidden_dim
    n_src = len(sources)
    lengths = np.array([len(s) for s in sources], dtype=np.int64)
    if np.any(lengths == 0):
        raise EmptyText("cannot encode an empty source sequence")
    s_max = int(lengths.max())
    ids = np.full((n_src, s_max), cfg.vocab.pad_id, dtype=np.int64)
    for i, s in enumerate(sources):
        ids[i, : len(s)] = s

    layer_inputs: Optional[list[Tensor]] = None
    top_flat: Optional[Tensor] = None
    for layer in range(cfg.enc_layers):
        h = Tensor(np.zeros((n_src, h_dim)))
        states: list[Tensor] = []
        for t in range(s_max):
            if layer == 0:
                inp = ad.embedding_lookup(p["emb"], ids[:, t])
            else:
                inp = layer_inputs[t]  # type: ignore[index]
            h = _gru_step(p, f"enc{layer}", inp, h, h_dim)
            states.append(h)
        layer_inputs = states
        top_flat = ad.reshape(ad.concat_cols(states), (n_src * s_max, h_dim))

    final_rows = np.arange(n_src) * s_max + (lengths - 1)
    final_top = ad.gather_rows(top_flat, final_rows)  # type: ignore[arg-type]
    init_dec = [
        ad.tanh(ad.add(ad.matmul(final_top, p[f"bridge{l}.w"]), p[f"bridge{l}.b"]))
        for l in range(cfg.dec_layers)
    ]
    att_pre = ad.add(ad.matmul(top_flat, p["attn.wa"]), p["attn.b"])  # type: ignore[arg-type]
    return EncodedBatch(
        n_src=n_src,
        padded_len=s_max,
        lengths=lengths,
        top_states=top_flat,  # type: ignore[assignment]
        att_pre=att_pre,
        init_dec=init_dec,
    )


@dataclass
class _AttentionView:
    """Encoder tensors gathered/masked for a batch of decoding rows."""

    att_pre: Tensor  # (B * S, H)
    enc_states: Tensor  # (B * S, H)
    mask: Tensor  # (B * S, 1); 0 for real steps, large-negative for padding
    rep_idx: np.ndarray  # (B * S,) repeats row b S times
    padded_len: int


def _attention_view(enc: EncodedBatch, src_map: np.ndarray) -> _AttentionView:
    b = len(src_map)
    s = enc.padded_len
    flat_idx = (src_map[:, None] * s + np.arange(s)[None, :]).reshape(-1)
    mask_vals = np.where(
        np.arange(s)[None, :] < enc.lengths[src_map][:, None], 0.0, _MASK_NEG
    ).reshape(-1, 1)
    return _AttentionView(
        att_pre=ad.gather_rows(enc.att_pre, flat_idx),
        enc_states=ad.gather_rows(enc.top_states, flat_idx),
        mask=Tensor(mask_vals),
        rep_idx=np.repeat(np.arange(b), s),
        padded_len=s,
    )


def _attend(params: dict[str, Tensor], view: _AttentionView, s_top: Tensor) -> Tensor:
    b = s_top.shape[0]
    s = view.padded_len
    q = ad.gather_rows(ad.matmul(s_top, params["attn.ua"]), view.rep_idx)
    scores = ad.matmul(ad.tanh(ad.add(view.att_pre, q)), params["attn.v"])
    alpha = ad.row_softmax_seq(ad.reshape(ad.add(scores, view.mask), (b, s)))
    weighted = ad.mul(ad.reshape(alpha, (b * s, 1)), view.enc_states)
    return ad.sum_groups_seq(weighted, s)


def _decoder_step(
    model: BackboneModel,
    view: _AttentionView,
    hidden: list[Tensor],
    token_ids: np.ndarray,
) -> tuple[list[Tensor], Tensor]:
    """Consume one token per row; returns (new hidden stack, logits)."""
    cfg = model.config
    p = model.params
    ctx = _attend(p, view, hidden[-1])
    inp = ad.concat_cols([ad.embedding_lookup(p["emb"], token_ids), ctx])
    new_hidden: list[Tensor] = []
    for layer in range(cfg.dec_layers):
        h = _gru_step(p, f"dec{layer}", inp, hidden[layer], cfg.hidden_dim)
        new_hidden.append(h)
        inp = h
    logits = ad.add(ad.matmul(ad.concat_cols([new_hidden[-1], ctx]), p["out.w"]), p["out.b"])
    return new_hidden, logits


def batch_target_nll(
    model: BackboneModel,
    enc: EncodedBatch,
    src_map: Sequence[int],
    targets: Sequence[Sequence[int]],
) -> tuple[Tensor, np.ndarray]:
    """Teacher-forced negative log-likelihood per target.

    Row i of the result is the summed cross-entropy of `targets[i]` decoded
    against source `src_map[i]`; also returns per-row predicted-token counts.
    Targets must be BOS-prefixed and EOS-terminated.
    """
    cfg = model.config
    vocab = cfg.vocab
    rows = np.asarray(src_map, dtype=np.int64)
    b = len(targets)
    if b == 0 or len(rows) != b:
        raise BadTarget("need one source row per target")
    for t in targets:
        if len(t) < 2 or t[0] != vocab.bos_id or t[-1] != vocab.eos_id:
            raise BadTarget("targets must start with BOS and end with EOS")
        if len(t) > cfg.max_target_len:
            raise BadTarget(f"target length {len(t)} exceeds {cfg.max_target_len}")

    n_steps = max(len(t) for t in targets) - 1
    inp_ids = np.full((b, n_steps), vocab.pad_id, dtype=np.int64)
    label_ids = np.full((b, n_steps), vocab.pad_id, dtype=np.int64)
    mask = np.zeros((b, n_steps))
    for i, t in enumerate(targets):
        n = len(t) - 1
        inp_ids[i, :n] = t[:-1]
        label_ids[i, :n] = t[1:]
        mask[i, :n] = 1.0

    view = _attention_view(enc, rows)
    hidden = [ad.gather_rows(init, rows) for init in enc.init_dec]
    total: Optional[Tensor] = None
    for t in range(n_steps):
        hidden, logits = _decoder_step(model, view, hidden, inp_ids[:, t])
        ce = ad.cross_entropy(logits, label_ids[:, t])
        masked = ad.mul(ce, Tensor(mask[:, t : t + 1]))
        total = masked if total is None else ad.add(total, masked)
    return total, mask.sum(axis=1).astype(np.int64)  # type: ignore[return-value]


def sequence_log_prob(model: BackboneModel, src_ids: Sequence[int], tgt_ids: Sequence[int]) -> float:
    """Teacher-forced log Pr(target | source); always <= 0."""
    enc = encode_sources(model, [src_ids])
    nll, _ = batch_target_nll(model, enc, [0], [list(tgt_ids)])
    return -nll.item()


def mixture_log_prob(
    model: BackboneModel,
    x_tokens: Sequence[str],
    relation: Relation,
    z_tokens: Sequence[str],
    k_components: Optional[int] = None,
) -> float:
    """log of the uniform-prior mixture over latent components."""
    vocab = model.vocab
    target = vocab.encode_target(z_tokens)
    if not model.config.uses_latent:
        return sequence_log_prob(model, vocab.encode_source(x_tokens, relation, None), target)
    k = vocab.k_latents if k_components is None else k_components
    if k != vocab.k_latents:
        raise ValueError(f"mixture size {k} != vocabulary latent count {vocab.k_latents}")
    sources = [vocab.encode_source(x_tokens, relation, i) for i in range(k)]
    enc = encode_sources(model, sources)
    nll, _ = batch_target_nll(model, enc, list(range(k)), [target] * k)
    comps = -nll.values[:, 0]
    m = comps.max()
    return float(m + np.log(np.exp(comps - m).sum()) - np.log(k))


def step_log_probs(logits: np.ndarray) -> np.ndarray:
    """Log-softmax rows of raw logits (inference helper)."""
    return logits - ad.log_row_sums(logits)[:, None]


class _DecodeSession:
    """Incremental decoding over one source, for beam search."""

    def __init__(self, model: BackboneModel, src_ids: list[int]):
        self.model = model
        self.enc = encode_sources(model, [src_ids])
        self.vocab_size = model.vocab_size

    def initial(self) -> tuple[list[np.ndarray], np.ndarray]:
        """State after consuming BOS: (hidden stack, next-token log-probs)."""
        return self._advance_rows(
            [init.values[0:1] for init in self.enc.init_dec],
            np.array([self.model.vocab.bos_id], dtype=np.int64),
        )

    def advance(
        self,
        state: tuple[list[np.ndarray], np.ndarray],
        parent_rows: np.ndarray,
        tokens: np.ndarray,
    ) -> tuple[list[np.ndarray], np.ndarray]:
        hidden, _ = state
        return self._advance_rows([h[parent_rows] for h in hidden], tokens)

    def _advance_rows(
        self, hidden_vals: list[np.ndarray], tokens: np.ndarray
    ) -> tuple[list[np.ndarray], np.ndarray]:
        b = len(tokens)
        view = _attention_view(self.enc, np.zeros(b, dtype=np.int64))
        hidden = [Tensor(h) for h in hidden_vals]
        new_hidden, logits = _decoder_step(self.model, view, hidden, tokens)
        return [h.values for h in new_hidden], step_log_probs(logits.values)


def beam_search(
    model, src_ids: Sequence[int], beam_width: int, max_len: Optional[int] = None
) -> list[Hypothesis]:
    """Length-capped beam search; deterministic tie-break by token ids.

    `model` needs `decode_session(src_ids)`, `vocab_size`, and
    `eos_token_id` (satisfied by BackboneModel and by test stubs).
    Finished hypotheses retire into the pool; at the length cap the
    surviving prefixes are pooled as-is.
    """
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    if max_len is None:
        max_len = getattr(model, "config").max_target_len - 2
    eos = model.eos_token_id
    session = model.decode_session(src_ids)
    state = session.initial()
    # actives: (tokens, log_prob, state row); kept sorted by (-lp, tokens)
    actives: list[tuple[tuple[int, ...], float, int]] = [((), 0.0, 0)]
    pool: list[Hypothesis] = []

    for _ in range(max_len):
        if not actives:
            break
        logps = state[1]
        totals = np.array([lp for _, lp, _ in actives])[:, None] + logps
        flat = totals.reshape(-1)
        finite = np.nonzero(flat > -np.inf)[0]  # zero-probability tokens never expand
        if finite.size > beam_width:
            kth = np.partition(flat[finite], finite.size - beam_width)[finite.size - beam_width]
            cand_idx = finite[flat[finite] >= kth]
        else:
            cand_idx = finite
        v = session.vocab_size
        cands = sorted(
            ((flat[i], actives[i // v][0] + (int(i % v),), i // v) for i in cand_idx),
            key=lambda c: (-c[0], c[1]),
        )[:beam_width]
        new_actives: list[tuple[tuple[int, ...], float, int]] = []
        parents: list[int] = []
        tokens: list[int] = []
        for lp, seq, parent in cands:
            if seq[-1] == eos:
                pool.append(Hypothesis(tokens=seq, log_prob=float(lp)))
            else:
                new_actives.append((seq, float(lp), len(parents)))
                parents.append(actives[parent][2])
                tokens.append(seq[-1])
        actives = new_actives
        if actives:
            state = session.advance(
                state, np.array(parents, dtype=np.int64), np.array(tokens, dtype=np.int64)
            )

    pool.extend(Hypothesis(tokens=seq, log_prob=lp) for seq, lp, _ in actives)
    pool.sort(key=lambda h: (-h.log_prob, h.tokens))
    return pool[:beam_width]


def embed_text(model: BackboneModel, tokens: Sequence[str]) -> np.ndarray:
    """Mean of the input-embedding rows of the (UNK-mapped) tokens."""
    if not tokens:
        raise EmptyText("cannot embed an empty token sequence")
    vocab = model.vocab
    ids = np.array([vocab.token_id(t) for t in tokens], dtype=np.int64)
    rows = model.params["emb"].values[ids]
    return rows.mean(axis=0)
