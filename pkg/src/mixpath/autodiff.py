"""Dense float64 tensors with a reverse-mode tape and an Adam optimizer.

Matrix products go through `np.einsum` rather than BLAS: einsum reduces
each output element sequentially over the contraction axis, so a row of a
batched product is bit-identical to the same row computed alone.  Ops
whose reduction length varies with padding (attention softmax, grouped
sums) accumulate sequentially for the same reason.  This is what lets
batched scoring match independent single-sequence calls bit-for-bit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np


class ShapeMismatch(ValueError):
    pass


class NonScalarLoss(ValueError):
    pass


class Tensor:
    """A float64 ndarray wrapper; `is_param` marks trainable leaves."""

    __slots__ = ("values", "is_param", "name")

    def __init__(self, values, is_param: bool = False, name: Optional[str] = None):
        arr = np.ascontiguousarray(values, dtype=np.float64)
        if arr.size == 0:
            raise ShapeMismatch("zero-extent tensors are not allowed")
        self.values = arr
        self.is_param = is_param
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def item(self) -> float:
        if self.values.size != 1:
            raise NonScalarLoss(f"tensor of shape {self.shape} is not a scalar")
        return float(self.values.reshape(-1)[0])

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, param={self.is_param}{tag})"


@dataclass
class _Node:
    out_id: int
    inputs: tuple[Tensor, ...]
    vjp: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tape:
    """Ordered record of primitive ops; single-writer, topological by append."""

    def __init__(self) -> None:
        self.nodes: list[_Node] = []
        self._produced: set[int] = set()

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPE_STACK.pop()

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], vjp) -> None:
        self.nodes.append(_Node(id(out), inputs, vjp))
        self._produced.add(id(out))


_TAPE_STACK: list[Tape] = []


def _active_tape() -> Optional[Tape]:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _emit(out: Tensor, inputs: tuple[Tensor, ...], vjp) -> Tensor:
    tape = _active_tape()
    if tape is not None:
        tape.record(out, inputs, vjp)
    return out


def backward(tape: Tape, loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Gradients of a scalar loss for every parameter leaf on the tape."""
    if loss.values.size != 1:
        raise NonScalarLoss(f"loss has shape {loss.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.values)}
    param_grads: dict[Tensor, np.ndarray] = {}
    for node in reversed(tape.nodes):
        g = grads.pop(node.out_id, None)
        if g is None:
            continue
        for inp, gi in zip(node.inputs, node.vjp(g)):
            if gi is None:
                continue
            if inp.is_param:
                if inp in param_grads:
                    param_grads[inp] = param_grads[inp] + gi
                else:
                    param_grads[inp] = gi
            elif id(inp) in tape._produced:
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = gi
            # non-parameter leaves are skipped
    return param_grads


def _matmul_raw(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # (B,1,D) @ (D,H) contracts each row independently, so a row of a
    # batched product is bit-identical to the same row computed alone
    # (plain 2-D BLAS GEMM is not row-stable in this sense).
    return np.matmul(a[:, None, :], b)[:, 0, :]


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim != 2 or b.values.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul {a.shape} @ {b.shape}")
    out = Tensor(_matmul_raw(a.values, b.values))
    av, bv = a.values, b.values

    def vjp(g: np.ndarray):
        # gradients never feed batched-vs-single comparisons; BLAS is fine
        return (g @ bv.T, av.T @ g)

    return _emit(out, (a, b), vjp)


def _broadcast_check(a: Tensor, b: Tensor) -> None:
    sa, sb = a.shape, b.shape
    if sa == sb:
        return
    if len(sa) == 2 and len(sb) == 2:
        if sb in ((1, sa[1]), (sa[0], 1)) or sa in ((1, sb[1]), (sb[0], 1)):
            return
    raise ShapeMismatch(f"elementwise op on {sa} and {sb}")


def _reduce_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape[0] == 1:
        return g.sum(axis=0, keepdims=True)
    return g.sum(axis=1, keepdims=True)


def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_check(a, b)
    out = Tensor(a.values + b.values)

    def vjp(g: np.ndarray):
        return (_reduce_to(g, a.shape), _reduce_to(g, b.shape))

    return _emit(out, (a, b), vjp)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_check(a, b)
    out = Tensor(a.values - b.values)

    def vjp(g: np.ndarray):
        return (_reduce_to(g, a.shape), -_reduce_to(g, b.shape))

    return _emit(out, (a, b), vjp)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_check(a, b)
    out = Tensor(a.values * b.values)
    av, bv = a.values, b.values

    def vjp(g: np.ndarray):
        return (_reduce_to(g * bv, a.shape), _reduce_to(g * av, b.shape))

    return _emit(out, (a, b), vjp)


def one_minus(a: Tensor) -> Tensor:
    out = Tensor(1.0 - a.values)
    return _emit(out, (a,), lambda g: (-g,))


def scale(a: Tensor, c: float) -> Tensor:
    out = Tensor(a.values * c)
    return _emit(out, (a,), lambda g: (g * c,))


def tanh(a: Tensor) -> Tensor:
    out = Tensor(np.tanh(a.values))
    ov = out.values
    return _emit(out, (a,), lambda g: (g * (1.0 - ov * ov),))


def sigmoid(a: Tensor) -> Tensor:
    out = Tensor(1.0 / (1.0 + np.exp(-a.values)))
    ov = out.values
    return _emit(out, (a,), lambda g: (g * ov * (1.0 - ov),))


def _softmax_vjp(p: np.ndarray):
    def vjp(g: np.ndarray):
        inner = np.einsum("bv,bv->b", g, p)[:, None]
        return (p * (g - inner),)

    return vjp


def row_softmax(a: Tensor) -> Tensor:
    """Row-stabilized softmax; rows sum to 1.  Fixed-width reduction."""
    if a.values.ndim != 2:
        raise ShapeMismatch(f"row_softmax expects a matrix, got {a.shape}")
    shifted = a.values - a.values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p = e / np.einsum("bv->b", e)[:, None]
    out = Tensor(p)
    return _emit(out, (a,), _softmax_vjp(p))


def row_softmax_seq(a: Tensor) -> Tensor:
    """Softmax whose denominator accumulates columns sequentially.

    Used where trailing columns may be padding that underflows to exactly
    zero: the partial sums over real columns are then unaffected, keeping
    padded batched rows bit-identical to their unpadded single-row runs.
    """
    if a.values.ndim != 2:
        raise ShapeMismatch(f"row_softmax_seq expects a matrix, got {a.shape}")
    shifted = a.values - a.values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    den = e[:, 0].copy()
    for s in range(1, e.shape[1]):
        den += e[:, s]
    p = e / den[:, None]
    out = Tensor(p)
    return _emit(out, (a,), _softmax_vjp(p))


def gather_rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """Select rows of `table` by integer index; gradient scatter-adds."""
    idx = np.asarray(ids, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeMismatch("gather_rows expects a flat index array")
    out = Tensor(table.values[idx])
    shape = table.values.shape

    def vjp(g: np.ndarray):
        gt = np.zeros(shape)
        np.add.at(gt, idx, g)
        return (gt,)

    return _emit(out, (table,), vjp)


embedding_lookup = gather_rows


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    rows = parts[0].shape[0]
    if any(p.values.ndim != 2 or p.shape[0] != rows for p in parts):
        raise ShapeMismatch("concat_cols expects matrices with equal row counts")
    out = Tensor(np.concatenate([p.values for p in parts], axis=1))
    widths = [p.shape[1] for p in parts]

    def vjp(g: np.ndarray):
        offs = np.cumsum([0] + widths)
        return tuple(
            np.ascontiguousarray(g[:, offs[i] : offs[i + 1]]) for i in range(len(parts))
        )

    return _emit(out, tuple(parts), vjp)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    out = Tensor(np.ascontiguousarray(a.values[:, start:stop]))
    shape = a.values.shape

    def vjp(g: np.ndarray):
        ga = np.zeros(shape)
        ga[:, start:stop] = g
        return (ga,)

    return _emit(out, (a,), vjp)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = Tensor(a.values.reshape(shape))
    orig = a.values.shape
    return _emit(out, (a,), lambda g: (g.reshape(orig),))


def sum_groups_seq(a: Tensor, group_size: int) -> Tensor:
    """Sum consecutive groups of `group_size` rows, accumulating in order.

    (G*n, C) -> (G, C).  Sequential accumulation keeps results bit-stable
    when trailing group members are exact zeros from masking.
    """
    rows, cols = a.shape
    if rows % group_size != 0:
        raise ShapeMismatch(f"{rows} rows not divisible by group size {group_size}")
    v = a.values
    acc = v[0::group_size].copy()
    for s in range(1, group_size):
        acc += v[s::group_size]
    out = Tensor(acc)
    return _emit(out, (a,), lambda g: (np.repeat(g, group_size, axis=0),))


def cross_entropy(logits: Tensor, target_ids: np.ndarray) -> Tensor:
    """Per-row negative log-likelihood of the target id; returns (B, 1)."""
    ids = np.asarray(target_ids, dtype=np.int64)
    if logits.values.ndim != 2 or ids.shape != (logits.shape[0],):
        raise ShapeMismatch(f"cross_entropy on {logits.shape} with ids {ids.shape}")
    lv = logits.values
    m = lv.max(axis=1, keepdims=True)
    e = np.exp(lv - m)
    den = np.einsum("bv->b", e)
    logz = m[:, 0] + np.log(den)
    rows = np.arange(lv.shape[0])
    ce = (logz - lv[rows, ids])[:, None]
    out = Tensor(ce)
    p = e / den[:, None]

    def vjp(g: np.ndarray):
        gl = p * g
        gl[rows, ids] -= g[:, 0]
        return (gl,)

    return _emit(out, (logits,), vjp)


def sum_all(a: Tensor) -> Tensor:
    out = Tensor(np.array([[a.values.sum()]]))
    shape = a.values.shape
    return _emit(out, (a,), lambda g: (np.full(shape, g.reshape(-1)[0]),))


def log_row_sums(logits: np.ndarray) -> np.ndarray:
    """log-sum-exp of each row; plain ndarray helper for inference paths."""
    m = logits.max(axis=1, keepdims=True)
    return m[:, 0] + np.log(np.einsum("bv->b", np.exp(logits - m)))


@dataclass
class AdamState:
    """First/second moment estimates plus the shared step counter."""

    step: int = 0
    m: dict[str, np.ndarray] = None  # type: ignore[assignment]
    v: dict[str, np.ndarray] = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.m is None:
            self.m = {}
        if self.v is None:
            self.v = {}


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update, in place on `params`."""
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.values)
        if g.shape != p.values.shape:
            raise ShapeMismatch(f"grad shape {g.shape} != param {p.values.shape} for {name}")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.values)
            v = np.zeros_like(p.values)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        p.values = np.ascontiguousarray(p.values - lr * m_hat / (np.sqrt(v_hat) + eps))
