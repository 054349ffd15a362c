import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

import mixpath.autodiff as ad
from mixpath.autodiff import AdamState, Tape, Tensor


def rel_err(a, b, floor=1e-3):
    return abs(a - b) / max(abs(a), abs(b), floor)


class TestPrimitives:
    def test_row_softmax_uniform(self):
        out = ad.row_softmax(Tensor([[0.0, 0.0, 0.0]]))
        np.testing.assert_allclose(out.values, [[1 / 3] * 3], atol=1e-15)

    def test_row_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        out = ad.row_softmax(Tensor(rng.normal(size=(40, 17)) * 10))
        np.testing.assert_allclose(out.values.sum(axis=1), 1.0, atol=1e-12)

    def test_cross_entropy_uniform_is_log_v(self):
        logits = Tensor(np.zeros((1, 5)))
        ce = ad.cross_entropy(logits, np.array([3]))
        assert rel_err(ce.item(), math.log(5)) < 1e-12

    def test_matmul_identity(self):
        a = np.array([[1.5, -2.0], [0.25, 4.0]])
        out = ad.matmul(Tensor(np.eye(2)), Tensor(a))
        np.testing.assert_array_equal(out.values, a)

    def test_shape_mismatch(self):
        with pytest.raises(ad.ShapeMismatch):
            ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
        with pytest.raises(ad.ShapeMismatch):
            ad.add(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2))))

    def test_zero_extent_rejected(self):
        with pytest.raises(ad.ShapeMismatch):
            Tensor(np.zeros((0, 3)))

    def test_matmul_row_slab_bit_stability(self):
        # a row of a batched product equals the same row computed alone
        rng = np.random.default_rng(7)
        for _ in range(50):
            b = int(rng.integers(1, 60))
            d = int(rng.integers(2, 70))
            h = int(rng.integers(2, 200))
            a = rng.normal(size=(b, d))
            w = rng.normal(size=(d, h))
            full = ad.matmul(Tensor(a), Tensor(w)).values
            i = int(rng.integers(0, b))
            single = ad.matmul(Tensor(a[i : i + 1]), Tensor(w)).values
            np.testing.assert_array_equal(full[i : i + 1], single)

    def test_sum_groups_seq_pad_stability(self):
        # exact-zero trailing rows do not change the grouped sums
        rng = np.random.default_rng(3)
        x = rng.normal(size=(4 * 5, 7))
        base = ad.sum_groups_seq(Tensor(x), 5).values
        padded = np.concatenate(
            [x.reshape(4, 5, 7), np.zeros((4, 3, 7))], axis=1
        ).reshape(4 * 8, 7)
        np.testing.assert_array_equal(ad.sum_groups_seq(Tensor(padded), 8).values, base)

    def test_determinism(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=(9, 11)), rng.normal(size=(11, 13))
        r1 = ad.matmul(Tensor(a), Tensor(b)).values
        r2 = ad.matmul(Tensor(a), Tensor(b)).values
        np.testing.assert_array_equal(r1, r2)


class TestBackward:
    def test_quadratic(self):
        w = Tensor(np.array([[1.0, 2.0]]), is_param=True)
        with Tape() as tape:
            loss = ad.sum_all(ad.mul(w, w))
        grads = ad.backward(tape, loss)
        np.testing.assert_allclose(grads[w], [[2.0, 4.0]], atol=1e-15)

    def test_unused_parameter_gets_no_gradient(self):
        w = Tensor(np.ones((1, 2)), is_param=True)
        u = Tensor(np.ones((1, 2)), is_param=True)
        with Tape() as tape:
            loss = ad.sum_all(ad.mul(w, w))
        grads = ad.backward(tape, loss)
        assert u not in grads

    def test_non_scalar_loss_rejected(self):
        w = Tensor(np.ones((2, 2)), is_param=True)
        with Tape() as tape:
            y = ad.mul(w, w)
        with pytest.raises(ad.NonScalarLoss):
            ad.backward(tape, y)

    def test_two_layer_net_matches_finite_differences(self):
        rng = np.random.default_rng(42)
        w1 = Tensor(rng.normal(size=(4, 6)) * 0.5, is_param=True, name="w1")
        b1 = Tensor(rng.normal(size=(1, 6)) * 0.5, is_param=True, name="b1")
        w2 = Tensor(rng.normal(size=(6, 3)) * 0.5, is_param=True, name="w2")
        x = Tensor(rng.normal(size=(5, 4)))
        target = np.array([0, 2, 1, 1, 0])

        def forward():
            h = ad.tanh(ad.add(ad.matmul(x, w1), b1))
            probs_ce = ad.cross_entropy(ad.matmul(h, w2), target)
            return ad.scale(ad.sum_all(probs_ce), 1.0 / 5.0)

        with Tape() as tape:
            loss = forward()
        grads = ad.backward(tape, loss)

        eps = 1e-5
        worst = 0.0
        for p in (w1, b1, w2):
            flat = p.values.reshape(-1)
            g = grads[p].reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                f1 = forward().item()
                flat[i] = orig - eps
                f2 = forward().item()
                flat[i] = orig
                worst = max(worst, rel_err(g[i], (f1 - f2) / (2 * eps)))
        assert worst <= 1e-6

    def test_gradcheck_covers_every_primitive(self):
        rng = np.random.default_rng(9)
        table = Tensor(rng.normal(size=(6, 4)) * 0.3, is_param=True, name="table")
        w = Tensor(rng.normal(size=(8, 5)) * 0.3, is_param=True, name="w")
        ids = np.array([0, 3, 5, 1])
        target = np.array([2, 0])

        def forward():
            e = ad.gather_rows(table, ids)  # (4, 4)
            s = ad.sigmoid(ad.slice_cols(e, 0, 2))  # (4, 2)
            t = ad.tanh(ad.slice_cols(e, 2, 4))
            joined = ad.concat_cols([s, t, ad.one_minus(ad.mul(s, t))])  # (4, 6)
            probs = ad.row_softmax_seq(joined)
            weighted = ad.mul(ad.reshape(probs, (24, 1)), ad.gather_rows(table, np.tile(ids, 6)))
            pooled = ad.sum_groups_seq(weighted, 6)  # (4, 4)
            flat = ad.reshape(pooled, (2, 8))
            ce = ad.cross_entropy(ad.matmul(flat, w), target)
            return ad.scale(ad.sum_all(ad.sub(ce, Tensor(np.zeros((2, 1))))), 0.5)

        with Tape() as tape:
            loss = forward()
        grads = ad.backward(tape, loss)
        eps = 1e-6
        worst = 0.0
        for p in (table, w):
            flat = p.values.reshape(-1)
            g = grads[p].reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                f1 = forward().item()
                flat[i] = orig - eps
                f2 = forward().item()
                flat[i] = orig
                worst = max(worst, rel_err(g[i], (f1 - f2) / (2 * eps)))
        assert worst <= 1e-6


class TestAdam:
    def test_first_step_magnitude(self):
        rng = np.random.default_rng(0)
        p = Tensor(np.zeros((3, 3)), is_param=True)
        g = rng.normal(size=(3, 3))
        lr = 0.05
        ad.adam_step({"p": p}, {"p": g}, AdamState(), lr=lr)
        # bias-corrected first step is ~ -lr * sign(g)
        assert np.all(np.abs(p.values) <= lr * (1 + 1e-6))
        assert np.all(np.sign(p.values) == -np.sign(g))

    def test_zero_grad_keeps_params_but_decays_moments(self):
        p = Tensor(np.full((2, 2), 1.5), is_param=True)
        state = AdamState()
        ad.adam_step({"p": p}, {"p": np.ones((2, 2))}, state, lr=0.1)
        after_first = p.values.copy()
        m_before = state.m["p"].copy()
        ad.adam_step({"p": p}, {"p": np.zeros((2, 2))}, state, lr=0.0)
        np.testing.assert_array_equal(p.values, after_first)
        assert np.all(np.abs(state.m["p"]) < np.abs(m_before))

    def test_deterministic(self):
        def run():
            p = Tensor(np.ones((2, 2)), is_param=True)
            state = AdamState()
            for step in range(5):
                ad.adam_step({"p": p}, {"p": np.full((2, 2), 0.3 * (step + 1))}, state, lr=0.01)
            return p.values

        np.testing.assert_array_equal(run(), run())

    def test_shape_mismatch(self):
        p = Tensor(np.ones((2, 2)), is_param=True)
        with pytest.raises(ad.ShapeMismatch):
            ad.adam_step({"p": p}, {"p": np.ones((3, 3))}, AdamState(), lr=0.1)


@settings(max_examples=40, deadline=None)
@given(
    hnp.arrays(
        np.float64,
        st.tuples(st.integers(1, 6), st.integers(1, 9)),
        elements=st.floats(-50, 50),
    )
)
def test_softmax_normalization_property(x):
    out = ad.row_softmax(Tensor(x))
    np.testing.assert_allclose(out.values.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(out.values > 0)
