import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gcgq.quaternion import (
    QuaternionMatrix,
    QuaternionWeights,
    ScalarQuaternion,
    default_sigma,
    equivalent_real_matrix,
    fuse,
    hamilton_matmul,
    hamilton_matmul_backward,
    hamilton_scalar,
    quaternion_init,
)

finite = st.floats(-10, 10, allow_nan=False)
quats = st.builds(ScalarQuaternion, finite, finite, finite, finite)


def Q(r, x, y, z):
    return ScalarQuaternion(r, x, y, z)


def rand_qm(rng, n, d):
    return QuaternionMatrix(*rng.normal(size=(4, n, d)))


def rand_qw(rng, a, b):
    return QuaternionWeights(*rng.normal(size=(4, a, b)))


def entrywise(f, w):
    n, din = f.shape
    dout = w.shape[1]
    out = np.zeros((4, n, dout))
    for i in range(n):
        for j in range(dout):
            acc = np.zeros(4)
            for k in range(din):
                fq = Q(*(b[i, k] for b in f.blocks()))
                wq = Q(*(b[k, j] for b in w.blocks()))
                acc += hamilton_scalar(fq, wq).as_tuple()
            out[:, i, j] = acc
    return out


def test_basis_products():
    one, i, j, k = Q(1, 0, 0, 0), Q(0, 1, 0, 0), Q(0, 0, 1, 0), Q(0, 0, 0, 1)
    assert hamilton_scalar(i, j) == k
    assert hamilton_scalar(j, k) == i
    assert hamilton_scalar(k, i) == j
    assert hamilton_scalar(j, i) == Q(0, 0, 0, -1)
    assert hamilton_scalar(i, i) == Q(-1, 0, 0, 0)
    assert hamilton_scalar(one, k) == k


def test_matmul_matches_entrywise_expansion():
    rng = np.random.default_rng(0)
    f, w = rand_qm(rng, 3, 4), rand_qw(rng, 4, 2)
    got = np.stack(hamilton_matmul(f, w).blocks())
    np.testing.assert_allclose(got, entrywise(f, w), atol=1e-12)


def test_real_matrix_layout():
    rng = np.random.default_rng(1)
    f, w = rand_qm(rng, 5, 3), rand_qw(rng, 3, 6)
    m = equivalent_real_matrix(w)
    assert m.shape == (12, 24)
    np.testing.assert_allclose(f.concat() @ m, hamilton_matmul(f, w).concat(), atol=1e-12)
    # top row block is [Wr Wx Wy Wz]
    np.testing.assert_array_equal(m[:3, 6:12], w.wx)
    np.testing.assert_array_equal(m[3:6, :6], -w.wx)


def test_matmul_shape_mismatch():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError, match="shape mismatch"):
        hamilton_matmul(rand_qm(rng, 2, 3), rand_qw(rng, 4, 2))


def test_blocks_must_agree():
    with pytest.raises(ValueError):
        QuaternionMatrix(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 2)))


def test_backward_against_finite_differences():
    rng = np.random.default_rng(2)
    f, w, g = rand_qm(rng, 3, 2), rand_qw(rng, 2, 3), rand_qm(rng, 3, 3)

    def loss(fc, wb):
        out = hamilton_matmul(QuaternionMatrix.from_concat(fc), QuaternionWeights(*wb))
        return float((out.concat() * g.concat()).sum())

    gf, gw = hamilton_matmul_backward(f, w, g)
    h = 1e-6
    fc = f.concat()
    num_f = np.zeros_like(fc)
    for idx in np.ndindex(fc.shape):
        e = np.zeros_like(fc)
        e[idx] = h
        num_f[idx] = (loss(fc + e, w.blocks()) - loss(fc - e, w.blocks())) / (2 * h)
    np.testing.assert_allclose(gf.concat(), num_f, atol=1e-7)
    wb = np.stack(w.blocks())
    num_w = np.zeros_like(wb)
    for idx in np.ndindex(wb.shape):
        e = np.zeros_like(wb)
        e[idx] = h
        num_w[idx] = (loss(fc, wb + e) - loss(fc, wb - e)) / (2 * h)
    np.testing.assert_allclose(np.stack(gw.blocks()), num_w, atol=1e-7)


@settings(max_examples=200, deadline=None)
@given(quats, quats)
def test_norm_is_multiplicative(p, q):
    assert hamilton_scalar(p, q).norm() == pytest.approx(p.norm() * q.norm(), rel=1e-10, abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(quats, quats, quats)
def test_associativity(p, q, r):
    left = hamilton_scalar(hamilton_scalar(p, q), r).as_tuple()
    right = hamilton_scalar(p, hamilton_scalar(q, r)).as_tuple()
    np.testing.assert_allclose(left, right, rtol=1e-10, atol=1e-8)


def test_init_shapes_and_determinism():
    a = quaternion_init(5, 7, rng_seed=11)
    b = quaternion_init(5, 7, rng_seed=11)
    assert a.shape == (5, 7) and a.n_params == 140
    for x, y in zip(a.blocks(), b.blocks()):
        np.testing.assert_array_equal(x, y)
    c = quaternion_init(5, 7, rng_seed=12)
    assert not np.array_equal(a.wr, c.wr)


def test_init_quaternion_variance():
    w = quaternion_init(300, 300, sigma=0.1, rng_seed=0)
    q = np.stack(w.blocks()).reshape(4, -1)
    second_moment = (q ** 2).sum(axis=0).mean()
    mean_sq = (q.mean(axis=1) ** 2).sum()
    assert second_moment - mean_sq == pytest.approx(0.04, rel=0.05)


def test_init_imaginary_axis_is_unit():
    w = quaternion_init(20, 20, sigma=0.3, rng_seed=4)
    mag = np.sqrt(sum(b ** 2 for b in w.blocks()))
    imag = np.sqrt(w.wx ** 2 + w.wy ** 2 + w.wz ** 2)
    # cos/sin split of the polar form
    np.testing.assert_allclose(w.wr ** 2 + imag ** 2, mag ** 2)


def test_init_rejects_bad_sigma():
    with pytest.raises(ValueError):
        quaternion_init(2, 2, sigma=0.0)


def test_default_sigma():
    assert default_sigma(3, 5) == pytest.approx(1 / 4)


def test_fuse_averages_parts():
    m = QuaternionMatrix(np.ones((2, 2)), 2 * np.ones((2, 2)), np.zeros((2, 2)), np.ones((2, 2)))
    np.testing.assert_allclose(fuse(m), np.ones((2, 2)))


def test_from_concat_rejects_odd_width():
    with pytest.raises(ValueError, match="divisible"):
        QuaternionMatrix.from_concat(np.zeros((2, 6 + 1)))
