import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from advmetrics.errors import ShapeMismatch
from advmetrics.norms import NormQuadruple, compute_norms, rescale_norms
from advmetrics.tensor import make_pair


def test_identical_pair_is_zero(rng):
    x = rng.uniform(0, 255, (4, 4, 3))
    assert compute_norms(make_pair(x, x)) == (0, 0, 0, 0)


def test_single_coordinate():
    x = np.zeros((2, 2, 1))
    y = x.copy()
    y[1, 0, 0] = 3.0
    assert compute_norms(make_pair(x, y)) == NormQuadruple(1, 3, 3, 3)


def test_hand_vector():
    # v = [1, -2, 2] -> l0 3, l1 5, l2 sqrt(9), linf 2
    x = np.array([[[10.0, 10.0, 10.0]]])
    y = np.array([[[11.0, 8.0, 12.0]]])
    assert compute_norms(make_pair(x, y)) == NormQuadruple(3, 5, 3, 2)


def test_matches_loop_oracle(rng):
    x = rng.uniform(0, 255, (16, 16, 3))
    y = rng.uniform(0, 255, (16, 16, 3))
    got = compute_norms(make_pair(x, y))
    np.testing.assert_allclose(got, oracles.norms(x, y), rtol=1e-9)


def test_l0_tolerance():
    x = np.zeros((1, 3, 1))
    y = np.array([[[0.001], [0.5], [2.0]]])
    assert compute_norms(make_pair(x, y)).l0 == 3
    assert compute_norms(make_pair(x, y), l0_tolerance=0.01).l0 == 2
    with pytest.raises(ValueError):
        compute_norms(make_pair(x, y), l0_tolerance=-1)


def test_shape_mismatch_propagates():
    from advmetrics.tensor import ImagePair, ImageTensor

    pair = object.__new__(ImagePair)
    object.__setattr__(pair, "original", ImageTensor(np.zeros((2, 2, 1))))
    object.__setattr__(pair, "adversarial", ImageTensor(np.zeros((2, 3, 1))))
    with pytest.raises(ShapeMismatch):
        compute_norms(pair)


def test_rescale_to_unit_range():
    n = rescale_norms(NormQuadruple(7, 255, 510, 25.5))
    assert n == NormQuadruple(7, 1.0, 2.0, 0.1)


images = arrays(np.float64, (3, 4, 3), elements=st.floats(0, 255))


@given(images, images)
@settings(max_examples=100, deadline=None)
def test_norm_ordering(x, y):
    l0, l1, l2, linf = compute_norms(make_pair(x, y))
    assert linf <= l2 * (1 + 1e-12)
    assert l2 <= l1 * (1 + 1e-12)
    assert l1 <= l0 * linf * (1 + 1e-12)
    assert l0 <= x.size


@given(images, images, st.randoms(use_true_random=False))
@settings(max_examples=50, deadline=None)
def test_permutation_invariance(x, y, r):
    perm = list(range(x.size))
    r.shuffle(perm)
    xp = x.reshape(-1)[perm].reshape(x.shape)
    yp = y.reshape(-1)[perm].reshape(y.shape)
    a = compute_norms(make_pair(x, y))
    b = compute_norms(make_pair(xp, yp))
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_doubling_perturbation(rng):
    x = rng.uniform(60, 190, (8, 8, 3))
    d = rng.uniform(-30, 30, (8, 8, 3))
    a = compute_norms(make_pair(x, x + d))
    b = compute_norms(make_pair(x, x + 2 * d))
    assert b.l0 == a.l0
    np.testing.assert_allclose([b.l1, b.l2, b.linf], [2 * a.l1, 2 * a.l2, 2 * a.linf], rtol=1e-9)
