import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pfedsop import numkit
from pfedsop.errors import ContractError, DimensionError, ParameterError

finite = st.floats(-1e3, 1e3, allow_nan=False)
vectors = st.lists(finite, min_size=1, max_size=30)


def test_vector_kernels_trivial():
    assert numkit.dot([1, 2], [3, 4]) == 11
    assert numkit.l2_norm([3, 4]) == 5
    np.testing.assert_array_equal(numkit.scale([1, -1], 0), [0, 0])
    np.testing.assert_array_equal(numkit.add([1, 2], [3, 4]), [4, 6])
    np.testing.assert_array_equal(numkit.subtract([1, 2], [3, 4]), [-2, -2])


@pytest.mark.parametrize("op", [numkit.add, numkit.subtract, numkit.dot, numkit.cosine_similarity])
def test_length_mismatch(op):
    with pytest.raises(DimensionError):
        op([1.0, 2.0], [1.0])


@pytest.mark.parametrize("a, b, expected", [
    ([2, 0], [4, 0], 1.0),
    ([1, 0], [0, 1], 0.0),
    ([1, 0], [-1, 0], -1.0),
])
def test_cosine_examples(a, b, expected):
    assert numkit.cosine_similarity(a, b) == expected


def test_cosine_zero_vector_is_neutral():
    assert numkit.cosine_similarity([0.0, 0.0], [1.0, 2.0]) == 0.0
    assert numkit.cosine_similarity([1e-13, 0.0], [1.0, 2.0]) == 0.0


@given(vectors.filter(lambda v: numkit.l2_norm(v) > 1e-6))
def test_cosine_self_is_one(v):
    assert abs(numkit.cosine_similarity(v, v) - 1.0) <= 1e-12


@given(vectors.filter(lambda v: numkit.l2_norm(v) > 1e-6),
       st.floats(1e-3, 1e3) | st.floats(-1e3, -1e-3))
def test_cosine_scaled_is_sign(v, s):
    sim = numkit.cosine_similarity(v, numkit.scale(v, s))
    assert abs(sim - math.copysign(1.0, s)) <= 1e-12


@given(st.lists(finite, min_size=3, max_size=3), st.lists(finite, min_size=3, max_size=3))
def test_cosine_in_range(a, b):
    assert -1.0 <= numkit.cosine_similarity(a, b) <= 1.0


@pytest.mark.parametrize("sim, theta", [(1, 0.0), (0, math.pi / 2), (-1, math.pi)])
def test_angle_examples(sim, theta):
    assert numkit.angle_from_similarity(sim) == pytest.approx(theta, abs=1e-6)


def test_angle_monotone_and_contract():
    grid = np.linspace(-1, 1, 501)
    angles = [numkit.angle_from_similarity(s) for s in grid]
    assert all(a > b for a, b in zip(angles, angles[1:]))
    with pytest.raises(ContractError):
        numkit.angle_from_similarity(1.0 + 1e-9)


def test_rng_streams_are_keyed():
    a = numkit.rng_stream(7, "client", 3, 2).random(5)
    b = numkit.rng_stream(7, "client", 3, 2).random(5)
    c = numkit.rng_stream(7, "client", 3, 3).random(5)
    d = numkit.rng_stream(8, "client", 3, 2).random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_rng_streams_independent_of_use_order():
    first = numkit.rng_stream(0, "client", 1, 1)
    _ = numkit.rng_stream(0, "client", 2, 1).random(100)
    np.testing.assert_array_equal(first.random(3), numkit.rng_stream(0, "client", 1, 1).random(3))


def test_rng_streams_uncorrelated():
    a = numkit.rng_stream(0, "client", 0, 1).standard_normal(20_000)
    b = numkit.rng_stream(0, "client", 1, 1).standard_normal(20_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.03


def test_dirichlet_k1():
    np.testing.assert_array_equal(numkit.dirichlet_draw(0.3, 1, np.random.default_rng(0)), [1.0])


def test_dirichlet_rejects_bad_alpha():
    with pytest.raises(ParameterError):
        numkit.dirichlet_draw(0.0, 3, np.random.default_rng(0))


def test_dirichlet_small_alpha_mean():
    # Monte-Carlo oracle: E[p_j] = 1/k for a symmetric Dirichlet
    rng = np.random.default_rng(1)
    draws = np.array([numkit.dirichlet_draw(0.07, 10, rng) for _ in range(10_000)])
    assert np.all(draws >= 0)
    assert np.max(np.abs(draws.sum(axis=1) - 1)) <= 1e-12
    assert np.max(np.abs(draws.mean(axis=0) - 0.1)) <= 0.01


def test_dirichlet_large_alpha_concentrates():
    rng = np.random.default_rng(2)
    draws = np.array([numkit.dirichlet_draw(100.0, 2, rng) for _ in range(10_000)])
    assert np.mean(draws.max(axis=1) <= 0.6) >= 0.99


@settings(max_examples=50)
@given(st.floats(0.01, 50), st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_dirichlet_on_simplex(alpha, k, seed):
    p = numkit.dirichlet_draw(alpha, k, np.random.default_rng(seed))
    assert p.shape == (k,)
    assert np.all(p >= 0)
    assert abs(p.sum() - 1) <= 1e-12
