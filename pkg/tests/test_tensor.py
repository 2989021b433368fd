import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from layerqnn.tensor import (
    TRACE_VEC,
    NumericalError,
    SvdTruncation,
    gram_truncate,
    include_direction,
    matrix_exp,
    superoperator,
    svd_truncate,
    unvectorize,
    vectorize,
)


def _random_matrix(seed, shape):
    r = np.random.default_rng(seed)
    return r.normal(size=shape) + 1j * r.normal(size=shape)


def test_trace_vector_matches_vectorized_identity():
    assert np.array_equal(vectorize(np.eye(2), 1), TRACE_VEC)


@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_vectorize_round_trip(seed, n):
    rho = _random_matrix(seed, (2**n, 2**n))
    assert np.array_equal(unvectorize(vectorize(rho, n), n), rho)


def test_vectorize_is_interleaved():
    # |i1 i2><j1 j2| -> index of (i1 j1 i2 j2)
    rho = np.zeros((4, 4))
    rho[0b10, 0b01] = 1.0  # i1=1, i2=0, j1=0, j2=1
    v = vectorize(rho, 2)
    assert np.flatnonzero(v).tolist() == [0b1001]


@given(st.integers(0, 2**32 - 1), st.integers(1, 2))
def test_superoperator_matches_conjugation(seed, n):
    d = 2**n
    a = _random_matrix(seed, (d, d))
    rho = _random_matrix(seed + 1, (d, d))
    s = superoperator(a, n).reshape(d * d, d * d)
    assert np.allclose(s @ vectorize(rho, n), vectorize(a @ rho @ a.conj().T, n))


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_svd_truncate_rank_and_weight(seed, rank):
    m = _random_matrix(seed, (8, 6))
    u, s, v, dw = svd_truncate(m, SvdTruncation(rank))
    assert len(s) == rank
    full = np.linalg.svd(m, compute_uv=False)
    assert dw == pytest.approx(np.sum(full[rank:] ** 2) / np.sum(full**2), abs=1e-12)
    assert np.all(np.diff(s) <= 1e-12)
    assert np.allclose(u.conj().T @ u, np.eye(rank))


def test_svd_truncate_zero_matrix_keeps_one():
    u, s, v, dw = svd_truncate(np.zeros((3, 3)))
    assert s.shape == (1,) and dw == 0.0


def test_svd_truncate_rejects_nan():
    with pytest.raises(NumericalError):
        svd_truncate(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_truncation_validation():
    with pytest.raises(ValueError):
        SvdTruncation(0)
    with pytest.raises(ValueError):
        SvdTruncation(None, -1.0)


@given(st.integers(0, 2**32 - 1))
def test_gram_truncate_matches_svd_projection(seed):
    m = _random_matrix(seed, (6, 40))
    u, rest, dw = gram_truncate(m, SvdTruncation(3))
    us, s, v, dws = svd_truncate(m, SvdTruncation(3))
    assert np.allclose(u @ rest, (us * s) @ v, atol=1e-9)
    assert dw == pytest.approx(dws, abs=1e-10)


@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_include_direction_keeps_rank_and_functional(seed, rank):
    m = _random_matrix(seed, (8, 8))
    u, _, _, _ = svd_truncate(m, SvdTruncation(rank))
    f = _random_matrix(seed + 7, (8,))
    q = include_direction(u, f, rank)
    assert q.shape[1] == rank
    assert np.allclose(q.conj().T @ q, np.eye(rank), atol=1e-10)
    # f lies in the span, so the projected functional is exact
    assert np.allclose(q @ (q.conj().T @ f), f)
    assert np.allclose(q[:, : rank - 1], u[:, : rank - 1])


def test_include_direction_appends_below_cap():
    u = np.eye(4)[:, :2].astype(complex)
    q = include_direction(u, np.array([0, 0, 1, 0], dtype=complex), max_rank=3)
    assert q.shape == (4, 3)


def test_matrix_exp_unitary_for_hermitian():
    a = _random_matrix(3, (6, 6))
    h = a + a.conj().T
    u = matrix_exp(h, -1j * 0.7)
    assert np.abs(u.conj().T @ u - np.eye(6)).max() < 1e-13


def test_matrix_exp_general_and_zero():
    a = _random_matrix(4, (3, 3))
    import scipy.linalg

    assert np.allclose(matrix_exp(a, 0.3), scipy.linalg.expm(0.3 * a))
    assert np.array_equal(matrix_exp(np.zeros((2, 2))), np.eye(2))
