import numpy as np
import pytest

from oqslab import _kernels, linalg
from oqslab._kernels import fallback

compiled_only = pytest.mark.skipif(_kernels.compiled is None, reason="extension not built")


def reference_supermatrix(U, d, d_S, d_E):
    # C[(i1,i2),(j1,j2)] = sum_{g,a1,a2} U[j1 g, i1 a1] d[a1,a2] conj(U[j2 g, i2 a2])
    U4 = U.reshape(d_S, d_E, d_S, d_E)
    C = np.einsum("jgia,ab,kglb->iljk", U4, d, U4.conj())
    return C.reshape(d_S * d_S, d_S * d_S)


@pytest.mark.parametrize("d_S,d_E", [(2, 2), (3, 2), (2, 4)])
def test_fallback_supermatrix(rng, d_S, d_E):
    U = linalg.expm_hermitian(linalg.random_hermitian(rng, d_S * d_E), 0.8)
    d = linalg.random_density(rng, d_E)
    out = fallback.supermatrix(U, d, d_S, d_E)
    assert np.abs(out - reference_supermatrix(U, d, d_S, d_E)).max() < 1e-13


@compiled_only
@pytest.mark.parametrize("d_S,d_E", [(2, 2), (3, 3), (4, 2)])
def test_compiled_supermatrix_matches(rng, d_S, d_E):
    U = linalg.expm_hermitian(linalg.random_hermitian(rng, d_S * d_E), 1.1)
    d = linalg.random_density(rng, d_E)
    a = np.asarray(_kernels.compiled.supermatrix(U, d, d_S, d_E))
    b = fallback.supermatrix(U, d, d_S, d_E)
    assert np.abs(a - b).max() < 1e-13


@compiled_only
@pytest.mark.parametrize("order", [1, 2])
def test_compiled_chain_matches(order):
    rng = np.random.default_rng(order)
    S = 3
    P = rng.random((S,) * (order + 1))
    P /= P.sum(axis=-1, keepdims=True)
    cum = np.cumsum(P.reshape(-1, S), axis=1)
    init = np.zeros(order, dtype=np.int64)
    u = rng.random(5000)
    a = np.asarray(_kernels.compiled.sample_chain(cum, u, init, order))
    b = np.asarray(fallback.sample_chain(cum, u, init, order))
    assert np.array_equal(a, b)
    ca = np.asarray(_kernels.compiled.count_transitions(a, S, order))
    cb = np.asarray(fallback.count_transitions(a, S, order))
    assert np.array_equal(ca, cb)


def test_count_transitions():
    seq = np.array([0, 1, 1, 0, 1], dtype=np.int64)
    c1 = np.asarray(fallback.count_transitions(seq, 2, 1))
    assert np.array_equal(c1, np.array([[0, 2], [1, 1]]))
    c2 = np.asarray(fallback.count_transitions(seq, 2, 2))
    assert c2.sum() == 3
    assert c2[0, 1, 1] == 1 and c2[1, 1, 0] == 1 and c2[1, 0, 1] == 1


def test_backend_flag():
    assert _kernels.BACKEND in ("cython", "python")
