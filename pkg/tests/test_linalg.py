import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oqslab import linalg
from oqslab.errors import HermiticityError, NumericalError, ShapeError, SizeLimit


def rand_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_kron_identity():
    assert np.array_equal(linalg.kron(np.eye(2), np.eye(2)), np.eye(4))


def test_kron_diagonal():
    out = linalg.kron(np.diag([1.0, 2.0]), np.eye(2))
    assert np.array_equal(out, np.diag([1.0, 1.0, 2.0, 2.0]))


def test_kron_mixed_product(rng):
    A, B, C, D = (rand_complex(rng, (2, 2)) for _ in range(4))
    lhs = linalg.kron(A, B) @ linalg.kron(C, D)
    assert np.abs(lhs - linalg.kron(A @ C, B @ D)).max() < 1e-12


def test_kron_size_limit(monkeypatch):
    monkeypatch.setenv("OQS_MAX_DIM", "8")
    with pytest.raises(SizeLimit):
        linalg.kron(np.eye(4), np.eye(4))
    assert linalg.kron(np.eye(2), np.eye(4)).shape == (8, 8)


def test_bad_max_dim(monkeypatch):
    monkeypatch.setenv("OQS_MAX_DIM", "many")
    with pytest.raises(SizeLimit):
        linalg.max_dim()


def test_partial_trace_product(rng):
    rho_S = linalg.random_density(rng, 3)
    rho_E = linalg.random_density(rng, 2)
    rho = np.kron(rho_S, rho_E)
    assert np.abs(linalg.partial_trace(rho, 3, 2) - rho_S).max() < 1e-15
    assert np.abs(linalg.partial_trace(rho, 3, 2, "environment") - rho_E).max() < 1e-15


def test_partial_trace_bell():
    phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    out = linalg.partial_trace(np.outer(phi, phi), 2, 2)
    assert np.abs(out - np.eye(2) / 2).max() < 1e-15


def test_partial_trace_unit_trace(rng):
    rho = linalg.random_density(rng, 4)
    assert abs(np.trace(linalg.partial_trace(rho, 2, 2)) - 1) < 1e-12


def test_partial_trace_errors():
    with pytest.raises(ShapeError):
        linalg.partial_trace(np.eye(5), 2, 2)
    with pytest.raises(ValueError):
        linalg.partial_trace(np.eye(4), 2, 2, keep="both")


def test_partial_trace_linear(rng):
    X, Y = rand_complex(rng, (6, 6)), rand_complex(rng, (6, 6))
    a, b = 0.3 - 1.2j, 2.5
    lhs = linalg.partial_trace(a * X + b * Y, 2, 3)
    rhs = a * linalg.partial_trace(X, 2, 3) + b * linalg.partial_trace(Y, 2, 3)
    assert np.abs(lhs - rhs).max() < 1e-12


def test_expm_zero_time(rng):
    H = linalg.random_hermitian(rng, 5)
    assert np.array_equal(linalg.expm_hermitian(H, 0.0), np.eye(5))


def test_expm_sigma_z():
    U = linalg.expm_hermitian(np.diag([1.0, -1.0]), np.pi / 2)
    expected = np.diag([np.exp(-0.5j * np.pi), np.exp(0.5j * np.pi)])
    assert np.abs(U - expected).max() < 1e-15


def test_expm_unitary(rng):
    U = linalg.expm_hermitian(linalg.random_hermitian(rng, 8), 1.7)
    assert np.linalg.norm(U.conj().T @ U - np.eye(8)) < 1e-12 * 8


def test_expm_rejects_non_hermitian():
    with pytest.raises(HermiticityError):
        linalg.expm_hermitian(np.array([[0, 1], [0, 0]]), 1.0)


def test_non_finite_rejected():
    with pytest.raises(NumericalError):
        linalg.as_matrix(np.array([[np.nan, 0], [0, 1]]))


def test_norms():
    assert abs(linalg.fro_norm(np.eye(3)) - np.sqrt(3)) < 1e-15
    assert abs(linalg.op_norm_estimate(np.diag([1.0, -5.0])) - 5) < 1e-12
    assert linalg.max_abs(np.array([[1, -7j], [2, 0]])) == 7


def test_op_norm_below_fro(rng):
    A = rand_complex(rng, (6, 6))
    assert linalg.op_norm_estimate(A) <= linalg.fro_norm(A) + 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(1, 12),
       dt=st.floats(-10, 10, allow_nan=False))
def test_unitarity_property(seed, dim, dt):
    H = linalg.random_hermitian(np.random.default_rng(seed), dim)
    U = linalg.expm_hermitian(H, dt)
    assert np.abs(U.conj().T @ U - np.eye(dim)).max() <= 1e-12 * dim


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_group_law(seed, a, b):
    prop = linalg.Propagator(linalg.random_hermitian(np.random.default_rng(seed), 6))
    assert np.abs(prop(a) @ prop(b) - prop(a + b)).max() < 1e-11 * 6
