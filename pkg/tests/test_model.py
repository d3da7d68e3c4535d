import numpy as np
import pytest

from oqslab import linalg
from oqslab.errors import HermiticityError, NormalizationError, ShapeError
from oqslab.model import (InitialState, SystemSpec, basis_weights, build_total_hamiltonian,
                          equal_weight_state, initial_density, load_model, maximally_mixed,
                          propagate, random_model, save_model, to_env_eigenbasis)

SZ = np.diag([1.0, -1.0])


def test_total_hamiltonian_diagonal():
    spec = SystemSpec(2, 2, SZ, SZ, np.zeros((4, 4)))
    assert np.array_equal(build_total_hamiltonian(spec), np.diag([2.0, 0.0, 0.0, -2.0]))


def test_random_commuting_model():
    spec = random_model(1, 3, 3, commuting=True)
    comm = linalg.commutator(np.kron(np.eye(3), spec.H_E), spec.H_SE)
    assert np.abs(comm).max() < 1e-12
    H = build_total_hamiltonian(spec)
    assert np.abs(H - H.conj().T).max() == 0


def test_commuting_after_rotation():
    rotated, _ = to_env_eigenbasis(random_model(5, 2, 4, commuting=True))
    comm = linalg.commutator(np.kron(np.eye(2), rotated.H_E), rotated.H_SE)
    assert np.abs(comm).max() < 1e-12


def test_zero_coupling():
    spec = random_model(3, 2, 3, coupling=0.0)
    assert np.array_equal(spec.H_SE, np.zeros((6, 6)))


def test_coupling_norm():
    spec = random_model(3, 2, 3, coupling=0.7)
    assert abs(linalg.op_norm_estimate(spec.H_SE) - 0.7) < 1e-12


def test_random_model_deterministic():
    a, b = random_model(11, 3, 2), random_model(11, 3, 2)
    for name in ("H_S", "H_E", "H_SE"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_spec_validation():
    with pytest.raises(HermiticityError):
        SystemSpec(2, 1, np.array([[0, 1], [0, 0]]), np.zeros((1, 1)), np.zeros((2, 2)))
    with pytest.raises(ShapeError):
        SystemSpec(2, 2, SZ, SZ, np.zeros((3, 3)))


def test_product_pure_state():
    state = InitialState.product([1, 0], basis_weights(2))
    rho = initial_density(state, 2, 2)
    e0 = np.zeros(4)
    e0[0] = 1
    assert np.array_equal(rho, np.outer(e0, e0))


def test_bell_state():
    a = np.eye(2) / np.sqrt(2)
    rho = initial_density(InitialState.entangled(a), 2, 2)
    phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.abs(rho - np.outer(phi, phi)).max() < 1e-15
    assert np.abs(linalg.partial_trace(rho, 2, 2) - np.eye(2) / 2).max() < 1e-15
    assert np.abs(linalg.partial_trace(rho, 2, 2, "environment") - np.eye(2) / 2).max() < 1e-15


@pytest.mark.parametrize("n,N", [(2, 2), (3, 2), (4, 3)])
def test_equal_weight_state_trace(n, N):
    rho = initial_density(equal_weight_state(n, N), n, N)
    assert abs(np.trace(rho) - 1) < 1e-12
    assert np.abs(np.diag(rho) - 1 / (n * N)).max() < 1e-15


def test_normalization_errors():
    with pytest.raises(NormalizationError):
        InitialState.product([1, 1], basis_weights(2))
    with pytest.raises(NormalizationError):
        InitialState.entangled(np.ones((2, 2)))
    with pytest.raises(NormalizationError):
        InitialState.product([1, 0], 2 * maximally_mixed(2))


def test_idempotency_is_opt_in():
    InitialState.product([1, 0], maximally_mixed(3))
    with pytest.raises(NormalizationError):
        InitialState.product([1, 0], maximally_mixed(3), strict=True)
    InitialState.product([1, 0], basis_weights(3, 1), strict=True)


def test_state_dims_checked():
    with pytest.raises(ShapeError):
        initial_density(InitialState.product([1, 0], basis_weights(2)), 2, 3)


def test_propagate_identity_time(rng):
    spec = random_model(2, 2, 2)
    rho0 = linalg.random_density(rng, 4)
    assert np.array_equal(propagate(rho0, build_total_hamiltonian(spec), 0.4, 0.4), rho0)


def test_propagate_uncoupled(rng):
    spec = random_model(4, 3, 2, coupling=0.0)
    rho_S = linalg.random_density(rng, 3)
    rho0 = np.kron(rho_S, linalg.random_density(rng, 2))
    rho = propagate(rho0, build_total_hamiltonian(spec), 0.0, 1.3)
    U_S = linalg.expm_hermitian(spec.H_S, 1.3)
    expected = U_S @ rho_S @ U_S.conj().T
    assert np.abs(linalg.partial_trace(rho, 3, 2) - expected).max() < 1e-12


def test_propagate_spectrum(rng):
    for seed in range(10):
        spec = random_model(seed, 2, 3)
        rho0 = linalg.random_density(rng, 6)
        rho = propagate(rho0, build_total_hamiltonian(spec), 0.0, 2.0)
        assert np.abs(np.linalg.eigvalsh(rho) - np.linalg.eigvalsh(rho0)).max() < 1e-10
        assert np.abs(rho - rho.conj().T).max() < 1e-12
        assert abs(np.trace(rho) - 1) < 1e-12


def test_model_round_trip(tmp_path):
    spec = random_model(8, 2, 3)
    state = InitialState.entangled(np.array([[0.6, 0, 0], [0, 0.8j, 0]]))
    save_model(tmp_path / "m.json", spec, state)
    spec2, state2 = load_model(tmp_path / "m.json")
    for name in ("H_S", "H_E", "H_SE"):
        assert np.array_equal(getattr(spec, name), getattr(spec2, name))
    assert np.array_equal(state.a, state2.a)
