import numpy as np
import pytest

from oqslab import linalg
from oqslab import master as ms
from oqslab.divisibility import composition_residual
from oqslab.errors import ShapeError
from oqslab.model import (InitialState, SystemSpec, basis_weights, build_total_hamiltonian,
                          random_model, to_env_eigenbasis)


def diag_env(seed, d_S=2, d_E=3, commuting=False):
    return to_env_eigenbasis(random_model(seed, d_S, d_E, commuting=commuting))[0]


def test_block_round_trip(rng):
    rho = linalg.random_density(rng, 6)
    b = ms.BlockDensity.from_full(rho, 2, 3)
    assert np.array_equal(b.to_full(), rho)
    assert abs(b.population() - 1) < 1e-12
    assert np.abs(b.reduced() - linalg.partial_trace(rho, 2, 3)).max() < 1e-15


@pytest.mark.parametrize("seed", range(5))
def test_rhs_matches_full_commutator(seed):
    spec = diag_env(seed)
    blocks = ms.BlockDensity.from_full(linalg.random_density(np.random.default_rng(seed), 6), 2, 3)
    for g in range(3):
        diff = ms.master_rhs_gamma(spec, blocks, g) - ms.full_commutator_block(spec, blocks, g)
        assert np.abs(diff).max() < 1e-11


def test_omega_vanishes_when_commuting(rng):
    spec = diag_env(1, commuting=True)
    blocks = ms.BlockDensity.from_full(linalg.random_density(rng, 6), 2, 3)
    for g in range(3):
        out, inn = ms.omega_terms(spec, blocks, g)
        assert np.abs(out).max() < 1e-12 and np.abs(inn).max() < 1e-12
        Hd = ms.diagonal_hamiltonian(spec, g)
        rho = blocks.block(g, g)
        assert np.abs(ms.master_rhs_gamma(spec, blocks, g) + 1j * (Hd @ rho - rho @ Hd)).max() < 1e-12


def test_omega_single_environment_state(rng):
    spec = diag_env(2, d_E=1)
    blocks = ms.BlockDensity.from_full(linalg.random_density(rng, 2), 2, 1)
    out, inn = ms.omega_terms(spec, blocks, 0)
    assert not out.any() and not inn.any()


def test_rhs_zero_for_identity_block():
    spec = diag_env(3, commuting=True)
    blocks = ms.BlockDensity.from_full(np.eye(6) / 6, 2, 3)
    for g in range(3):
        assert np.abs(ms.master_rhs_gamma(spec, blocks, g)).max() < 1e-15


def test_omega_grows_from_zero():
    spec = diag_env(4)
    state = InitialState.product([1, 0], basis_weights(3))
    rows = ms.master_rows(spec, state, [0.0, 0.5, 1.0])
    at0 = [r for r in rows if r["t"] == 0.0]
    later = [r for r in rows if r["t"] == 1.0]
    assert max(r["omega_out"] for r in at0) == 0
    assert max(r["omega_out"] for r in later) > 1e-3
    assert max(r["residual"] for r in rows) < 1e-6


def test_requires_diagonal_environment(rng):
    spec = random_model(0, 2, 3)
    blocks = ms.BlockDensity.from_full(linalg.random_density(rng, 6), 2, 3)
    with pytest.raises(ValueError):
        ms.omega_terms(spec, blocks, 0)
    with pytest.raises(ShapeError):
        ms.omega_terms(diag_env(0), ms.BlockDensity.from_full(np.eye(4) / 4, 2, 2), 0)


def test_integrate_factorized():
    H_S = np.array([[0.3, 0.5], [0.5, -0.2]], dtype=complex)
    spec = SystemSpec(2, 2, H_S, np.zeros((2, 2)), np.zeros((4, 4)))
    state = InitialState.product([1, 0], np.diag([0.7, 0.3]))
    times, traj = ms.integrate_blocks(spec, state, 2.0, 200)
    U = linalg.expm_hermitian(build_total_hamiltonian(spec), 2.0)
    rho0 = np.kron(np.diag([1, 0]), np.diag([0.7, 0.3]))
    assert np.abs(traj[-1].to_full() - U @ rho0 @ U.conj().T).max() < 1e-10


def test_integrate_rk4_order():
    spec = diag_env(5)
    state = InitialState.product([1, 0], basis_weights(3))
    U = linalg.expm_hermitian(build_total_hamiltonian(spec), 2.0)
    rho0 = np.kron(np.diag([1, 0]), basis_weights(3))
    exact = U @ rho0 @ U.conj().T
    err = [np.abs(ms.integrate_blocks(spec, state, 2.0, n)[1][-1].to_full() - exact).max()
           for n in (64, 128)]
    assert 10 <= err[0] / err[1] <= 22


def test_integrate_zero_hamiltonian():
    spec = SystemSpec(2, 2, np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((4, 4)))
    state = InitialState.product([0.6, 0.8], np.eye(2) / 2)
    _, traj = ms.integrate_blocks(spec, state, 1.0, 8)
    assert all(np.array_equal(b.blocks, traj[0].blocks) for b in traj)
    with pytest.raises(ValueError):
        ms.integrate_blocks(spec, state, 1.0, 4)


def test_commuting_blocks_closed_and_divisible():
    spec = diag_env(6, commuting=True)
    assert composition_residual(spec, basis_weights(3, 1), 0.0, 0.6, 1.5).residual < 1e-9


def test_derivative_contributions(rng):
    spec = random_model(7, 2, 2)
    state = InitialState.product([0.6, 0.8j], np.diag([0.5, 0.5]))
    first, second = ms.derivative_contributions(spec, state, 0.8)
    H = build_total_hamiltonian(spec)
    U = linalg.expm_hermitian(H, 0.8)
    rho = U @ np.kron(state.system_density(), state.d) @ U.conj().T
    exact = linalg.partial_trace(-1j * (H @ rho - rho @ H), 2, 2)
    assert np.abs(first + second - exact).max() < 1e-12


def test_symmetrized_and_sandwich_forms(rng):
    H = linalg.random_hermitian(rng, 3)
    rho = linalg.random_density(rng, 3)
    ref = -1j * (H @ rho - rho @ H)
    assert np.abs(ms.symmetrized_rhs(H, rho) - ref).max() < 1e-12
    assert np.abs(ms.apply_sandwich(ms.sandwich_form(H), rho) - ref).max() < 1e-12
