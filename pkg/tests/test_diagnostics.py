import math

import numpy as np
import pytest

from oqslab import diagnostics as dg
from oqslab import linalg
from oqslab.errors import EmptyGrid, NotAState, NotProduct
from oqslab.model import (InitialState, SystemSpec, basis_weights, build_total_hamiltonian,
                          free_hamiltonian, initial_density, random_model)


def test_correlation_at_equal_times():
    spec = random_model(0, 2, 2)
    rho0 = initial_density(InitialState.product([1, 0], basis_weights(2)), 2, 2)
    # C(t, t) = Tr[rho0 H~(t)^2] is real and non-negative
    c = dg.env_correlation(spec, rho0, 0.7, 0.7)
    assert abs(c.imag) < 1e-12 and c.real >= 0
    H0 = free_hamiltonian(spec)
    U = linalg.expm_hermitian(H0, 0.7)
    Vt = U.conj().T @ spec.H_SE @ U
    assert abs(c - np.trace(rho0 @ Vt @ Vt)) < 1e-12


def test_correlation_series_origin():
    spec = random_model(1, 2, 3)
    rho0 = np.eye(6) / 6
    vals = dg.correlation_series(spec, rho0, [0.0, 0.5])
    assert abs(vals[0] - np.trace(spec.H_SE @ spec.H_SE) / 6) < 1e-12


def test_tau_exponential():
    taus = np.linspace(0, 10, 2001)
    est = dg.estimate_tau_E(taus, np.exp(-taus / 2))
    assert est.decayed and abs(est.tau - 2.0) < 1e-5


def test_tau_not_decayed():
    est = dg.estimate_tau_E([0, 1, 2], [1.0, 1.0, 1.0])
    assert not est.decayed and est.tau == 2


def test_tau_errors():
    with pytest.raises(EmptyGrid):
        dg.estimate_tau_E([], [])
    with pytest.raises(ValueError):
        dg.estimate_tau_E([0, 1], [0.0, 1.0])


def test_tau_scales_with_bandwidth():
    # environment with a dense flat spectrum: correlations decay on 1/width
    d_E = 16
    taus = np.linspace(0, 20, 801)
    out = []
    for width in (1.0, 2.0):
        H_E = np.diag(np.linspace(-width, width, d_E))
        H_SE = np.kron(np.diag([1.0, -1.0]), np.full((d_E, d_E), 1.0 / d_E))
        spec = SystemSpec(2, d_E, np.zeros((2, 2)), H_E, H_SE)
        rho0 = np.kron(np.diag([1.0, 0.0]), np.eye(d_E) / d_E)
        vals = dg.correlation_series(spec, rho0, taus)
        out.append(dg.estimate_tau_E(taus, np.abs(vals)).tau)
    assert abs(out[0] / out[1] - 2) < 0.2


def test_timescale_report():
    rep = dg.timescale_report(0.5, 2.0)
    assert abs(rep.tau_S - 0.5) < 1e-15 and abs(rep.markov_ratio - 1.0) < 1e-15
    assert dg.timescale_report(0.5, 0.0).tau_S == math.inf


def test_factorization_defect():
    spec = random_model(2, 2, 2)
    state = InitialState.product([1, 0], basis_weights(2))
    assert dg.factorization_defect(spec, state, 0.0) < 1e-15
    assert dg.factorization_defect(spec, state, 1.0) > 1e-3
    free = random_model(2, 2, 2, coupling=0.0)
    assert dg.factorization_defect(free, state, 3.0) < 1e-14


def test_entropy():
    assert abs(dg.von_neumann_entropy(np.eye(3) / 3) - math.log(3)) < 1e-14
    assert dg.von_neumann_entropy(np.diag([1.0, 0.0])) == 0
    with pytest.raises(NotAState):
        dg.von_neumann_entropy(np.eye(2))
    with pytest.raises(NotAState):
        dg.von_neumann_entropy(np.diag([1.5, -0.5]))


def test_sie_trivial_environment():
    spec = random_model(3, 2, 1)
    res = dg.sie_rate_check(spec, InitialState.product([1, 0], np.ones((1, 1))))
    assert res.gamma0 < 1e-8 and res.bound == 0


def test_sie_bound():
    for seed in range(10):
        res = dg.sie_rate_check(random_model(seed, 2, 2),
                                InitialState.product([1, 0], basis_weights(2)))
        assert res.satisfied
        assert res.gamma0 <= 2 * math.log(2) + 1e-6


def test_sie_contract():
    with pytest.raises(NotProduct):
        dg.sie_rate_check(random_model(0, 2, 2), InitialState.entangled(np.eye(2) / np.sqrt(2)))
    with pytest.raises(ValueError):
        dg.sie_rate_check(random_model(0, 2, 2),
                          InitialState.product(rho_S=np.eye(2) / 2, d=basis_weights(2)))


def test_run_diagnostics():
    spec = random_model(4, 2, 3)
    rows, rep = dg.run_diagnostics(spec, InitialState.product([1, 0], basis_weights(3)),
                                   np.linspace(0, 5, 11))
    assert len(rows) == 11 and rep["gamma0"] is not None
    _, rep = dg.run_diagnostics(spec, InitialState.product(rho_S=np.eye(2) / 2,
                                                           d=basis_weights(3)), [0.0, 1.0])
    assert rep["gamma0"] is None


def test_entangling_starts_quadratically():
    spec = random_model(5, 2, 2)
    state = InitialState.product([1, 0], basis_weights(2))
    prop = linalg.Propagator(build_total_hamiltonian(spec))
    rho0 = initial_density(state, 2, 2)
    purity = []
    for t in (1e-3, 5e-4):
        rho = linalg.partial_trace(prop(t) @ rho0 @ prop(t).conj().T, 2, 2)
        purity.append(1 - np.trace(rho @ rho).real)
    assert abs(purity[0] / purity[1] - 4) < 0.1
