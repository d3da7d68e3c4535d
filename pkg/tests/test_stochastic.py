import numpy as np
import pytest

from oqslab import stochastic as sc
from oqslab.errors import CompletenessError, ContractError, InsufficientData, ShapeError
from oqslab.linalg import Propagator
from oqslab.model import build_total_hamiltonian, random_model

P1 = np.array([[0.9, 0.1], [0.3, 0.7]])


def order2_transition():
    P = np.empty((2, 2, 2))
    P[0, 0] = [0.9, 0.1]
    P[0, 1] = [0.2, 0.8]
    P[1, 0] = [0.7, 0.3]
    P[1, 1] = [0.1, 0.9]
    return P


def test_chain_validation():
    with pytest.raises(ValueError):
        sc.ChainSpec(2, np.array([[0.5, 0.6], [0.5, 0.5]]))
    with pytest.raises(ShapeError):
        sc.ChainSpec(2, np.ones((2, 2, 2)) / 2, order=1)
    with pytest.raises(ValueError):
        sc.ChainSpec(2, P1, order=3)


def test_chain_is_seeded():
    a = sc.simulate_chain(sc.ChainSpec(2, P1, seed=5), 1000)
    b = sc.simulate_chain(sc.ChainSpec(2, P1, seed=5), 1000)
    assert np.array_equal(a, b) and a.size == 1000


def test_symmetric_chain_frequencies():
    traj = sc.simulate_chain(sc.ChainSpec(2, np.full((2, 2), 0.5), seed=1), 100_000)
    assert abs(np.mean(traj) - 0.5) < 0.01


def test_stationary_frequencies():
    traj = sc.simulate_chain(sc.ChainSpec(2, P1, seed=2), 100_000)
    # stationary distribution of P1 is (0.75, 0.25)
    assert abs(np.mean(traj == 0) - 0.75) < 0.01


def test_markov_order_test():
    first = sc.test_markov_order1(sc.simulate_chain(sc.ChainSpec(2, P1, seed=3), 100_000))
    assert first.is_markov and first.pairs_tested == 4
    chain2 = sc.ChainSpec(2, order2_transition(), order=2, seed=3)
    second = sc.test_markov_order1(sc.simulate_chain(chain2, 100_000))
    assert not second.is_markov and second.max_tv > 0.1


def test_markov_test_needs_data():
    with pytest.raises(InsufficientData):
        sc.test_markov_order1(np.zeros(100, dtype=int))
    with pytest.raises(InsufficientData):
        sc.test_markov_order1(np.zeros(20_000, dtype=int), count_floor=10**6)


def test_devices_validate():
    with pytest.raises(ShapeError):
        sc.Unitary(np.array([[1, 1], [0, 1]]))
    with pytest.raises(CompletenessError):
        sc.KrausMap((np.eye(2), np.eye(2)))
    sc.KrausMap((0.5 * np.eye(2),), trace_preserving=False)
    with pytest.raises(CompletenessError):
        sc.CausalBreak((np.diag([1.0, 0.0]),), (np.eye(2) / 2,))


def test_depolarizing():
    rho = np.array([[0.8, 0.3], [0.3, 0.2]])
    out = sc.run_process(sc.ProcessRecord((sc.depolarizing(0.4),)), rho)
    assert np.abs(out - (0.6 * rho + 0.4 * np.eye(2) / 2)).max() < 1e-15


def test_break_reprepares():
    brk = sc.CausalBreak((np.diag([1.0, 0.0]), np.diag([0.0, 1.0])), (np.full((2, 2), 0.5),),
                         outcome=1)
    out = sc.run_process(sc.ProcessRecord((brk,)), np.eye(2) / 2)
    assert np.abs(out - 0.5).max() < 1e-15
    with pytest.raises(sc.ZeroProbabilityOutcome):
        sc.run_process(sc.ProcessRecord((brk,)), np.diag([1.0, 0.0]))


def test_dilated_identity_steps_match_propagation():
    env = random_model(4, 2, 2)
    rho0 = np.kron(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])).astype(complex)
    rec = sc.ProcessRecord((sc.Unitary(np.eye(2)),) * 3, dt=0.4)
    states = sc.process_states(rec, rho0, env)
    U = Propagator(build_total_hamiltonian(env))(1.2)
    rho = U @ rho0 @ U.conj().T
    expected = np.einsum("iaja->ij", rho.reshape(2, 2, 2, 2))
    assert np.abs(states[-1] - expected).max() < 1e-13


def test_memoryless_family_markovian():
    for seed in range(3):
        family, controls = sc.memoryless_family(seed)
        res = sc.causal_break_markov_test(family, 2, 4, controls)
        assert res.markovian and res.max_diff < 1e-10
        assert len(res.rows) == 3 * 2


def test_dilated_family_refuted():
    hits = 0
    for seed in range(10):
        family, controls = sc.dilated_family(seed)
        hits += sc.causal_break_markov_test(family, 2, 4, controls).max_diff > 1e-3
    assert hits >= 9


def test_identical_controls_agree():
    family, controls = sc.dilated_family(1)
    res = sc.causal_break_markov_test(family, 2, 4, [controls[0], controls[0]])
    assert res.max_diff == 0


def test_contract_errors():
    family, controls = sc.memoryless_family(0)
    with pytest.raises(ContractError):
        sc.causal_break_markov_test(family, 2, 4, controls[:1])
    with pytest.raises(ContractError):
        sc.causal_break_markov_test(family, 2, 2, controls)
    with pytest.raises(ContractError):
        sc.causal_break_markov_test(family, 1, 4, controls)
    with pytest.raises(ContractError):
        sc.causal_break_markov_test(family, 2, 9, controls)


def test_induced_maps_compose():
    rng = np.random.default_rng(7)
    steps = (sc.Unitary(sc.random_unitary(rng, 2)), sc.depolarizing(0.2),
             sc.Unitary(sc.random_unitary(rng, 2)), sc.depolarizing(0.5))
    rec = sc.ProcessRecord(steps)
    assert sc.induced_divisibility_residual(rec, 0, 2, 4) < 1e-14
    rho = np.array([[0.7, 0.1j], [-0.1j, 0.3]])
    T = sc.induced_map(rec, 0, 4)
    assert np.abs((T @ rho.reshape(-1)).reshape(2, 2) - sc.run_process(rec, rho)).max() < 1e-14


def test_process_round_trip(tmp_path):
    family, controls = sc.memoryless_family(2)
    rec = family.record(controls[0])
    sc.save_process(tmp_path / "p.json", rec)
    back = sc.load_process(tmp_path / "p.json")
    assert len(back.steps) == len(rec.steps)
    assert all(sc._same_device(a, b) for a, b in zip(rec.steps, back.steps))
