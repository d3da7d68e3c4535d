"""
Classical Markov-order testing and quantum causal-break processes.

A quantum process is an ordered list of devices acting on the system:
unitaries, Kraus maps and causal breaks (projective measurement followed by
re-preparation). In dilated mode the system shares a persistent
environment with which it evolves unitarily for ``dt`` after every device;
that environment is the only carrier of memory.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path

import numpy as np

from . import _kernels, linalg
from .errors import CompletenessError, ContractError, InsufficientData, ShapeError
from .linalg import Propagator
from .model import SystemSpec, _decode, _encode, build_total_hamiltonian, random_model

COUNT_FLOOR = 50
MIN_TEST_LENGTH = 10_000


class ZeroProbabilityOutcome(ValueError):
    """A declared measurement outcome has zero Born probability."""


# -- classical chains ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ChainSpec:
    """``transition`` is ``S x S`` for order 1, ``S x S x S`` (``x[n-2], x[n-1], x[n]``) for order 2."""

    states: int
    transition: np.ndarray
    order: int = 1
    seed: int = 0

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        object.__setattr__(self, "transition", P)
        if self.order not in (1, 2):
            raise ValueError(f"order must be 1 or 2, got {self.order}")
        if P.shape != (self.states,) * (self.order + 1):
            raise ShapeError(f"transition shape {P.shape} does not match S={self.states}, "
                             f"order={self.order}")
        if np.any(P < 0) or np.any(P > 1):
            raise ValueError("transition probabilities must lie in [0, 1]")
        if np.max(np.abs(P.sum(axis=-1) - 1.0)) > 1e-12:
            raise ValueError("transition rows must sum to 1")


def simulate_chain(chain: ChainSpec, length: int) -> np.ndarray:
    """Seeded trajectory of ``length`` states (first ``order`` states uniform)."""
    if length < 3:
        raise ValueError(f"length must be at least 3, got {length}")
    rng = np.random.default_rng(chain.seed)
    S = chain.states
    init = rng.integers(0, S, size=chain.order).astype(np.int64)
    uniforms = rng.random(length - chain.order)
    cum = np.cumsum(chain.transition.reshape(-1, S), axis=1)
    return np.asarray(_kernels.sample_chain(cum, uniforms, init, chain.order))


@dataclass(frozen=True)
class MarkovTestResult:
    is_markov: bool
    max_tv: float
    pairs_tested: int


def test_markov_order1(trajectory, alpha: float = 0.05, count_floor: int = COUNT_FLOOR,
                       states: int | None = None) -> MarkovTestResult:
    """Compare ``P(x_n | x_{n-1}, x_{n-2})`` with ``P(x_n | x_{n-1})``.

    ``max_tv`` is the largest total-variation distance over conditioning
    pairs seen at least ``count_floor`` times.
    """
    seq = np.asarray(trajectory, dtype=np.int64)
    if seq.size < MIN_TEST_LENGTH:
        raise InsufficientData(f"need at least {MIN_TEST_LENGTH} samples, got {seq.size}")
    S = int(seq.max()) + 1 if states is None else states
    c2 = np.asarray(_kernels.count_transitions(seq, S, 2), dtype=float)
    c1 = c2.sum(axis=0)
    n1 = c1.sum(axis=1)
    n2 = c2.sum(axis=2)
    max_tv, tested = 0.0, 0
    for a in range(S):
        for b in range(S):
            if n2[a, b] < count_floor or n1[b] == 0:
                continue
            tv = 0.5 * np.sum(np.abs(c2[a, b] / n2[a, b] - c1[b] / n1[b]))
            max_tv = max(max_tv, float(tv))
            tested += 1
    if tested == 0:
        raise InsufficientData(f"no conditioning pair reaches {count_floor} counts")
    return MarkovTestResult(max_tv <= alpha, max_tv, tested)


# Not a pytest test despite the name.
test_markov_order1.__test__ = False


# -- devices -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Unitary:
    matrix: np.ndarray

    def __post_init__(self):
        U = linalg.as_matrix(self.matrix, "U")
        if U.shape[0] != U.shape[1] or linalg.max_abs(U.conj().T @ U - np.eye(U.shape[0])) > 1e-10:
            raise ShapeError("unitary device must be a square unitary matrix")
        object.__setattr__(self, "matrix", U)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class KrausMap:
    ops: tuple
    trace_preserving: bool = True

    def __post_init__(self):
        ops = tuple(linalg.as_matrix(K, "K") for K in self.ops)
        if not ops or any(K.shape != ops[0].shape or K.shape[0] != K.shape[1] for K in ops):
            raise ShapeError("Kraus operators must be square and share one shape")
        object.__setattr__(self, "ops", ops)
        E = sum(K.conj().T @ K for K in ops)
        if self.trace_preserving:
            dev = linalg.max_abs(E - np.eye(E.shape[0]))
            if dev > 1e-10:
                raise CompletenessError(f"sum K^dag K deviates from I by {dev:.3e}")
        elif np.linalg.eigvalsh(E)[-1] > 1 + 1e-10:
            raise CompletenessError("Kraus map increases trace")

    @property
    def dim(self) -> int:
        return self.ops[0].shape[0]


@dataclass(frozen=True, eq=False)
class CausalBreak:
    """Measure with ``projectors``, then re-prepare ``preparations[prep]``.

    ``outcome`` fixes the measurement result; when ``None`` it is drawn by
    the Born rule from ``seed``.
    """

    projectors: tuple
    preparations: tuple
    prep: int = 0
    outcome: int | None = None
    seed: int = 0

    def __post_init__(self):
        projs = tuple(linalg.as_matrix(P, "projector") for P in self.projectors)
        preps = tuple(linalg.as_matrix(P, "preparation") for P in self.preparations)
        if not projs or not preps:
            raise ShapeError("causal break needs projectors and preparations")
        d = projs[0].shape[0]
        if any(P.shape != (d, d) for P in projs + preps):
            raise ShapeError("projectors and preparations must share one square shape")
        dev = linalg.max_abs(sum(projs) - np.eye(d))
        if dev > 1e-10:
            raise CompletenessError(f"projectors sum to I only within {dev:.3e}")
        if not 0 <= self.prep < len(preps):
            raise ValueError(f"prep index {self.prep} out of range")
        if self.outcome is not None and not 0 <= self.outcome < len(projs):
            raise ValueError(f"outcome index {self.outcome} out of range")
        object.__setattr__(self, "projectors", projs)
        object.__setattr__(self, "preparations", preps)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]


@dataclass(frozen=True, eq=False)
class ProcessRecord:
    steps: tuple
    dt: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        dims = {s.dim for s in self.steps}
        if len(dims) > 1:
            raise ShapeError(f"devices act on different dimensions {sorted(dims)}")


def _lift(A, d_E):
    return np.kron(A, np.eye(d_E))


def _apply_device(dev, rho, d_E: int) -> np.ndarray:
    """Apply ``dev`` to the system factor of ``rho`` (``d_E = 1`` without environment)."""
    if isinstance(dev, Unitary):
        U = _lift(dev.matrix, d_E)
        return U @ rho @ U.conj().T
    if isinstance(dev, KrausMap):
        return sum(_lift(K, d_E) @ rho @ _lift(K, d_E).conj().T for K in dev.ops)
    if isinstance(dev, CausalBreak):
        d_S = dev.dim
        branches = [_lift(P, d_E) @ rho @ _lift(P, d_E) for P in dev.projectors]
        probs = np.array([max(np.trace(b).real, 0.0) for b in branches])
        if dev.outcome is None:
            r = int(np.random.default_rng(dev.seed).choice(len(probs), p=probs / probs.sum()))
        else:
            r = dev.outcome
        if probs[r] <= 1e-14:
            raise ZeroProbabilityOutcome(f"outcome {r} has zero probability")
        env = linalg.partial_trace(branches[r] / probs[r], d_S, d_E, "environment")
        return np.kron(dev.preparations[dev.prep], env)
    raise TypeError(f"unknown device {type(dev).__name__}")


def process_states(record: ProcessRecord, rho0, env: SystemSpec | None = None) -> list:
    """System states ``[rho_0, rho_1, ..., rho_n]`` after each step.

    A step applies its device, then (dilated mode) evolves system and
    environment together for ``record.dt``.
    """
    rho = linalg.as_matrix(rho0, "rho0")
    d_E = 1 if env is None else env.d_E
    d_S = rho.shape[0] // d_E
    if rho.shape != (d_S * d_E, d_S * d_E):
        raise ShapeError(f"rho0 of shape {rho.shape} does not fit the environment")
    if record.steps and record.steps[0].dim != d_S:
        raise ShapeError(f"devices act on dimension {record.steps[0].dim}, system has {d_S}")
    if env is not None and env.d_S != d_S:
        raise ShapeError("environment model and devices disagree on the system size")
    U = None if env is None else Propagator(build_total_hamiltonian(env))(record.dt)
    out = [linalg.partial_trace(rho, d_S, d_E)]
    for dev in record.steps:
        rho = _apply_device(dev, rho, d_E)
        if U is not None:
            rho = U @ rho @ U.conj().T
        out.append(linalg.partial_trace(rho, d_S, d_E))
    return out


def run_process(record: ProcessRecord, rho0, env: SystemSpec | None = None) -> np.ndarray:
    """Final system state of the process."""
    return process_states(record, rho0, env)[-1]


# -- causal-break test ---------------------------------------------------------

def _same_device(a, b) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, Unitary):
        return np.array_equal(a.matrix, b.matrix)
    if isinstance(a, KrausMap):
        return len(a.ops) == len(b.ops) and all(np.array_equal(x, y) for x, y in zip(a.ops, b.ops))
    return (len(a.projectors) == len(b.projectors) and len(a.preparations) == len(b.preparations)
            and all(np.array_equal(x, y) for x, y in zip(a.projectors, b.projectors))
            and all(np.array_equal(x, y) for x, y in zip(a.preparations, b.preparations)))


@dataclass(frozen=True)
class CausalBreakResult:
    markovian: bool
    max_diff: float
    rows: list = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class ProcessFamily:
    """Process with a free control prefix, a causal break and a shared suffix."""

    post_steps: tuple
    breaker: CausalBreak
    rho0: np.ndarray
    env: SystemSpec | None = None
    dt: float = 1.0

    def record(self, control) -> ProcessRecord:
        return ProcessRecord(tuple(control) + (self.breaker,) + tuple(self.post_steps), self.dt)


def causal_break_markov_test(family: ProcessFamily, k: int, l: int, controls,
                             tol: float = 1e-10) -> CausalBreakResult:
    """Compare post-break states across control histories.

    For every pair of controls, re-preparation and measurement outcome
    (outcomes with zero probability under either control are skipped),
    ``max_diff`` is the largest ``||rho_j(D) - rho_j(D')||_max`` over probe
    steps ``k < j <= l``. A finite test can only refute Markovianity or
    report that no violation was found among the tested pairs.
    """
    controls = [tuple(c) for c in controls]
    if len(controls) < 2:
        raise ContractError("need at least two control histories")
    if not l > k:
        raise ContractError(f"probe index {l} must exceed break index {k}")
    records = [family.record(c) for c in controls]
    for c, rec in zip(controls, records):
        if len(c) != k or not isinstance(rec.steps[k], CausalBreak):
            raise ContractError(f"control of length {len(c)} does not end at break index {k}")
        if len(rec.steps) < l:
            raise ContractError(f"process has {len(rec.steps)} steps, probe index is {l}")
    for rec in records[1:]:
        if len(rec.steps) != len(records[0].steps) or not all(
                _same_device(a, b) for a, b in zip(rec.steps[k:], records[0].steps[k:])):
            raise ContractError("control histories differ at or after the break")

    brk = family.breaker
    rows, worst = [], 0.0
    for pair_id, (i, j) in enumerate(combinations(range(len(controls)), 2)):
        for s in range(len(brk.preparations)):
            pair_worst = 0.0
            for r in range(len(brk.projectors)):
                fam = replace(family, breaker=replace(brk, prep=s, outcome=r))
                try:
                    a = process_states(fam.record(controls[i]), family.rho0, family.env)
                    b = process_states(fam.record(controls[j]), family.rho0, family.env)
                except ZeroProbabilityOutcome:
                    continue
                diff = max(linalg.max_abs(a[n] - b[n]) for n in range(k + 1, l + 1))
                pair_worst = max(pair_worst, diff)
            rows.append({"pair_id": pair_id, "prep_id": s, "max_diff": pair_worst})
            worst = max(worst, pair_worst)
    return CausalBreakResult(worst <= tol, worst, rows)


def induced_map(record: ProcessRecord, start: int, stop: int) -> np.ndarray:
    """Superoperator (row-major ``vec``) of steps ``start..stop-1`` without environment.

    Causal breaks enter as the linear map ``rho -> Tr(Pi_r rho) P_s``
    (outcome probability not renormalized).
    """
    d = record.steps[0].dim
    cols = []
    for idx in range(d * d):
        X = np.zeros(d * d, dtype=complex)
        X[idx] = 1.0
        rho = X.reshape(d, d)
        for dev in record.steps[start:stop]:
            if isinstance(dev, CausalBreak):
                r = 0 if dev.outcome is None else dev.outcome
                rho = np.trace(dev.projectors[r] @ rho) * dev.preparations[dev.prep]
            else:
                rho = _apply_device(dev, rho, 1)
        cols.append(rho.reshape(-1))
    return np.array(cols).T


def induced_divisibility_residual(record: ProcessRecord, j: int, k: int, l: int) -> float:
    """``max|T(l, j) - T(l, k) T(k, j)|`` for the induced step maps."""
    return linalg.max_abs(induced_map(record, j, l)
                          - induced_map(record, k, l) @ induced_map(record, j, k))


# -- stock families ------------------------------------------------------------

def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    return Propagator(linalg.random_hermitian(rng, d))(1.0)


def depolarizing(p: float) -> KrausMap:
    """Qubit depolarizing channel ``rho -> (1 - p) rho + p I/2``."""
    paulis = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]
    ops = [np.sqrt(1 - 3 * p / 4) * np.eye(2)] + [np.sqrt(p / 4) * s for s in paulis]
    return KrausMap(tuple(ops))


def computational_break(prep_states=None) -> CausalBreak:
    """Qubit break measuring ``{|0><0|, |1><1|}`` and re-preparing ``|0>``, ``|+>``."""
    if prep_states is None:
        plus = np.full((2, 2), 0.5)
        prep_states = (np.diag([1.0, 0.0]), plus)
    return CausalBreak((np.diag([1.0, 0.0]), np.diag([0.0, 1.0])), tuple(prep_states))


def memoryless_family(seed: int, k: int = 2, post: int = 2, n_controls: int = 3,
                      p: float = 0.3):
    """Fresh depolarizing channels after the break, random unitary controls before it."""
    rng = np.random.default_rng(seed)
    family = ProcessFamily(tuple(depolarizing(p) for _ in range(post)), computational_break(),
                           np.diag([1.0, 0.0]).astype(complex))
    controls = [tuple(Unitary(random_unitary(rng, 2)) for _ in range(k))
                for _ in range(n_controls)]
    return family, controls


def dilated_family(seed: int, k: int = 2, post: int = 2, n_controls: int = 3,
                   coupling: float = 1.0, dt: float = 1.0):
    """Qubit system sharing one persistent environment qubit across all steps."""
    rng = np.random.default_rng(seed)
    env = random_model(seed, 2, 2, coupling)
    rho0 = np.kron(np.diag([1.0, 0.0]), np.diag([1.0, 0.0])).astype(complex)
    identity = Unitary(np.eye(2))
    family = ProcessFamily(tuple(identity for _ in range(post)), computational_break(), rho0,
                           env, dt)
    controls = [tuple(Unitary(random_unitary(rng, 2)) for _ in range(k))
                for _ in range(n_controls)]
    return family, controls


# -- files ---------------------------------------------------------------------

def device_to_dict(dev) -> dict:
    if isinstance(dev, Unitary):
        return {"type": "unitary", "matrix": _encode(dev.matrix)}
    if isinstance(dev, KrausMap):
        return {"type": "kraus", "ops": [_encode(K) for K in dev.ops],
                "trace_preserving": dev.trace_preserving}
    return {"type": "break", "projectors": [_encode(P) for P in dev.projectors],
            "preparations": [_encode(P) for P in dev.preparations], "prep": dev.prep,
            "outcome": dev.outcome, "seed": dev.seed}


def device_from_dict(d: dict):
    kind = d.get("type")
    if kind == "unitary":
        return Unitary(_decode(d["matrix"]))
    if kind == "kraus":
        return KrausMap(tuple(_decode(K) for K in d["ops"]), bool(d.get("trace_preserving", True)))
    if kind == "break":
        return CausalBreak(tuple(_decode(P) for P in d["projectors"]),
                           tuple(_decode(P) for P in d["preparations"]), int(d.get("prep", 0)),
                           d.get("outcome"), int(d.get("seed", 0)))
    raise ValueError(f"unknown device type {kind!r}")


def save_process(path, record: ProcessRecord) -> None:
    data = {"dt": record.dt, "steps": [device_to_dict(s) for s in record.steps]}
    Path(path).write_text(json.dumps(data, indent=1) + "\n")


def load_process(path) -> ProcessRecord:
    data = json.loads(Path(path).read_text())
    steps = data["steps"] if isinstance(data, dict) else data
    dt = data.get("dt", 1.0) if isinstance(data, dict) else 1.0
    return ProcessRecord(tuple(device_from_dict(s) for s in steps), float(dt))


def write_rows(path, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pair_id", "prep_id", "max_diff"])
        for r in rows:
            w.writerow([r["pair_id"], r["prep_id"], format(r["max_diff"], ".17g")])
