"""
Spin multiplets coupled to one bosonic mode through ``J^2``.

    H = omega J_z (x) 1 + 1 (x) beta b^dag b + eta J^2 (x) (b + b^dag)

``J^2`` is the scalar ``j(j+1)`` on each multiplet, so every system basis
state ``|j m>`` drives the oscillator with its own constant force
``gamma(j) = eta j(j+1)`` and the model is pure dephasing. Starting from the
vacuum, the boson state conditioned on ``|j m>`` is::

    exp(-i H_j t)|0> = exp(i phi_j(t)) |a_j(t)>      (coherent state)
    a_j(t)   = g_j (exp(-i beta t) - 1),   g_j = gamma(j)/beta
    phi_j(t) = g_j^2 (beta t - sin beta t)

and the reduced coherence between ``|j1 m1>`` and ``|j2 m2>`` is
``rho0 * exp(-i omega (m1 - m2) t) * Omega_E(j1, j2, t)`` with
``Omega_E = <psi_j2(t)|psi_j1(t)>``.

Numerics here come in two independent flavours: exact evolution on the
truncated Fock space (:func:`numeric_reduced_states`) and the closed-form
Fock amplitudes (:func:`analytic_boson_factor`).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.linalg import expm
from scipy.special import eval_genlaguerre, gammaln

from . import linalg
from .dynmap import apply_map, compute_supermatrix
from .errors import CutoffError, IncommensurableError, ShapeError, UnsupportedOrder
from .linalg import Propagator
from .model import SystemSpec, build_total_hamiltonian

CUTOFF_STEP = 4
CUTOFF_DRIFT = 1e-8
PERIOD_DENOMINATOR = 64
_SMALL = 1e-12


@dataclass(frozen=True)
class SpinBosonParams:
    """Model parameters; ``multiplets`` lists the ``j`` values of the direct sum."""

    omega: float
    beta: float
    eta: float
    multiplets: tuple
    n_max: int

    def __post_init__(self):
        object.__setattr__(self, "multiplets", tuple(float(j) for j in self.multiplets))
        if self.omega < 0 or self.beta < 0:
            raise ValueError("omega and beta must be non-negative")
        if not math.isfinite(self.eta):
            raise ValueError("eta must be finite")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max}")
        if not self.multiplets:
            raise ValueError("multiplets must be nonempty")
        for j in self.multiplets:
            if j < 0 or abs(2 * j - round(2 * j)) > 1e-12:
                raise ValueError(f"j must be a non-negative half-integer, got {j}")

    @property
    def system_dim(self) -> int:
        return sum(int(round(2 * j)) + 1 for j in self.multiplets)

    def gamma(self, j: float) -> float:
        return self.eta * j * (j + 1)

    def with_cutoff(self, n_max: int) -> "SpinBosonParams":
        return SpinBosonParams(self.omega, self.beta, self.eta, self.multiplets, n_max)

    @classmethod
    def from_dict(cls, d: dict) -> "SpinBosonParams":
        return cls(float(d["omega"]), float(d["beta"]), float(d["eta"]),
                   tuple(d["multiplets"]), int(d["n_max"]))

    def to_dict(self) -> dict:
        return {"omega": self.omega, "beta": self.beta, "eta": self.eta,
                "multiplets": list(self.multiplets), "n_max": self.n_max}


@dataclass(frozen=True)
class AnalyticFactors:
    """``alpha``, ``zeta``, ``Psi`` for one multiplet, as functions of time."""

    gamma: float
    beta: float

    def alpha(self, t: float) -> float:
        if abs(self.beta) < _SMALL:
            return self.gamma * t
        return self.gamma * math.sin(self.beta * t) / self.beta

    def zeta(self, t: float) -> float:
        g = self.gamma
        if abs(g) < _SMALL:
            return self.beta * g * t * t / 2.0 * (1.0 - (g * t) ** 2 / 12.0)
        return self.beta * (1.0 - math.cos(g * t)) / g

    def psi(self, t: float) -> float:
        g, b = self.gamma, self.beta
        first = self.alpha(t) ** 2
        if abs(g) < _SMALL:
            second = (b * g * t * t / 2.0) ** 2
        else:
            second = (b * (1.0 - math.cos(g * t)) / g) ** 2
        return -0.5 * (first + second)


def basis_labels(params: SpinBosonParams) -> list[tuple[float, float]]:
    """``(j, m)`` for each system basis index, ``m`` descending within a multiplet."""
    labels = []
    for j in params.multiplets:
        n = int(round(2 * j)) + 1
        labels.extend((j, j - k) for k in range(n))
    return labels


def index_of(params: SpinBosonParams, j: float, m: float) -> int:
    for k, (jj, mm) in enumerate(basis_labels(params)):
        if abs(jj - j) < 1e-12 and abs(mm - m) < 1e-12:
            return k
    raise ValueError(f"no basis state with j={j}, m={m}")


def annihilation(n_max: int) -> np.ndarray:
    """``b`` on ``span{|0>, ..., |n_max>}``; ``b^dag`` drops the top element."""
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1).astype(complex)


def build_spinboson(params: SpinBosonParams) -> SystemSpec:
    labels = basis_labels(params)
    D, N = len(labels), params.n_max + 1
    linalg.check_dim(D * N)
    Jz = np.diag([m for _, m in labels]).astype(complex)
    J2 = np.diag([j * (j + 1) for j, _ in labels]).astype(complex)
    b = annihilation(params.n_max)
    H_E = params.beta * (b.conj().T @ b)
    H_SE = params.eta * np.kron(J2, b + b.conj().T)
    return SystemSpec(D, N, params.omega * Jz, H_E, H_SE)


def uniform_superposition(dim: int) -> np.ndarray:
    """``|u><u|`` with ``|u> = sum_k |k>/sqrt(dim)``: every element equals ``1/dim``."""
    return np.full((dim, dim), 1.0 / dim, dtype=complex)


def _vacuum(n_max: int) -> np.ndarray:
    v = np.zeros(n_max + 1, dtype=complex)
    v[0] = 1.0
    return v


def _pad(vec, n_max: int) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex)
    if vec.size > n_max + 1:
        if np.max(np.abs(vec[n_max + 1:])) > 0:
            raise ShapeError("boson state has weight above the Fock cutoff")
        return vec[: n_max + 1].copy()
    out = np.zeros(n_max + 1, dtype=complex)
    out[: vec.size] = vec
    return out


def _reduced_states(params, times, rho_S0, boson):
    spec = build_spinboson(params)
    psi_E = _pad(boson, params.n_max)
    rho0 = np.kron(rho_S0, np.outer(psi_E, psi_E.conj()))
    prop = Propagator(build_total_hamiltonian(spec))
    out = np.empty((len(times), spec.d_S, spec.d_S), dtype=complex)
    for k, t in enumerate(times):
        U = prop(t)
        out[k] = linalg.partial_trace(U @ rho0 @ U.conj().T, spec.d_S, spec.d_E)
    return out


def numeric_reduced_states(params: SpinBosonParams, times, initial_system=None,
                           boson_state=None, check_cutoff: bool = True) -> np.ndarray:
    """Exact ``rho_S(t)`` on the truncated Fock space for every ``t`` in ``times``.

    ``initial_system`` defaults to :func:`uniform_superposition`, ``boson_state``
    (amplitudes in the number basis) to the vacuum. With ``check_cutoff`` the
    evolution is repeated at ``n_max + 4`` and a drift above ``1e-8`` raises
    :class:`CutoffError`.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    D = params.system_dim
    rho_S0 = uniform_superposition(D) if initial_system is None else linalg.as_matrix(initial_system)
    if rho_S0.shape != (D, D):
        raise ShapeError(f"initial system state must be {D}x{D}, got {rho_S0.shape}")
    boson = _vacuum(params.n_max) if boson_state is None else boson_state
    states = _reduced_states(params, times, rho_S0, boson)
    if check_cutoff:
        finer = _reduced_states(params.with_cutoff(params.n_max + CUTOFF_STEP), times,
                                rho_S0, boson)
        drift = linalg.max_abs(finer - states)
        if drift >= CUTOFF_DRIFT:
            raise CutoffError(f"reduced state drifts by {drift:.3e} under n_max -> "
                              f"n_max+{CUTOFF_STEP}; raise n_max")
    return states


def numeric_rho_element(params: SpinBosonParams, initial, j1, m1, j2, m2, t: float) -> complex:
    """``<j1 m1|rho_S(t)|j2 m2>`` from exact evolution (``initial`` = system density or None)."""
    a, b = index_of(params, j1, m1), index_of(params, j2, m2)
    return complex(numeric_reduced_states(params, [t], initial)[0, a, b])


def numeric_boson_factor(params: SpinBosonParams, j1, m1, j2, m2, t: float,
                         initial_system=None) -> complex:
    """Element divided by its free-evolution prefactor ``rho0 exp(-i omega (m1-m2) t)``."""
    D = params.system_dim
    rho_S0 = uniform_superposition(D) if initial_system is None else np.asarray(initial_system)
    a, b = index_of(params, j1, m1), index_of(params, j2, m2)
    if abs(rho_S0[a, b]) < _SMALL:
        raise ValueError("initial coherence is zero; the boson factor is not observable")
    elem = numeric_reduced_states(params, [t], rho_S0)[0, a, b]
    return complex(elem / (rho_S0[a, b] * np.exp(-1j * params.omega * (m1 - m2) * t)))


# -- closed-form boson factor --------------------------------------------------

def coherent_amplitude(gamma: float, beta: float, t: float) -> complex:
    """``a(t) = (gamma/beta)(exp(-i beta t) - 1)``, with the ``beta -> 0`` limit ``-i gamma t``."""
    if abs(beta * t) < 1e-8:
        return -1j * gamma * t * (1.0 - 0.5j * beta * t)
    return gamma / beta * np.expm1(-1j * beta * t)


def dynamic_phase(gamma: float, beta: float, t: float) -> float:
    """``phi(t) = (gamma/beta)^2 (beta t - sin beta t)``."""
    x = beta * t
    if abs(x) < 1e-4:
        return gamma ** 2 * t ** 2 * (x / 6.0 - x ** 3 / 120.0)
    return (gamma / beta) ** 2 * (x - math.sin(x))


def fock_matrix_elements(gamma: float, beta: float, t: float, n_max: int) -> np.ndarray:
    """``E[n, n'] = <n|exp(-i t (beta b^dag b + gamma (b + b^dag)))|n'>``, ``n, n' <= n_max``.

    Uses ``U = exp(i phi) D(a) exp(-i beta t n)`` and the Laguerre form of the
    displacement matrix elements; factorials enter through ``gammaln``.
    These are exact infinite-space elements, not those of a truncated ``H``.
    """
    a = coherent_amplitude(gamma, beta, t)
    x = abs(a) ** 2
    n = np.arange(n_max + 1)
    m_idx, k_idx = np.meshgrid(n, n, indexing="ij")
    lo, hi = np.minimum(m_idx, k_idx), np.maximum(m_idx, k_idx)
    diff = hi - lo
    lag = eval_genlaguerre(lo, diff, x)
    log_norm = 0.5 * (gammaln(lo + 1) - gammaln(hi + 1)) - 0.5 * x
    base = np.where(m_idx >= k_idx, a, -np.conj(a))
    with np.errstate(invalid="ignore"):
        powers = np.where(diff == 0, 1.0 + 0j, base ** diff)
    Dmat = np.exp(log_norm) * powers * lag
    phases = np.exp(1j * dynamic_phase(gamma, beta, t) - 1j * beta * t * n)
    return Dmat * phases[None, :]


def vacuum_amplitudes(gamma: float, beta: float, t: float, n_max: int) -> np.ndarray:
    """``<n|exp(-i H_j t)|0>`` for ``n <= n_max`` in log space."""
    a = coherent_amplitude(gamma, beta, t)
    n = np.arange(n_max + 1)
    if a == 0:
        out = np.zeros(n_max + 1, dtype=complex)
        out[0] = 1.0
    else:
        logmag = -0.5 * abs(a) ** 2 + n * math.log(abs(a)) - 0.5 * gammaln(n + 1)
        out = np.exp(logmag + 1j * n * np.angle(a))
    return np.exp(1j * dynamic_phase(gamma, beta, t)) * out


def _omega_sum(gamma1, gamma2, beta, t, n_max, boson):
    if boson is None:
        return complex(np.vdot(vacuum_amplitudes(gamma2, beta, t, n_max),
                               vacuum_amplitudes(gamma1, beta, t, n_max)))
    psi = _pad(boson, n_max)
    rho_B = np.outer(psi, psi.conj())
    E1 = fock_matrix_elements(gamma1, beta, t, n_max)
    E2 = fock_matrix_elements(gamma2, beta, t, n_max)
    # sum_n sum_{n', n''} E1[n, n'] rho_B[n', n''] conj(E2[n, n''])
    return complex(np.einsum("ab,bc,ac->", E1, rho_B, E2.conj()))


def analytic_boson_factor(params: SpinBosonParams, j1: float, j2: float, t: float,
                          boson_state=None) -> complex:
    """``Omega_E(j1, j2, t) = sum_{n <= n_max} conj(A_n(j2, t)) A_n(j1, t)``.

    ``A_n(j, t) = <n|exp(-i H_j t)|psi_B>`` from the closed form, with
    ``psi_B`` the vacuum unless ``boson_state`` is given. The truncated sum
    must agree with the ``n_max + 4`` sum within ``1e-8``.
    """
    g1, g2 = params.gamma(j1), params.gamma(j2)
    val = _omega_sum(g1, g2, params.beta, t, params.n_max, boson_state)
    finer = _omega_sum(g1, g2, params.beta, t, params.n_max + CUTOFF_STEP, boson_state)
    if abs(finer - val) >= CUTOFF_DRIFT:
        raise CutoffError(f"boson factor drifts by {abs(finer - val):.3e} under the cutoff check")
    return val


def boson_factor_closed_form(params: SpinBosonParams, j1: float, j2: float, t: float) -> complex:
    """Infinite-cutoff vacuum value ``exp(i(phi1 - phi2)) exp(-(g1 - g2)^2 (1 - cos beta t))``.

    For ``beta = 0`` the modulus becomes ``exp(-(gamma1 - gamma2)^2 t^2 / 2)``.
    """
    g1, g2, b = params.gamma(j1), params.gamma(j2), params.beta
    a1, a2 = coherent_amplitude(g1, b, t), coherent_amplitude(g2, b, t)
    overlap = np.exp(-0.5 * abs(a1) ** 2 - 0.5 * abs(a2) ** 2 + np.conj(a2) * a1)
    phase = dynamic_phase(g1, b, t) - dynamic_phase(g2, b, t)
    return complex(np.exp(1j * phase) * overlap)


# -- literal polynomial double sums (kept for comparison) ----------------------

def _literal_E(f: AnalyticFactors, t: float, N: int, conjugate: bool) -> np.ndarray:
    """Triple-index polynomial sums in ``alpha``, ``zeta`` transcribed term by term.

    ``conjugate=False`` gives ``E[n, n']``, ``conjugate=True`` gives
    ``Es[n'', n]``; inner indices run to ``N``. Factorials enter as
    log-gamma values; terms whose magnitude overflows are returned as ``inf``.
    """
    al, ze, ps = f.alpha(t), f.zeta(t), f.psi(t)
    lf = gammaln(np.arange(N + 1) + 1)
    E = np.zeros((N + 1, N + 1), dtype=complex)
    unit = 1j if conjugate else -1j
    pref = np.exp((1j if conjugate else -1j) * f.beta * t + ps)
    for p in range(N + 1):           # n   (or n'')
        for q in range(N + 1):       # n'  (or n)
            acc = 0j
            for n2 in range(p + 1):
                for n3 in range(n2, N + 1):
                    for n4 in range(min(n3, q) + 1):
                        ka, kz = p + n3 - 2 * n2, n3 + q - 2 * n4
                        if (ka and al == 0) or (kz and ze == 0):
                            continue
                        logc = (lf[p] + lf[q] + 2 * lf[n3] - lf[p - n2] - lf[n3 - n4]
                                - lf[n3 - n2] - lf[q - n4])
                        if logc > 700:
                            return np.full((N + 1, N + 1), np.inf + 0j)
                        acc += (unit ** (p + n3) * (-1) ** (q + n2 - n4) * math.exp(logc)
                                * al ** ka * ze ** kz)
            E[p, q] = pref * acc
    return E


def literal_boson_factor(params: SpinBosonParams, j1: float, j2: float, t: float,
                         N: int = 6) -> complex:
    """``sum_n (1/n!) sum_{n',n''} E[n,n'](j1) Es[n'',n](j2) / sqrt(n'! n''!)`` as printed."""
    E1 = _literal_E(AnalyticFactors(params.gamma(j1), params.beta), t, N, False)
    E2 = _literal_E(AnalyticFactors(params.gamma(j2), params.beta), t, N, True)
    lf = gammaln(np.arange(N + 1) + 1)
    w = np.exp(-0.5 * lf)
    total = 0j
    for n in range(N + 1):
        total += math.exp(-lf[n]) * np.sum(E1[n, :, None] * w[:, None] * E2[None, :, n]
                                           * w[None, :])
    return complex(total)


def literal_discrepancy(params: SpinBosonParams, pairs, times, N: int = 6) -> float:
    """Max ``|literal - analytic|`` over ``(j1, j2)`` pairs and times (``inf`` on overflow)."""
    worst = 0.0
    for j1, j2 in pairs:
        for t in times:
            lit = literal_boson_factor(params, j1, j2, t, N)
            ref = boson_factor_closed_form(params, j1, j2, t)
            worst = max(worst, abs(lit - ref) if np.isfinite(lit) else math.inf)
    return worst


# -- Zassenhaus ----------------------------------------------------------------

def zassenhaus_terms(X, Y, order: int) -> list[np.ndarray]:
    """Nested-commutator terms ``[c2, c3, c4][:order - 1]``.

    ``exp(X + Y) = exp(X) exp(Y) exp(-c2/2!) exp(-c3/3!) exp(-c4/4!) ...``
    """
    X, Y = linalg.as_matrix(X, "X"), linalg.as_matrix(Y, "Y")
    if X.shape != Y.shape or X.shape[0] != X.shape[1]:
        raise ShapeError(f"X {X.shape} and Y {Y.shape} must be square and equal in shape")
    if order > 4:
        raise UnsupportedOrder(f"Zassenhaus terms are provided up to order 4, got {order}")
    if order < 2:
        return []
    com = linalg.commutator
    c2 = com(X, Y)
    terms = [c2]
    if order >= 3:
        terms.append(2 * com(c2, Y) + com(c2, X))
    if order >= 4:
        c2X = com(c2, X)
        terms.append(3 * com(com(c2, Y), Y) + 3 * com(c2X, Y) + com(c2X, X))
    return terms


def zassenhaus_product(X, Y, order: int) -> np.ndarray:
    """``exp(X) exp(Y) prod_k exp(-c_k/k!)`` truncated after ``c_order``."""
    out = expm(np.asarray(X, dtype=complex)) @ expm(np.asarray(Y, dtype=complex))
    for k, c in enumerate(zassenhaus_terms(X, Y, order), start=2):
        out = out @ expm(-c / math.factorial(k))
    return out


def zassenhaus_error(X, Y, order: int) -> float:
    """``||exp(X + Y) - zassenhaus_product(X, Y, order)||_2``."""
    exact = expm(np.asarray(X, dtype=complex) + np.asarray(Y, dtype=complex))
    return float(np.linalg.norm(exact - zassenhaus_product(X, Y, order), 2))


# -- commensurate periods ------------------------------------------------------

def common_period(freqs, max_denominator: int = PERIOD_DENOMINATOR,
                  rel_tol: float = 1e-9) -> float:
    """Least ``T > 0`` with ``f T`` in ``2 pi Z`` for every nonzero ``f``."""
    fs = [abs(float(f)) for f in freqs if abs(float(f)) > _SMALL]
    if not fs:
        return 1.0
    f0 = fs[0]
    nums, dens = [], []
    for f in fs:
        r = f / f0
        frac = Fraction(r).limit_denominator(max_denominator)
        if abs(float(frac) - r) > rel_tol * r:
            raise IncommensurableError(
                f"frequency ratio {r!r} has no rational form with denominator <= {max_denominator}")
        nums.append(frac.numerator)
        dens.append(frac.denominator)
    lcm_den = math.lcm(*dens)
    gcd_num = math.gcd(*nums)
    return 2 * math.pi / f0 * lcm_den / gcd_num


@dataclass(frozen=True)
class PeriodicityReport:
    T: float
    semigroup_residual: float
    periodic_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.semigroup_residual <= self.tol and self.periodic_residual <= self.tol


def _diagonal_phase_residual(rho0, rhoT) -> float:
    """``min_D max|rhoT - D rho0 D^dag|`` with ``D`` diagonal unitary fitted from one column."""
    nz = np.abs(rho0) > _SMALL
    ref = int(np.argmax(nz.sum(axis=0)))
    theta = np.zeros(rho0.shape[0])
    for a in range(rho0.shape[0]):
        if nz[a, ref]:
            theta[a] = np.angle(rhoT[a, ref] / rho0[a, ref])
    D = np.exp(1j * (theta - theta[ref]))
    pred = D[:, None] * rho0 * D.conj()[None, :]
    fitted = nz[:, ref][:, None] & nz[:, ref][None, :]
    res = np.where(fitted, np.abs(rhoT - pred), np.abs(np.abs(rhoT) - np.abs(rho0)))
    return float(np.max(res))


def periodicity_semigroup_check(params: SpinBosonParams, tol: float = 1e-8,
                                initial_system=None) -> PeriodicityReport:
    """Lattice semigroup check at the least common period of ``omega, beta, gamma(j)``.

    Compares ``rho_S(2T)`` with the map ``(0 -> T)`` applied to ``rho_S(T)``,
    and ``rho_S(T)`` with ``D rho_S(0) D^dag`` for a diagonal unitary ``D``.
    """
    freqs = [params.omega, params.beta] + [params.gamma(j) for j in params.multiplets]
    T = common_period(freqs)
    D = params.system_dim
    rho_S0 = uniform_superposition(D) if initial_system is None else linalg.as_matrix(initial_system)
    states = numeric_reduced_states(params, [0.0, T, 2 * T], rho_S0)
    spec = build_spinboson(params)
    weights = np.zeros((spec.d_E, spec.d_E), dtype=complex)
    weights[0, 0] = 1.0
    C = compute_supermatrix(spec, weights, 0.0, T)
    semigroup = linalg.max_abs(apply_map(C, states[1]) - states[2])
    periodic = _diagonal_phase_residual(states[0], states[1])
    return PeriodicityReport(T, semigroup, periodic, tol)


# -- sweeps --------------------------------------------------------------------

CSV_COLUMNS = ["t", "j1", "m1", "j2", "m2", "re", "im", "abs_omega_E"]


def spinboson_rows(params: SpinBosonParams, times, initial_system=None) -> list[dict]:
    """Upper-triangle elements of ``rho_S(t)`` with the analytic ``|Omega_E|``."""
    labels = basis_labels(params)
    states = numeric_reduced_states(params, times, initial_system)
    rows = []
    for t, rho in zip(np.atleast_1d(times), states):
        for a, (j1, m1) in enumerate(labels):
            for b in range(a, len(labels)):
                j2, m2 = labels[b]
                om = analytic_boson_factor(params, j1, j2, float(t))
                rows.append({"t": float(t), "j1": j1, "m1": m1, "j2": j2, "m2": m2,
                             "re": float(rho[a, b].real), "im": float(rho[a, b].imag),
                             "abs_omega_E": float(abs(om))})
    return rows


def write_rows(path, rows: list[dict]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([format(r[c], ".17g") for c in CSV_COLUMNS])
