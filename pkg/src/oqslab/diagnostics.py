"""
Timescale and information diagnostics.

Environment correlations are taken in the interaction picture with respect
to ``H0 = H_S (x) 1 + 1 (x) H_E``::

    C(t, t') = Tr[rho0 H~(t) H~(t')],   H~(s) = exp(i H0 s) H_SE exp(-i H0 s)

Entropies are in nats.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import linalg
from .errors import EmptyGrid, NotAState, NotProduct
from .linalg import Propagator
from .model import (InitialState, SystemSpec, build_total_hamiltonian, free_hamiltonian,
                    initial_density, propagate)

DECAY_LEVEL = math.exp(-1.0)


def env_correlation(spec: SystemSpec, rho0, t: float, tprime: float,
                    propagator: Propagator | None = None) -> complex:
    """``Tr[rho0 H~(t) H~(t')]`` in the interaction picture of ``H_S + H_E``."""
    rho0 = linalg.as_matrix(rho0, "rho0")
    prop = propagator if propagator is not None else Propagator(free_hamiltonian(spec))
    V = np.asarray(spec.H_SE, dtype=complex)

    def tilde(s):
        U = prop(s)
        return U.conj().T @ V @ U

    return complex(np.trace(rho0 @ tilde(t) @ tilde(tprime)))


def correlation_series(spec: SystemSpec, rho0, taus, tprime: float = 0.0) -> np.ndarray:
    """``C(tprime + tau, tprime)`` for every ``tau`` in ``taus``."""
    prop = Propagator(free_hamiltonian(spec))
    return np.array([env_correlation(spec, rho0, tprime + tau, tprime, prop) for tau in taus])


@dataclass(frozen=True)
class TauEstimate:
    tau: float
    decayed: bool


def estimate_tau_E(taus, values) -> TauEstimate:
    """First ``tau`` with ``|C(tau)| <= exp(-1) |C(0)|``, linearly interpolated.

    When the threshold is never reached the grid maximum is returned with
    ``decayed=False``.
    """
    taus = np.asarray(taus, dtype=float)
    mags = np.abs(np.asarray(values))
    if taus.size == 0 or mags.size == 0:
        raise EmptyGrid("correlation grid is empty")
    if taus.size != mags.size:
        raise ValueError("taus and values differ in length")
    if mags[0] == 0:
        raise ValueError("|C(0)| must be positive")
    level = DECAY_LEVEL * mags[0]
    below = np.flatnonzero(mags <= level)
    if below.size == 0:
        return TauEstimate(float(taus[-1]), False)
    k = int(below[0])
    if k == 0:
        return TauEstimate(float(taus[0]), True)
    x0, x1, y0, y1 = taus[k - 1], taus[k], mags[k - 1], mags[k]
    return TauEstimate(float(x0 + (y0 - level) * (x1 - x0) / (y0 - y1)), True)


@dataclass(frozen=True)
class TimescaleReport:
    tau_E: float
    tau_S: float
    coupling_norm: float
    markov_ratio: float
    decayed: bool = True


def timescale_report(tau_E: float, coupling_norm: float, decayed: bool = True) -> TimescaleReport:
    """``tau_S = 1/(|H_SE|^2 tau_E)`` and ``markov_ratio = tau_E / tau_S``."""
    if coupling_norm == 0:
        return TimescaleReport(tau_E, math.inf, 0.0, 0.0, decayed)
    tau_S = 1.0 / (coupling_norm ** 2 * tau_E)
    return TimescaleReport(tau_E, tau_S, coupling_norm, tau_E / tau_S, decayed)


def factorization_defect(spec: SystemSpec, initial: InitialState, t: float,
                         t0: float = 0.0, propagator: Propagator | None = None) -> float:
    """``||rho(t) - Tr_E rho(t) (x) Tr_S rho(t)||_max``."""
    prop = propagator if propagator is not None else Propagator(build_total_hamiltonian(spec))
    rho = propagate(initial_density(initial, spec.d_S, spec.d_E), prop, t0, t)
    rs = linalg.partial_trace(rho, spec.d_S, spec.d_E, "system")
    re = linalg.partial_trace(rho, spec.d_S, spec.d_E, "environment")
    return linalg.max_abs(rho - np.kron(rs, re))


def von_neumann_entropy(rho, trace_tol: float = 1e-8, psd_floor: float = -1e-10) -> float:
    """``-sum lambda log lambda`` with eigenvalues clipped at zero."""
    rho = linalg.as_matrix(rho, "rho")
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        raise NotAState(f"trace is {tr!r}, expected 1")
    lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if lam[0] < psd_floor:
        raise NotAState(f"smallest eigenvalue {lam[0]:.3e} below {psd_floor}")
    lam = lam[lam > 0]
    return float(max(-np.sum(lam * np.log(lam)), 0.0))


@dataclass(frozen=True)
class SIEResult:
    gamma0: float
    bound: float
    satisfied: bool


def sie_rate_check(spec: SystemSpec, initial: InitialState, c: float = 2.0) -> SIEResult:
    """Initial entangling rate against ``c ||H_SE||_op log min(d_S, d_E)``.

    ``gamma0 = (S(2h) - S(0)) / (2h)`` with ``h = 1e-3/||H||_op``, i.e. the
    central difference at ``t = h``.
    """
    if not initial.is_product:
        raise NotProduct("the entangling-rate check needs a product initial state")
    rho_S = initial.system_density()
    if abs(np.trace(rho_S @ rho_S).real - 1.0) > 1e-10:
        raise ValueError("the entangling-rate check needs a pure system state")
    H = build_total_hamiltonian(spec)
    prop = Propagator(H)
    h = 1e-3 / max(linalg.op_norm_estimate(H), 1e-12)
    rho0 = initial_density(initial, spec.d_S, spec.d_E)

    def entropy(t):
        rho = propagate(rho0, prop, 0.0, t)
        return von_neumann_entropy(linalg.partial_trace(rho, spec.d_S, spec.d_E))

    gamma0 = (entropy(2 * h) - entropy(0.0)) / (2 * h)
    delta = min(spec.d_S, spec.d_E)
    bound = c * linalg.op_norm_estimate(spec.H_SE) * math.log(delta)
    return SIEResult(float(gamma0), float(bound), bool(gamma0 <= bound + 1e-6))


def run_diagnostics(spec: SystemSpec, initial: InitialState, taus, c: float = 2.0):
    """Correlation rows ``(tau, |C|)`` and the summary report for one model."""
    rho0 = initial_density(initial, spec.d_S, spec.d_E)
    values = correlation_series(spec, rho0, taus)
    est = estimate_tau_E(taus, values)
    ts = timescale_report(est.tau, linalg.op_norm_estimate(spec.H_SE), est.decayed)
    report = {"tau_E": ts.tau_E, "tau_S": ts.tau_S, "markov_ratio": ts.markov_ratio,
              "decayed": ts.decayed}
    purity = np.trace(initial.system_density() @ initial.system_density()).real
    if initial.is_product and abs(purity - 1.0) < 1e-10:
        sie = sie_rate_check(spec, initial, c)
        report.update(gamma0=sie.gamma0, bound=sie.bound, satisfied=sie.satisfied)
    else:
        report.update(gamma0=None, bound=None, satisfied=None)
    rows = [{"tau": float(t), "abs_C": float(abs(v))} for t, v in zip(taus, values)]
    return rows, report


def write_rows(path, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau", "abs_C"])
        for r in rows:
            w.writerow([format(r["tau"], ".17g"), format(r["abs_C"], ".17g")])


def write_report(path, report: dict) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")

