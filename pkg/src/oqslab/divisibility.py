"""
Divisibility (semigroup) residuals of the reduced dynamics and the
sufficient conditions under which they vanish.

The primary residual compares the one-shot map with the composition of two
segment maps built from the same environment weight family::

    residual = max | C(t, t0) - [C(t, ts) o C(ts, t0)] |

In the storage convention of :mod:`oqslab.dynmap` the composition is the
matrix product ``C(ts, t0) @ C(t, ts)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import linalg
from .dynmap import (SuperMatrix, apply_map, compute_supermatrix, entangled_reduced_density,
                     identity_map, total_propagator)
from .errors import WrongKind
from .linalg import DEFAULT_TOL, Propagator, ToleranceConfig
from .model import InitialState, SystemSpec, initial_density, propagate, random_model

CONDITION_TAGS = ("single_env_state", "equal_weights", "commuting_HE_HSE",
                  "entangled_reduced", "none")


@dataclass(frozen=True)
class DivisibilityReport:
    t0: float
    ts: float
    t: float
    residual: float
    residual_fro: float
    threshold: float
    condition_tags: frozenset = field(default_factory=lambda: frozenset({"none"}))

    @property
    def verdict(self) -> str:
        return "divisible" if self.residual <= self.threshold else "violated"

    @property
    def divisible(self) -> bool:
        return self.residual <= self.threshold


def _segment(spec, weights, a, b, prop) -> SuperMatrix:
    if a == b:
        return identity_map(spec.d_S, a)
    return compute_supermatrix(spec, weights, a, b, propagator=prop)


def _report(diff, t0, ts, t, tol, tags) -> DivisibilityReport:
    return DivisibilityReport(t0, ts, t, linalg.max_abs(diff), linalg.fro_norm(diff),
                              tol.verdict, frozenset(tags) or frozenset({"none"}))


def condition_tags(spec: SystemSpec, weights, tol: ToleranceConfig = DEFAULT_TOL) -> set:
    tags = set()
    if certify_single_env_state(weights, tol):
        tags.add("single_env_state")
    if commutation_certificate(spec, tol)[0]:
        tags.add("commuting_HE_HSE")
    return tags


def composition_residual(spec: SystemSpec, weights, t0: float, ts: float, t: float,
                         propagator: Propagator | None = None, mid_weights=None,
                         tol: ToleranceConfig = DEFAULT_TOL) -> DivisibilityReport:
    """Divisibility residual for the triple ``t0 <= ts <= t``.

    By default both segments use ``weights``. ``mid_weights`` overrides the
    weights of the second segment, e.g. with the evolved environment
    marginal from :func:`evolved_environment_weights` (diagnostic variant).
    """
    if not (t0 <= ts <= t):
        raise ValueError(f"need t0 <= ts <= t, got {(t0, ts, t)}")
    prop = propagator if propagator is not None else total_propagator(spec)
    full = _segment(spec, weights, t0, t, prop)
    first = _segment(spec, weights, t0, ts, prop)
    second = _segment(spec, weights if mid_weights is None else mid_weights, ts, t, prop)
    diff = full.matrix - first.then(second).matrix
    return _report(diff, t0, ts, t, tol, condition_tags(spec, weights, tol))


def evolved_environment_weights(spec: SystemSpec, initial: InitialState, t0: float, ts: float,
                                propagator: Propagator | None = None) -> np.ndarray:
    """``Tr_S rho(ts)``: the environment marginal at the intermediate time."""
    prop = propagator if propagator is not None else total_propagator(spec)
    rho = propagate(initial_density(initial, spec.d_S, spec.d_E), prop, t0, ts)
    return linalg.partial_trace(rho, spec.d_S, spec.d_E, "environment")


def certification_triples(T: float, t0: float = 0.0) -> list[tuple[float, float, float]]:
    """Triples ``(t0, t0 + T/k, t0 + T)`` for ``k`` in 8, 4, 2."""
    return [(t0, t0 + T / k, t0 + T) for k in (8, 4, 2)]


def max_grid_residual(spec: SystemSpec, weights, T: float, t0: float = 0.0,
                      tol: ToleranceConfig = DEFAULT_TOL) -> float:
    prop = total_propagator(spec)
    return max(composition_residual(spec, weights, *tr, propagator=prop, tol=tol).residual
               for tr in certification_triples(T, t0))


def certify_single_env_state(weights, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    """True iff ``d`` is ``|eta><eta|`` for a single basis state ``eta``."""
    d = np.asarray(weights, dtype=complex)
    diag = np.diag(d)
    off = d - np.diag(diag)
    if linalg.max_abs(off) > tol.single_state:
        return False
    occupied = np.abs(diag) > tol.single_state
    if occupied.sum() != 1:
        return False
    return abs(diag[occupied][0] - 1.0) <= tol.single_state


def certify_equal_weights(state: InitialState, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    """True iff ``|c_i|^2 = 1/n`` for every ``i`` and ``d = I/N``."""
    if not state.is_product:
        raise WrongKind("equal-weight certificate needs a product initial state")
    pops = np.real(np.diag(state.system_density()))
    n = pops.size
    N = state.d.shape[0]
    if np.max(np.abs(pops - 1.0 / n)) > tol.equal_weights:
        return False
    return linalg.max_abs(state.d - np.eye(N) / N) <= tol.equal_weights


def equal_weight_sides(spec: SystemSpec, t0: float, ts: float, t: float,
                       propagator: Propagator | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of the equal-weight divisibility identity as ``d_S x d_S`` arrays.

    With ``|c_i|^2 = 1/n`` and ``d = I/N`` the one-shot side is
    ``(1/(N n)) sum_{i,a,g} U[k1 g, i a] conj(U[k2 g, i a])`` over ``(t0, t)``
    and the composed side is
    ``(1/(N^2 n)) sum_{j1 j2 b e} U'[k1 e, j1 b] conj(U'[k2 e, j2 b]) * S[j1, j2]``
    with ``U'`` over ``(ts, t)`` and ``S[j1, j2] = sum_{i a g} U''[j1 g, i a] conj(U''[j2 g, i a])``
    over ``(t0, ts)``. Both are evaluated by explicit index sums.
    """
    prop = propagator if propagator is not None else total_propagator(spec)
    n, N = spec.d_S, spec.d_E
    U_full = prop(t - t0).reshape(n, N, n, N)
    U_late = prop(t - ts).reshape(n, N, n, N)
    U_early = prop(ts - t0).reshape(n, N, n, N)
    lhs = np.einsum("kgia,lgia->kl", U_full, U_full.conj()) / (N * n)
    inner = np.einsum("jgia,mgia->jm", U_early, U_early.conj())
    rhs = np.einsum("kejb,lemb,jm->kl", U_late, U_late.conj(), inner) / (N * N * n)
    return lhs, rhs


def equal_weight_residual(spec: SystemSpec, t0: float, ts: float, t: float) -> float:
    lhs, rhs = equal_weight_sides(spec, t0, ts, t)
    return linalg.max_abs(lhs - rhs)


def commutation_certificate(spec: SystemSpec,
                            tol: ToleranceConfig = DEFAULT_TOL) -> tuple[bool, float]:
    """``(||[I (x) H_E, H_SE]||_max < tol, ||[I (x) H_E, H_SE]||_max)``."""
    IH = np.kron(np.eye(spec.d_S), spec.H_E)
    norm = linalg.max_abs(linalg.commutator(IH, spec.H_SE))
    return norm < tol.commutator, norm


def environment_support(a, tol: float = 1e-12) -> list[int]:
    """Environment indices carrying nonzero entangled amplitude."""
    a = np.asarray(a, dtype=complex)
    return [int(k) for k in np.flatnonzero(np.sum(np.abs(a) ** 2, axis=0) > tol)]


def single_state_reduced_density(spec: SystemSpec, a, eta: int, t0: float, t: float,
                                 propagator: Propagator | None = None) -> np.ndarray:
    """Reduced state keeping only the environment state ``eta`` throughout.

    ``rho[j1, j2] = sum a[i1,eta] conj(a[i2,eta]) <j1 eta|U|i1 eta> conj(<j2 eta|U|i2 eta>)``
    """
    prop = propagator if propagator is not None else total_propagator(spec)
    U4 = prop(t - t0).reshape(spec.d_S, spec.d_E, spec.d_S, spec.d_E)
    block = U4[:, eta, :, eta]
    amp = block @ np.asarray(a, dtype=complex)[:, eta]
    return np.outer(amp, amp.conj())


def entangled_divisibility_check(spec: SystemSpec, a, t0: float, ts: float, t: float,
                                 tol: ToleranceConfig = DEFAULT_TOL) -> DivisibilityReport:
    """Divisibility test for a correlated (entangled) pure initial state.

    The one-shot side is the exact reduced state at ``t``; the composed side
    propagates the exact reduced state at ``ts`` through the map of the
    second segment. When the amplitudes sit on a single environment state
    ``eta`` the second-segment map uses ``|eta><eta|``; otherwise it uses
    the initial environment marginal. For the single-state case the report
    also carries the ``entangled_reduced`` tag only if the exact state
    matches :func:`single_state_reduced_density` (environment stays in
    ``eta``).
    """
    a = np.asarray(a, dtype=complex)
    state = InitialState.entangled(a, tol)
    prop = total_propagator(spec)
    support = environment_support(a)
    if len(support) == 1:
        eta = support[0]
        weights = np.zeros((spec.d_E, spec.d_E), dtype=complex)
        weights[eta, eta] = 1.0
    else:
        eta = None
        weights = state.environment_weights()
    rho_ts = entangled_reduced_density(spec, a, t0, ts, prop)
    rho_t = entangled_reduced_density(spec, a, t0, t, prop)
    second = _segment(spec, weights, ts, t, prop)
    diff = rho_t - apply_map(second, rho_ts)
    tags = set()
    if eta is not None:
        tags.add("single_env_state")
        single = single_state_reduced_density(spec, a, eta, t0, t, prop)
        if linalg.max_abs(single - rho_t) <= tol.verdict:
            tags.add("entangled_reduced")
    return _report(diff, t0, ts, t, tol, tags)


# -- sweeps -------------------------------------------------------------------

CSV_COLUMNS = ["seed", "d_S", "d_E", "coupling", "commuting_flag", "t0", "ts", "t",
               "residual", "verdict"]


def ground_state_weights(spec: SystemSpec) -> np.ndarray:
    """``|g><g|`` for the lowest eigenvector of ``H_E``."""
    _, V = np.linalg.eigh(spec.H_E)
    v = V[:, 0]
    return np.outer(v, v.conj())


def sweep_rows(seed: int, d_S: int, d_E: int, coupling: float, commuting: bool,
               T: float = 1.0, t0: float = 0.0, tol: ToleranceConfig = DEFAULT_TOL,
               triples=None) -> list[dict]:
    """CSV rows for one seeded model started in the ``H_E`` ground state.

    ``triples`` defaults to :func:`certification_triples`.
    """
    spec = random_model(seed, d_S, d_E, coupling, commuting)
    weights = ground_state_weights(spec)
    prop = total_propagator(spec)
    rows = []
    for tr in (certification_triples(T, t0) if triples is None else triples):
        rep = composition_residual(spec, weights, *tr, propagator=prop, tol=tol)
        rows.append({"seed": seed, "d_S": d_S, "d_E": d_E, "coupling": coupling,
                     "commuting_flag": int(commuting), "t0": rep.t0, "ts": rep.ts, "t": rep.t,
                     "residual": rep.residual, "verdict": rep.verdict})
    return rows


def write_rows(path, rows: list[dict], columns=CSV_COLUMNS) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([format(r[c], ".17g") if isinstance(r[c], float) else r[c]
                        for c in columns])
