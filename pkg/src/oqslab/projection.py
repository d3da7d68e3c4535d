"""
P/Q projection of the full state onto environment subspaces.

Everything here works in the eigenbasis of ``H_E``; use
:func:`oqslab.model.to_env_eigenbasis` (or :func:`to_eigenbasis`) to get
there. ``P`` keeps the environment rows ``P_basis`` of ``rho`` (left
multiplication by ``I_S (x) sum_k |g_k><g_k|``), ``Q = 1 - P``.

Superoperators act on row-major ``vec(rho)``, where
``vec(A X B) = (A (x) B^T) vec(X)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import linalg
from .errors import QuadratureError, ShapeError, SizeLimit
from .linalg import Propagator
from .model import (InitialState, SystemSpec, build_total_hamiltonian, initial_density,
                    to_env_eigenbasis)

MAX_NZ_DIM = 16


@dataclass(frozen=True)
class ProjectorPair:
    P_basis: tuple
    Q_basis: tuple
    d_E: int

    def __post_init__(self):
        P, Q = set(self.P_basis), set(self.Q_basis)
        if P & Q or P | Q != set(range(self.d_E)):
            raise ValueError("P_basis and Q_basis must partition range(d_E)")

    @classmethod
    def first(cls, n: int, d_E: int) -> "ProjectorPair":
        """``P`` over the first ``n`` environment eigenstates."""
        if not 0 <= n <= d_E:
            raise ValueError(f"n must lie in [0, {d_E}], got {n}")
        return cls(tuple(range(n)), tuple(range(n, d_E)), d_E)

    def mask(self, which: str, d_S: int) -> np.ndarray:
        """Boolean row mask of length ``d_S * d_E`` for ``which`` in P, Q."""
        keep = self.P_basis if which == "P" else self.Q_basis
        env = np.zeros(self.d_E, dtype=bool)
        env[list(keep)] = True
        return np.tile(env, d_S)

    def env_projector(self, which: str, d_S: int) -> np.ndarray:
        return np.diag(self.mask(which, d_S).astype(float)).astype(complex)


def to_eigenbasis(spec: SystemSpec, rho) -> tuple[SystemSpec, np.ndarray]:
    rotated, W = to_env_eigenbasis(spec)
    return rotated, W.conj().T @ np.asarray(rho, dtype=complex) @ W


def apply_projector(pair: ProjectorPair, which: str, rho) -> np.ndarray:
    """Zero the environment rows of ``rho`` outside ``which`` (``"P"`` or ``"Q"``)."""
    if which not in ("P", "Q"):
        raise ValueError(f"which must be 'P' or 'Q', got {which!r}")
    rho = linalg.as_matrix(rho, "rho")
    if rho.shape[0] % pair.d_E or rho.shape[0] != rho.shape[1]:
        raise ShapeError(f"rho of shape {rho.shape} is not on a d_S x {pair.d_E} space")
    out = rho.copy()
    out[~pair.mask(which, rho.shape[0] // pair.d_E)] = 0.0
    return out


def liouvillian_rhs(H, rho) -> np.ndarray:
    """``-i [H, rho]``."""
    H = np.asarray(H, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    if H.shape != rho.shape:
        raise ShapeError(f"H {H.shape} and rho {rho.shape} differ in shape")
    return -1j * (H @ rho - rho @ H)


def coupling_term_norms(spec: SystemSpec, pair: ProjectorPair, rho_t) -> tuple[float, float]:
    """``(||P L Q rho||_max, ||Q L P rho||_max)`` with ``rho`` in the H_E eigenbasis."""
    rotated, _ = to_env_eigenbasis(spec)
    H = build_total_hamiltonian(rotated)
    Qr = apply_projector(pair, "Q", rho_t)
    Pr = apply_projector(pair, "P", rho_t)
    pq = apply_projector(pair, "P", liouvillian_rhs(H, Qr))
    qp = apply_projector(pair, "Q", liouvillian_rhs(H, Pr))
    return linalg.max_abs(pq), linalg.max_abs(qp)


def liouvillian_superop(H) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    I = np.eye(H.shape[0])
    return -1j * (np.kron(H, I) - np.kron(I, H.T))


def projector_superop(pair: ProjectorPair, which: str, d_S: int) -> np.ndarray:
    Pi = pair.env_projector(which, d_S)
    return np.kron(Pi, np.eye(Pi.shape[0]))


def projected_generator(spec_eig: SystemSpec, pair: ProjectorPair, block: str) -> Propagator:
    """Spectral form of ``X L X`` (``X`` = ``block``) as a :class:`Propagator`.

    ``X L X`` is anti-Hermitian on the operator space, so ``i X L X`` is
    Hermitian and ``Propagator(i X L X)(t) = exp(X L X t)``.
    """
    d = spec_eig.dim
    if d > MAX_NZ_DIM:
        raise SizeLimit(f"projection superoperators need d_S*d_E <= {MAX_NZ_DIM}, got {d}")
    L = liouvillian_superop(build_total_hamiltonian(spec_eig))
    X = projector_superop(pair, block, spec_eig.d_S)
    G = 1j * (X @ L @ X)
    return Propagator(0.5 * (G + G.conj().T))


def exact_history(spec_eig: SystemSpec, rho0_eig, times) -> np.ndarray:
    """Exact ``rho(t)`` for every ``t`` in ``times`` (shape ``(n, d, d)``)."""
    prop = Propagator(build_total_hamiltonian(spec_eig))
    out = np.empty((len(times), spec_eig.dim, spec_eig.dim), dtype=complex)
    for k, t in enumerate(times):
        U = prop(t)
        out[k] = U @ rho0_eig @ U.conj().T
    return out


def p_block_evolution(spec: SystemSpec, pair: ProjectorPair, rho0_eig, times) -> np.ndarray:
    """Standalone ``P rho(t) = exp(P L P t) P rho(0)``, ignoring the Q channel."""
    rotated, _ = to_env_eigenbasis(spec)
    gen = projected_generator(rotated, pair, "P")
    x0 = apply_projector(pair, "P", rho0_eig).reshape(-1)
    d = rotated.dim
    return np.stack([(gen(t) @ x0).reshape(d, d) for t in times])


def memory_reconstruction(spec: SystemSpec, pair: ProjectorPair, initial: InitialState,
                          T: float, steps: int) -> dict:
    """Rebuild ``Q rho(t)`` from the exact history by variation of constants.

    ``Q rho(t) = exp(QLQ t) Q rho(0) + int_0^t exp(QLQ (t - s)) QLP rho(s) ds``,
    integral by the composite trapezoid rule on ``steps`` uniform intervals.
    Returns the grid, the per-time errors (max-abs) and the reconstructions.
    """
    if steps < 4:
        raise QuadratureError(f"need at least 4 quadrature steps, got {steps}")
    rotated, W = to_env_eigenbasis(spec)
    d = rotated.dim
    rho0 = W.conj().T @ initial_density(initial, spec.d_S, spec.d_E) @ W
    times = np.linspace(0.0, T, steps + 1)
    h = T / steps
    hist = exact_history(rotated, rho0, times)

    L = liouvillian_superop(build_total_hamiltonian(rotated))
    Pop = projector_superop(pair, "P", rotated.d_S)
    Qop = projector_superop(pair, "Q", rotated.d_S)
    gen = projected_generator(rotated, pair, "Q")
    V, lam = gen.evecs, -1j * gen.evals      # exp(QLQ t) = V exp(lam t) V^dag

    vecs = hist.reshape(len(times), -1)
    y = (vecs @ (Qop @ L @ Pop).T) @ V.conj()           # rows: V^dag QLP rho(t_k)
    q0 = V.conj().T @ (Qop @ vecs[0])
    step = np.exp(lam * h)

    recon = np.empty_like(vecs)
    acc = 0.5 * y[0]
    recon[0] = V @ q0
    for n in range(1, len(times)):
        acc = step * acc + y[n]
        integral = h * (acc - 0.5 * y[n])
        recon[n] = V @ (np.exp(lam * times[n]) * q0 + integral)

    exact_q = vecs @ Qop.T
    errors = np.max(np.abs(recon - exact_q), axis=1)
    return {"times": times, "errors": errors, "recon": recon.reshape(-1, d, d),
            "exact": exact_q.reshape(-1, d, d), "history": hist}


def memory_reconstruction_error(spec: SystemSpec, pair: ProjectorPair, initial: InitialState,
                                T: float, steps: int) -> float:
    """Max over the grid of ``||reconstructed Q rho - exact Q rho||_max``."""
    if len(pair.Q_basis) == 0:
        return 0.0
    return float(np.max(memory_reconstruction(spec, pair, initial, T, steps)["errors"]))


def nz_rows(spec: SystemSpec, pair: ProjectorPair, initial: InitialState, T: float,
            steps: int) -> list[dict]:
    """Rows ``t, pq_norm, qp_norm, reconstruction_error`` on the quadrature grid."""
    out = memory_reconstruction(spec, pair, initial, T, steps)
    rows = []
    for t, rho, err in zip(out["times"], out["history"], out["errors"]):
        pq, qp = coupling_term_norms(spec, pair, rho)
        rows.append({"t": float(t), "pq_norm": pq, "qp_norm": qp,
                     "reconstruction_error": float(err)})
    return rows


def write_rows(path, rows: list[dict]) -> None:
    cols = ["t", "pq_norm", "qp_norm", "reconstruction_error"]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([format(r[c], ".17g") for c in cols])
