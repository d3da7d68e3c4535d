"""
One-time master equation for the environment-diagonal blocks.

With ``H_E`` diagonal, split the full state into ``d_S x d_S`` blocks
``rho[g, b] = <. g|rho|. b>``. The diagonal block obeys::

    d rho[g, g]/dt = -i [Hd_g, rho[g, g]] - i (Omega_out_g - Omega_in_g)

    Hd_g        = H_S + E_g + H_SE[g, g]
    Omega_out_g = sum_{b != g} H_SE[g, b] @ rho[b, g]
    Omega_in_g  = sum_{b != g} rho[g, b] @ H_SE[b, g]

which is an exact rewriting of the ``(g, g)`` block of ``-i [H, rho]``.
The cross terms vanish when ``H_SE`` is block diagonal in the environment,
i.e. when ``[I (x) H_E, H_SE] = 0``.

All functions here expect a spec whose ``H_E`` is already diagonal (see
:func:`oqslab.model.to_env_eigenbasis`).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import linalg
from .errors import ShapeError, StepError
from .linalg import Propagator
from .model import InitialState, SystemSpec, build_total_hamiltonian, initial_density


@dataclass(frozen=True, eq=False)
class BlockDensity:
    """Blocks ``blocks[g, b] = <. g|rho|. b>``, shape ``(d_E, d_E, d_S, d_S)``."""

    blocks: np.ndarray

    @classmethod
    def from_full(cls, rho, d_S: int, d_E: int) -> "BlockDensity":
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (d_S * d_E, d_S * d_E):
            raise ShapeError(f"rho has shape {rho.shape}, expected {(d_S * d_E,) * 2}")
        return cls(rho.reshape(d_S, d_E, d_S, d_E).transpose(1, 3, 0, 2).copy())

    def to_full(self) -> np.ndarray:
        d_E, _, d_S, _ = self.blocks.shape
        return self.blocks.transpose(2, 0, 3, 1).reshape(d_S * d_E, d_S * d_E)

    @property
    def d_S(self) -> int:
        return self.blocks.shape[2]

    @property
    def d_E(self) -> int:
        return self.blocks.shape[0]

    def block(self, g: int, b: int) -> np.ndarray:
        return self.blocks[g, b]

    def population(self) -> float:
        """``sum_g Tr rho[g, g]``."""
        return float(np.real(np.einsum("ggii->", self.blocks)))

    def reduced(self) -> np.ndarray:
        return np.einsum("ggij->ij", self.blocks)


def _require_diagonal_env(spec: SystemSpec) -> None:
    off = spec.H_E - np.diag(np.diag(spec.H_E))
    if linalg.max_abs(off) > 1e-12 * max(1.0, linalg.max_abs(spec.H_E)):
        raise ValueError("H_E must be diagonal; rotate with to_env_eigenbasis first")


def coupling_blocks(spec: SystemSpec) -> np.ndarray:
    """``H_SE`` split into environment blocks, shape ``(d_E, d_E, d_S, d_S)``."""
    return BlockDensity.from_full(spec.H_SE, spec.d_S, spec.d_E).blocks


def diagonal_hamiltonian(spec: SystemSpec, gamma: int) -> np.ndarray:
    """``Hd_g = H_S + <g|H_E|g> + H_SE[g, g]``."""
    _require_diagonal_env(spec)
    return (spec.H_S + spec.H_E[gamma, gamma].real * np.eye(spec.d_S)
            + coupling_blocks(spec)[gamma, gamma])


def omega_terms(spec: SystemSpec, blocks: BlockDensity, gamma: int):
    """Cross-block terms ``(Omega_out, Omega_in)`` for environment state ``gamma``."""
    _require_diagonal_env(spec)
    if blocks.blocks.shape != (spec.d_E, spec.d_E, spec.d_S, spec.d_S):
        raise ShapeError("block density does not match the model dimensions")
    V = coupling_blocks(spec)
    others = [b for b in range(spec.d_E) if b != gamma]
    out = np.zeros((spec.d_S, spec.d_S), dtype=complex)
    inn = np.zeros((spec.d_S, spec.d_S), dtype=complex)
    for b in others:
        out += V[gamma, b] @ blocks.blocks[b, gamma]
        inn += blocks.blocks[gamma, b] @ V[b, gamma]
    return out, inn


def master_rhs_gamma(spec: SystemSpec, blocks: BlockDensity, gamma: int) -> np.ndarray:
    Hd = diagonal_hamiltonian(spec, gamma)
    rho = blocks.blocks[gamma, gamma]
    out, inn = omega_terms(spec, blocks, gamma)
    return -1j * (Hd @ rho - rho @ Hd) - 1j * (out - inn)


def full_commutator_block(spec: SystemSpec, blocks: BlockDensity, gamma: int) -> np.ndarray:
    """``(gamma, gamma)`` block of ``-i [H, rho]`` computed on the full space."""
    H = build_total_hamiltonian(spec)
    rho = blocks.to_full()
    full = -1j * (H @ rho - rho @ H)
    return BlockDensity.from_full(full, spec.d_S, spec.d_E).blocks[gamma, gamma]


def block_rhs(H_blocks: np.ndarray, blocks: np.ndarray) -> np.ndarray:
    """``d rho[g, b]/dt = -i sum_e (H[g, e] rho[e, b] - rho[g, e] H[e, b])``."""
    return -1j * (np.einsum("geij,ebjk->gbik", H_blocks, blocks)
                  - np.einsum("geij,ebjk->gbik", blocks, H_blocks))


def integrate_blocks(spec: SystemSpec, initial: InitialState, T: float, steps: int):
    """Classical RK4 on the exact block system.

    Returns ``(times, trajectory)`` where ``trajectory`` is a list of
    :class:`BlockDensity`, one per grid point.
    """
    if steps < 8:
        raise ValueError(f"need at least 8 RK4 steps, got {steps}")
    _require_diagonal_env(spec)
    H_blocks = BlockDensity.from_full(build_total_hamiltonian(spec), spec.d_S, spec.d_E).blocks
    x = BlockDensity.from_full(initial_density(initial, spec.d_S, spec.d_E),
                               spec.d_S, spec.d_E).blocks
    h = T / steps
    times = np.linspace(0.0, T, steps + 1)
    traj = [BlockDensity(x.copy())]
    for n in range(steps):
        k1 = block_rhs(H_blocks, x)
        k2 = block_rhs(H_blocks, x + 0.5 * h * k1)
        k3 = block_rhs(H_blocks, x + 0.5 * h * k2)
        k4 = block_rhs(H_blocks, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise StepError(f"non-finite state after RK4 step {n + 1}")
        traj.append(BlockDensity(x.copy()))
    return times, traj


def derivative_contributions(spec: SystemSpec, initial: InitialState, t: float,
                             propagator: Propagator | None = None):
    """The two one-sided pieces of ``d rho_S/dt`` at ``t`` by explicit sums.

    ``first[j1, j2]  = -i sum <j1 g|H|k1 b> <k1 b|U|i1 a1> rho0[i1 a1, i2 a2] <i2 a2|U^dag|j2 g>``
    ``second[j1, j2] = +i sum <j1 g|U|i1 a1> rho0[i1 a1, i2 a2] <i2 a2|U^dag|k2 b> <k2 b|H|j2 g>``
    """
    d_S, d_E = spec.d_S, spec.d_E
    H = build_total_hamiltonian(spec)
    prop = propagator if propagator is not None else Propagator(H)
    U = prop(t)
    rho0 = initial_density(initial, d_S, d_E)
    H4 = H.reshape(d_S, d_E, d_S, d_E)
    U4 = U.reshape(d_S, d_E, d_S, d_E)
    R4 = rho0.reshape(d_S, d_E, d_S, d_E)
    Ud4 = U.conj().T.reshape(d_S, d_E, d_S, d_E)
    first = -1j * np.einsum("jgkb,kbia,iaml,mlng->jn", H4, U4, R4, Ud4, optimize=True)
    second = 1j * np.einsum("jgia,iaml,mlkb,kbng->jn", U4, R4, Ud4, H4, optimize=True)
    return first, second


def symmetrized_rhs(H, rho) -> np.ndarray:
    """``(I - iH) rho (I + iH) - rho - H rho H``, algebraically ``-i [H, rho]``."""
    I = np.eye(H.shape[0])
    return (I - 1j * H) @ rho @ (I + 1j * H) - rho - H @ rho @ H


def sandwich_form(H) -> list[tuple[np.ndarray, np.ndarray]]:
    """Operator pairs ``(L_n, R_n)`` with ``sum L_n rho R_n^dag = -i [H, rho]``."""
    I = np.eye(H.shape[0], dtype=complex)
    return [(-1j * H, I), (I, -1j * np.asarray(H, dtype=complex))]


def apply_sandwich(pairs, rho) -> np.ndarray:
    return sum(L @ rho @ R.conj().T for L, R in pairs)


def master_rows(spec: SystemSpec, initial: InitialState, times, fd_step: float | None = None):
    """Rows ``t, gamma, omega_out, omega_in, residual`` along the exact trajectory.

    ``residual`` is ``||d rho[g,g]/dt - rhs||_max`` with the derivative from a
    central difference of the exact propagation.
    """
    H = build_total_hamiltonian(spec)
    prop = Propagator(H)
    h = fd_step if fd_step is not None else 1e-4 / max(linalg.op_norm_estimate(H), 1e-12)
    rho0 = initial_density(initial, spec.d_S, spec.d_E)

    def state(t):
        U = prop(t)
        return U @ rho0 @ U.conj().T

    rows = []
    for t in times:
        blocks = BlockDensity.from_full(state(t), spec.d_S, spec.d_E)
        deriv = BlockDensity.from_full((state(t + h) - state(t - h)) / (2 * h),
                                       spec.d_S, spec.d_E)
        for g in range(spec.d_E):
            out, inn = omega_terms(spec, blocks, g)
            rhs = master_rhs_gamma(spec, blocks, g)
            rows.append({"t": float(t), "gamma": g, "omega_out": linalg.max_abs(out),
                         "omega_in": linalg.max_abs(inn),
                         "residual": linalg.max_abs(deriv.blocks[g, g] - rhs)})
    return rows


def write_rows(path, rows) -> None:
    cols = ["t", "gamma", "omega_out", "omega_in", "residual"]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([format(r[c], ".17g") if isinstance(r[c], float) else r[c] for c in cols])
