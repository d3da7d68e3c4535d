"""
Reduced dynamical map as a supermatrix.

Index convention
----------------
``C.matrix[i1*d_S + i2, j1*d_S + j2]`` maps the input element
``rho_S[i1, i2]`` at ``t0`` onto the output element ``rho_S[j1, j2]`` at
``t``::

    rho_S(t)[j1, j2] = sum_{i1,i2} rho_S(t0)[i1, i2] * C[(i1,i2), (j1,j2)]
    C[(i1,i2),(j1,j2)] = sum_{a1,a2,g} d[a1,a2] <j1 g|U|i1 a1> conj(<j2 g|U|i2 a2>)

so the map acts on row-major ``vec(rho)`` by ``C.T``, and consecutive
segments compose as ``C(t, t0) = C(ts, t0) @ C(t, ts)`` (earlier segment on
the left). At ``t = t0`` this is the identity matrix.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels, linalg
from .errors import NumericalError, ShapeError
from .linalg import Propagator
from .model import InitialState, SystemSpec, build_total_hamiltonian, initial_density, propagate


@dataclass(frozen=True, eq=False)
class SuperMatrix:
    d_S: int
    t0: float
    t: float
    matrix: np.ndarray

    def __post_init__(self):
        n = self.d_S * self.d_S
        if self.matrix.shape != (n, n):
            raise ShapeError(f"supermatrix has shape {self.matrix.shape}, expected {(n, n)}")

    def then(self, later: "SuperMatrix") -> "SuperMatrix":
        """Apply ``self`` first, then ``later``."""
        return SuperMatrix(self.d_S, self.t0, later.t, self.matrix @ later.matrix)

    def element(self, i1, i2, j1, j2) -> complex:
        return complex(self.matrix[i1 * self.d_S + i2, j1 * self.d_S + j2])

    def trace_defect(self) -> float:
        """``max |sum_j C[(i1,i2),(j,j)] - delta(i1,i2)|``."""
        C4 = self.matrix.reshape((self.d_S,) * 4)
        return linalg.max_abs(np.einsum("abjj->ab", C4) - np.eye(self.d_S))

    def hermiticity_defect(self) -> float:
        """``max |C[(i2,i1),(j2,j1)] - conj(C[(i1,i2),(j1,j2)])|``."""
        C4 = self.matrix.reshape((self.d_S,) * 4)
        return linalg.max_abs(C4.transpose(1, 0, 3, 2) - C4.conj())


def identity_map(d_S: int, t0: float = 0.0) -> SuperMatrix:
    return SuperMatrix(d_S, t0, t0, np.eye(d_S * d_S, dtype=complex))


def total_propagator(spec: SystemSpec) -> Propagator:
    return Propagator(build_total_hamiltonian(spec), spec.tol)


def supermatrix_from_unitary(U, weights, d_S: int, d_E: int, t0=0.0, t=0.0) -> SuperMatrix:
    C = _kernels.supermatrix(U, weights, d_S, d_E)
    if not np.all(np.isfinite(C)):
        raise NumericalError("supermatrix has non-finite entries")
    return SuperMatrix(d_S, t0, t, C)


def compute_supermatrix(spec: SystemSpec, weights=None, t0: float = 0.0, t: float = 0.0,
                        propagator: Propagator | None = None) -> SuperMatrix:
    """Supermatrix of the reduced map from ``t0`` to ``t``.

    ``weights`` is the environment weight matrix ``d``; it defaults to the
    first environment basis state. Pass ``propagator`` to reuse one
    eigendecomposition of the total Hamiltonian across many times.
    """
    if weights is None:
        weights = np.zeros((spec.d_E, spec.d_E), dtype=complex)
        weights[0, 0] = 1.0
    weights = linalg.hermitian(weights, spec.tol, "d")
    if weights.shape != (spec.d_E, spec.d_E):
        raise ShapeError(f"weights have shape {weights.shape}, expected {(spec.d_E, spec.d_E)}")
    if abs(np.trace(weights) - 1.0) > 1e-10:
        raise ShapeError("environment weights must have unit trace")
    prop = propagator if propagator is not None else total_propagator(spec)
    return supermatrix_from_unitary(prop(t - t0), weights, spec.d_S, spec.d_E, t0, t)


def apply_map(C: SuperMatrix, rhoS) -> np.ndarray:
    rhoS = linalg.as_matrix(rhoS, "rhoS")
    if rhoS.shape != (C.d_S, C.d_S):
        raise ShapeError(f"rhoS has shape {rhoS.shape}, map acts on {C.d_S}x{C.d_S}")
    return (rhoS.reshape(-1) @ C.matrix).reshape(C.d_S, C.d_S)


def reduced_density_direct(spec: SystemSpec, initial: InitialState, t0: float, t: float,
                           propagator: Propagator | None = None) -> np.ndarray:
    """``Tr_E[U rho(t0) U^dag]`` on the full space: the partial-trace oracle."""
    rho0 = initial_density(initial, spec.d_S, spec.d_E)
    prop = propagator if propagator is not None else total_propagator(spec)
    rho_t = propagate(rho0, prop, t0, t)
    return linalg.partial_trace(rho_t, spec.d_S, spec.d_E, "system")


def entangled_reduced_density(spec: SystemSpec, a, t0: float, t: float,
                              propagator: Propagator | None = None) -> np.ndarray:
    """Reduced state of an entangled pure initial state by explicit double sum.

    ``rho_S[k1, k2] = sum a[i1,a1] conj(a[i2,a2]) <k1 g|U|i1 a1> conj(<k2 g|U|i2 a2>)``;
    independent of the partial-trace route.
    """
    a = np.asarray(a, dtype=complex)
    prop = propagator if propagator is not None else total_propagator(spec)
    U4 = prop(t - t0).reshape(spec.d_S, spec.d_E, spec.d_S, spec.d_E)
    amp = np.einsum("kgia,ia->kg", U4, a)
    return np.einsum("kg,lg->kl", amp, amp.conj())


# -- export -------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def export_supermatrix(C: SuperMatrix, path) -> None:
    """Write ``C`` as JSON (``.json``) or as CSV rows ``i1,i2,j1,j2,re,im``."""
    path = Path(path)
    d = C.d_S
    if path.suffix == ".json":
        payload = {
            "d_S": d, "t0": C.t0, "t": C.t,
            "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in C.matrix],
        }
        path.write_text(json.dumps(payload, indent=1))
        return
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i1", "i2", "j1", "j2", "re", "im"])
        for i1 in range(d):
            for i2 in range(d):
                for j1 in range(d):
                    for j2 in range(d):
                        z = C.element(i1, i2, j1, j2)
                        w.writerow([i1, i2, j1, j2, _fmt(z.real), _fmt(z.imag)])


def load_supermatrix(path) -> SuperMatrix:
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        M = np.asarray(data["matrix"], dtype=float)
        return SuperMatrix(int(data["d_S"]), float(data["t0"]), float(data["t"]),
                           M[..., 0] + 1j * M[..., 1])
    with path.open() as fh:
        rows = list(csv.DictReader(fh))
    d = int(round(len(rows) ** 0.25))
    M = np.zeros((d * d, d * d), dtype=complex)
    for r in rows:
        M[int(r["i1"]) * d + int(r["i2"]), int(r["j1"]) * d + int(r["j2"])] = \
            float(r["re"]) + 1j * float(r["im"])
    return SuperMatrix(d, float("nan"), float("nan"), M)
