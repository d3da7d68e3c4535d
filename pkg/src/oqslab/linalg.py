"""
Dense complex linear algebra used throughout oqslab.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Subsystem
ordering on product spaces is always system-major: the basis state
``|i, alpha>`` sits at flat index ``i * d_E + alpha``, which is what
``np.kron(A_S, B_E)`` produces.

Hermitian exponentials go through an eigendecomposition rather than
scaling-and-squaring so that the resulting propagators are unitary to
round-off and the spectral data can be reused for many times.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import HermiticityError, NumericalError, ShapeError, SizeLimit

DEFAULT_MAX_DIM = 4096


@dataclass(frozen=True)
class ToleranceConfig:
    """Numerical tolerances threaded through every check.

    Absolute tolerances are multiplied by the relevant dimension where the
    docstring of the consuming function says so.
    """

    hermitian_rel: float = 1e-12
    normalization: float = 1e-12
    psd_floor: float = -1e-10
    trace: float = 1e-12
    unitarity: float = 1e-12
    commutator: float = 1e-10
    verdict: float = 1e-8
    equal_weights: float = 1e-10
    single_state: float = 1e-12
    entropy_trace: float = 1e-8
    kraus: float = 1e-10


DEFAULT_TOL = ToleranceConfig()


def max_dim() -> int:
    """Global cap on total Hilbert-space dimension (``OQS_MAX_DIM`` overrides)."""
    raw = os.environ.get("OQS_MAX_DIM")
    if raw is None or raw.strip() == "":
        return DEFAULT_MAX_DIM
    try:
        value = int(raw)
    except ValueError as exc:
        raise SizeLimit(f"OQS_MAX_DIM must be an integer, got {raw!r}") from exc
    if value < 1:
        raise SizeLimit(f"OQS_MAX_DIM must be positive, got {value}")
    return value


def check_dim(dim: int, what: str = "total dimension") -> None:
    cap = max_dim()
    if dim > cap:
        raise SizeLimit(f"{what} {dim} exceeds the configured cap {cap}")


def as_matrix(A, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-d complex array."""
    M = np.asarray(A, dtype=complex)
    if M.ndim != 2:
        raise ShapeError(f"{name} must be 2-d, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NumericalError(f"{name} contains non-finite entries")
    return M


def _square(A, name: str) -> np.ndarray:
    M = as_matrix(A, name)
    if M.shape[0] != M.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {M.shape}")
    return M


def is_hermitian(A, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    M = np.asarray(A, dtype=complex)
    scale = max(float(np.max(np.abs(M), initial=0.0)), 1.0)
    return bool(np.max(np.abs(M - M.conj().T), initial=0.0) <= tol.hermitian_rel * scale)


def hermitian(A, tol: ToleranceConfig = DEFAULT_TOL, name: str = "H") -> np.ndarray:
    """Validate ``A`` as Hermitian and return it as a complex array.

    The relative check is ``max|A - A^dag| <= hermitian_rel * max|A|`` with
    the scale floored at one so that the zero matrix passes.
    """
    M = _square(A, name)
    if not is_hermitian(M, tol):
        dev = float(np.max(np.abs(M - M.conj().T)))
        raise HermiticityError(f"{name} is not Hermitian (max deviation {dev:.3e})")
    return M


def dagger(A: np.ndarray) -> np.ndarray:
    return A.conj().T


def commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A @ B - B @ A


def kron(A, B) -> np.ndarray:
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    rows = A.shape[0] * B.shape[0]
    cols = A.shape[1] * B.shape[1]
    check_dim(max(rows, cols), "Kronecker product dimension")
    return np.kron(A, B)


def partial_trace(rho, d_S: int, d_E: int, keep: str = "system") -> np.ndarray:
    """Trace out one factor of a ``(d_S*d_E) x (d_S*d_E)`` operator.

    ``keep`` is ``"system"`` (returns Tr_E) or ``"environment"`` (returns Tr_S).
    """
    rho = as_matrix(rho, "rho")
    n = d_S * d_E
    if rho.shape != (n, n):
        raise ShapeError(f"rho has shape {rho.shape}, expected {(n, n)}")
    r = rho.reshape(d_S, d_E, d_S, d_E)
    if keep in ("system", "S"):
        return np.einsum("iaja->ij", r)
    if keep in ("environment", "E"):
        return np.einsum("iaib->ab", r)
    raise ValueError(f"keep must be 'system' or 'environment', got {keep!r}")


class Propagator:
    """Cached spectral data of a Hermitian generator.

    ``Propagator(H)(dt)`` returns ``exp(-i H dt)``; the eigendecomposition is
    computed once, so sweeping many times costs one matrix product each.
    """

    def __init__(self, H, tol: ToleranceConfig = DEFAULT_TOL):
        H = hermitian(H, tol)
        try:
            evals, evecs = np.linalg.eigh(H)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"eigendecomposition failed: {exc}") from exc
        if not (np.all(np.isfinite(evals)) and np.all(np.isfinite(evecs))):
            raise NumericalError("eigendecomposition produced non-finite values")
        self.evals = evals
        self.evecs = evecs
        self.dim = H.shape[0]

    def __call__(self, dt: float) -> np.ndarray:
        if dt == 0:
            return np.eye(self.dim, dtype=complex)
        phases = np.exp(-1j * self.evals * dt)
        return (self.evecs * phases) @ self.evecs.conj().T

    def function(self, f) -> np.ndarray:
        """Apply a scalar function to the spectrum: ``V f(Lambda) V^dag``."""
        return (self.evecs * f(self.evals)) @ self.evecs.conj().T


def expm_hermitian(H, dt: float, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Return ``exp(-i H dt)`` for Hermitian ``H``."""
    return Propagator(H, tol)(dt)


def fro_norm(A) -> float:
    return float(np.linalg.norm(np.asarray(A, dtype=complex), "fro"))


def op_norm_estimate(A) -> float:
    """Largest singular value, from the spectrum of ``A^dag A``."""
    A = np.asarray(A, dtype=complex)
    if A.size == 0:
        return 0.0
    top = np.linalg.eigvalsh(A.conj().T @ A)[-1]
    return float(np.sqrt(max(top, 0.0)))


def max_abs(A) -> float:
    return float(np.max(np.abs(np.asarray(A)), initial=0.0))


def random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    """GUE-style sample ``(A + A^dag)/2`` with standard-normal complex entries."""
    A = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (A + A.conj().T)


def random_density(rng: np.random.Generator, dim: int, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    G = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real
