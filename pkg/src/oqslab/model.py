"""
Composite system + environment models.

A model is the Hamiltonian triple ``(H_S, H_E, H_SE)`` with ``H_SE`` given on
the full product space, plus an initial state that is either a product
``rho_S (x) rho_E`` or an entangled pure state ``sum a[i, alpha] |i, alpha>``.
Energies are in inverse time units (hbar = 1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import linalg
from .errors import NormalizationError, NumericalError, ShapeError, WrongKind
from .linalg import DEFAULT_TOL, Propagator, ToleranceConfig


@dataclass(frozen=True, eq=False)
class SystemSpec:
    d_S: int
    d_E: int
    H_S: np.ndarray
    H_E: np.ndarray
    H_SE: np.ndarray
    tol: ToleranceConfig = field(default=DEFAULT_TOL, repr=False)

    def __post_init__(self):
        if self.d_S < 1 or self.d_E < 1:
            raise ShapeError(f"dimensions must be positive, got d_S={self.d_S}, d_E={self.d_E}")
        linalg.check_dim(self.d_S * self.d_E)
        for name, M, n in (("H_S", self.H_S, self.d_S), ("H_E", self.H_E, self.d_E),
                           ("H_SE", self.H_SE, self.d_S * self.d_E)):
            M = linalg.hermitian(M, self.tol, name)
            if M.shape != (n, n):
                raise ShapeError(f"{name} has shape {M.shape}, expected {(n, n)}")
            object.__setattr__(self, name, M)

    @property
    def dim(self) -> int:
        return self.d_S * self.d_E

    def with_coupling(self, H_SE) -> "SystemSpec":
        return SystemSpec(self.d_S, self.d_E, self.H_S, self.H_E, H_SE, self.tol)

    def scaled_coupling(self, factor: float) -> "SystemSpec":
        return self.with_coupling(factor * self.H_SE)


@dataclass(frozen=True, eq=False)
class InitialState:
    """Initial condition of the composite system.

    Product states carry either normalized amplitudes ``c`` (pure system
    state) or a system density ``rho_S``, together with the environment
    weight matrix ``d``. Entangled states carry the ``d_S x d_E`` amplitude
    array ``a``. Use the ``product`` / ``entangled`` constructors.
    """

    kind: str
    c: np.ndarray | None = None
    rho_S: np.ndarray | None = None
    d: np.ndarray | None = None
    a: np.ndarray | None = None

    @classmethod
    def product(cls, c=None, d=None, *, rho_S=None, strict: bool = False,
                tol: ToleranceConfig = DEFAULT_TOL) -> "InitialState":
        if (c is None) == (rho_S is None):
            raise ValueError("give exactly one of c or rho_S")
        if d is None:
            raise ValueError("environment weights d are required")
        d = _check_weights(d, strict, tol)
        if c is not None:
            c = np.asarray(c, dtype=complex).ravel()
            norm = float(np.sum(np.abs(c) ** 2))
            if abs(norm - 1.0) > tol.normalization * max(1, c.size):
                raise NormalizationError(f"sum |c_i|^2 = {norm!r}, expected 1")
            return cls("product", c=c, d=d)
        rho_S = _check_density(rho_S, tol, "rho_S")
        return cls("product", rho_S=rho_S, d=d)

    @classmethod
    def entangled(cls, a, tol: ToleranceConfig = DEFAULT_TOL) -> "InitialState":
        a = np.asarray(a, dtype=complex)
        if a.ndim != 2:
            raise ShapeError(f"entangled amplitudes must be d_S x d_E, got shape {a.shape}")
        norm = float(np.sum(np.abs(a) ** 2))
        if abs(norm - 1.0) > tol.normalization * max(1, a.size):
            raise NormalizationError(f"sum |a|^2 = {norm!r}, expected 1")
        return cls("entangled", a=a)

    @property
    def is_product(self) -> bool:
        return self.kind == "product"

    def system_density(self) -> np.ndarray:
        """The initial reduced system state."""
        if self.kind == "entangled":
            return self.a @ self.a.conj().T
        if self.rho_S is not None:
            return self.rho_S
        return np.outer(self.c, self.c.conj())

    def environment_weights(self) -> np.ndarray:
        if self.kind == "entangled":
            return self.a.T @ self.a.conj()
        return self.d

    def dims(self) -> tuple[int, int]:
        if self.kind == "entangled":
            return self.a.shape
        return self.system_density().shape[0], self.d.shape[0]


def _check_weights(d, strict: bool, tol: ToleranceConfig) -> np.ndarray:
    d = linalg.hermitian(d, tol, "d")
    tr = np.trace(d)
    if abs(tr - 1.0) > tol.trace * max(1, d.shape[0]) * 10:
        raise NormalizationError(f"environment weights have trace {tr!r}, expected 1")
    if np.linalg.eigvalsh(d)[0] < tol.psd_floor:
        raise NormalizationError("environment weights are not positive semidefinite")
    if strict and linalg.max_abs(d @ d - d) > 1e-10:
        raise NormalizationError("strict mode: environment weights must be idempotent")
    return d


def _check_density(rho, tol: ToleranceConfig, name: str) -> np.ndarray:
    rho = linalg.hermitian(rho, tol, name)
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol.trace * max(1, rho.shape[0]) * 10:
        raise NormalizationError(f"{name} has trace {tr!r}, expected 1")
    if np.linalg.eigvalsh(rho)[0] < tol.psd_floor:
        raise NormalizationError(f"{name} is not positive semidefinite")
    return rho


def basis_weights(d_E: int, alpha: int = 0) -> np.ndarray:
    """Environment weight matrix ``|alpha><alpha|``."""
    d = np.zeros((d_E, d_E), dtype=complex)
    d[alpha, alpha] = 1.0
    return d


def maximally_mixed(n: int) -> np.ndarray:
    return np.eye(n, dtype=complex) / n


def equal_weight_state(d_S: int, d_E: int) -> InitialState:
    """Uniform system amplitudes (``|c_i|^2 = 1/n``) with ``d = I/N``."""
    c = np.full(d_S, 1.0 / np.sqrt(d_S), dtype=complex)
    return InitialState.product(c, maximally_mixed(d_E))


def build_total_hamiltonian(spec: SystemSpec) -> np.ndarray:
    """``H_S (x) I_E + I_S (x) H_E + H_SE`` on the product space."""
    I_S = np.eye(spec.d_S, dtype=complex)
    I_E = np.eye(spec.d_E, dtype=complex)
    return linalg.kron(spec.H_S, I_E) + linalg.kron(I_S, spec.H_E) + spec.H_SE


def free_hamiltonian(spec: SystemSpec) -> np.ndarray:
    I_S = np.eye(spec.d_S, dtype=complex)
    I_E = np.eye(spec.d_E, dtype=complex)
    return np.kron(spec.H_S, I_E) + np.kron(I_S, spec.H_E)


def initial_density(state: InitialState, d_S: int, d_E: int,
                    tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Density matrix of ``state`` on the ``d_S * d_E`` product space."""
    if state.dims() != (d_S, d_E):
        raise ShapeError(f"state has dims {state.dims()}, model has {(d_S, d_E)}")
    if state.kind == "entangled":
        psi = state.a.reshape(-1)
        rho = np.outer(psi, psi.conj())
    else:
        rho = linalg.kron(state.system_density(), state.d)
    if abs(np.trace(rho) - 1.0) > 1e-10:
        raise NormalizationError("initial density does not have unit trace")
    return rho


def propagate(rho0, H, t0: float, t: float) -> np.ndarray:
    """``U rho0 U^dag`` with ``U = exp(-i H (t - t0))``.

    ``H`` may be a Hermitian matrix or a prebuilt :class:`Propagator`.
    """
    prop = H if isinstance(H, Propagator) else Propagator(H)
    U = prop(t - t0)
    rho = U @ np.asarray(rho0, dtype=complex) @ U.conj().T
    if not np.all(np.isfinite(rho)):
        raise NumericalError("propagation produced non-finite values")
    return rho


def random_model(seed: int, d_S: int, d_E: int, coupling: float = 1.0,
                 commuting: bool = False, diagonal_env: bool = False) -> SystemSpec:
    """Seeded random model.

    ``H_S`` and ``H_E`` are GUE-style. With ``commuting`` the coupling is
    ``sum_g S_g (x) |g><g|`` over the eigenvectors ``|g>`` of ``H_E``, so it
    commutes with ``I (x) H_E``; otherwise it is a generic Hermitian matrix.
    Either way it is rescaled to operator norm ``coupling``.

    ``diagonal_env`` replaces ``H_E`` by its (ascending) eigenvalues, so the
    computational environment basis is the ``H_E`` eigenbasis.
    """
    if coupling < 0:
        raise ValueError("coupling must be non-negative")
    rng = np.random.default_rng(seed)
    H_S = linalg.random_hermitian(rng, d_S)
    H_E = linalg.random_hermitian(rng, d_E)
    if diagonal_env:
        H_E = np.diag(np.linalg.eigvalsh(H_E)).astype(complex)
    n = d_S * d_E
    if commuting:
        _, V = np.linalg.eigh(H_E)
        H_SE = np.zeros((n, n), dtype=complex)
        for g in range(d_E):
            S_g = linalg.random_hermitian(rng, d_S)
            H_SE += np.kron(S_g, np.outer(V[:, g], V[:, g].conj()))
    else:
        H_SE = linalg.random_hermitian(rng, n)
    norm = linalg.op_norm_estimate(H_SE)
    if coupling == 0 or norm == 0:
        H_SE = np.zeros((n, n), dtype=complex)
    else:
        H_SE = H_SE * (coupling / norm)
        H_SE = 0.5 * (H_SE + H_SE.conj().T)
    return SystemSpec(d_S, d_E, H_S, H_E, H_SE)


def environment_eigenbasis(spec: SystemSpec) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvectors of ``H_E`` (ascending)."""
    return np.linalg.eigh(spec.H_E)


def to_env_eigenbasis(spec: SystemSpec) -> tuple[SystemSpec, np.ndarray]:
    """Rotate the model so that ``H_E`` is diagonal.

    Returns the rotated spec and ``W = I_S (x) V`` with ``rho_new = W^dag rho W``.
    """
    evals, V = np.linalg.eigh(spec.H_E)
    W = np.kron(np.eye(spec.d_S), V)
    H_SE = W.conj().T @ spec.H_SE @ W
    H_SE = 0.5 * (H_SE + H_SE.conj().T)
    rotated = SystemSpec(spec.d_S, spec.d_E, spec.H_S, np.diag(evals).astype(complex), H_SE,
                         spec.tol)
    return rotated, W


# -- JSON model files ---------------------------------------------------------

def _encode(M) -> list:
    M = np.asarray(M, dtype=complex)
    if M.ndim == 1:
        return [[float(z.real), float(z.imag)] for z in M]
    return [_encode(row) for row in M]


def _decode(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.shape[-1] != 2:
        raise ShapeError("complex arrays must be nested [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def state_to_dict(state: InitialState) -> dict:
    if state.kind == "entangled":
        return {"kind": "entangled", "a": _encode(state.a)}
    out = {"kind": "product", "d": _encode(state.d)}
    if state.c is not None:
        out["c"] = _encode(state.c)
    else:
        out["rho_S"] = _encode(state.rho_S)
    return out


def state_from_dict(data: dict) -> InitialState:
    kind = data.get("kind", "product")
    if kind == "entangled":
        return InitialState.entangled(_decode(data["a"]))
    if kind != "product":
        raise WrongKind(f"unknown initial-state kind {kind!r}")
    d = _decode(data["d"])
    if "c" in data:
        return InitialState.product(_decode(data["c"]), d, strict=bool(data.get("strict", False)))
    return InitialState.product(d=d, rho_S=_decode(data["rho_S"]))


def spec_to_dict(spec: SystemSpec, state: InitialState | None = None) -> dict:
    out = {
        "d_S": spec.d_S,
        "d_E": spec.d_E,
        "H_S": _encode(spec.H_S),
        "H_E": _encode(spec.H_E),
        "H_SE": _encode(spec.H_SE),
    }
    if state is not None:
        out["initial_state"] = state_to_dict(state)
    return out


def spec_from_dict(data: dict) -> tuple[SystemSpec, InitialState | None]:
    try:
        spec = SystemSpec(int(data["d_S"]), int(data["d_E"]), _decode(data["H_S"]),
                          _decode(data["H_E"]), _decode(data["H_SE"]))
    except KeyError as exc:
        raise ShapeError(f"model is missing field {exc.args[0]!r}") from exc
    state = data.get("initial_state")
    return spec, (state_from_dict(state) if state is not None else None)


def save_model(path, spec: SystemSpec, state: InitialState | None = None) -> None:
    # json writes floats with shortest round-trip repr, which is bit-exact
    Path(path).write_text(json.dumps(spec_to_dict(spec, state), indent=1))


def load_model(path) -> tuple[SystemSpec, InitialState | None]:
    return spec_from_dict(json.loads(Path(path).read_text()))
