"""Dense state-vector simulation for small qubit registers.

Basis convention: index 0 of each qubit is the ground state, index 1 the
Rydberg state, and ``SIGMA_Z |1> = +|1>`` so that ``(1 + Z) / 2`` projects
onto the Rydberg level. Qubit 0 is the most significant bit of a basis index,
i.e. the leftmost character of a bitstring.

Units: hbar = 1, angular frequencies in rad/us, times in us.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

MAX_QUBITS = 4
NORM_TOL = 1e-10
HERMITIAN_TOL = 1e-12
STEPPED_DRIFT_TOL = 1e-8

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
# chosen so that X @ Y == 1j * Z holds with the ground-first ordering
SIGMA_Y = np.array([[0, 1j], [-1j, 0]], dtype=complex)
SIGMA_Z = np.array([[-1, 0], [0, 1]], dtype=complex)
RYDBERG_PROJECTOR = np.array([[0, 0], [0, 1]], dtype=complex)


class IntegrationError(RuntimeError):
    """Raised when a stepped integration loses norm beyond tolerance."""


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class StateVector:
    """Normalized amplitudes of an ``n_qubits`` register."""

    n_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        amps = _frozen(self.amplitudes).reshape(-1)
        if amps.size != 2**self.n_qubits:
            raise ValueError(
                f"expected {2**self.n_qubits} amplitudes for {self.n_qubits} qubits, got {amps.size}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def ground(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def basis(cls, bitstring: str) -> "StateVector":
        amps = np.zeros(2 ** len(bitstring), dtype=complex)
        amps[int(bitstring, 2)] = 1.0
        return cls(len(bitstring), amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class HermitianOperator:
    """A dense Hermitian matrix acting on ``dim``-dimensional states."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        mat = _frozen(self.matrix)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"operator must be square, got shape {mat.shape}")
        if not np.allclose(mat, mat.conj().T, rtol=0.0, atol=HERMITIAN_TOL):
            raise ValueError("operator is not Hermitian")
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __add__(self, other: "HermitianOperator") -> "HermitianOperator":
        return HermitianOperator(self.matrix + other.matrix)

    def __sub__(self, other: "HermitianOperator") -> "HermitianOperator":
        return HermitianOperator(self.matrix - other.matrix)

    def __mul__(self, scalar: float) -> "HermitianOperator":
        return HermitianOperator(float(scalar) * self.matrix)

    __rmul__ = __mul__

    def __matmul__(self, other: "HermitianOperator") -> np.ndarray:
        return self.matrix @ other.matrix

    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linalg.eigh(self.matrix)


def embed_single_qubit(op: np.ndarray, site: int, n: int) -> HermitianOperator:
    """Tensor ``op`` onto ``site`` of an ``n``-qubit register, identity elsewhere."""
    if not 0 <= site < n:
        raise IndexError(f"site {site} out of range for {n} qubits")
    op = np.asarray(op, dtype=complex)
    if op.shape != (2, 2):
        raise ValueError("single-qubit operator must be 2x2")
    factors = [np.eye(2, dtype=complex)] * n
    factors = factors[:site] + [op] + factors[site + 1 :]
    return HermitianOperator(reduce(np.kron, factors))


def total_operator(op: np.ndarray, n: int) -> HermitianOperator:
    """Sum of ``op`` embedded on every site."""
    return reduce(lambda a, b: a + b, (embed_single_qubit(op, i, n) for i in range(n)))


def magnetization_operator(n: int) -> HermitianOperator:
    return total_operator(SIGMA_Z, n)


def _check_dims(state: StateVector, H: HermitianOperator):
    if state.dim != H.dim:
        raise ValueError(f"dimension mismatch: state {state.dim}, operator {H.dim}")


def propagator(H: HermitianOperator, duration: float) -> np.ndarray:
    """Unitary ``exp(-i H t)`` from the eigendecomposition of ``H``."""
    if duration < 0:
        raise ValueError(f"duration must be non-negative, got {duration}")
    w, v = H.eigh()
    return (v * np.exp(-1j * w * duration)) @ v.conj().T


def evolve_constant(state: StateVector, H: HermitianOperator, duration: float) -> StateVector:
    _check_dims(state, H)
    if duration == 0:
        return state
    return StateVector(state.n_qubits, propagator(H, duration) @ state.amplitudes)


def evolve_stepped(state: StateVector, hamiltonians: np.ndarray, dt) -> StateVector:
    """Classical RK4 integration of ``i d/dt psi = H(t) psi``.

    Parameters
    ----------
    state : StateVector
        Initial state.
    hamiltonians : array, shape (m + 1, d, d) or (m, 3, d, d)
        Either ``H`` sampled at the step boundaries, with the midpoint of each
        step taken as the average of its two end samples (exact for
        piecewise-linear controls), or explicit ``(start, mid, end)`` samples
        per step, which lets controls jump at step boundaries.
    dt : float or array of shape (m,)
        Step length(s) in us.

    Raises
    ------
    IntegrationError
        If the final norm drifts from one by more than ``1e-8``.
    """
    hs = np.asarray(hamiltonians, dtype=complex)
    d = state.dim
    if hs.ndim == 3 and hs.shape[1:] == (d, d):
        triples = np.stack([hs[:-1], 0.5 * (hs[:-1] + hs[1:]), hs[1:]], axis=1)
    elif hs.ndim == 4 and hs.shape[1:] == (3, d, d):
        triples = hs
    else:
        raise ValueError(f"hamiltonian samples must have shape (m+1, {d}, {d}) or (m, 3, {d}, {d})")
    m = triples.shape[0]
    steps = np.broadcast_to(np.asarray(dt, dtype=float), (m,))
    if np.any(steps <= 0):
        raise ValueError(f"dt must be positive, got {dt}")
    psi = np.array(state.amplitudes)
    for (h0, hm, h1), h in zip(triples, steps):
        k1 = -1j * (h0 @ psi)
        k2 = -1j * (hm @ (psi + 0.5 * h * k1))
        k3 = -1j * (hm @ (psi + 0.5 * h * k2))
        k4 = -1j * (h1 @ (psi + h * k3))
        psi = psi + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    drift = abs(np.linalg.norm(psi) - 1.0)
    if drift > STEPPED_DRIFT_TOL:
        raise IntegrationError(f"norm drift {drift:.2e} exceeds {STEPPED_DRIFT_TOL:.0e}; reduce dt")
    return StateVector(state.n_qubits, psi / np.linalg.norm(psi))


def expectation(state: StateVector, observable: HermitianOperator) -> float:
    _check_dims(state, observable)
    psi = state.amplitudes
    value = np.vdot(psi, observable.matrix @ psi)
    # Hermitian observable: imaginary part is round-off only
    return float(value.real)
