"""Time-bin qubit algebra and two-level density-matrix primitives.

A time-bin qubit lives in the span of an early (|e>) and a late (|l>)
temporal mode.  Everything in this module is an immutable value type, so
instances can be shared freely between threads.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from .errors import InvalidDensityMatrix, InvalidState

# Tolerances: exact complex algebra vs. eigenvalue positivity headroom.
ATOL_ALGEBRA = 1e-12
ATOL_EIGEN = 1e-10

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_3 = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_0, SIGMA_1, SIGMA_2, SIGMA_3)


class BellLabel(Enum):
    """The four Bell states, in a fixed iteration order."""

    PHI_PLUS = 0
    PHI_MINUS = 1
    PSI_PLUS = 2
    PSI_MINUS = 3


class PauliCorrection(Enum):
    """Single-qubit recovery operations, modulo global phase."""

    IDENTITY = "I"
    Z = "Z"
    X = "X"
    XZ = "XZ"


# Composition table modulo phase: the group {I, X, Z, XZ}.
_COMPOSE = {
    (PauliCorrection.IDENTITY, PauliCorrection.IDENTITY): PauliCorrection.IDENTITY,
    (PauliCorrection.IDENTITY, PauliCorrection.Z): PauliCorrection.Z,
    (PauliCorrection.IDENTITY, PauliCorrection.X): PauliCorrection.X,
    (PauliCorrection.IDENTITY, PauliCorrection.XZ): PauliCorrection.XZ,
    (PauliCorrection.Z, PauliCorrection.Z): PauliCorrection.IDENTITY,
    (PauliCorrection.Z, PauliCorrection.X): PauliCorrection.XZ,
    (PauliCorrection.Z, PauliCorrection.XZ): PauliCorrection.X,
    (PauliCorrection.X, PauliCorrection.Z): PauliCorrection.XZ,
    (PauliCorrection.X, PauliCorrection.X): PauliCorrection.IDENTITY,
    (PauliCorrection.X, PauliCorrection.XZ): PauliCorrection.Z,
    (PauliCorrection.XZ, PauliCorrection.Z): PauliCorrection.X,
    (PauliCorrection.XZ, PauliCorrection.X): PauliCorrection.Z,
    (PauliCorrection.XZ, PauliCorrection.XZ): PauliCorrection.IDENTITY,
}


def compose_corrections(first: PauliCorrection, second: PauliCorrection) -> PauliCorrection:
    """Composition ``second after first``, modulo global phase."""
    key = (second, first)
    if key in _COMPOSE:
        return _COMPOSE[key]
    return _COMPOSE[(first, second)]


@dataclass(frozen=True)
class TimeBinQubit:
    """Normalized pure state alpha|e> + beta|l>.

    Global phase is kept as supplied; equality of physical states should be
    tested with :meth:`same_ray`, not ``==``.
    """

    alpha: complex
    beta: complex

    def __post_init__(self):
        norm2 = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if not math.isfinite(norm2) or abs(norm2 - 1.0) > ATOL_ALGEBRA:
            raise InvalidState(
                f"amplitudes must be normalized, got |alpha|^2+|beta|^2 = {norm2!r}"
            )

    def ket(self) -> np.ndarray:
        return np.array([self.alpha, self.beta], dtype=complex)

    def projector(self) -> "DensityMatrix2":
        k = self.ket()
        return DensityMatrix2(np.outer(k, k.conj()))

    def overlap(self, other: "TimeBinQubit") -> complex:
        """Inner product <self|other>."""
        return complex(np.vdot(self.ket(), other.ket()))

    def fidelity_to(self, other: "TimeBinQubit") -> float:
        return abs(self.overlap(other)) ** 2

    def same_ray(self, other: "TimeBinQubit", tol: float = 1e-10) -> bool:
        """Ray equality: |<self|other>|^2 > 1 - tol."""
        return self.fidelity_to(other) > 1.0 - tol


def make_qubit(alpha: complex, beta: complex) -> TimeBinQubit:
    """Build a normalized time-bin qubit from unnormalized amplitudes.

    The direction in Hilbert space (including relative and global phase) is
    preserved; only the length is rescaled to one.
    """
    alpha = complex(alpha)
    beta = complex(beta)
    norm = math.hypot(abs(alpha), abs(beta))
    if norm == 0.0 or not math.isfinite(norm):
        raise InvalidState("cannot normalize the zero vector")
    return TimeBinQubit(alpha / norm, beta / norm)


# Cardinal states on the Bloch sphere, in the time-bin basis.
EARLY = TimeBinQubit(1, 0)
LATE = TimeBinQubit(0, 1)
PLUS = make_qubit(1, 1)
MINUS = make_qubit(1, -1)
LEFT = make_qubit(1, 1j)
RIGHT = make_qubit(1, -1j)

CARDINAL_STATES = {
    "e": EARLY,
    "l": LATE,
    "+": PLUS,
    "-": MINUS,
    "L": LEFT,
    "R": RIGHT,
}


@dataclass(frozen=True)
class DensityMatrix2:
    """Physical 2x2 density matrix over {|e>, |l>}.

    Construction validates hermiticity and unit trace to 1e-12 and rejects
    eigenvalues below -1e-10.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise InvalidDensityMatrix(f"expected a 2x2 matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m.view(float))):
            raise InvalidDensityMatrix("matrix entries must be finite")
        if np.max(np.abs(m - m.conj().T)) > ATOL_ALGEBRA:
            raise InvalidDensityMatrix("matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > ATOL_ALGEBRA or abs(np.trace(m).imag) > ATOL_ALGEBRA:
            raise InvalidDensityMatrix(f"trace must be 1, got {np.trace(m)}")
        evals = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        if evals.min() < -ATOL_EIGEN:
            raise InvalidDensityMatrix(f"negative eigenvalue {evals.min():.3e}")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_bloch(cls, r1: float, r2: float, r3: float) -> "DensityMatrix2":
        m = 0.5 * (SIGMA_0 + r1 * SIGMA_1 + r2 * SIGMA_2 + r3 * SIGMA_3)
        return cls(m)

    @classmethod
    def maximally_mixed(cls) -> "DensityMatrix2":
        return cls(0.5 * np.eye(2, dtype=complex))

    def bloch(self) -> tuple[float, float, float]:
        m = self.matrix
        return (
            float(np.trace(m @ SIGMA_1).real),
            float(np.trace(m @ SIGMA_2).real),
            float(np.trace(m @ SIGMA_3).real),
        )

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def _as_matrix(rho: Union[DensityMatrix2, np.ndarray]) -> np.ndarray:
    """Accept either a validated density matrix or a raw array (re-validated)."""
    if isinstance(rho, DensityMatrix2):
        return rho.matrix
    return DensityMatrix2(np.asarray(rho, dtype=complex)).matrix


def fidelity_pure(rho: Union[DensityMatrix2, np.ndarray], target: TimeBinQubit) -> float:
    """Fidelity <psi|rho|psi> of a state against a pure target, clamped to [0, 1]."""
    m = _as_matrix(rho)
    k = target.ket()
    val = np.vdot(k, m @ k)
    if abs(val.imag) > ATOL_ALGEBRA:
        raise InvalidDensityMatrix(f"fidelity has imaginary part {val.imag:.3e}")
    return float(min(1.0, max(0.0, val.real)))


def purity(rho: Union[DensityMatrix2, np.ndarray]) -> float:
    """Tr(rho^2); 0.5 for the maximally mixed qubit, 1 for any pure state."""
    m = _as_matrix(rho)
    return float(np.trace(m @ m).real)


def trace_distance(a: Union[DensityMatrix2, np.ndarray], b: Union[DensityMatrix2, np.ndarray]) -> float:
    """(1/2)||a - b||_1 for Hermitian a, b."""
    ma = a.matrix if isinstance(a, DensityMatrix2) else np.asarray(a, dtype=complex)
    mb = b.matrix if isinstance(b, DensityMatrix2) else np.asarray(b, dtype=complex)
    return float(0.5 * np.abs(np.linalg.eigvalsh(ma - mb)).sum())


def bell_decompose(alice: TimeBinQubit) -> list[tuple[BellLabel, TimeBinQubit, float]]:
    """Decompose (alpha|e> + beta|l>) (x) |Phi+> over the Bell basis of the
    first two photons.

    Each of the four branches carries amplitude 1/2; the third entry of each
    tuple is that amplitude.  The conditional idler states follow the sign
    convention in which the Psi- branch carries the minus sign on its |e>
    amplitude.
    """
    a, b = alice.alpha, alice.beta
    return [
        (BellLabel.PHI_PLUS, TimeBinQubit(a, b), 0.5),
        (BellLabel.PHI_MINUS, TimeBinQubit(a, -b), 0.5),
        (BellLabel.PSI_PLUS, TimeBinQubit(b, a), 0.5),
        (BellLabel.PSI_MINUS, TimeBinQubit(-b, a), 0.5),
    ]


def apply_correction(q: TimeBinQubit, c: PauliCorrection) -> TimeBinQubit:
    """Apply a Pauli recovery operation to a time-bin qubit."""
    a, b = q.alpha, q.beta
    if c is PauliCorrection.IDENTITY:
        return TimeBinQubit(a, b)
    if c is PauliCorrection.Z:
        return TimeBinQubit(a, -b)
    if c is PauliCorrection.X:
        return TimeBinQubit(b, a)
    if c is PauliCorrection.XZ:
        return TimeBinQubit(-b, a)
    raise ValueError(f"unknown correction {c!r}")


def phase_state(phi: float) -> TimeBinQubit:
    """Equatorial state (|e> + e^{i phi}|l>)/sqrt(2)."""
    return TimeBinQubit(1 / math.sqrt(2), cmath.exp(1j * phi) / math.sqrt(2))
