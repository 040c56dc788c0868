"""Photon-number statistics of the pair source and of Alice's input field.

A continuous-wave-pumped down-conversion source emits photon pairs with
thermal (geometric) number statistics P(n) = (1 - eps) * eps^n, where eps is
the pump conversion efficiency.  The single-pair probability per gate is
p_si = (1 - eps) * eps <= 1/4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidParameter

# Default truncation for analytic number sums; geometric tails decay fast for
# every experimentally relevant eps.
DEFAULT_N_MAX = 64


@dataclass(frozen=True)
class PairSource:
    """Down-conversion pair source with pump conversion efficiency eps in [0, 1)."""

    epsilon: float

    def __post_init__(self):
        if not (0.0 <= self.epsilon < 1.0) or not math.isfinite(self.epsilon):
            raise InvalidParameter(f"epsilon must lie in [0, 1), got {self.epsilon}")

    @property
    def p_si(self) -> float:
        """Single-pair probability (1 - eps) * eps, at most 1/4."""
        return (1.0 - self.epsilon) * self.epsilon

    @classmethod
    def from_p_si(cls, p_si: float) -> "PairSource":
        return cls(epsilon_from_p_si(p_si))


@dataclass(frozen=True)
class AliceSource:
    """Alice's input field, characterized by its mean photon number.

    The heralding weight only ever depends on sum_m |c_m|^2 * m, so a mean
    photon number is a complete description.  Explicit Fock amplitudes may be
    attached for arbitrary pure states; they must be normalized and
    consistent with the stated mean.
    """

    mean_photon_number: float
    amplitudes: Optional[tuple[complex, ...]] = None

    def __post_init__(self):
        if self.mean_photon_number < 0 or not math.isfinite(self.mean_photon_number):
            raise InvalidParameter(
                f"mean photon number must be >= 0, got {self.mean_photon_number}"
            )
        if self.amplitudes is not None:
            amps = tuple(complex(c) for c in self.amplitudes)
            object.__setattr__(self, "amplitudes", amps)
            probs = np.abs(np.asarray(amps)) ** 2
            if abs(probs.sum() - 1.0) > 1e-10:
                raise InvalidParameter(f"Fock amplitudes not normalized: sum {probs.sum()}")
            mean = float((probs * np.arange(len(amps))).sum())
            if abs(mean - self.mean_photon_number) > 1e-10:
                raise InvalidParameter(
                    f"mean photon number {self.mean_photon_number} inconsistent "
                    f"with amplitudes (implied {mean})"
                )

    @classmethod
    def from_amplitudes(cls, amplitudes: Sequence[complex]) -> "AliceSource":
        probs = np.abs(np.asarray(amplitudes, dtype=complex)) ** 2
        mean = float((probs * np.arange(len(probs))).sum())
        return cls(mean, tuple(complex(c) for c in amplitudes))


def spdc_distribution(source: PairSource, n_max: int = DEFAULT_N_MAX) -> tuple[np.ndarray, float]:
    """Pair-number probabilities P(0..n_max) and the truncated tail mass.

    P(n) = (1 - eps) * eps^n; the tail beyond n_max carries probability
    eps^(n_max + 1), so the returned entries sum to 1 - tail.
    """
    if n_max < 0:
        raise InvalidParameter(f"n_max must be >= 0, got {n_max}")
    eps = source.epsilon
    if eps >= 1.0:
        raise InvalidParameter(f"epsilon must be < 1, got {eps}")
    n = np.arange(n_max + 1)
    probs = (1.0 - eps) * eps**n
    tail = eps ** (n_max + 1)
    return probs, float(tail)


def p_si_from_epsilon(epsilon: float) -> float:
    if not (0.0 <= epsilon < 1.0):
        raise InvalidParameter(f"epsilon must lie in [0, 1), got {epsilon}")
    return (1.0 - epsilon) * epsilon


def epsilon_from_p_si(p_si: float) -> float:
    """Invert p_si = (1 - eps) * eps on the weak-pump branch eps in [0, 1/2].

    The lower root is the physical one for any source driven below the
    p_si = 1/4 ceiling.
    """
    if not (0.0 <= p_si <= 0.25) or not math.isfinite(p_si):
        raise InvalidParameter(
            f"p_si must lie in [0, 0.25] (pair probability ceiling), got {p_si}"
        )
    return 0.5 * (1.0 - math.sqrt(1.0 - 4.0 * p_si))


def alice_event_weight(alice: AliceSource, p_sfg: float, epsilon: float) -> float:
    """Per-pair heralding weight Gamma = p_sfg * (1 - eps) * <m>_alice.

    For a coherent-state Alice, <m> is just the mean photon number; the
    weight is linear in both the conversion probability and the photon
    number.
    """
    if not (0.0 <= p_sfg <= 1.0):
        raise InvalidParameter(f"p_sfg must lie in [0, 1], got {p_sfg}")
    if not (0.0 <= epsilon < 1.0):
        raise InvalidParameter(f"epsilon must lie in [0, 1), got {epsilon}")
    return p_sfg * (1.0 - epsilon) * alice.mean_photon_number
