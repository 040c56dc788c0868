"""Models of the nonlinear Bell state measurement.

A single sum-frequency element converts the two same-bin Bell components
into one photon at the sum frequency.  Projecting that photon onto
(|e> +/- e^{i phi}|l>)/sqrt(2) heralds teleportation of the idler up to a
known Pauli rotation; adding a second element that converts cross-bin
components completes the analyzer to all four Bell states.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .errors import InvalidParameter
from .qubits import (
    BellLabel,
    PauliCorrection,
    TimeBinQubit,
    apply_correction,
    bell_decompose,
)


class SfgDetector(Enum):
    SIGMA1_PLUS = "sigma1+"
    SIGMA1_MINUS = "sigma1-"
    SIGMA2_PLUS = "sigma2+"
    SIGMA2_MINUS = "sigma2-"
    NO_CLICK = "no_click"


@dataclass(frozen=True)
class SfgOutcome:
    """One heralding outcome; the no-click outcome carries no phase."""

    detector: SfgDetector
    phase_sigma: Optional[float] = None

    def __post_init__(self):
        if self.detector is SfgDetector.NO_CLICK and self.phase_sigma is not None:
            raise InvalidParameter("a no-click outcome carries no projection phase")


class VisibilityComposition(Enum):
    PRODUCT = "product"
    MIN = "min"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class InterferometerBank:
    """Phases and fringe visibilities of the three analysis interferometers.

    The composition of the individual visibilities into the effective fringe
    contrast is not uniquely determined by independent characterization, so
    it is a configuration choice: the product of the three (independent
    contrast model), their minimum, or an explicitly measured value.
    """

    phi_alice: float = 0.0
    phi_sigma: float = 0.0
    phi_bob: float = 0.0
    v_alice: float = 1.0
    v_sigma: float = 1.0
    v_bob: float = 1.0
    v_explicit: Optional[float] = None
    composition: VisibilityComposition = VisibilityComposition.PRODUCT

    def __post_init__(self):
        for name in ("v_alice", "v_sigma", "v_bob"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise InvalidParameter(f"visibility {name} must lie in [0, 1], got {v}")
        if self.v_explicit is not None and not (0.0 <= self.v_explicit <= 1.0):
            raise InvalidParameter(f"explicit visibility must lie in [0, 1], got {self.v_explicit}")

    def effective_visibility(self) -> float:
        if self.composition is VisibilityComposition.EXPLICIT:
            if self.v_explicit is None:
                raise InvalidParameter("explicit composition requires v_explicit")
            return self.v_explicit
        if self.composition is VisibilityComposition.MIN:
            return min(self.v_alice, self.v_sigma, self.v_bob)
        return self.v_alice * self.v_sigma * self.v_bob


IDEAL_INTERFEROMETERS = InterferometerBank()


def nlo_herald(alice: TimeBinQubit, phi_sigma: float = 0.0) -> list[tuple[SfgOutcome, float, Optional[TimeBinQubit]]]:
    """Heralding outcomes of the single-element analyzer.

    Conditional on successful conversion, the two same-bin Bell components
    are resolved with probability 1/4 each; the cross-bin half of the weight
    goes unconverted and is reported as the no-click outcome.  The projection
    phase phi_sigma is imprinted on the conditional idler as a relative
    phase e^{-i phi_sigma} on its late amplitude.
    """
    a, b = alice.alpha, alice.beta
    rot = cmath.exp(-1j * phi_sigma)
    psi_plus = TimeBinQubit(a, b * rot)
    psi_minus = TimeBinQubit(a, -b * rot)
    return [
        (SfgOutcome(SfgDetector.SIGMA1_PLUS, phi_sigma), 0.25, psi_plus),
        (SfgOutcome(SfgDetector.SIGMA1_MINUS, phi_sigma), 0.25, psi_minus),
        (SfgOutcome(SfgDetector.NO_CLICK), 0.5, None),
    ]


def fringe_coincidences(n0: float, bank: InterferometerBank, port: int) -> float:
    """Coincidence counts N0 (1 +/- V_eff cos(phi_A - phi_Sigma - phi_B)).

    ``port`` selects the sign: +1 for the constructive output, -1 for the
    destructive one.  With unit visibilities the ideal fringe is recovered.
    """
    if n0 < 0:
        raise InvalidParameter(f"n0 must be >= 0, got {n0}")
    if port not in (+1, -1):
        raise InvalidParameter(f"port must be +1 or -1, got {port}")
    v_eff = bank.effective_visibility()
    phase = bank.phi_alice - bank.phi_sigma - bank.phi_bob
    return n0 * (1.0 + port * v_eff * math.cos(phase))


_BSA_TABLE = {
    BellLabel.PHI_PLUS: (SfgDetector.SIGMA1_PLUS, PauliCorrection.IDENTITY),
    BellLabel.PHI_MINUS: (SfgDetector.SIGMA1_MINUS, PauliCorrection.Z),
    BellLabel.PSI_PLUS: (SfgDetector.SIGMA2_PLUS, PauliCorrection.X),
    BellLabel.PSI_MINUS: (SfgDetector.SIGMA2_MINUS, PauliCorrection.XZ),
}


def complete_bsa_map(label: BellLabel) -> tuple[SfgDetector, PauliCorrection]:
    """Detector and recovery operation for each Bell outcome of the two-element analyzer."""
    return _BSA_TABLE[label]


class BsaScheme(Enum):
    """Routing variants of the two-element analyzer.

    Beamsplitter routing costs a flat factor of two on the cross-bin
    heralds; optical switches make the routing lossless.  Only the herald
    bookkeeping differs; the logical outcome map is identical.
    """

    SWITCH = "switch"
    BEAMSPLITTER = "beamsplitter"


@dataclass(frozen=True)
class TeleportBranch:
    label: BellLabel
    detector: SfgDetector
    probability: float
    corrected_state: TimeBinQubit


def complete_teleport(alice: TimeBinQubit, scheme: BsaScheme = BsaScheme.SWITCH) -> list[TeleportBranch]:
    """All four heralded branches with the Pauli recovery already applied.

    Each branch occurs with probability 1/4 (switch scheme); the corrected
    idler state equals Alice's input up to global phase on every branch.
    With beamsplitter routing the two cross-bin branches are reweighted by
    1/2 and the missing weight shows up as reduced herald efficiency.
    """
    psi_weight = 1.0 if scheme is BsaScheme.SWITCH else 0.5
    branches = []
    for label, conditional, amplitude in bell_decompose(alice):
        detector, correction = complete_bsa_map(label)
        prob = amplitude**2
        if label in (BellLabel.PSI_PLUS, BellLabel.PSI_MINUS):
            prob *= psi_weight
        branches.append(TeleportBranch(
            label=label,
            detector=detector,
            probability=prob,
            corrected_state=apply_correction(conditional, correction),
        ))
    return branches
