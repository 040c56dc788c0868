"""Closed-form fidelity and rate analytics for heralded teleportation and
entanglement swapping.

All user-facing probabilities are single-pair probabilities p_si; the pump
conversion efficiency eps = (1 - sqrt(1 - 4 p_si))/2 is an internal
variable.  Channel transmissions are linear throughout (decibel conversion
happens at the configuration boundary only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .errors import InvalidParameter
from .sources import epsilon_from_p_si


class LossMode(Enum):
    LOSSLESS = "lossless"
    BALANCED = "balanced"
    UNBALANCED = "unbalanced"


@dataclass(frozen=True)
class SwapScenario:
    """Two pair sources feeding a Bell state measurement through lossy channels."""

    p_a_si: float
    p_b_si: float
    eta: float = 1.0
    loss_mode: LossMode = LossMode.LOSSLESS

    def __post_init__(self):
        for name in ("p_a_si", "p_b_si"):
            p = getattr(self, name)
            if not (0.0 <= p <= 0.25):
                raise InvalidParameter(f"{name} must lie in [0, 0.25], got {p}")
        if not (0.0 < self.eta <= 1.0):
            raise InvalidParameter(f"eta must lie in (0, 1], got {self.eta}")


@dataclass(frozen=True)
class SystemEfficiencies:
    """Transmissions and detector efficiencies of the heralding chain."""

    t_alice: float
    t_signal: float
    t_idler: float
    t_sum: float
    eta_idler: float
    eta_sum: float
    p_si: float
    p_sfg: float

    def __post_init__(self):
        for name in ("t_alice", "t_signal", "t_idler", "t_sum", "eta_idler", "eta_sum", "p_sfg"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise InvalidParameter(f"{name} must lie in [0, 1], got {v}")
        if not (0.0 <= self.p_si <= 0.25):
            raise InvalidParameter(f"p_si must lie in [0, 0.25], got {self.p_si}")


def _check_p(p: float, name: str = "p_si", allow_zero: bool = True) -> None:
    lo_ok = p >= 0.0 if allow_zero else p > 0.0
    if not (lo_ok and p <= 0.25 and math.isfinite(p)):
        rng = "[0, 0.25]" if allow_zero else "(0, 0.25]"
        raise InvalidParameter(f"{name} must lie in {rng}, got {p}")


def teleport_fidelity_nlo(p_si: float) -> float:
    """Non-postselected teleportation fidelity ((1 + sqrt(1 - 4 p_si))/2)^2.

    Heralding by frequency conversion removes same-source multiphoton
    contributions, so the result does not depend on Alice's photon number;
    only the multi-pair statistics of the entanglement source enter.
    """
    _check_p(p_si)
    return ((1.0 + math.sqrt(1.0 - 4.0 * p_si)) / 2.0) ** 2


def teleport_fidelity_from_epsilon(epsilon: float) -> float:
    """The same fidelity in terms of the pump conversion efficiency: (1 - eps)^2."""
    if not (0.0 <= epsilon <= 0.5):
        raise InvalidParameter(f"epsilon must lie in [0, 0.5], got {epsilon}")
    return (1.0 - epsilon) ** 2


def find_classical_crossover(threshold: float = 2.0 / 3.0, tol: float = 1e-12) -> float:
    """p_si at which the teleportation fidelity crosses the given threshold.

    Bisection on [0, 0.25]; the fidelity is strictly decreasing there.
    """
    f = lambda p: teleport_fidelity_nlo(p) - threshold
    lo, hi = 0.0, 0.25
    if f(lo) < 0 or f(hi) > 0:
        raise InvalidParameter(f"threshold {threshold} not bracketed on [0, 0.25]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Entanglement swapping with a linear-optical Bell state measurement.
# ---------------------------------------------------------------------------

def swap_fidelity_lo_leading(p_a: float, p_b: float) -> float:
    """Leading-order two-photon estimate p_a p_b / (p_a p_b + p_a^2 + p_b^2).

    Bounded by 1/3, with equality exactly at p_a = p_b: double-pair
    emissions from either source alone produce indistinguishable false
    heralds at the same order as the true coincidence.
    """
    _check_p(p_a, "p_a", allow_zero=False)
    _check_p(p_b, "p_b", allow_zero=False)
    return p_a * p_b / (p_a * p_b + p_a**2 + p_b**2)


def _lo_balanced_full(eps_a: float, eps_b: float, eta: float) -> float:
    """Exact herald-ratio for the two-surviving-photon classification.

    Denominator terms correspond to both photons from source A, one from
    each source, and both from source B, summed over all emission numbers.
    """
    da = 1.0 - eps_a * (1.0 - eta)
    db = 1.0 - eps_b * (1.0 - eta)
    denom = (
        eps_a**2 / da**3 / db
        + (eps_a / da**2) * (eps_b / db**2)
        + eps_b**2 / db**3 / da
    )
    return eps_a * eps_b / denom


def swap_fidelity_lo_balanced(p_si: float, eta: float) -> float:
    """Swap fidelity with equal loss eta on both measurement inputs.

    Evaluates the full three-term expression at eps_A = eps_B = eps(p_si);
    the eta -> 0 limit is (1/3) ((1 + sqrt(1 - 4 p_si))/2)^4 and the
    lossless limit eta = 1 recovers the leading-order bound of 1/3.
    """
    _check_p(p_si, allow_zero=False)
    if not (0.0 < eta <= 1.0):
        raise InvalidParameter(f"eta must lie in (0, 1], got {eta}")
    eps = epsilon_from_p_si(p_si)
    return _lo_balanced_full(eps, eps, eta)


def swap_fidelity_lo_unbalanced_at(p_b: float, eta: float, epsilon_a: float) -> float:
    """Unbalanced-loss swap fidelity at an arbitrary attenuation eps_A.

    Source A feeds the measurement losslessly, source B through transmission
    eta.  Heralds are two-surviving-photon events; the exact ratio is
    eta eps_A eps_B / (eta^2 eps_B^2/D^3 + eta eps_A eps_B/D^2 + eps_A^2/D)
    with D = 1 - eps_B (1 - eta).
    """
    _check_p(p_b, "p_b", allow_zero=False)
    if not (0.0 < eta < 1.0):
        raise InvalidParameter(f"eta must lie in (0, 1), got {eta}")
    if not (0.0 < epsilon_a < 1.0):
        raise InvalidParameter(f"epsilon_a must lie in (0, 1), got {epsilon_a}")
    eps_b = epsilon_from_p_si(p_b)
    d = 1.0 - eps_b * (1.0 - eta)
    denom = eta**2 * eps_b**2 / d**3 + eta * epsilon_a * eps_b / d**2 + epsilon_a**2 / d
    return eta * epsilon_a * eps_b / denom


def swap_fidelity_lo_unbalanced(p_b: float, eta: float) -> tuple[float, float]:
    """Optimal unbalanced-loss swap fidelity and the attenuation achieving it.

    Maximizing over eps_A gives eps_A* = eta eps_B / D and fidelity
    (1/3) D^2, D = 1 - eps_B (1 - eta); for eta -> 0 this is
    (1/3) ((1 + sqrt(1 - 4 p_b))/2)^2.  Matching the lossless source to the
    received flux of the lossy one costs rate but restores the 1/3-scaled
    single-source fidelity.
    """
    _check_p(p_b, "p_b", allow_zero=False)
    if not (0.0 < eta < 1.0):
        raise InvalidParameter(f"eta must lie in (0, 1), got {eta}")
    eps_b = epsilon_from_p_si(p_b)
    d = 1.0 - eps_b * (1.0 - eta)
    eps_a_opt = eta * eps_b / d
    fidelity = d**2 / 3.0
    return fidelity, eps_a_opt


# ---------------------------------------------------------------------------
# Entanglement swapping with the nonlinear Bell state measurement.
# ---------------------------------------------------------------------------

def swap_fidelity_nlo(p_a: float, p_b: float, eta: float = 1.0,
                      loss_mode: LossMode = LossMode.LOSSLESS) -> float:
    """Swap fidelity with conversion-based heralding: the product form
    ((1+sqrt(1-4 p_a))/2)^2 ((1+sqrt(1-4 p_b))/2)^2.

    Because the conversion weight scales with the product of surviving
    photon numbers, channel loss rescales desired and undesired heralds
    identically and the fidelity is the same for lossless, balanced and
    unbalanced channels.  ``eta`` and ``loss_mode`` are accepted for
    interface symmetry with the linear-optical forms; the single-survivor
    herald approximation they select is exposed separately in
    :func:`swap_fidelity_nlo_filtered`.
    """
    _check_p(p_a, "p_a")
    _check_p(p_b, "p_b")
    if not (0.0 < eta <= 1.0):
        raise InvalidParameter(f"eta must lie in (0, 1], got {eta}")
    fa = ((1.0 + math.sqrt(1.0 - 4.0 * p_a)) / 2.0) ** 2
    fb = ((1.0 + math.sqrt(1.0 - 4.0 * p_b)) / 2.0) ** 2
    return fa * fb


def swap_fidelity_nlo_filtered(p_a: float, p_b: float, eta: float,
                               loss_mode: LossMode) -> float:
    """Loss-corrected conversion-herald fidelity in the single-survivor model.

    Restricting heralds to exactly one surviving photon per lossy input
    gives (1 - eps (1 - eta))^2 per lossy channel and (1 - eps)^2 per
    lossless one; for eta << 1 both reduce to the product form.  The gap to
    :func:`swap_fidelity_nlo` quantifies that truncation.
    """
    _check_p(p_a, "p_a")
    _check_p(p_b, "p_b")
    if not (0.0 < eta <= 1.0):
        raise InvalidParameter(f"eta must lie in (0, 1], got {eta}")
    eps_a = epsilon_from_p_si(p_a)
    eps_b = epsilon_from_p_si(p_b)
    if loss_mode is LossMode.LOSSLESS:
        return (1.0 - eps_a) ** 2 * (1.0 - eps_b) ** 2
    if loss_mode is LossMode.BALANCED:
        return (1.0 - eps_a * (1.0 - eta)) ** 2 * (1.0 - eps_b * (1.0 - eta)) ** 2
    if loss_mode is LossMode.UNBALANCED:
        return (1.0 - eps_a) ** 2 * (1.0 - eps_b * (1.0 - eta)) ** 2
    raise InvalidParameter(f"unknown loss mode {loss_mode!r}")


def entanglement_rates(p_b: float, eta: float, p_sfg: float, clock: float) -> tuple[float, float]:
    """Entanglement rates (per second) for the two measurement strategies.

    The linear-optical rate assumes the lossless source is attenuated to
    p_a = eta p_b for optimal fidelity, giving eta^2 p_b^2 R_c; the
    conversion-based measurement can run both sources at p_b, giving
    p_sfg eta p_b^2 R_c.  The two cross exactly at p_sfg = eta.
    """
    _check_p(p_b, "p_b")
    if not (0.0 < eta <= 1.0):
        raise InvalidParameter(f"eta must lie in (0, 1], got {eta}")
    if not (0.0 <= p_sfg <= 1.0):
        raise InvalidParameter(f"p_sfg must lie in [0, 1], got {p_sfg}")
    if clock <= 0:
        raise InvalidParameter(f"clock must be positive, got {clock}")
    base = p_b * p_b * clock
    r_lo = (eta * eta) * base
    r_nlo = (p_sfg * eta) * base
    return r_lo, r_nlo


# ---------------------------------------------------------------------------
# System-level estimated fidelity of the heralded teleportation.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EstimatedFidelity:
    """Closed-form fidelity estimates plus the underlying event weights.

    Event probabilities are quoted per unit Alice photon number (the common
    factor cancels in every ratio).  ``coherent_fraction`` is the share of
    heralded coincidences in which the detected idler is the partner of the
    converted signal photon.
    """

    f_superposition: float
    f_poles: float
    events: dict
    coherent_fraction: float


def teleport_event_table(sys: SystemEfficiencies) -> dict:
    """Probabilities of the coincidence-generating events with up to two pairs.

    Keys encode (transmitted signal photons, detected idler photons); the
    primed entry is the two-pair event in which one photon of each kind is
    lost.  All carry the common factor p_sfg * t_sum * eta_sum / 4 and one
    power of Alice's photon number.
    """
    p = sys.p_si
    ts = sys.t_signal
    u = sys.t_idler * sys.eta_idler
    common = 0.25 * sys.p_sfg * sys.t_sum * sys.eta_sum
    return {
        "one_signal_one_idler": common * p * ts * u,
        "two_signal_one_idler": common * p**2 * 4.0 * ts**2 * u * (1.0 - u),
        "one_signal_two_idler": common * p**2 * 2.0 * ts * (1.0 - ts) * u**2,
        "two_signal_two_idler": common * p**2 * 2.0 * ts**2 * u**2,
        "one_signal_one_idler_from_two": common * p**2 * 4.0 * ts * (1.0 - ts) * u * (1.0 - u),
    }


def estimated_teleport_fidelity(sys: SystemEfficiencies) -> EstimatedFidelity:
    """System-level fidelity estimates for superposition and pole input states.

    With u = t_idler * eta_idler:

        F_superposition = (1 + 2 p_si) / (1 + 2 p_si (2 - u))
        F_poles         = (1 + p_si (3 - u)) / (1 + 2 p_si (2 - u))

    Two-pair events in which the detected idler is not the partner of the
    converted signal count half for superposition inputs; pole inputs pick
    up an extra quarter because an unpaired idler still lands in the correct
    time bin half of the time.  Detection efficiencies of the heralding arm
    cancel; only the idler arm survives in the ratios.
    """
    p = sys.p_si
    u = sys.t_idler * sys.eta_idler
    denom = 1.0 + 2.0 * p * (2.0 - u)
    f_sup = (1.0 + 2.0 * p) / denom
    f_pol = (1.0 + p * (3.0 - u)) / denom
    events = teleport_event_table(sys)
    total = sum(events.values())
    coherent = (
        events["one_signal_one_idler"]
        + 0.5 * events["two_signal_one_idler"]
        + events["one_signal_two_idler"]
        + events["two_signal_two_idler"]
        + 0.5 * events["one_signal_one_idler_from_two"]
    )
    frac = coherent / total if total > 0 else 1.0
    return EstimatedFidelity(f_sup, f_pol, events, frac)


def fidelity_from_visibility(v: float) -> float:
    """Average teleportation fidelity implied by a fringe visibility: (1 + V)/2."""
    if not (0.0 <= v <= 1.0):
        raise InvalidParameter(f"visibility must lie in [0, 1], got {v}")
    return 0.5 * (1.0 + v)
