"""Coupled-mode model of the triply resonant chi(2) microring.

Three resonances take part in the sum-frequency process: two telecom-band
modes a and b and one 780-nm-band mode c with omega_c = omega_a + omega_b.
The interaction Hamiltonian is H/hbar = g (a^dag b^dag c + a b c^dag), and
each mode couples bidirectionally to its bus waveguide, which is where the
kappa_e/2 factors below come from.

All dissipation rates and the coupling g are angular rates (rad/s); the
quality-factor conversion is kappa = omega / Q.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

from .errors import InvalidParameter

C_LIGHT = 299792458.0  # m/s, exact
HBAR = 1.054571817e-34  # J*s
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class CavityMode:
    """One resonance: wavelength plus total and external dissipation rates."""

    wavelength: float  # meters
    kappa_total: float  # rad/s
    kappa_external: float  # rad/s
    azimuthal_number: Optional[int] = None

    def __post_init__(self):
        if self.wavelength <= 0:
            raise InvalidParameter(f"wavelength must be positive, got {self.wavelength}")
        if not (0.0 < self.kappa_external <= self.kappa_total):
            raise InvalidParameter(
                f"need 0 < kappa_external <= kappa_total, got "
                f"{self.kappa_external} vs {self.kappa_total}"
            )

    @property
    def omega(self) -> float:
        return TWO_PI * C_LIGHT / self.wavelength

    @property
    def quality_factor(self) -> float:
        return self.omega / self.kappa_total

    @property
    def coupling_fraction(self) -> float:
        return self.kappa_external / self.kappa_total


def mode_from_q(wavelength: float, q_total: float, coupling_fraction: float = 0.5,
                azimuthal_number: Optional[int] = None) -> CavityMode:
    """Build a mode from a loaded quality factor and an external-coupling fraction.

    coupling_fraction = 0.5 corresponds to critical coupling.
    """
    if q_total <= 0:
        raise InvalidParameter(f"quality factor must be positive, got {q_total}")
    if not (0.0 < coupling_fraction <= 1.0):
        raise InvalidParameter(
            f"coupling fraction must lie in (0, 1], got {coupling_fraction}"
        )
    omega = TWO_PI * C_LIGHT / wavelength
    kappa = omega / q_total
    return CavityMode(wavelength, kappa, coupling_fraction * kappa, azimuthal_number)


@dataclass(frozen=True)
class CavityParams:
    """Three phase-matched modes plus the single-photon nonlinear coupling g.

    When ``matching_tolerance`` is given, construction enforces
    |omega_c - omega_a - omega_b| <= tolerance, and, when azimuthal numbers
    are present, m_c = m_a + m_b +/- 2.
    """

    mode_a: CavityMode
    mode_b: CavityMode
    mode_c: CavityMode
    g: float  # rad/s
    matching_tolerance: Optional[float] = None

    def __post_init__(self):
        if self.g < 0:
            raise InvalidParameter(f"nonlinear coupling g must be >= 0, got {self.g}")
        if self.matching_tolerance is not None:
            mism = self.frequency_mismatch
            if abs(mism) > self.matching_tolerance:
                raise InvalidParameter(
                    f"frequency mismatch {mism:.3e} rad/s exceeds tolerance "
                    f"{self.matching_tolerance:.3e}"
                )
            ms = (self.mode_a.azimuthal_number, self.mode_b.azimuthal_number,
                  self.mode_c.azimuthal_number)
            if all(m is not None for m in ms):
                ma, mb, mc = ms
                if mc not in (ma + mb + 2, ma + mb - 2):
                    raise InvalidParameter(
                        f"azimuthal numbers violate m_c = m_a + m_b +/- 2: {ms}"
                    )

    @property
    def frequency_mismatch(self) -> float:
        """omega_c - omega_a - omega_b in rad/s."""
        return self.mode_c.omega - self.mode_a.omega - self.mode_b.omega


@dataclass(frozen=True)
class Detunings:
    """Pump offsets delta_k = omega_k - omega_pk for the two driven modes."""

    delta_a: float = 0.0
    delta_b: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.delta_a) and math.isfinite(self.delta_b)):
            raise InvalidParameter("detunings must be finite")


ZERO_DETUNING = Detunings(0.0, 0.0)


def _drive_amplitude(power: float, omega: float) -> float:
    """Input field amplitude in sqrt(photons/s) for a given optical power."""
    return math.sqrt(power / (HBAR * omega))


def steady_state(params: CavityParams, det: Detunings = ZERO_DETUNING,
                 input_powers: tuple[float, float] = (0.0, 0.0)) -> tuple[complex, complex, complex]:
    """Static cavity amplitudes (a, b, c) under continuous driving of a and b.

    Solves the linearized equations of motion to leading order in g/kappa:
    the driven modes follow the usual one-pole response and the sum mode is
    sourced by the product a*b.  A warning is emitted if the neglected
    back-action of the generated field on the pumps exceeds 10%.
    """
    p_a, p_b = input_powers
    if p_a < 0 or p_b < 0:
        raise InvalidParameter(f"input powers must be >= 0, got {input_powers}")
    ma, mb, mc = params.mode_a, params.mode_b, params.mode_c

    a_in = _drive_amplitude(p_a, ma.omega)
    b_in = _drive_amplitude(p_b, mb.omega)
    a = -1j * math.sqrt(ma.kappa_external / 2.0) * a_in / (1j * det.delta_a + ma.kappa_total / 2.0)
    b = -1j * math.sqrt(mb.kappa_external / 2.0) * b_in / (1j * det.delta_b + mb.kappa_total / 2.0)

    # Sum-mode detuning relative to the driven sum frequency omega_pa + omega_pb.
    delta_c = params.frequency_mismatch + det.delta_a + det.delta_b
    c = 1j * params.g * a * b / (1j * delta_c + mc.kappa_total / 2.0)

    # Pump non-depletion check: |g b c| << (kappa_a/2)|a| and the b analogue.
    for amp, other, conv, mode in ((a, b, c, ma), (b, a, c, mb)):
        if abs(amp) > 0:
            backaction = params.g * abs(other) * abs(conv) / (mode.kappa_total / 2.0 * abs(amp))
            if backaction > 0.1:
                warnings.warn(
                    f"back-action ratio {backaction:.2f} exceeds 0.1; outside the "
                    "weak-conversion regime",
                    stacklevel=2,
                )
    return a, b, c


def intracavity_photon_number(params: CavityParams, power: float, which: str = "a",
                              detuning: float = 0.0) -> float:
    """Steady-state photon number of a driven mode, (kappa_e/2)/(delta^2+(kappa/2)^2) * P/(hbar omega)."""
    mode = {"a": params.mode_a, "b": params.mode_b}[which]
    lorentz = (mode.kappa_external / 2.0) / (detuning**2 + (mode.kappa_total / 2.0) ** 2)
    return lorentz * power / (HBAR * mode.omega)


def sfg_output_power(params: CavityParams, det: Detunings, input_powers: tuple[float, float]) -> float:
    """On-chip sum-frequency output power (kappa_ce/2) hbar omega_c |c|^2."""
    _, _, c = steady_state(params, det, input_powers)
    return (params.mode_c.kappa_external / 2.0) * HBAR * params.mode_c.omega * abs(c) ** 2


def sfg_efficiency(params: CavityParams, det: Detunings = ZERO_DETUNING) -> float:
    """Conversion efficiency P_sfg / (P_a * P_b) in 1/W.

    The three Lorentzian factors carry the pump detunings; the sum mode sees
    the residual offset omega_c - omega_pa - omega_pb.  With both drives on
    resonance and omega_c = omega_a + omega_b this reduces to the closed
    form g^2 * prod_k (kappa_ke/2)/(kappa_k/2)^2 * omega_c/(hbar omega_a omega_b).
    """
    ma, mb, mc = params.mode_a, params.mode_b, params.mode_c
    delta_c = params.frequency_mismatch + det.delta_a + det.delta_b
    lor_a = (ma.kappa_external / 2.0) / (det.delta_a**2 + (ma.kappa_total / 2.0) ** 2)
    lor_b = (mb.kappa_external / 2.0) / (det.delta_b**2 + (mb.kappa_total / 2.0) ** 2)
    lor_c = (mc.kappa_external / 2.0) / (delta_c**2 + (mc.kappa_total / 2.0) ** 2)
    return params.g**2 * lor_a * lor_b * lor_c * mc.omega / (HBAR * ma.omega * mb.omega)


def single_photon_sfg_probability(params: CavityParams, symmetrize: bool = True) -> float:
    """Inherent single-photon conversion probability 4 g^2 / (kappa_ab * kappa_c).

    With ``symmetrize`` the telecom bandwidth is the arithmetic mean of
    kappa_a and kappa_b, which treats the two input modes on equal footing;
    without it the (asymmetric) kappa_a-only form is used.
    """
    ka = params.mode_a.kappa_total
    kb = params.mode_b.kappa_total
    kc = params.mode_c.kappa_total
    k_in = 0.5 * (ka + kb) if symmetrize else ka
    return 4.0 * params.g**2 / (k_in * kc)


def efficiency_probability_relation(params: CavityParams) -> tuple[float, float]:
    """Both sides of the identity linking p_sfg and the classical efficiency.

    Left: 4 g^2 / (kappa_a kappa_c).  Right: eta_sfg (on resonance) scaled by
    the photon-flux conversion factors.  The two must agree for any
    parameters; the pair is returned for assertion.
    """
    ma, mb, mc = params.mode_a, params.mode_b, params.mode_c
    lhs = single_photon_sfg_probability(params, symmetrize=False)
    eta = sfg_efficiency(params, ZERO_DETUNING)
    rhs = (
        eta
        * (ma.kappa_total / 2.0) ** 2 / (ma.kappa_external / 2.0)
        * (mb.kappa_total / 2.0) ** 2 / (mb.kappa_external / 2.0)
        * mc.kappa_total / (ma.kappa_total * mc.kappa_external / 2.0)
        * HBAR * ma.omega * mb.omega / mc.omega
    )
    return lhs, rhs


# ---------------------------------------------------------------------------
# Wavelength bookkeeping for the full heralding chain.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WavelengthSetup:
    """The five wavelengths of the heralded-teleportation chain, in meters."""

    alice: float
    sum: float
    signal: float
    idler: float
    pump: float

    def __post_init__(self):
        for name in ("alice", "sum", "signal", "idler", "pump"):
            if getattr(self, name) <= 0:
                raise InvalidParameter(f"wavelength {name} must be positive")


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class WavelengthReport:
    checks: tuple[ConditionCheck, ...]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {c.name: {"passed": c.passed, "detail": c.detail} for c in self.checks}


# ITU coarse-WDM grid: channel centers at 1271 nm + k * 20 nm.
_CWDM_ANCHOR = 1271.0e-9


def _cwdm_channel(wavelength: float, channel_width: float) -> int:
    return round((wavelength - _CWDM_ANCHOR) / channel_width)


def check_wavelength_conditions(
    setup: WavelengthSetup,
    fsr_ring: float = 11.9e-9,
    fsr_ffp: float = 9.1e-9,
    pump_range: tuple[float, float] = (770.5e-9, 773.5e-9),
    wdm_channel_width: float = 20.0e-9,
    freq_tolerance: float = 5.0e9,
    fsr_fraction_tolerance: float = 0.1,
) -> WavelengthReport:
    """Check the mutual constraints on the five operating wavelengths.

    (a) the signal frequency equals the sum-frequency minus Alice's, and the
        signal sits an integer number of ring free-spectral ranges from
        Alice; (b) the idler sits a nonzero integer number of filter FSRs
        below Alice; (c) energy conservation fixes the pump, which must lie
        in the tunable range; (d) Alice, signal and idler fall in distinct
        coarse-WDM channels.

    Frequency conditions are judged against ``freq_tolerance`` (Hz);
    FSR-multiple conditions against ``fsr_fraction_tolerance`` of one FSR.
    The result is a report, never an exception.
    """
    s = setup
    checks = []

    # (a) signal frequency from the sum-frequency difference
    offset_hz = C_LIGHT * (1.0 / s.signal - (1.0 / s.sum - 1.0 / s.alice))
    checks.append(ConditionCheck(
        "signal_energy_match",
        abs(offset_hz) <= freq_tolerance,
        f"1/ls - (1/lsum - 1/lA) corresponds to {offset_hz/1e9:.3f} GHz",
    ))
    ratio = (s.signal - s.alice) / fsr_ring
    n_ring = round(ratio)
    ring_ok = abs(n_ring) >= 1 and abs(ratio - n_ring) <= fsr_fraction_tolerance
    checks.append(ConditionCheck(
        "ring_fsr_multiple",
        ring_ok,
        f"(ls - lA)/FSR_ring = {ratio:.4f} (nearest integer {n_ring})",
    ))

    # (b) idler on the comb of the fiber filter locked to Alice
    ratio_ffp = (s.alice - s.idler) / fsr_ffp
    m_ffp = round(ratio_ffp)
    ffp_ok = abs(m_ffp) >= 1 and abs(ratio_ffp - m_ffp) <= fsr_fraction_tolerance
    checks.append(ConditionCheck(
        "ffp_fsr_multiple",
        ffp_ok,
        f"(lA - li)/FSR_ffp = {ratio_ffp:.4f} (nearest integer {m_ffp}; 0 disallowed)",
    ))

    # (c) pump energy conservation and tuning range
    pump_offset_hz = C_LIGHT * (1.0 / s.pump - (1.0 / s.signal + 1.0 / s.idler))
    checks.append(ConditionCheck(
        "pump_energy_match",
        abs(pump_offset_hz) <= freq_tolerance,
        f"1/lp - (1/ls + 1/li) corresponds to {pump_offset_hz/1e9:.3f} GHz",
    ))
    lo, hi = pump_range
    checks.append(ConditionCheck(
        "pump_in_range",
        lo <= s.pump <= hi,
        f"pump {s.pump*1e9:.3f} nm vs range [{lo*1e9:.1f}, {hi*1e9:.1f}] nm",
    ))

    # (d) Alice, signal, idler in distinct coarse-WDM channels
    channels = {
        "alice": _cwdm_channel(s.alice, wdm_channel_width),
        "signal": _cwdm_channel(s.signal, wdm_channel_width),
        "idler": _cwdm_channel(s.idler, wdm_channel_width),
    }
    distinct = len(set(channels.values())) == 3
    checks.append(ConditionCheck(
        "wdm_channels_distinct",
        distinct,
        f"CWDM channel indices {channels}",
    ))

    return WavelengthReport(tuple(checks))
