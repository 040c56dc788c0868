"""Scenario configuration: TOML parsing, unit conversion, canonical digests.

All unit conversion happens here, once: losses and transmissions may be
written either as linear factors or as strings with an explicit decibel
suffix ("17 dB" means 10^(-1.7)); wavelengths are nanometers in the file
and meters in memory; rates are hertz everywhere.
"""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import dataclass
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .bsm import InterferometerBank, VisibilityComposition
from .cavity import CavityParams, WavelengthSetup, mode_from_q
from .errors import ConfigError
from .montecarlo import ScenarioConfig
from .sources import AliceSource, PairSource, epsilon_from_p_si

TOOL_VERSION = "0.1.0"
TWO_PI = 2.0 * math.pi


def _as_transmission(value: Any, where: str) -> float:
    """Accept a linear factor or an explicit '<x> dB' attenuation string."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        v = float(value)
        if not (0.0 <= v <= 1.0):
            raise ConfigError(f"{where}: linear transmission must lie in [0, 1], got {v}")
        return v
    if isinstance(value, str):
        token = value.strip().lower()
        if token.endswith("db"):
            try:
                db = float(token[:-2].strip())
            except ValueError:
                raise ConfigError(f"{where}: cannot parse decibel value {value!r}") from None
            if db < 0:
                raise ConfigError(f"{where}: attenuation in dB must be >= 0, got {db}")
            return 10.0 ** (-db / 10.0)
        raise ConfigError(f"{where}: string values need an explicit 'dB' suffix, got {value!r}")
    raise ConfigError(f"{where}: expected number or 'x dB' string, got {type(value).__name__}")


def _get(table: dict, key: str, where: str, default=None, required: bool = False):
    if key in table:
        return table[key]
    if required:
        raise ConfigError(f"missing required key '{key}' in [{where}]")
    return default


@dataclass(frozen=True)
class SweepSettings:
    p_si_min: float = 1e-4
    p_si_max: float = 0.2
    points: int = 25
    eta: float = 1e-2
    alice_photon_numbers: tuple[float, ...] = (0.8, 8.0, 80.0)


@dataclass(frozen=True)
class TomoSettings:
    target: str = "+"
    delta_theta: float = 2.9e-3 * math.pi
    trials: int = 2000
    counts_csv: Optional[str] = None


@dataclass(frozen=True)
class Config:
    """Validated scenario plus optional cavity, wavelength and sweep blocks."""

    scenario: ScenarioConfig
    cavity: Optional[CavityParams]
    wavelengths: Optional[WavelengthSetup]
    wavelength_checks: dict
    sweep: SweepSettings
    tomo: TomoSettings
    canonical: dict

    @property
    def digest(self) -> str:
        return config_digest(self.canonical)


def _parse_source(table: dict, where: str) -> PairSource:
    if "epsilon" in table and "p_si" in table:
        raise ConfigError(f"[{where}] must give either 'epsilon' or 'p_si', not both")
    if "epsilon" in table:
        return PairSource(float(table["epsilon"]))
    if "p_si" in table:
        return PairSource(epsilon_from_p_si(float(table["p_si"])))
    raise ConfigError(f"[{where}] needs 'epsilon' or 'p_si'")


def _parse_interferometers(table: dict) -> InterferometerBank:
    comp_token = _get(table, "composition", "interferometers",
                      default="explicit" if "v_effective" in table else "product")
    try:
        comp = VisibilityComposition(comp_token)
    except ValueError:
        raise ConfigError(f"unknown visibility composition {comp_token!r}") from None
    return InterferometerBank(
        phi_alice=float(_get(table, "phi_alice", "interferometers", 0.0)),
        phi_sigma=float(_get(table, "phi_sigma", "interferometers", 0.0)),
        phi_bob=float(_get(table, "phi_bob", "interferometers", 0.0)),
        v_alice=float(_get(table, "v_alice", "interferometers", 1.0)),
        v_sigma=float(_get(table, "v_sigma", "interferometers", 1.0)),
        v_bob=float(_get(table, "v_bob", "interferometers", 1.0)),
        v_explicit=(float(table["v_effective"]) if "v_effective" in table else None),
        composition=comp,
    )


def _parse_cavity(table: dict) -> CavityParams:
    modes = {}
    for name in ("mode_a", "mode_b", "mode_c"):
        sub = table.get(name)
        if sub is None:
            raise ConfigError(f"[cavity] needs a [cavity.{name}] table")
        modes[name] = mode_from_q(
            wavelength=float(_get(sub, "wavelength_nm", f"cavity.{name}", required=True)) * 1e-9,
            q_total=float(_get(sub, "q_total", f"cavity.{name}", required=True)),
            coupling_fraction=float(_get(sub, "coupling_fraction", f"cavity.{name}", 0.5)),
            azimuthal_number=sub.get("azimuthal_number"),
        )
    g = TWO_PI * float(_get(table, "g_hz", "cavity", required=True))
    tol = table.get("matching_tolerance_hz")
    return CavityParams(
        modes["mode_a"], modes["mode_b"], modes["mode_c"], g,
        matching_tolerance=(TWO_PI * float(tol) if tol is not None else None),
    )


def _parse_wavelengths(table: dict) -> tuple[WavelengthSetup, dict]:
    def nm(key, default=None, required=False):
        v = _get(table, key, "wavelengths", default, required)
        return None if v is None else float(v) * 1e-9

    setup = WavelengthSetup(
        alice=nm("alice_nm", required=True),
        sum=nm("sum_nm", required=True),
        signal=nm("signal_nm", required=True),
        idler=nm("idler_nm", required=True),
        pump=nm("pump_nm", required=True),
    )
    checks = {
        "fsr_ring": nm("ring_fsr_nm", 11.9),
        "fsr_ffp": nm("ffp_fsr_nm", 9.1),
        "pump_range": (nm("pump_min_nm", 770.5), nm("pump_max_nm", 773.5)),
        "wdm_channel_width": nm("wdm_channel_nm", 20.0),
    }
    return setup, checks


def parse_config_dict(raw: dict) -> Config:
    """Validate a parsed TOML document and build the typed configuration."""
    try:
        run = raw.get("run", {})
        clock = float(_get(run, "clock_hz", "run", 250e6))
        bsm_type = _get(run, "bsm", "run", "nlo")

        if "source" not in raw:
            raise ConfigError("a [source] table (the entangled-pair source) is required")
        source_b = _parse_source(raw["source"], "source")

        source_a: Any
        if "alice" in raw:
            alice_tab = raw["alice"]
            source_a = AliceSource(float(_get(alice_tab, "mean_photon_number", "alice", required=True)))
        elif "source_a" in raw:
            source_a = _parse_source(raw["source_a"], "source_a")
        else:
            raise ConfigError("need an [alice] table (teleport) or a [source_a] table (swap)")

        channels = raw.get("channels", {})
        detectors = raw.get("detectors", {})
        bsm_channels = raw.get("bsm_channels", {})
        conversion = raw.get("conversion", {})
        bank = _parse_interferometers(raw.get("interferometers", {}))

        scenario = ScenarioConfig(
            source_a=source_a,
            source_b=source_b,
            p_sfg=float(_get(conversion, "p_sfg", "conversion", 1.0)),
            t_alice=_as_transmission(_get(channels, "t_alice", "channels", 1.0), "channels.t_alice"),
            t_signal=_as_transmission(_get(channels, "t_signal", "channels", 1.0), "channels.t_signal"),
            t_idler=_as_transmission(_get(channels, "t_idler", "channels", 1.0), "channels.t_idler"),
            t_sum=_as_transmission(_get(channels, "t_sum", "channels", 1.0), "channels.t_sum"),
            eta_idler_det=float(_get(detectors, "eta_idler", "detectors", 1.0)),
            eta_sum_det=float(_get(detectors, "eta_sum", "detectors", 1.0)),
            bsm_type=bsm_type,
            clock=clock,
            eta_bsm_a=_as_transmission(_get(bsm_channels, "eta_a", "bsm_channels", 1.0), "bsm_channels.eta_a"),
            eta_bsm_b=_as_transmission(_get(bsm_channels, "eta_b", "bsm_channels", 1.0), "bsm_channels.eta_b"),
            dark_spad_hz=float(_get(detectors, "dark_spad_hz", "detectors", 0.0)),
            dark_snspd_hz=float(_get(detectors, "dark_snspd_hz", "detectors", 0.0)),
            interferometers=bank,
        )

        cav = _parse_cavity(raw["cavity"]) if "cavity" in raw else None
        if "wavelengths" in raw:
            wl, wl_checks = _parse_wavelengths(raw["wavelengths"])
        else:
            wl, wl_checks = None, {}

        sweep_tab = raw.get("sweep", {})
        sweep = SweepSettings(
            p_si_min=float(_get(sweep_tab, "p_si_min", "sweep", 1e-4)),
            p_si_max=float(_get(sweep_tab, "p_si_max", "sweep", 0.2)),
            points=int(_get(sweep_tab, "points", "sweep", 25)),
            eta=_as_transmission(_get(sweep_tab, "eta", "sweep", 1e-2), "sweep.eta"),
            alice_photon_numbers=tuple(
                float(x) for x in _get(sweep_tab, "alice_photon_numbers", "sweep", [0.8, 8.0, 80.0])
            ),
        )
        tomo_tab = raw.get("tomo", {})
        tomo = TomoSettings(
            target=str(_get(tomo_tab, "target", "tomo", "+")),
            delta_theta=float(_get(tomo_tab, "delta_theta", "tomo", 2.9e-3 * math.pi)),
            trials=int(_get(tomo_tab, "trials", "tomo", 2000)),
            counts_csv=tomo_tab.get("counts_csv"),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc

    canonical = canonicalize(scenario, cav, wl, wl_checks, sweep, tomo)
    return Config(scenario, cav, wl, wl_checks, sweep, tomo, canonical)


def load_config(path) -> Config:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error in {path}: {exc}") from exc
    return parse_config_dict(raw)


def canonicalize(scenario: ScenarioConfig, cav, wl, wl_checks, sweep, tomo) -> dict:
    """Plain nested dict with every unit already converted; key order is fixed
    by JSON serialization with sorted keys."""
    src_a = scenario.source_a
    out: dict = {
        "run": {"clock_hz": scenario.clock, "bsm": scenario.bsm_type},
        "source_b": {"epsilon": scenario.source_b.epsilon},
        "channels": {
            "t_alice": scenario.t_alice, "t_signal": scenario.t_signal,
            "t_idler": scenario.t_idler, "t_sum": scenario.t_sum,
        },
        "bsm_channels": {"eta_a": scenario.eta_bsm_a, "eta_b": scenario.eta_bsm_b},
        "detectors": {
            "eta_idler": scenario.eta_idler_det, "eta_sum": scenario.eta_sum_det,
            "dark_spad_hz": scenario.dark_spad_hz, "dark_snspd_hz": scenario.dark_snspd_hz,
        },
        "conversion": {"p_sfg": scenario.p_sfg},
        "interferometers": {
            "phi_alice": scenario.interferometers.phi_alice,
            "phi_sigma": scenario.interferometers.phi_sigma,
            "phi_bob": scenario.interferometers.phi_bob,
            "v_alice": scenario.interferometers.v_alice,
            "v_sigma": scenario.interferometers.v_sigma,
            "v_bob": scenario.interferometers.v_bob,
            "v_effective": scenario.interferometers.v_explicit,
            "composition": scenario.interferometers.composition.value,
        },
        "sweep": {
            "p_si_min": sweep.p_si_min, "p_si_max": sweep.p_si_max,
            "points": sweep.points, "eta": sweep.eta,
            "alice_photon_numbers": list(sweep.alice_photon_numbers),
        },
        "tomo": {
            "target": tomo.target, "delta_theta": tomo.delta_theta,
            "trials": tomo.trials, "counts_csv": tomo.counts_csv,
        },
    }
    if isinstance(src_a, AliceSource):
        out["alice"] = {"mean_photon_number": src_a.mean_photon_number}
    else:
        out["source_a"] = {"epsilon": src_a.epsilon}
    if cav is not None:
        out["cavity"] = {
            "g_rad_s": cav.g,
            **{
                name: {
                    "wavelength_m": mode.wavelength,
                    "kappa_total_rad_s": mode.kappa_total,
                    "kappa_external_rad_s": mode.kappa_external,
                    "azimuthal_number": mode.azimuthal_number,
                }
                for name, mode in (("mode_a", cav.mode_a), ("mode_b", cav.mode_b),
                                   ("mode_c", cav.mode_c))
            },
        }
    if wl is not None:
        out["wavelengths"] = {
            "alice_m": wl.alice, "sum_m": wl.sum, "signal_m": wl.signal,
            "idler_m": wl.idler, "pump_m": wl.pump,
            "fsr_ring_m": wl_checks["fsr_ring"], "fsr_ffp_m": wl_checks["fsr_ffp"],
            "pump_range_m": list(wl_checks["pump_range"]),
            "wdm_channel_width_m": wl_checks["wdm_channel_width"],
        }
    return out


def canonical_json(canonical: dict) -> str:
    return json.dumps(canonical, sort_keys=True, separators=(",", ":"))


def config_digest(canonical: dict) -> str:
    return hashlib.sha256(canonical_json(canonical).encode()).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    """Provenance record written next to every artifact set."""

    command: str
    config_digest: str
    seed: Optional[int]
    shots: Optional[int]
    version: str
    timestamp: str
    columns: Optional[dict] = None

    def as_dict(self) -> dict:
        out = {
            "command": self.command,
            "config_digest": self.config_digest,
            "seed": self.seed,
            "shots": self.shots,
            "version": self.version,
            "timestamp": self.timestamp,
        }
        if self.columns:
            out["columns"] = self.columns
        return out
