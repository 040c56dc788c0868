"""Scenario runner: sweeps, device reports, tomography and simulation runs.

Every command reads one TOML configuration, writes its artifacts (CSV or
JSON) into the output directory and drops a manifest recording the command,
the canonical config digest, the seed and the tool version.  Artifacts are
byte-stable: rerunning a command with the same inputs reproduces them
exactly.

Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import cavity as cavity_mod
from . import protocols, tomography
from .config import Config, RunManifest, TOOL_VERSION, load_config
from .errors import ConfigError, ConvergenceError, SfgBellError
from .montecarlo import simulate_full_experiment, simulate_swap, simulate_teleport
from .qubits import CARDINAL_STATES

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _write_table(path: Path, header: list[str], rows: list[list], fmt: str) -> None:
    if fmt == "csv":
        with open(path.with_suffix(".csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    else:
        payload = [dict(zip(header, row)) for row in rows]
        with open(path.with_suffix(".json"), "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(outdir: Path, command: str, cfg: Config, seed, shots, columns=None) -> None:
    manifest = RunManifest(
        command=command,
        config_digest=cfg.digest,
        seed=seed,
        shots=shots,
        version=TOOL_VERSION,
        timestamp=datetime.now(timezone.utc).isoformat(),
        columns=columns,
    )
    _write_json(outdir / f"{command}_manifest.json", manifest.as_dict())


def _log_grid(lo: float, hi: float, points: int) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), points)


def cmd_teleport_curve(cfg: Config, outdir: Path, args) -> int:
    grid = _log_grid(cfg.sweep.p_si_min, min(cfg.sweep.p_si_max, 0.25), cfg.sweep.points)
    rows = [[float(p), protocols.teleport_fidelity_nlo(float(p))] for p in grid]
    _write_table(outdir / "teleport_fidelity_vs_p_si", ["p_si", "fidelity"], rows, args.format)

    v_eff = cfg.scenario.interferometers.effective_visibility()
    f_vis = protocols.fidelity_from_visibility(v_eff)
    rows2 = [[float(n), v_eff, f_vis] for n in cfg.sweep.alice_photon_numbers]
    _write_table(outdir / "teleport_fidelity_vs_alice_photons",
                 ["alice_mean_photons", "visibility", "fidelity"], rows2, args.format)
    _write_manifest(outdir, "teleport-curve", cfg, None, None, columns={
        "teleport_fidelity_vs_p_si": ["p_si", "fidelity"],
        "teleport_fidelity_vs_alice_photons": ["alice_mean_photons", "visibility", "fidelity"],
    })
    return EXIT_OK


def cmd_swap_curves(cfg: Config, outdir: Path, args) -> int:
    eta = cfg.sweep.eta
    grid = _log_grid(cfg.sweep.p_si_min, min(cfg.sweep.p_si_max, 0.25), cfg.sweep.points)
    rows = []
    for p in grid:
        p = float(p)
        f_nlo = protocols.swap_fidelity_nlo(p, p)
        f_bal = protocols.swap_fidelity_lo_balanced(p, eta)
        f_unbal, _ = protocols.swap_fidelity_lo_unbalanced(p, eta)
        rows.append([p, f_nlo, f_bal, f_unbal, 1.0 / 3.0])
    header = ["p_si", "f_nlo", "f_lo_balanced", "f_lo_unbalanced", "lo_bound"]
    _write_table(outdir / "swap_fidelity_curves", header, rows, args.format)
    _write_manifest(outdir, "swap-curves", cfg, None, None,
                    columns={"swap_fidelity_curves": header})
    return EXIT_OK


def cmd_rates(cfg: Config, outdir: Path, args) -> int:
    p_b = cfg.scenario.source_b.p_si
    p_sfg = cfg.scenario.p_sfg
    clock = cfg.scenario.clock
    rows = []
    for eta in _log_grid(1e-6, 1.0, 25):
        r_lo, r_nlo = protocols.entanglement_rates(p_b, float(eta), p_sfg, clock)
        rows.append([float(eta), r_lo, r_nlo, r_nlo / r_lo if r_lo > 0 else math.inf])
    header = ["eta", "rate_lo_hz", "rate_nlo_hz", "nlo_over_lo"]
    _write_table(outdir / "entanglement_rates", header, rows, args.format)
    _write_manifest(outdir, "rates", cfg, None, None,
                    columns={"entanglement_rates": header})
    return EXIT_OK


def cmd_cavity(cfg: Config, outdir: Path, args) -> int:
    if cfg.cavity is None:
        raise ConfigError("the 'cavity' command needs a [cavity] table in the config")
    params = cfg.cavity
    eta = cavity_mod.sfg_efficiency(params)
    lhs, rhs = cavity_mod.efficiency_probability_relation(params)
    payload = {
        "eta_sfg_per_watt": eta,
        "eta_sfg_percent_per_watt": eta * 100.0,
        "p_sfg_symmetric": cavity_mod.single_photon_sfg_probability(params, symmetrize=True),
        "p_sfg_mode_a_bandwidth": cavity_mod.single_photon_sfg_probability(params, symmetrize=False),
        "relation_lhs": lhs,
        "relation_rhs": rhs,
        "frequency_mismatch_rad_s": params.frequency_mismatch,
        "mode_linewidths_hz": {
            "a": params.mode_a.kappa_total / (2 * math.pi),
            "b": params.mode_b.kappa_total / (2 * math.pi),
            "c": params.mode_c.kappa_total / (2 * math.pi),
        },
    }
    if cfg.wavelengths is not None:
        report = cavity_mod.check_wavelength_conditions(
            cfg.wavelengths,
            fsr_ring=cfg.wavelength_checks["fsr_ring"],
            fsr_ffp=cfg.wavelength_checks["fsr_ffp"],
            pump_range=cfg.wavelength_checks["pump_range"],
            wdm_channel_width=cfg.wavelength_checks["wdm_channel_width"],
        )
        payload["wavelength_conditions"] = report.as_dict()
        payload["wavelength_conditions_all_passed"] = report.all_passed
    _write_json(outdir / "cavity_report.json", payload)
    _write_manifest(outdir, "cavity", cfg, None, None)
    return EXIT_OK


def cmd_tomo(cfg: Config, outdir: Path, args) -> int:
    counts_path = args.counts or cfg.tomo.counts_csv
    if counts_path is None:
        raise ConfigError("tomo needs a counts CSV (set [tomo] counts_csv or pass --counts)")
    raw = tomography.read_bin_counts_csv(counts_path)
    counts = tomography.projections_from_bins(raw)
    rho = tomography.mle_rho(counts)
    target = CARDINAL_STATES.get(cfg.tomo.target)
    if target is None:
        raise ConfigError(f"unknown tomo target {cfg.tomo.target!r}; use one of {sorted(CARDINAL_STATES)}")
    err = tomography.fidelity_error(
        counts, target, cfg.tomo.delta_theta, max(cfg.tomo.trials, 1000), args.seed,
    )
    report = tomography.density_matrix_report(rho, target, err)
    report["projection_counts"] = dict(zip(tomography.PROJECTION_NAMES, counts.as_array().tolist()))
    _write_json(outdir / "tomography_report.json", report)
    _write_manifest(outdir, "tomo", cfg, args.seed, None)
    return EXIT_OK


def cmd_simulate(cfg: Config, outdir: Path, args) -> int:
    scenario = cfg.scenario
    shots = args.shots
    if scenario.protocol == "teleport":
        result = simulate_teleport(scenario, shots, args.seed, n_jobs=args.jobs)
        kind = "teleport"
    else:
        result = simulate_swap(scenario, shots, args.seed, n_jobs=args.jobs)
        kind = "swap"
    payload = {
        "kind": kind,
        "fidelity": result.f_hat,
        "stderr": result.stderr,
        "shots": result.summary.shots,
        "herald_weight": result.summary.herald_weight,
        "desired_weight": result.summary.desired_weight,
        "total_pairs": result.summary.total_pairs,
        "multi_pair_shots": result.summary.multi_pair_shots,
        "clamped_weights": result.summary.clamped_weights,
    }
    _write_json(outdir / "simulate_result.json", payload)

    if args.full and scenario.protocol == "teleport":
        state = CARDINAL_STATES.get(args.state)
        if state is None:
            raise ConfigError(f"unknown state {args.state!r}; use one of {sorted(CARDINAL_STATES)}")
        full = simulate_full_experiment(scenario, state, shots, args.seed, n_jobs=args.jobs)
        tomography.write_bin_counts_csv(outdir / "simulated_bin_counts.csv", full.raw)
    _write_manifest(outdir, "simulate", cfg, args.seed, shots)
    return EXIT_OK


COMMANDS = {
    "teleport-curve": cmd_teleport_curve,
    "swap-curves": cmd_swap_curves,
    "rates": cmd_rates,
    "cavity": cmd_cavity,
    "tomo": cmd_tomo,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sfgbell",
        description="Analytics and simulation for conversion-heralded time-bin protocols",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="TOML scenario configuration")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--shots", type=int, default=1_000_000)
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--jobs", type=int, default=1, help="worker threads for simulation")
    parser.add_argument("--counts", default=None, help="counts CSV for the tomo command")
    parser.add_argument("--full", action="store_true",
                        help="also emit simulated detector bin counts (simulate command)")
    parser.add_argument("--state", default="+",
                        help="input state for --full runs (e, l, +, -, L, R)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.command](cfg, outdir, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SfgBellError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
