"""Reconstruction of the teleported time-bin qubit from projection counts.

The measurement chain projects the idler onto the six cardinal states
|e>, |l>, |+>, |->, |L>, |R>, read out from the three output time bins of
an unbalanced interferometer at two phase settings.  Stokes parameters give
a direct linear inversion; a maximum-likelihood fit through a positive
factorization guarantees a physical density matrix; and a Monte Carlo over
shot noise plus interferometer phase jitter propagates the uncertainty onto
the fidelity.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize

from .errors import ConvergenceError, DegenerateData, InvalidParameter
from .qubits import DensityMatrix2, TimeBinQubit, fidelity_pure, purity

# Projection angles theta for the equatorial states (|0> + e^{i theta}|1>)/sqrt(2):
# plus, minus, left, right.
_EQUATOR_THETAS = {"n_plus": 0.0, "n_minus": math.pi, "n_left": math.pi / 2, "n_right": 3 * math.pi / 2}

PROJECTION_NAMES = ("n0", "n1", "n_plus", "n_minus", "n_left", "n_right")

# Ket vectors of the six projectors, in count order.
_PROJECTOR_KETS = np.array([
    [1.0, 0.0],
    [0.0, 1.0],
    [1 / math.sqrt(2), 1 / math.sqrt(2)],
    [1 / math.sqrt(2), -1 / math.sqrt(2)],
    [1 / math.sqrt(2), 1j / math.sqrt(2)],
    [1 / math.sqrt(2), -1j / math.sqrt(2)],
], dtype=complex)


@dataclass(frozen=True)
class ProjectionCounts:
    """Counts from the six cardinal projection measurements."""

    n0: float
    n1: float
    n_plus: float
    n_minus: float
    n_left: float
    n_right: float

    def __post_init__(self):
        for name in PROJECTION_NAMES:
            v = getattr(self, name)
            if v < 0 or not math.isfinite(v):
                raise InvalidParameter(f"count {name} must be finite and >= 0, got {v}")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PROJECTION_NAMES], dtype=float)

    @property
    def total_pole(self) -> float:
        return self.n0 + self.n1


PHASE_SETTINGS = (0.0, math.pi / 2)
BIN_LABELS = ("e", "l", "ll")


@dataclass(frozen=True)
class RawBinCounts:
    """Time-resolved detector counts n[phase][detector][bin].

    Axis order: phase setting (0, pi/2), detector (1, 2), output time bin
    (e, l, ll); the middle bin l holds the interfering superposition.
    """

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=float)
        if c.shape != (2, 2, 3):
            raise InvalidParameter(f"expected counts of shape (2, 2, 3), got {c.shape}")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise InvalidParameter("bin counts must be finite and >= 0")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    def count(self, phase_index: int, detector: int, bin_label: str) -> float:
        """Single cell; detector is 1-based, bin one of 'e', 'l', 'll'."""
        return float(self.counts[phase_index, detector - 1, BIN_LABELS.index(bin_label)])


def projections_from_bins(raw: RawBinCounts) -> ProjectionCounts:
    """Map the three-bin detector records onto the six projection counts.

    Pole populations come from the outer bins of the phase-0 run summed over
    both detectors; the four equatorial counts are the middle bins, detector
    1 carrying the minus/left port and detector 2 the plus/right port.
    """
    c = raw.counts
    return ProjectionCounts(
        n0=c[0, 0, 0] + c[0, 1, 0],
        n1=c[0, 0, 2] + c[0, 1, 2],
        n_minus=c[0, 0, 1],
        n_plus=c[0, 1, 1],
        n_left=c[1, 0, 1],
        n_right=c[1, 1, 1],
    )


def stokes(counts: ProjectionCounts) -> tuple[float, float, float, float]:
    """Stokes parameters (S0, S1, S2, S3) of the measured qubit."""
    s0 = counts.n0 + counts.n1
    if s0 <= 0:
        raise DegenerateData("no counts in the pole basis (S0 = 0)")
    return (
        s0,
        counts.n_plus - counts.n_minus,
        counts.n_left - counts.n_right,
        counts.n0 - counts.n1,
    )


def rho_linear(stokes_params: Sequence[float]) -> tuple[np.ndarray, bool]:
    """Direct Pauli inversion rho = (I + sum_k (S_k/S0) sigma_k)/2.

    Hermitian and unit trace by construction; positivity is not guaranteed,
    so the matrix is returned raw together with a physicality flag instead
    of being validated.
    """
    s0, s1, s2, s3 = stokes_params
    if s0 <= 0:
        raise DegenerateData("S0 must be positive")
    r1, r2, r3 = s1 / s0, s2 / s0, s3 / s0
    m = 0.5 * np.array([
        [1.0 + r3, r1 - 1j * r2],
        [r1 + 1j * r2, 1.0 - r3],
    ], dtype=complex)
    physical = float(np.linalg.eigvalsh(m).min()) >= -1e-12
    return m, physical


# ---------------------------------------------------------------------------
# Maximum-likelihood reconstruction.
# ---------------------------------------------------------------------------

_P_FLOOR = 1e-15  # keeps Poisson logs finite while the optimizer explores


def _probs_and_grads(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Born probabilities of the six projectors for rho = T^dag T / tr, plus
    their gradients with respect to the factor parameters.

    T = [[t0, 0], [t2 + i t3, t1]] gives matrix elements
    m00 = t0^2 + t2^2 + t3^2, m11 = t1^2, m01 = t1 (t2 - i t3).
    """
    t0, t1, t2, t3 = t
    m00 = t0 * t0 + t2 * t2 + t3 * t3
    m11 = t1 * t1
    re01 = t1 * t2
    im01 = -t1 * t3
    tau = m00 + m11

    q = np.array([
        m00,
        m11,
        0.5 * (tau + 2.0 * re01),
        0.5 * (tau - 2.0 * re01),
        0.5 * (tau - 2.0 * im01),
        0.5 * (tau + 2.0 * im01),
    ])
    p = q / tau

    # Parameter gradients of (m00, m11, re01, im01, tau).
    d_m00 = np.array([2 * t0, 0.0, 2 * t2, 2 * t3])
    d_m11 = np.array([0.0, 2 * t1, 0.0, 0.0])
    d_re = np.array([0.0, t2, t1, 0.0])
    d_im = np.array([0.0, -t3, 0.0, -t1])
    d_tau = d_m00 + d_m11

    d_q = np.stack([
        d_m00,
        d_m11,
        0.5 * (d_tau + 2.0 * d_re),
        0.5 * (d_tau - 2.0 * d_re),
        0.5 * (d_tau - 2.0 * d_im),
        0.5 * (d_tau + 2.0 * d_im),
    ])
    d_p = (d_q - p[:, None] * d_tau[None, :]) / tau
    return p, d_p


def _nll_and_grad(t: np.ndarray, counts: np.ndarray, weights: np.ndarray) -> tuple[float, np.ndarray]:
    """Poisson negative log-likelihood with the overall scale profiled out.

    Means are s * w_i * p_i; the optimal s = sum(N) / sum(w p) reduces the
    objective (up to constants) to sum(N) log(sum w p) - sum N_i log p_i,
    here normalized by the total count for conditioning.
    """
    total = counts.sum()
    p, d_p = _probs_and_grads(t)
    p_safe = p + _P_FLOOR
    wsum = float(weights @ p_safe)
    nll = total * math.log(wsum) - float(counts @ np.log(p_safe))
    coeff = total * weights / wsum - counts / p_safe
    grad = coeff @ d_p
    return nll / total, grad / total


def _factor_from_rho(m: np.ndarray) -> np.ndarray:
    """Parameters of the lower-triangular factor reproducing a positive rho."""
    m11 = max(float(m[1, 1].real), 1e-6)
    t1 = math.sqrt(m11)
    t2 = float(m[1, 0].real) / t1
    t3 = -float(m[1, 0].imag) / t1
    resid = max(float(m[0, 0].real) - t2 * t2 - t3 * t3, 1e-6)
    t0 = math.sqrt(resid)
    return np.array([t0, t1, t2, t3])


def _initial_factor(counts: ProjectionCounts) -> np.ndarray:
    m, _ = rho_linear(stokes(counts))
    r = np.array([
        2.0 * m[1, 0].real,
        2.0 * m[1, 0].imag,
        (m[0, 0] - m[1, 1]).real,
    ])
    norm = np.linalg.norm(r)
    if norm > 0.98:
        r *= 0.98 / norm
    m_init = 0.5 * np.array([
        [1.0 + r[2], r[0] - 1j * r[1]],
        [r[0] + 1j * r[1], 1.0 - r[2]],
    ], dtype=complex)
    return _factor_from_rho(m_init)


def _rho_from_factor(t: np.ndarray) -> DensityMatrix2:
    t0, t1, t2, t3 = t
    tmat = np.array([[t0, 0.0], [t2 + 1j * t3, t1]], dtype=complex)
    m = tmat.conj().T @ tmat
    m = m / np.trace(m).real
    m = 0.5 * (m + m.conj().T)
    return DensityMatrix2(m)


def mle_rho(counts: ProjectionCounts, weights: Optional[Sequence[float]] = None) -> DensityMatrix2:
    """Physical density matrix maximizing the Poisson likelihood of the counts.

    Positivity and unit trace are built into the factorized parameterization
    rho = T^dag T / tr(T^dag T).  Projections are assumed to share one
    effective efficiency; ``weights`` rescales individual projector means
    when that assumption needs adjusting.  The optimizer is a deterministic
    quasi-Newton descent started from the linear inversion pulled inside the
    Bloch ball.
    """
    n = counts.as_array()
    if counts.total_pole <= 0:
        raise DegenerateData("no counts in the pole basis (S0 = 0)")
    w = np.ones(6) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (6,) or np.any(w <= 0):
        raise InvalidParameter("weights must be six positive numbers")

    best = None
    for start in (_initial_factor(counts), np.array([1.0, 1.0, 0.0, 0.0])):
        res = minimize(
            _nll_and_grad, start, args=(n, w), jac=True, method="BFGS",
            options={"gtol": 1e-10, "maxiter": 500},
        )
        gnorm = float(np.max(np.abs(res.jac)))
        if best is None or res.fun < best[0]:
            best = (res.fun, res.x, gnorm)
        # Gradient tolerance 1e-10 on the count-normalized objective; exits
        # flagged by line-search precision loss but already below 1e-6 are
        # accepted as converged.
        if res.success or gnorm <= 1e-6:
            return _rho_from_factor(res.x)
    if best[2] <= 1e-6:
        return _rho_from_factor(best[1])
    raise ConvergenceError(
        f"likelihood maximization stalled with gradient norm {best[2]:.3e}",
        best=_rho_from_factor(best[1]),
    )


# ---------------------------------------------------------------------------
# Fidelity uncertainty from shot noise and interferometer phase jitter.
# ---------------------------------------------------------------------------

def _phase_derivatives(rho: DensityMatrix2, scale: float) -> dict:
    """d(counts)/d(theta) for the four equatorial projections.

    For the projector at angle theta the Born probability is
    (1 + r1 cos t + r2 sin t)/2, so the count derivative is
    scale * (-r1 sin t + r2 cos t)/2.  Pole projections are insensitive to
    the interferometer phase.
    """
    r1, r2, _ = rho.bloch()
    out = {}
    for name, theta in _EQUATOR_THETAS.items():
        out[name] = scale * 0.5 * (-r1 * math.sin(theta) + r2 * math.cos(theta))
    return out


def fidelity_error(
    counts: ProjectionCounts,
    target: TimeBinQubit,
    delta_theta: float,
    trials: int,
    seed: int,
    include_shot_noise: bool = True,
    weights: Optional[Sequence[float]] = None,
) -> tuple[float, float]:
    """Monte Carlo estimate of the teleportation fidelity and its spread.

    Each trial resamples every projection count from a Poisson law (when
    ``include_shot_noise``) and adds the phase-jitter term
    (dN_i/dtheta) * dtheta, dtheta ~ N(0, delta_theta), to the four
    equatorial counts only; the trial state is then refit by maximum
    likelihood.  Per-trial random streams derive from (seed, trial index),
    so results do not depend on execution order.
    """
    if trials < 1000:
        raise InvalidParameter(f"need at least 1000 trials, got {trials}")
    if delta_theta < 0:
        raise InvalidParameter(f"delta_theta must be >= 0, got {delta_theta}")
    base = counts.as_array()
    rho_hat = mle_rho(counts, weights)
    # Effective per-projection scale: counts are s * p_i with three bases
    # sharing s, so s is one third of the grand total.
    scale = base.sum() / 3.0
    derivs = _phase_derivatives(rho_hat, scale)
    d_vec = np.array([0.0, 0.0, derivs["n_plus"], derivs["n_minus"],
                      derivs["n_left"], derivs["n_right"]])

    fids = np.empty(trials)
    for k in range(trials):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, k))))
        trial = rng.poisson(base).astype(float) if include_shot_noise else base.copy()
        if delta_theta > 0:
            trial = trial + d_vec * rng.normal(0.0, delta_theta)
        trial = np.clip(trial, 0.0, None)
        if trial[0] + trial[1] <= 0:
            trial[0] = max(trial[0], 1.0)
        rho_k = mle_rho(ProjectionCounts(*trial), weights)
        fids[k] = fidelity_pure(rho_k, target)
    return float(fids.mean()), float(fids.std(ddof=1))


# ---------------------------------------------------------------------------
# File interfaces: counts CSV in, density-matrix report JSON out.
# ---------------------------------------------------------------------------

_PHASE_TOKENS = {"0": 0, "0.0": 0, "pi/2": 1, "PI/2": 1}


def _phase_index(token: str) -> int:
    token = token.strip()
    if token in _PHASE_TOKENS:
        return _PHASE_TOKENS[token]
    try:
        value = float(token)
    except ValueError:
        raise InvalidParameter(f"unrecognized phase setting {token!r}") from None
    for idx, ref in enumerate(PHASE_SETTINGS):
        if abs(value - ref) < 1e-6:
            return idx
    raise InvalidParameter(f"phase setting {token!r} is neither 0 nor pi/2")


def read_bin_counts_csv(path) -> RawBinCounts:
    """Read detector bin counts from a CSV with columns
    phase_setting, detector, bin, counts."""
    grid = np.zeros((2, 2, 3))
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"phase_setting", "detector", "bin", "counts"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise InvalidParameter(
                f"counts CSV must have columns {sorted(required)}, got {reader.fieldnames}"
            )
        for row in reader:
            p = _phase_index(row["phase_setting"])
            det = int(row["detector"])
            if det not in (1, 2):
                raise InvalidParameter(f"detector must be 1 or 2, got {det}")
            b = row["bin"].strip()
            if b not in BIN_LABELS:
                raise InvalidParameter(f"bin must be one of {BIN_LABELS}, got {b!r}")
            grid[p, det - 1, BIN_LABELS.index(b)] += float(row["counts"])
    return RawBinCounts(grid)


def write_bin_counts_csv(path, raw: RawBinCounts) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phase_setting", "detector", "bin", "counts"])
        for p, label in enumerate(("0", "pi/2")):
            for det in (1, 2):
                for b, bin_label in enumerate(BIN_LABELS):
                    writer.writerow([label, det, bin_label, repr(float(raw.counts[p, det - 1, b]))])


def density_matrix_report(
    rho: DensityMatrix2,
    target: Optional[TimeBinQubit] = None,
    fidelity_mean_std: Optional[tuple[float, float]] = None,
) -> dict:
    """JSON-ready summary of a reconstructed state."""
    m = rho.matrix
    report = {
        "density_matrix": {
            "real": [[m[i, j].real for j in range(2)] for i in range(2)],
            "imag": [[m[i, j].imag for j in range(2)] for i in range(2)],
        },
        "bloch": list(rho.bloch()),
        "purity": purity(rho),
        "eigenvalues": [float(v) for v in rho.eigenvalues()],
    }
    if target is not None:
        report["fidelity"] = fidelity_pure(rho, target)
        report["target"] = {
            "alpha": [target.alpha.real, target.alpha.imag],
            "beta": [target.beta.real, target.beta.imag],
        }
    if fidelity_mean_std is not None:
        report["fidelity_mean"] = fidelity_mean_std[0]
        report["fidelity_std"] = fidelity_mean_std[1]
    return report


def write_report_json(path, report: dict) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
