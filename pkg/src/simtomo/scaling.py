"""Shot-count scaling sweeps and calibration of the budget constant.

A sweep fixes an instance family indexed by ``tau``, finds for each member
the shot count ``N*`` at which a decoding stage succeeds with probability
0.9 (logistic fit of success against ``log N``) and fits the log-log slope
of ``N*`` against the swept quantity.

Trials use common random numbers: trial ``t`` draws from the same stream
at every shot count and every sweep point.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .decoder_rand import (
    RandomizedConfig,
    estimate_table,
    ratios_from_estimates,
    run_randomized,
    score_result,
    support_threshold,
)
from .errors import BudgetError, ConditioningError, DomainError, SupportError
from .pauli import enumerate_basis, pauli_from_label
from .povm import computational_povm
from .sim import Device, basis_state, from_coefficients, num_qubits, rng_stream, to_coefficients, u_norm

TARGET = 0.9


# --- instance families --------------------------------------------------------


def flip_family_noise(tau: float) -> np.ndarray:
    """Two-qubit noise ``((1 - tau) I + tau X)`` on each qubit."""
    one = np.array([[1 - tau, tau], [tau, 1 - tau]])
    return np.kron(one, one)


def mixed_family_state(tau: float) -> np.ndarray:
    """``I/4 + tau (Y x I + Z x Z)``; positive for ``tau <= 1 / (4 sqrt 2)``."""
    if abs(tau) > 1 / (4 * math.sqrt(2)) + 1e-12:
        raise DomainError(f"tau={tau} gives a state with a negative eigenvalue")
    # weight tau on the unnormalized string is weight 2 tau on the normalized one
    return from_coefficients({pauli_from_label("YI"): 2 * tau, pauli_from_label("ZZ"): 2 * tau}, 2)


@dataclass(frozen=True)
class Instance:
    """A ground-truth pair with the decoder's prior bounds."""

    rho: np.ndarray
    noise: np.ndarray
    beta: float
    u_norm_lb: float
    label: str = ""
    value: float = float("nan")

    @property
    def device(self) -> Device:
        return Device(self.rho, self.noise, computational_povm(num_qubits(self.rho)))

    @property
    def coefficients(self) -> dict:
        return {p: float(np.real(v)) for p, v in to_coefficients(self.rho).items()}

    @property
    def support(self) -> tuple:
        return tuple(p for p, v in self.coefficients.items() if abs(v) > 1e-12)

    @property
    def reference(self):
        coeffs = self.coefficients
        return max(self.support, key=lambda p: (abs(coeffs[p]), -enumerate_basis(p.n).index(p)))


def running_example(tau: float = 0.1) -> Instance:
    """``|01>`` under ``flip_family_noise(tau)`` with ``beta = 1/4`` and the true noise norm."""
    a = flip_family_noise(tau)
    return Instance(basis_state("01"), a, 0.25, u_norm(a), "noise_norm", u_norm(a))


def noise_sweep_instance(tau: float) -> Instance:
    return running_example(tau)


def beta_sweep_instance(tau: float, noise_tau: float = 0.05) -> Instance:
    """State family member with ``beta`` equal to half its largest coefficient."""
    a = flip_family_noise(noise_tau)
    return Instance(mixed_family_state(tau), a, tau, u_norm(a), "beta", tau)


# --- single trials ------------------------------------------------------------


def support_trial(inst: Instance, shots: int, seed: int, trial: int, device=None) -> bool:
    """One support-detection run: success iff the detected support is exact."""
    device = device or inst.device
    rng = rng_stream(seed, trial, 1)
    z = estimate_table(device, enumerate_basis(device.n), shots, rng)
    try:
        found = support_threshold(z, inst.beta, inst.u_norm_lb)
    except SupportError:
        return False
    return tuple(found) == inst.support


def ratio_trial(inst: Instance, shots: int, seed: int, trial: int, device=None, epsilon_ratio: float = 1 / 3) -> bool:
    """One ratio run on the known support: success iff every relative error is at most ``epsilon_ratio``."""
    device = device or inst.device
    rng = rng_stream(seed, trial, 4)
    support, ref = inst.support, inst.reference
    z = estimate_table(device, support, shots, rng)
    try:
        ratios, _, _ = ratios_from_estimates(z, ref, support, inst.beta, inst.u_norm_lb)
    except ConditioningError:
        return False
    coeffs = inst.coefficients
    for p in support:
        true = coeffs[p] / coeffs[ref]
        if abs(ratios[p] - true) > epsilon_ratio * abs(true):
            return False
    return True


STAGES = {"support": support_trial, "ratio": ratio_trial}


def count_successes(stage: str, inst: Instance, shots: int, trials: int, seed: int, threads: int = 1) -> int:
    fn = STAGES[stage]
    device = inst.device
    if threads <= 1:
        return sum(fn(inst, shots, seed, t, device) for t in range(trials))
    with ThreadPoolExecutor(threads) as pool:
        return sum(pool.map(lambda t: fn(inst, shots, seed, t, device), range(trials)))


# --- fitting ------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdFit:
    n_star: float
    intercept: float
    slope: float
    method: str
    flagged: bool = False


def _logistic_irls(x, k, m, iters=100):
    design = np.column_stack([np.ones_like(x), x])
    beta = np.zeros(2)
    for _ in range(iters):
        eta = np.clip(design @ beta, -30, 30)
        p = 1 / (1 + np.exp(-eta))
        w = m * p * (1 - p)
        grad = design.T @ (k - m * p)
        hess = design.T @ (design * w[:, None])
        step = np.linalg.solve(hess + 1e-10 * np.eye(2), grad)
        beta = beta + step
        if np.abs(step).max() < 1e-10:
            return beta, True
    return beta, False


def _interpolate(x, rate, target):
    for j in range(len(x) - 1):
        if rate[j] < target <= rate[j + 1]:
            frac = (target - rate[j]) / (rate[j + 1] - rate[j])
            return math.exp(x[j] + frac * (x[j + 1] - x[j]))
    if rate[0] >= target:
        return math.exp(x[0])
    return float("nan")


def fit_threshold(shots, successes, trials, target: float = TARGET) -> ThresholdFit:
    """Shot count where the fitted success probability reaches ``target``.

    Fits ``P(success) = 1 / (1 + exp(-(a + b log N)))`` by Newton iterations
    on the binomial likelihood. If the fit does not converge or is not
    increasing (for example perfectly separated data), falls back to linear
    interpolation of the empirical rate in ``log N`` and flags the result.
    """
    x = np.log(np.asarray(shots, dtype=float))
    k = np.asarray(successes, dtype=float)
    m = np.broadcast_to(np.asarray(trials, dtype=float), k.shape)
    rate = k / m
    try:
        (a, b), ok = _logistic_irls(x, k, m)
    except np.linalg.LinAlgError:
        a, b, ok = float("nan"), float("nan"), False
    if ok and b > 0 and np.isfinite(a):
        n_star = math.exp((math.log(target / (1 - target)) - a) / b)
        if x.min() - 1 <= math.log(n_star) <= x.max() + 1:
            return ThresholdFit(n_star, float(a), float(b), "logistic")
    return ThresholdFit(_interpolate(x, rate, target), float(a), float(b), "interpolation", True)


def loglog_slope(values, n_stars) -> float:
    """Least-squares slope of ``log N*`` against ``log value``."""
    x, y = np.log(np.asarray(values, dtype=float)), np.log(np.asarray(n_stars, dtype=float))
    keep = np.isfinite(x) & np.isfinite(y)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(x[keep], y[keep], 1)[0])


# --- threshold search ---------------------------------------------------------


@dataclass
class ThresholdResult:
    instance: Instance
    stage: str
    fit: ThresholdFit
    rows: list = field(default_factory=list)


def min_shots(stage: str, inst: Instance) -> int:
    n = inst.device.n
    count = len(enumerate_basis(n)) if stage == "support" else len(inst.support)
    return 2**n + count * (2**n - 1)


def find_threshold(
    stage: str,
    inst: Instance,
    seed: int = 0,
    trials: int = 50,
    points: int = 12,
    threads: int = 1,
    cap: int = 2**34,
    target: float = TARGET,
) -> ThresholdResult:
    """Bracket then scan the shot count for one instance.

    Doubles ``N`` from the smallest feasible budget until the empirical
    rate reaches 0.95, then evaluates ``points`` geometric shot counts from
    a sixteenth to twice that value.
    """
    if trials < 1 or points < 2:
        raise DomainError("need at least one trial and two grid points")
    shots = min_shots(stage, inst)
    while count_successes(stage, inst, shots, trials, seed, threads) < 0.95 * trials:
        shots *= 2
        if shots > cap:
            raise BudgetError(f"success rate stayed below 0.95 up to {cap} shots")
    lo = max(min_shots(stage, inst), shots // 16)
    grid = np.unique(np.geomspace(lo, 2 * shots, points).astype(int))
    rows = []
    for n_shots in grid:
        k = count_successes(stage, inst, int(n_shots), trials, seed, threads)
        rows.append({"shots": int(n_shots), "successes": k, "trials": trials})
    fit = fit_threshold([r["shots"] for r in rows], [r["successes"] for r in rows], trials, target)
    return ThresholdResult(inst, stage, fit, rows)


PROTOCOLS = {
    "noise": noise_sweep_instance,
    "beta": beta_sweep_instance,
}


@dataclass
class SweepResult:
    protocol: str
    stage: str
    thresholds: list
    slope: float

    def point_rows(self) -> list:
        out = []
        for t in self.thresholds:
            for r in t.rows:
                out.append({"swept": t.instance.label, "value": t.instance.value, **r})
        return out

    def summary_rows(self) -> list:
        return [
            {
                "swept": t.instance.label,
                "value": t.instance.value,
                "n_star": t.fit.n_star,
                "method": t.fit.method,
                "flagged": int(t.fit.flagged),
                "slope": self.slope,
            }
            for t in self.thresholds
        ]


def run_sweep(protocol: str, stage: str, taus, seed: int = 0, trials: int = 50, points: int = 12, threads: int = 1) -> SweepResult:
    """Thresholds over a family and the log-log slope against the swept quantity."""
    if protocol not in PROTOCOLS:
        raise DomainError(f"unknown protocol {protocol!r}")
    if stage not in STAGES:
        raise DomainError(f"unknown stage {stage!r}")
    if not len(taus):
        raise DomainError("sweep grid is empty")
    results = [find_threshold(stage, PROTOCOLS[protocol](t), seed, trials, points, threads) for t in taus]
    slope = loglog_slope([r.instance.value for r in results], [r.fit.n_star for r in results])
    return SweepResult(protocol, stage, results, slope)


# --- calibration --------------------------------------------------------------


def wilson_lower(successes: int, trials: int, z: float = 1.6448536269514722) -> float:
    """One-sided Wilson score lower bound on a binomial proportion (95% by default)."""
    if trials <= 0:
        return 0.0
    p = successes / trials
    denom = 1 + z**2 / trials
    centre = p + z**2 / (2 * trials)
    spread = z * math.sqrt(p * (1 - p) / trials + z**2 / (4 * trials**2))
    return (centre - spread) / denom


def success_rate(inst: Instance, c: float, trials: int, seed: int, epsilon=0.05, epsilon_ratio=1 / 3, threads: int = 1) -> int:
    """Full finite-shot pipeline successes at budget constant ``c``."""
    device = inst.device

    def one(t):
        cfg = RandomizedConfig(
            beta=inst.beta, u_norm_lb=inst.u_norm_lb, epsilon=epsilon, epsilon_ratio=epsilon_ratio,
            c=c, seed=seed, trial=t,
        )
        try:
            res = run_randomized(device, cfg)
        except (SupportError, ConditioningError):
            return False
        return score_result(res, inst.rho, inst.noise, device.povm, epsilon, epsilon_ratio)["success"]

    if threads <= 1:
        return sum(map(one, range(trials)))
    with ThreadPoolExecutor(threads) as pool:
        return sum(pool.map(one, range(trials)))


@dataclass
class Calibration:
    c: float
    reached: bool
    rows: list


DEFAULT_C_GRID = (0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0)


def calibrate(inst: Instance, grid=DEFAULT_C_GRID, trials: int = 50, seed: int = 0, target: float = TARGET, threads: int = 1, **kw) -> Calibration:
    """Smallest ``c`` in the grid whose success rate is at least ``target`` with 95% confidence.

    If no grid value qualifies, returns the one with the best lower bound
    and ``reached=False``.
    """
    if trials < 1:
        raise DomainError("calibration needs at least one trial")
    rows = []
    for c in sorted(grid):
        k = success_rate(inst, c, trials, seed, threads=threads, **kw)
        lb = wilson_lower(k, trials)
        rows.append({"c": c, "successes": k, "trials": trials, "lower_bound": lb})
        if lb >= target:
            return Calibration(c, True, rows)
    best = max(rows, key=lambda r: r["lower_bound"])
    return Calibration(best["c"], False, rows)
