"""Finite-shot simultaneous tomography with randomized Clifford measurements.

Every eliminator response is estimated by drawing, shot by shot, one
circuit uniformly from the plan's circuit set and recording one outcome.
The state-eliminating response uses all X-strings; the response of ``P``
mapped onto a diagonal string ``Q`` uses the X-strings commuting with
``Q`` after the Clifford taking ``P`` to ``Q``. Responses for POVM
elements are then fixed affine combinations of those estimates.

Computational basis only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .decoder_exact import TomographyResult, ZValues, choose_reference
from .eliminators import hadamard_coefficient
from .errors import BudgetError, ConditioningError, SupportError
from .pauli import PauliString, commutes, enumerate_basis, pauli_circuit, synthesize_clifford_map
from .sim import rng_stream

SUPPORT_MARGIN = 1.005


# --- circuit sets -------------------------------------------------------------


def identity_circuits(n: int) -> list:
    return [pauli_circuit(x) for x in enumerate_basis(n, "x_strings")]


def pq_circuits(p: PauliString, q: PauliString) -> list:
    u_pq = synthesize_clifford_map(p, q)
    return [u_pq.then(pauli_circuit(x)) for x in enumerate_basis(p.n, "x_strings") if commutes(x, q)]


def sample_mixture(sampler, circuits, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Outcome counts when each shot runs a uniformly random circuit from the set."""
    if shots < 0:
        raise BudgetError("shot count must be nonnegative")
    per_circuit = rng.multinomial(int(shots), np.full(len(circuits), 1.0 / len(circuits)))
    counts = None
    for circ, m in zip(circuits, per_circuit):
        p = np.clip(np.asarray(sampler(circ), dtype=float), 0.0, None)
        c = rng.multinomial(int(m), p / p.sum())
        counts = c if counts is None else counts + c
    return counts


def _frequencies(counts, shots):
    if shots < 1:
        raise BudgetError("at least one shot is required per estimate")
    return counts / shots


def estimate_z_identity(sampler, shots: int, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Unbiased estimate of the state-eliminated response."""
    n = sampler.n if n is None else n
    return _frequencies(sample_mixture(sampler, identity_circuits(n), shots, rng), shots)


def estimate_z_pq(sampler, p: PauliString, q: PauliString, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Unbiased estimate of the response of ``p`` mapped onto ``q``."""
    return _frequencies(sample_mixture(sampler, pq_circuits(p, q), shots, rng), shots)


def hadamard_table(n: int) -> np.ndarray:
    """``H[i, j]`` for outcome ``i`` and the ``j``-th nonidentity Z-string."""
    zs = enumerate_basis(n, "z_strings")[1:]
    return np.array([[hadamard_coefficient(i, q) for q in zs] for i in range(2**n)])


def estimate_z_pi(z_identity, z_pq: dict, p: PauliString, i: int) -> np.ndarray:
    """Combine response estimates into the ``(p, i)`` response.

    ``z_pq`` maps each nonidentity Z-string to its estimate.
    """
    n = p.n
    zs = enumerate_basis(n, "z_strings")[1:]
    h = np.array([hadamard_coefficient(i, q) for q in zs])
    out = (1.0 - h.sum()) * np.asarray(z_identity, dtype=float)
    for hq, q in zip(h, zs):
        out = out + hq * np.asarray(z_pq[q], dtype=float)
    return out


def _combine(z_id, zpq_rows, h):
    # rows [i, k] = (1 - sum_j h[i, j]) z_id[k] + sum_j h[i, j] zpq_rows[j, k]
    return (1.0 - h.sum(axis=1))[:, None] * z_id[None, :] + h @ zpq_rows


def split_shots(n: int, num_paulis: int, total: int):
    """Per-(P, Q) shots ``N1`` and identity shots ``2**n * N1`` within a total."""
    per_pq = total // (2**n + num_paulis * (2**n - 1))
    if per_pq < 1:
        raise BudgetError(f"budget of {total} shots too small for {num_paulis} strings at n={n}")
    return per_pq, 2**n * per_pq


def estimate_table(sampler, paulis, total_shots: int, rng: np.random.Generator, n: int | None = None) -> ZValues:
    """Estimate ``z^I`` and ``z^{P,i}`` for the given strings within one budget."""
    n = sampler.n if n is None else n
    paulis = tuple(paulis)
    per_pq, per_id = split_shots(n, len(paulis), total_shots)
    zs = enumerate_basis(n, "z_strings")[1:]
    h = hadamard_table(n)
    z_id = estimate_z_identity(sampler, per_id, rng, n)
    var_id = z_id * (1 - z_id) / per_id
    table, stderr, shots = {}, {"I": np.sqrt(var_id)}, {"I": per_id}
    for p in paulis:
        rows = np.array([estimate_z_pq(sampler, p, q, per_pq, rng) for q in zs])
        table[p] = _combine(z_id, rows, h)
        var = (1.0 - h.sum(axis=1))[:, None] ** 2 * var_id[None, :] + (h**2) @ (rows * (1 - rows) / per_pq)
        stderr[p] = np.sqrt(var)
        shots[p] = per_pq * len(zs)
    return ZValues(z_id, table, "estimated", shots, stderr)


# --- decoding steps -----------------------------------------------------------


def support_threshold(z: ZValues, beta: float, u_norm_lb: float, margin: float = SUPPORT_MARGIN) -> tuple:
    """Strings whose largest estimated signal reaches ``margin * beta * u_norm_lb``."""
    cut = margin * beta * u_norm_lb
    found = tuple(p for p in z.pauli if z.signal(p).max() >= cut)
    if not found:
        raise SupportError(
            f"no signal reached {cut:.3g}; increase the shot budget or lower beta"
        )
    return found


def noise_from_estimates(z: ZValues, reference: PauliString) -> np.ndarray:
    """Noise candidate ``A'[k, i] = z^{R,i}_k`` in the gauge with unit reference coefficient."""
    return np.asarray(z.pauli[reference]).T.copy()


def ratios_from_estimates(z: ZValues, reference, support, beta: float, u_norm_lb: float, pivot=None):
    """Coefficient ratios at the entry where the reference signal is largest.

    Returns
    -------
    ratios : dict
    errors : dict
        One-standard-error bars from first-order propagation.
    pivot : tuple (i, k)

    Raises
    ------
    ConditioningError
        If the reference signal at the pivot is below ``beta * u_norm_lb / 2``.
    """
    if pivot is None:
        pivot = tuple(int(v) for v in np.unravel_index(np.argmax(z.signal(reference)), z.pauli[reference].shape))
    i, k = pivot
    denom = z.pauli[reference][i, k] - z.identity[k]
    if abs(denom) < beta * u_norm_lb / 2:
        raise ConditioningError(
            f"reference signal {denom:.3g} below {beta * u_norm_lb / 2:.3g}; more shots are needed"
        )
    ratios, errors = {}, {}
    d_err = z.stderr[reference][i, k] if reference in z.stderr else 0.0
    for p in support:
        if p == reference:
            ratios[p], errors[p] = 1.0, 0.0
            continue
        num = z.pauli[p][i, k] - z.identity[k]
        ratios[p] = float(num / denom)
        n_err = z.stderr[p][i, k] if p in z.stderr else 0.0
        errors[p] = float(math.hypot(n_err / abs(denom), abs(num) * d_err / denom**2))
    return ratios, errors, pivot


# --- budgets ------------------------------------------------------------------


@dataclass(frozen=True)
class ShotBudget:
    """Shot totals for the three stages and the parameters behind them."""

    support: int
    noise: int
    pivot: int
    ratio: int
    params: dict = field(default_factory=dict)


def shot_budget(
    n: int,
    beta: float,
    epsilon: float,
    delta: float,
    u_norm_lb: float,
    c: float = 1.0,
    epsilon_ratio: float | None = None,
    support_size: int = 1,
    strict: bool = True,
) -> ShotBudget:
    """Explicit shot budgets with a configurable constant ``c``.

    With ``L = c n + ln(1/delta)``:

    * support detection: ``8**n L / (beta u)**2``
    * noise to additive ``epsilon``: ``2**n L / epsilon**2``
    * pivot re-estimation at additive ``beta u / 4``: ``2**n L / (beta u / 4)**2``
    * ratios to relative ``epsilon_ratio``: ``2**n |C| L / (epsilon_ratio beta u)**2``

    ``strict`` enforces ``epsilon_ratio < beta / 2``.
    """
    eps_r = epsilon if epsilon_ratio is None else epsilon_ratio
    if not 0 < beta <= 1 or not 0 < u_norm_lb <= 1:
        raise BudgetError("beta and u_norm_lb must lie in (0, 1]")
    if not 0 < delta < 1 or epsilon <= 0 or eps_r <= 0 or c <= 0:
        raise BudgetError("need 0 < delta < 1 and positive epsilon and c")
    if strict and eps_r >= beta / 2:
        raise BudgetError(f"ratio accuracy {eps_r} must be below beta/2 = {beta / 2}")
    log_term = c * n + math.log(1 / delta)
    bu2 = (beta * u_norm_lb) ** 2
    return ShotBudget(
        support=math.ceil(8**n * log_term / bu2),
        noise=math.ceil(2**n * log_term / epsilon**2),
        pivot=math.ceil(2**n * log_term / (bu2 / 16)),
        ratio=math.ceil(2**n * support_size * log_term / (eps_r**2 * bu2)),
        params=dict(n=n, beta=beta, epsilon=epsilon, epsilon_ratio=eps_r, delta=delta, u_norm_lb=u_norm_lb, c=c),
    )


# --- full pipeline ------------------------------------------------------------


@dataclass(frozen=True)
class RandomizedConfig:
    """Parameters of one finite-shot decoding run.

    ``budget`` overrides the computed budgets; ``reuse_shots`` reuses the
    support-stage estimates for the noise and ratio stages instead of drawing
    fresh shots.
    """

    beta: float
    u_norm_lb: float
    epsilon: float = 0.05
    epsilon_ratio: float = 1 / 3
    delta: float = 0.1
    c: float = 1.0
    seed: int = 0
    trial: int = 0
    reuse_shots: bool = False
    strict: bool = False
    budget: ShotBudget | None = None
    reference: PauliString | None = None


# stream ids per stage, keyed under (seed, trial)
STAGE_SUPPORT, STAGE_NOISE, STAGE_PIVOT, STAGE_RATIO = 1, 2, 3, 4


def run_randomized(sampler, config: RandomizedConfig) -> TomographyResult:
    """Support detection, noise estimate and ratio estimate from sampled shots.

    Each stage draws from its own random stream keyed by
    ``(config.seed, config.trial, stage)``, so results are reproducible and
    trials are independent.
    """
    n = sampler.n
    basis = enumerate_basis(n)
    budget = config.budget or shot_budget(
        n, config.beta, config.epsilon, config.delta, config.u_norm_lb, config.c,
        config.epsilon_ratio, strict=config.strict,
    )
    if min(budget.support, budget.noise, budget.pivot) <= 0:
        raise BudgetError("every stage needs a positive shot budget")

    def stream(stage):
        return rng_stream(config.seed, config.trial, stage)

    z1 = estimate_table(sampler, basis, budget.support, stream(STAGE_SUPPORT), n)
    support = support_threshold(z1, config.beta, config.u_norm_lb)
    reference = config.reference if config.reference in support else choose_reference(z1, support)

    if config.reuse_shots:
        z2 = z1
    else:
        z2 = estimate_table(sampler, [reference], budget.noise, stream(STAGE_NOISE), n)
    noise = noise_from_estimates(z2, reference)

    if config.reuse_shots:
        z3a = z3b = z1
        ratio_shots = 0
    else:
        z3a = estimate_table(sampler, [reference], budget.pivot, stream(STAGE_PIVOT), n)
        ratio_shots = budget.ratio if config.budget else shot_budget(
            n, config.beta, config.epsilon, config.delta, config.u_norm_lb, config.c,
            config.epsilon_ratio, support_size=len(support), strict=config.strict,
        ).ratio
        z3b = estimate_table(sampler, support, ratio_shots, stream(STAGE_RATIO), n)
    _, _, pivot = ratios_from_estimates(z3a, reference, [reference], config.beta, config.u_norm_lb)
    ratios, errors, pivot = ratios_from_estimates(
        z3b, reference, support, config.beta, config.u_norm_lb, pivot=pivot
    )
    shots = {
        "support": budget.support,
        "noise": 0 if config.reuse_shots else budget.noise,
        "pivot": 0 if config.reuse_shots else budget.pivot,
        "ratio": ratio_shots,
    }
    return TomographyResult(
        n=n,
        support=support,
        reference=reference,
        pivot=pivot,
        ratios=ratios,
        noise=noise,
        offset=z2.identity.copy(),
        errors=errors,
        diagnostics={"shots": shots, "total_shots": sum(shots.values())},
        z=z1,
    )


def score_result(result: TomographyResult, rho, a, povm, epsilon=0.05, epsilon_ratio=1 / 3) -> dict:
    """Compare a decoded result against ground truth.

    ``support_ok`` checks exact support recovery; ``noise_error`` is the
    largest entry error of the noise candidate against the gauge-transformed
    truth; ``ratio_error`` the largest relative ratio error.
    """
    from .sim import gauge_transform, to_coefficients

    coeffs = to_coefficients(rho)
    true_support = tuple(p for p in enumerate_basis(result.n) if abs(coeffs[p]) > 1e-12)
    s_ref = coeffs[result.reference]
    if s_ref == 0:
        return {"support_ok": False, "noise_error": math.inf, "ratio_error": math.inf, "success": False}
    _, a_ref = gauge_transform(rho, a, s_ref, povm)
    noise_err = float(np.abs(result.noise - a_ref).max())
    rel = [abs(result.ratios[p] - coeffs[p] / s_ref) / abs(coeffs[p] / s_ref) for p in result.support if coeffs[p] != 0]
    ratio_err = max(rel) if rel else math.inf
    support_ok = tuple(result.support) == true_support
    return {
        "support_ok": support_ok,
        "noise_error": noise_err,
        "ratio_error": float(ratio_err),
        "success": bool(support_ok and noise_err <= epsilon and ratio_err <= epsilon_ratio),
    }
