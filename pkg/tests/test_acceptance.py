"""Acceptance checks, one per criterion.

Each check prints a single ``PASS``/``FAIL`` line and then asserts. Run with
``pytest tests/test_acceptance.py -s`` or directly as a script.
"""

import time

import numpy as np
import pytest

from simtomo import cli
from simtomo.decoder_exact import run_exact
from simtomo.decoder_rand import RandomizedConfig, run_randomized, score_result
from simtomo.eliminators import (
    plan_E_identity,
    plan_E_pi,
    plan_E_pq,
    spec_identity,
    spec_pi,
    spec_pq,
    verify_plan,
)
from simtomo.errors import (
    ConditioningError,
    DomainError,
    InsufficientPriorError,
    NearSymmetricError,
    PriorViolatedError,
    SupportError,
    UninformativeProbeError,
)
from simtomo.gauge_fix import (
    apply_gauge_solution,
    decode_bsc,
    decode_linear_prior,
    fix_block_independent,
    fix_probe,
    fix_purity,
)
from simtomo.pauli import Circuit, enumerate_basis
from simtomo.povm import Povm, computational_povm, covariance, independence_rank, random_povm, reduce_povm
from simtomo.scaling import calibrate, run_sweep, running_example
from simtomo.sim import (
    Device,
    basis_state,
    bit_flip_noise,
    coefficient_vector,
    gauge_transform,
    haar_state_vector,
    haar_unitary,
    ideal_distribution,
    m_norm,
    noisy_distribution,
    random_noise,
    random_state,
    to_coefficients,
    u_norm,
)

GOLDEN_TOL = 0.005
GOLDEN_RUNTIME = 1.0
TV_TOL = 1e-10
ELIMINATOR_TOL = 1e-12
ELIMINATOR_RUNTIME = 60.0
EXACT_TOL = 1e-8
GAUGE_TOL = 1e-8
NOISE_EPS = 0.05
RATIO_EPS = 1 / 3
FINITE_SHOT_RATE = 0.9
FINITE_SHOT_RUNTIME = 600.0
SLOPE, SLOPE_TOL = -2.0, 0.4
SWEEP_RUNTIME = 1800.0

SWEEPS = {
    ("noise", "support"): [0.05, 0.15, 0.25, 0.35],
    ("noise", "ratio"): [0.05, 0.15, 0.25, 0.35],
    ("beta", "support"): [0.04, 0.08, 0.12, 0.17],
    ("beta", "ratio"): [0.04, 0.08, 0.12, 0.17],
}


def report(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    print(line)
    return ok


def pure_state(n, rng):
    psi = haar_state_vector(2**n, rng)
    return np.outer(psi, psi.conj())


def measured(rho, a, povm):
    return noisy_distribution(rho, a, Circuit(povm.n, ()), povm)


def reconstruction_error(result, sol, rho, a, povm):
    rho_hat, a_hat = apply_gauge_solution(result, sol, povm)
    return max(np.abs(rho_hat - rho).max(), np.abs(a_hat - a).max())


# --- 1: running example -------------------------------------------------------


def check_golden():
    start = time.perf_counter()
    _, tables, *_ = cli.example_tables()
    elapsed = time.perf_counter() - start
    worst = max(
        float(np.abs(np.asarray(tables[k], dtype=float) - np.asarray(v)).max()) for k, v in cli.GOLDEN.items()
    )
    ok = worst <= GOLDEN_TOL and elapsed < GOLDEN_RUNTIME
    return report(1, ok, f"max deviation {worst:.4f} (tol {GOLDEN_TOL}), runtime {elapsed:.3f} s")


# --- 2: gauge invariance ------------------------------------------------------


def check_gauge_invariance():
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = 1 + seed % 3
        povm = computational_povm(n)
        rho, a = random_state(n, rng), random_noise(2**n, rng)
        alpha = rng.uniform(0.3, 1.7)
        rho2, a2 = gauge_transform(rho, a, alpha, povm)
        for _ in range(20):
            u = haar_unitary(2**n, rng)
            y1 = a @ ideal_distribution(rho, u, povm)
            y2 = a2 @ ideal_distribution(rho2, u, povm)
            worst = max(worst, 0.5 * np.abs(y1 - y2).sum())
    return report(2, worst < TV_TOL, f"max TV distance {worst:.2e} over 100 pairs x 20 unitaries")


# --- 3: eliminators -----------------------------------------------------------


def check_eliminators():
    start = time.perf_counter()
    worst, count = 0.0, 0
    for n in (2, 3):
        povm = computational_povm(n)
        worst = max(worst, verify_plan(plan_E_identity(n), spec_identity(n), povm))
        count += 1
    povm = computational_povm(2)
    for p in enumerate_basis(2):
        for i in range(4):
            worst = max(worst, verify_plan(plan_E_pi(p, i), spec_pi(povm, p, i), povm))
            count += 1
        for q in enumerate_basis(2, "z_strings")[1:]:
            worst = max(worst, verify_plan(plan_E_pq(p, q), spec_pq(p, q), povm))
            count += 1
    rng = np.random.default_rng(3)
    povm = computational_povm(3)
    basis, zs = enumerate_basis(3), enumerate_basis(3, "z_strings")[1:]
    for _ in range(50):
        p, q, i = basis[rng.integers(len(basis))], zs[rng.integers(len(zs))], int(rng.integers(8))
        worst = max(worst, verify_plan(plan_E_pi(p, i), spec_pi(povm, p, i), povm))
        worst = max(worst, verify_plan(plan_E_pq(p, q), spec_pq(p, q), povm))
        count += 2
    elapsed = time.perf_counter() - start
    ok = worst < ELIMINATOR_TOL and elapsed < ELIMINATOR_RUNTIME
    return report(3, ok, f"max residual {worst:.2e} over {count} plans, runtime {elapsed:.1f} s")


# --- 4: exact round trip ------------------------------------------------------


def check_round_trip():
    worst, support_ok = 0.0, 0
    for seed in range(200):
        rng = np.random.default_rng(10_000 + seed)
        n = 1 + seed % 3
        povm = computational_povm(n)
        while True:
            rho = random_state(n, rng)
            a = random_noise(2**n, rng, min_u=0.1)
            if m_norm(to_coefficients(rho)) >= 0.1 and u_norm(a) >= 0.1:
                break
        result = run_exact(rho, a, povm)
        coeffs = to_coefficients(rho)
        truth = tuple(p for p in enumerate_basis(n) if abs(coeffs[p]) > 1e-9)
        support_ok += result.support == truth
        s_ref = coeffs[result.reference]
        _, a_ref = gauge_transform(rho, a, s_ref, povm)
        worst = max(worst, np.abs(result.noise - a_ref).max())
        for p, v in result.ratios.items():
            worst = max(worst, abs(v - coeffs[p] / s_ref))
    ok = support_ok == 200 and worst < EXACT_TOL
    return report(4, ok, f"support exact in {support_ok}/200, max noise/ratio error {worst:.2e}")


# --- 5: gauge fixing ----------------------------------------------------------


def gauge_purity(seed):
    rng = np.random.default_rng(seed)
    n = 2 + seed % 2
    povm = computational_povm(n)
    rho, a = pure_state(n, rng), random_noise(2**n, rng, min_u=0.1)
    result = run_exact(rho, a, povm)
    return reconstruction_error(result, fix_purity(result, 1.0), rho, a, povm)


def gauge_probe(seed):
    rng = np.random.default_rng(seed)
    n = 1 + seed % 3
    povm = computational_povm(n)
    rho, a = random_state(n, rng), random_noise(2**n, rng, min_u=0.1)
    result = run_exact(rho, a, povm)
    probe = pure_state(n, rng)
    sol = fix_probe(result, probe, measured(probe, a, povm), povm)
    return reconstruction_error(result, sol, rho, a, povm)


def gauge_block(seed):
    rng = np.random.default_rng(seed)
    n = 2 + seed % 2
    first = 2 if seed % 4 < 2 else 2 ** (n - 1)
    second = 2**n // first
    a = np.kron(random_noise(first, rng, min_u=0.1), random_noise(second, rng, min_u=0.1))
    rho = random_state(n, rng)
    povm = computational_povm(n)
    result = run_exact(rho, a, povm)
    return reconstruction_error(result, fix_block_independent(result, (first, second)), rho, a, povm)


def gauge_linear_prior(seed):
    rng = np.random.default_rng(seed)
    povm = computational_povm(1) if seed % 2 else random_povm(1, int(rng.integers(2, 5)), rng)
    rho, a = random_state(1, rng), random_noise(povm.num_outcomes, rng, min_u=0.1)
    s = coefficient_vector(rho).real
    coeffs, noise = decode_linear_prior(Device(rho, a, povm), [(np.array([0, 0, 1.0]), s[2])], [], povm)
    return max(np.abs(np.array(list(coeffs.values())) - s).max(), np.abs(noise - a).max())


def gauge_bsc(seed):
    rng = np.random.default_rng(seed)
    n = 2 + seed % 2
    probs = rng.uniform(0, 0.4, size=n)
    rho = random_state(n, rng)
    coeffs, flips = decode_bsc(Device(rho, bit_flip_noise(probs), computational_povm(n)), n)
    truth = to_coefficients(rho)
    err = max(abs(v - truth[p].real) for p, v in coeffs.items())
    return max(err, np.abs(np.asarray(flips) - probs).max())


GAUGE_METHODS = {
    "purity": gauge_purity,
    "probe": gauge_probe,
    "block": gauge_block,
    "linear_prior": gauge_linear_prior,
    "bsc": gauge_bsc,
}


def incompatible_cases():
    """Each method on an instance outside its assumptions, with the expected error."""
    povm = computational_povm(2)
    rng = np.random.default_rng(99)
    rho, a = basis_state("01"), bit_flip_noise([0.1, 0.1])
    example = run_exact(rho, a, povm, reference="ZI")
    mixed = np.eye(4) / 4
    correlated = random_noise(4, rng, strength=0.6)
    return {
        "purity": (DomainError, lambda: fix_purity(example, 0.25)),
        "probe": (UninformativeProbeError, lambda: fix_probe(example, mixed, measured(mixed, a, povm), povm)),
        "block": (
            PriorViolatedError,
            lambda: fix_block_independent(run_exact(random_state(2, rng), correlated, povm), (2, 2)),
        ),
        "linear_prior": (InsufficientPriorError, lambda: decode_linear_prior(Device(rho, a, povm), [], [], povm)),
        "bsc": (NearSymmetricError, lambda: decode_bsc(Device(rho, bit_flip_noise([0.5, 0.1]), povm), 2)),
    }


def check_gauge_fixing():
    errors = {name: max(fn(seed) for seed in range(50)) for name, fn in GAUGE_METHODS.items()}
    raised = {}
    for name, (exc, call) in incompatible_cases().items():
        try:
            call()
            raised[name] = False
        except exc:
            raised[name] = True
    ok = all(e < GAUGE_TOL for e in errors.values()) and all(raised.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in errors.items())
    return report(5, ok, f"max errors over 50 instances: {detail}; designated errors raised {sum(raised.values())}/5")


# --- 6: finite shots ----------------------------------------------------------


def check_finite_shot():
    start = time.perf_counter()
    inst = running_example()
    cal = calibrate(inst, trials=50, seed=0)
    # held-out seeds: scored separately from the calibration run
    noise_ok = ratio_ok = 0
    for trial in range(50):
        cfg = RandomizedConfig(beta=inst.beta, u_norm_lb=inst.u_norm_lb, c=cal.c, seed=1000, trial=trial)
        try:
            res = run_randomized(inst.device, cfg)
        except (SupportError, ConditioningError):
            continue
        score = score_result(res, inst.rho, inst.noise, inst.device.povm, NOISE_EPS, RATIO_EPS)
        noise_ok += score["noise_error"] <= NOISE_EPS
        ratio_ok += score["support_ok"] and score["ratio_error"] <= RATIO_EPS
    elapsed = time.perf_counter() - start
    ok = min(noise_ok, ratio_ok) >= FINITE_SHOT_RATE * 50 and elapsed < FINITE_SHOT_RUNTIME
    return report(
        6, ok,
        f"calibrated c={cal.c}; noise within {NOISE_EPS} in {noise_ok}/50, ratios within 1/3 in {ratio_ok}/50, "
        f"runtime {elapsed:.1f} s",
    )


# --- 7: scaling law -----------------------------------------------------------


def check_scaling(protocol, stage):
    start = time.perf_counter()
    res = run_sweep(protocol, stage, SWEEPS[(protocol, stage)], seed=1, trials=50, points=12)
    elapsed = time.perf_counter() - start
    ok = abs(res.slope - SLOPE) <= SLOPE_TOL and elapsed < SWEEP_RUNTIME
    return report(7, ok, f"{protocol}/{stage} sweep slope {res.slope:.3f} (target {SLOPE} +/- {SLOPE_TOL}), {elapsed:.1f} s")


# --- 8: POVM structure --------------------------------------------------------


def check_povm_structure():
    worst_rows, rank_ok, null_ok, reduce_ok = 0.0, 0, 0, 0
    cases = 0
    for seed in range(30):
        rng = np.random.default_rng(seed)
        n = 1 + seed % 2
        outcomes = int(rng.integers(2, 4**n + 1)) if n == 1 else 4
        povm = random_povm(n, outcomes, rng) if seed % 3 else computational_povm(n)
        c = covariance(povm)
        d = povm.num_outcomes
        worst_rows = max(worst_rows, np.abs(c.sum(axis=1)).max())
        rank_ok += np.linalg.matrix_rank(c, tol=1e-9) == d - 1
        w, v = np.linalg.eigh(c)
        null = v[:, np.abs(w) < 1e-9]
        null_ok += null.shape[1] == 1 and np.allclose(np.abs(null[:, 0]), 1 / np.sqrt(d))
        # a dependent version: split the last element in two
        els = povm.elements
        dep = Povm(n, np.concatenate([els[:-1], els[-1:] / 2, els[-1:] / 2]))
        reduced, p = reduce_povm(dep)
        valid = (
            independence_rank(reduced) == reduced.num_outcomes
            and min(np.linalg.eigvalsh(m).min() for m in reduced.elements) > -1e-10
            and np.abs(reduced.elements.sum(axis=0) - np.eye(2**n)).max() < 1e-10
        )
        rho = random_state(n, rng)
        reduce_ok += valid and np.allclose(reduced.probabilities(rho), p @ dep.probabilities(rho), atol=1e-12)
        cases += 1
    ok = worst_rows < 1e-12 and rank_ok == null_ok == reduce_ok == cases
    return report(
        8, ok,
        f"row sums {worst_rows:.1e}; rank D-1 {rank_ok}/{cases}; null space {null_ok}/{cases}; reduction {reduce_ok}/{cases}",
    )


# --- pytest entry points ------------------------------------------------------


def _run(capsys, fn, *args):
    with capsys.disabled():
        print()
        ok = fn(*args)
    assert ok


def test_criterion_1_golden(capsys):
    _run(capsys, check_golden)


def test_criterion_2_gauge_invariance(capsys):
    _run(capsys, check_gauge_invariance)


def test_criterion_3_eliminators(capsys):
    _run(capsys, check_eliminators)


def test_criterion_4_round_trip(capsys):
    _run(capsys, check_round_trip)


def test_criterion_5_gauge_fixing(capsys):
    _run(capsys, check_gauge_fixing)


@pytest.mark.slow
def test_criterion_6_finite_shot(capsys):
    _run(capsys, check_finite_shot)


@pytest.mark.slow
@pytest.mark.parametrize("protocol,stage", list(SWEEPS))
def test_criterion_7_scaling(capsys, protocol, stage):
    _run(capsys, check_scaling, protocol, stage)


def test_criterion_8_povm_structure(capsys):
    _run(capsys, check_povm_structure)


if __name__ == "__main__":
    results = [
        check_golden(),
        check_gauge_invariance(),
        check_eliminators(),
        check_round_trip(),
        check_gauge_fixing(),
        check_finite_shot(),
        *(check_scaling(p, s) for p, s in SWEEPS),
        check_povm_structure(),
    ]
    raise SystemExit(0 if all(results) else 1)
