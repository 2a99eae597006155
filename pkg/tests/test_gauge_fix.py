import numpy as np
import pytest

from simtomo.decoder_exact import run_exact
from simtomo.errors import (
    ConditionError,
    DegenerateBlockError,
    DomainError,
    GaugeAmbiguityError,
    GaugeInconsistencyError,
    InsufficientPriorError,
    NearSymmetricError,
    PriorViolatedError,
    UninformativeProbeError,
)
from simtomo.gauge_fix import (
    GaugeSolution,
    apply_gauge_solution,
    decode_bsc,
    decode_linear_prior,
    fix_block_independent,
    fix_probe,
    fix_purity,
)
from simtomo.pauli import Circuit, enumerate_basis, pauli_from_label
from simtomo.povm import computational_povm, random_povm
from simtomo.sim import (
    Device,
    basis_state,
    bit_flip_noise,
    coefficient_vector,
    haar_state_vector,
    noisy_distribution,
    random_noise,
    random_state,
    to_coefficients,
)

P = pauli_from_label


def measured(rho, a, povm):
    return noisy_distribution(rho, a, Circuit(povm.n, ()), povm)


def assert_reconstructs(result, sol, rho, a, povm, tol=1e-8):
    rho_hat, a_hat = apply_gauge_solution(result, sol, povm)
    assert np.abs(rho_hat - rho).max() < tol
    assert np.abs(a_hat - a).max() < tol


@pytest.fixture
def decoded(example):
    return run_exact(*example, reference="ZI")


# --- purity -------------------------------------------------------------------


def test_purity_running_example(example, decoded):
    sol = fix_purity(decoded, 1.0)
    assert sol.alpha == pytest.approx(0.5, abs=1e-12)
    assert sol.diagnostics["min_eigenvalue_minus"] < -1e-8
    assert_reconstructs(decoded, sol, *example)


def test_purity_boundary_rejected(decoded):
    with pytest.raises(DomainError):
        fix_purity(decoded, 0.25)


def test_purity_ambiguous_on_single_qubit():
    result = run_exact(basis_state("0"), np.eye(2), computational_povm(1))
    with pytest.raises(GaugeAmbiguityError):
        fix_purity(result, 1.0)


def pure_state(n, rng):
    psi = haar_state_vector(2**n, rng)
    return np.outer(psi, psi.conj())


@pytest.mark.parametrize("seed", range(100))
def test_purity_random_pure(seed):
    rng = np.random.default_rng(seed)
    n = 2 + seed % 2
    rho, a = pure_state(n, rng), random_noise(2**n, rng, min_u=0.1)
    povm = computational_povm(n)
    result = run_exact(rho, a, povm)
    sol = fix_purity(result, 1.0)
    # exactly one branch survives
    margins = [sol.diagnostics["min_eigenvalue_plus"], sol.diagnostics["min_eigenvalue_minus"]]
    assert sum(m >= -1e-8 for m in margins) == 1
    assert_reconstructs(result, sol, rho, a, povm)


# --- probe --------------------------------------------------------------------


def test_probe_running_example(example, decoded):
    rho, a, povm = example
    probe = basis_state("00")
    sol = fix_probe(decoded, probe, measured(probe, a, povm), povm)
    assert sol.alpha == pytest.approx(0.5, abs=1e-10)


def test_probe_uninformative(example, decoded):
    _, a, povm = example
    mixed = np.eye(4) / 4
    with pytest.raises(UninformativeProbeError):
        fix_probe(decoded, mixed, measured(mixed, a, povm), povm)


def test_probe_perturbed(example, decoded):
    _, a, povm = example
    probe = basis_state("00")
    y = measured(probe, a, povm) + 1e-3 * np.random.default_rng(0).normal(size=4)
    with pytest.raises(GaugeInconsistencyError):
        fix_probe(decoded, probe, y, povm)
    sol = fix_probe(decoded, probe, y, povm, tol=1e-2)
    assert sol.alpha == pytest.approx(0.5, abs=1e-2)
    assert 0 < sol.diagnostics["residual"] < 1e-2


@pytest.mark.parametrize("seed", range(50))
def test_probe_random(seed):
    rng = np.random.default_rng(seed)
    n = 1 + seed % 3
    povm = computational_povm(n) if seed % 2 else random_povm(1, 3, rng)
    n = povm.n
    rho, a = random_state(n, rng), random_noise(povm.num_outcomes, rng, min_u=0.1)
    result = run_exact(rho, a, povm)
    probe = pure_state(n, rng)
    sol = fix_probe(result, probe, measured(probe, a, povm), povm)
    assert_reconstructs(result, sol, rho, a, povm)


# --- block independence -------------------------------------------------------


def test_block_running_example(example, decoded):
    sol = fix_block_independent(decoded, (2, 2))
    assert sol.alpha == pytest.approx(0.5, abs=1e-9)
    assert_reconstructs(decoded, sol, *example, tol=1e-9)


def test_block_not_a_product():
    rng = np.random.default_rng(1)
    povm = computational_povm(2)
    a = random_noise(4, rng, strength=0.6)
    result = run_exact(random_state(2, rng), a, povm)
    with pytest.raises(PriorViolatedError):
        fix_block_independent(result, (2, 2))


def test_block_erasure_factor():
    povm = computational_povm(2)
    a = np.kron(np.full((2, 2), 0.5), np.array([[0.9, 0.2], [0.1, 0.8]]))
    result = run_exact(basis_state("01"), a, povm)
    with pytest.raises(DegenerateBlockError):
        fix_block_independent(result, (2, 2))


@pytest.mark.parametrize("seed", range(50))
def test_block_random_and_agrees_with_probe(seed):
    rng = np.random.default_rng(seed)
    n = 2 + seed % 2
    first = 2 if seed % 4 < 2 else 2 ** (n - 1)
    second = 2**n // first
    a = np.kron(random_noise(first, rng, min_u=0.1), random_noise(second, rng, min_u=0.1))
    rho = random_state(n, rng)
    povm = computational_povm(n)
    result = run_exact(rho, a, povm)
    sol = fix_block_independent(result, (first, second))
    assert_reconstructs(result, sol, rho, a, povm)
    probe = pure_state(n, rng)
    other = fix_probe(result, probe, measured(probe, a, povm), povm)
    assert abs(sol.alpha - other.alpha) < 1e-9


# --- reconstruction -----------------------------------------------------------


def test_apply_alpha_one_is_identity(example):
    rho, a, povm = example
    result = run_exact(rho, a, povm)
    # rescale ratios so the reference coefficient is 1: then alpha = 1 reproduces the truth exactly
    s_ref = to_coefficients(rho)[result.reference]
    rho_1, a_1 = apply_gauge_solution(result, GaugeSolution(s_ref, "given"), povm)
    assert np.allclose(rho_1, rho) and np.allclose(a_1, a)


def test_apply_wrong_alpha_reports(example, decoded):
    # too large a scale pushes the state outside the PSD cone
    with pytest.raises(GaugeInconsistencyError) as err:
        apply_gauge_solution(decoded, GaugeSolution(0.9, "guess"))
    assert err.value.report["state_min_eigenvalue"] < 0
    rec = apply_gauge_solution(decoded, GaugeSolution(0.9, "guess"), strict=False)
    assert rec.margins["state_min_eigenvalue"] < 0
    # too small a scale keeps the state valid but breaks the noise matrix
    with pytest.raises(GaugeInconsistencyError) as err:
        apply_gauge_solution(decoded, GaugeSolution(0.3, "guess"))
    assert err.value.report["state_min_eigenvalue"] >= 0
    with pytest.raises(DomainError):
        apply_gauge_solution(decoded, 0.0)


# --- linear priors ------------------------------------------------------------


def test_linear_prior_full_noise_knowledge(example):
    rho, a, povm = example
    s = coefficient_vector(rho).real
    b = np.zeros(15)
    b[enumerate_basis(2).index(P("ZI"))] = 1.0
    noise_priors = [(np.eye(4)[j], a[:, j]) for j in range(4)]
    coeffs, noise = decode_linear_prior(Device(rho, a, povm), [(b, b @ s)], noise_priors, povm)
    assert np.abs(np.array(list(coeffs.values())) - s).max() < 1e-8
    assert np.abs(noise - a).max() < 1e-8


def test_linear_prior_without_priors(example):
    rho, a, povm = example
    with pytest.raises(InsufficientPriorError):
        decode_linear_prior(Device(rho, a, povm), [], [], povm)


def test_linear_prior_zero_state_value(example):
    rho, a, povm = example
    b = np.zeros(15)
    b[0] = 1.0  # coefficient of IX, which vanishes
    with pytest.raises(InsufficientPriorError):
        decode_linear_prior(Device(rho, a, povm), [(b, 0.0)], [], povm)


def test_linear_prior_erasure():
    povm = computational_povm(1)
    rho = basis_state("0")
    with pytest.raises(ConditionError):
        decode_linear_prior(Device(rho, np.full((2, 2), 0.5), povm), [(np.array([0, 0, 1.0]), 1 / np.sqrt(2))], [], povm)


@pytest.mark.parametrize("seed", range(50))
def test_linear_prior_single_qubit(seed):
    rng = np.random.default_rng(seed)
    povm = computational_povm(1) if seed % 2 else random_povm(1, int(rng.integers(2, 5)), rng)
    rho, a = random_state(1, rng), random_noise(povm.num_outcomes, rng, min_u=0.1)
    s = coefficient_vector(rho).real
    prior = [(np.array([0, 0, 1.0]), s[2])]
    coeffs, noise = decode_linear_prior(Device(rho, a, povm), prior, [], povm)
    assert np.abs(np.array(list(coeffs.values())) - s).max() < 1e-8
    assert np.abs(noise - a).max() < 1e-8


# --- binary symmetric readout -------------------------------------------------


def test_bsc_example():
    povm = computational_povm(2)
    coeffs, flips = decode_bsc(Device(basis_state("01"), bit_flip_noise([0.1, 0.1]), povm), 2)
    assert coeffs[P("ZI")] == pytest.approx(0.5, abs=1e-10)
    assert coeffs[P("IZ")] == pytest.approx(-0.5, abs=1e-10)
    assert coeffs[P("ZZ")] == pytest.approx(-0.5, abs=1e-10)
    assert np.allclose(flips, [0.1, 0.1], atol=1e-10)


def test_bsc_noiseless():
    povm = computational_povm(2)
    coeffs, flips = decode_bsc(Device(basis_state("10"), np.eye(4), povm), 2)
    assert np.allclose(flips, 0) and coeffs[P("ZI")] == pytest.approx(-0.5)


def test_bsc_symmetric_qubit():
    povm = computational_povm(2)
    with pytest.raises(NearSymmetricError):
        decode_bsc(Device(basis_state("01"), bit_flip_noise([0.5, 0.1]), povm), 2)


@pytest.mark.parametrize("n", [2, 3])
def test_bsc_contraction_identity(n):
    rng = np.random.default_rng(n)
    probs = rng.uniform(0, 0.4, size=n)
    rho = random_state(n, rng)
    povm = computational_povm(n)
    y = measured(rho, bit_flip_noise(probs), povm)
    coeffs = to_coefficients(rho)
    k = np.arange(2**n)
    for q in enumerate_basis(n, "z_strings")[1:]:
        parity = np.zeros(2**n, dtype=int)
        for qubit in q.support:
            parity ^= (k >> (n - 1 - qubit)) & 1
        lam = np.prod([1 - 2 * probs[i] for i in q.support])
        assert (1 - 2 * parity) @ y == pytest.approx(lam * coeffs[q].real * 2 ** (n / 2), abs=1e-12)


@pytest.mark.parametrize("seed", range(50))
def test_bsc_random(seed):
    rng = np.random.default_rng(seed)
    n = 2 + seed % 2
    probs = rng.uniform(0, 0.4, size=n)
    rho = random_state(n, rng)
    coeffs, flips = decode_bsc(Device(rho, bit_flip_noise(probs), computational_povm(n)), n)
    truth = to_coefficients(rho)
    for p, v in coeffs.items():
        assert abs(v - truth[p].real) < 1e-8
    assert np.abs(bit_flip_noise(flips) - bit_flip_noise(probs)).max() < 1e-8
