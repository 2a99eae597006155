import math
from dataclasses import replace

import numpy as np
import pytest

from simtomo.errors import DomainError
from simtomo.scaling import (
    beta_sweep_instance,
    calibrate,
    count_successes,
    find_threshold,
    fit_threshold,
    flip_family_noise,
    loglog_slope,
    mixed_family_state,
    noise_sweep_instance,
    run_sweep,
    running_example,
    wilson_lower,
)
from simtomo.sim import is_valid_pair, to_coefficients, u_norm, validity_margins


def test_flip_family_u_norm():
    for tau in (0.0, 0.1, 0.3):
        assert u_norm(flip_family_noise(tau)) == pytest.approx((0.5 - tau) * (1.5 - tau), rel=1e-12)


@pytest.mark.parametrize("tau", [0.0, 0.05, 0.17])
def test_mixed_family_is_valid(tau):
    rho = mixed_family_state(tau)
    assert is_valid_pair(validity_margins(rho, np.eye(4)))
    coeffs = to_coefficients(rho)
    assert max(abs(v) for v in coeffs.values()) == pytest.approx(2 * tau, abs=1e-12)


def test_mixed_family_rejects_large_tau():
    with pytest.raises(DomainError):
        mixed_family_state(0.2)


@pytest.mark.parametrize("a,b", [(-20.0, 3.0), (-12.0, 1.5)])
def test_logistic_fit_recovers_threshold(a, b):
    shots = np.exp(np.linspace(4, 12, 12))
    probs = 1 / (1 + np.exp(-(a + b * np.log(shots))))
    trials = 10**6
    fit = fit_threshold(shots, np.round(probs * trials), trials)
    expected = math.exp((math.log(9) - a) / b)
    assert fit.method == "logistic" and not fit.flagged
    assert fit.n_star == pytest.approx(expected, rel=1e-2)


def test_separated_data_falls_back():
    fit = fit_threshold([100, 200, 400, 800], [0, 0, 50, 50], 50)
    assert fit.flagged and fit.method == "interpolation"
    assert 200 <= fit.n_star <= 400


def wilson_oracle(k, m, z):
    # root of (k/m - p)^2 m = z^2 p(1-p) below k/m
    roots = np.roots([m + z**2, -(2 * k + z**2), k**2 / m])
    return min(roots.real)


@pytest.mark.parametrize("k,m", [(49, 50), (50, 50), (45, 50), (10, 20)])
def test_wilson_lower(k, m):
    z = 1.6448536269514722
    assert wilson_lower(k, m) == pytest.approx(wilson_oracle(k, m, z), abs=1e-12)
    assert wilson_lower(k, m) < k / m


def test_loglog_slope_exact_power_law():
    x = np.array([0.1, 0.2, 0.4])
    assert loglog_slope(x, 7 * x**-2) == pytest.approx(-2, abs=1e-12)


def test_count_successes_thread_independent():
    inst = running_example()
    one = count_successes("support", inst, 4000, 20, seed=3, threads=1)
    four = count_successes("support", inst, 4000, 20, seed=3, threads=4)
    assert one == four


def test_find_threshold_validation():
    with pytest.raises(DomainError):
        find_threshold("support", running_example(), trials=0)


def test_sweep_rejects_bad_input():
    with pytest.raises(DomainError):
        run_sweep("noise", "support", [], trials=20)
    with pytest.raises(DomainError):
        run_sweep("purity", "support", [0.1], trials=20)


def test_small_sweep_reproducible():
    a = run_sweep("noise", "support", [0.05, 0.25], seed=2, trials=20, points=6)
    b = run_sweep("noise", "support", [0.05, 0.25], seed=2, trials=20, points=6)
    assert a.point_rows() == b.point_rows()
    # harder noise needs more shots
    assert a.thresholds[1].fit.n_star > a.thresholds[0].fit.n_star
    assert len(a.summary_rows()) == 2


def test_instances_lower_bounds():
    inst = noise_sweep_instance(0.2)
    assert inst.u_norm_lb == pytest.approx(u_norm(inst.noise))
    assert beta_sweep_instance(0.1).beta == pytest.approx(0.1)


def test_calibration_easy_needs_no_more_than_hard():
    hard = running_example()
    easy = replace(hard, noise=np.eye(4), u_norm_lb=u_norm(np.eye(4)))
    c_hard = calibrate(hard, trials=30, seed=0)
    c_easy = calibrate(easy, trials=30, seed=0)
    assert c_easy.c <= c_hard.c
    assert c_hard.rows[-1]["lower_bound"] >= 0.9 or not c_hard.reached


def test_calibration_zero_trials():
    with pytest.raises(DomainError):
        calibrate(running_example(), trials=0)
