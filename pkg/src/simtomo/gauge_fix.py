"""Fixing the single gauge parameter left by the decoders.

A :class:`~simtomo.decoder_exact.TomographyResult` holds coefficient ratios
``s_P / s_R`` and the noise candidate in the gauge where ``s_R = 1``. Every
method here determines ``alpha = s_R``, after which

    rho = I / 2**n + alpha * sum_P ratio_P P
    A   = (A' - (1 - alpha) d 1^T) / alpha

with ``d`` the identity offset. The binary-symmetric and linear-prior
decoders instead recover state and noise directly from raw distributions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .decoder_exact import EXACT_TOL, TomographyResult, compute_z
from .eliminators import PlanBook, spec_rank_one
from .errors import (
    ConditionError,
    DegeneracyError,
    DegenerateBlockError,
    DimensionError,
    DomainError,
    GaugeAmbiguityError,
    GaugeInconsistencyError,
    InsufficientPriorError,
    NearSymmetricError,
    PriorViolatedError,
    UninformativeProbeError,
)
from .pauli import Circuit, PauliString, enumerate_basis, pauli_stack
from .povm import Povm, m_matrix
from .sim import from_coefficient_vector, is_valid_pair, validity_margins

PSD_TOL = 1e-8


@dataclass(frozen=True)
class GaugeSolution:
    """Value of the reference coefficient plus how it was found."""

    alpha: float
    method: str
    diagnostics: dict = field(default_factory=dict)


def _traceless_operator(result: TomographyResult) -> np.ndarray:
    stack = pauli_stack(result.n, normalized=True)[1:]
    return np.einsum("a,aij->ij", result.ratio_vector(), stack)


def fix_purity(result: TomographyResult, nu: float, povm: Povm | None = None) -> GaugeSolution:
    """Gauge from a known purity ``nu = Tr(rho**2)``.

    The purity fixes ``alpha**2``; the sign is chosen by rejecting the branch
    whose state has a negative eigenvalue.

    Raises
    ------
    DomainError
        If ``nu <= 2**-n`` (the gauge would vanish).
    GaugeAmbiguityError
        If both sign branches give a valid state.
    GaugeInconsistencyError
        If neither branch does.
    """
    dim = 2**result.n
    ratios = result.ratio_vector()
    excess = nu - 1.0 / dim
    if excess <= 0:
        raise DomainError(f"purity {nu} must exceed 1/2**n = {1 / dim}; alpha would be zero")
    magnitude = float(np.sqrt(excess / np.sum(ratios**2)))
    part = _traceless_operator(result)
    margins = {}
    for sign in (1, -1):
        rho = np.eye(dim) / dim + sign * magnitude * part
        margins[sign] = float(np.linalg.eigvalsh(rho).min())
    valid = [s for s in (1, -1) if margins[s] >= -PSD_TOL]
    diag = {"min_eigenvalue_plus": margins[1], "min_eigenvalue_minus": margins[-1]}
    if len(valid) == 2:
        raise GaugeAmbiguityError("both sign branches give a valid state; purity does not fix the gauge")
    if not valid:
        raise GaugeInconsistencyError("no sign branch gives a valid state", diag)
    return GaugeSolution(valid[0] * magnitude, "purity", diag)


def fix_probe(result: TomographyResult, probe_state, measured, povm: Povm, tol: float | None = None) -> GaugeSolution:
    """Gauge from the noisy distribution of a known probe state.

    With ``v = A' y_probe - d`` and ``w = measured - d`` the data satisfy
    ``w = v / alpha``; ``1 / alpha`` is fitted by least squares over all
    outcomes.

    Raises
    ------
    UninformativeProbeError
        If ``v`` vanishes (for example a maximally mixed probe).
    GaugeInconsistencyError
        If the fit residual exceeds ``tol`` (default ``1e-6 * D``).
    """
    y_probe = povm.probabilities(np.asarray(probe_state, dtype=complex))
    measured = np.asarray(measured, dtype=float)
    if measured.shape != y_probe.shape:
        raise DimensionError("measured distribution has the wrong length")
    d = result.offset
    v = result.noise @ y_probe - d * y_probe.sum()
    w = measured - d * y_probe.sum()
    if np.linalg.norm(v) < 1e-9:
        raise UninformativeProbeError("probe response does not depend on the gauge")
    inv_alpha = float(v @ w / (v @ v))
    residual = float(np.abs(inv_alpha * v - w).max())
    limit = 1e-6 * povm.num_outcomes if tol is None else tol
    diag = {"residual": residual}
    if residual > limit:
        raise GaugeInconsistencyError(f"probe fit residual {residual:.3g} exceeds {limit:.3g}", diag)
    if inv_alpha == 0:
        raise GaugeInconsistencyError("probe fit gives an infinite gauge", diag)
    return GaugeSolution(1.0 / inv_alpha, "probe", diag)


def _partial(x, d1, d2):
    x4 = x.reshape(d1, d2, d1, d2)
    return x4.sum(axis=(1, 3)) / d2, x4.sum(axis=(0, 2)) / d1


def fix_block_independent(result: TomographyResult, partition, povm: Povm | None = None, tol: float = 1e-6) -> GaugeSolution:
    """Gauge from noise that factorizes over two outcome blocks.

    Outcome ``k`` splits as ``k = k1 * D2 + k2``. Writing the true noise as
    ``Y + g (A' - Y)`` with ``Y = d 1^T`` and ``g = 1 / alpha``, the
    requirement that it equals the Kronecker product of its two block
    marginals is linear in ``g`` after dividing by ``g``.

    Raises
    ------
    DegenerateBlockError
        If one block marginal is an erasure channel.
    PriorViolatedError
        If no gauge makes the noise factorize.
    """
    d1, d2 = map(int, partition)
    a_prime = np.asarray(result.noise, dtype=float)
    if d1 * d2 != a_prime.shape[0]:
        raise DimensionError(f"partition {partition} does not match {a_prime.shape[0]} outcomes")
    y = np.outer(result.offset, np.ones(a_prime.shape[0]))
    a_y, c_y = _partial(y, d1, d2)
    a_1, a_2 = _partial(a_prime, d1, d2)
    b, e = a_1 - a_y, a_2 - c_y
    lhs = np.kron(b, e)
    rhs = a_prime - y - np.kron(a_y, e) - np.kron(b, c_y)
    idx = np.unravel_index(np.argmax(np.abs(lhs)), lhs.shape)
    if abs(lhs[idx]) < 1e-9:
        raise DegenerateBlockError("a block marginal of the noise is an erasure channel")
    g = rhs[idx] / lhs[idx]
    noise = y + g * (a_prime - y)
    m1, m2 = _partial(noise, d1, d2)
    residual = float(np.abs(noise - np.kron(m1, m2)).max())
    diag = {"factorization_residual": residual, "entry": tuple(int(i) for i in idx)}
    if residual > tol:
        raise PriorViolatedError(f"noise does not factorize over {partition} (residual {residual:.3g})")
    if g == 0:
        raise DegenerateBlockError("gauge solution is degenerate")
    return GaugeSolution(float(1.0 / g), "block_independent", diag)


@dataclass(frozen=True)
class Reconstruction:
    rho: np.ndarray
    noise: np.ndarray
    margins: dict

    def __iter__(self):
        return iter((self.rho, self.noise))


def apply_gauge_solution(result: TomographyResult, sol, povm: Povm | None = None, strict: bool = True) -> Reconstruction:
    """State and noise in the gauge ``alpha = sol.alpha``.

    Unpacks as ``rho, noise``. With ``strict`` an unphysical pair raises
    :class:`GaugeInconsistencyError` carrying the validity margins.
    """
    alpha = sol.alpha if isinstance(sol, GaugeSolution) else float(sol)
    if alpha == 0:
        raise DomainError("gauge parameter must be nonzero")
    rho = from_coefficient_vector(alpha * result.ratio_vector(), result.n)
    y = result.offset[:, None]
    noise = (result.noise - (1 - alpha) * y) / alpha
    margins = validity_margins(rho, noise)
    if strict and not is_valid_pair(margins, PSD_TOL):
        raise GaugeInconsistencyError("reconstruction is not a valid state and noise pair", margins)
    return Reconstruction(rho, noise, margins)


# --- linear prior information -------------------------------------------------


def _complement_rows(rows, dim):
    """Orthonormal rows spanning the orthogonal complement of ``rows``."""
    if rows.shape[0] == 0:
        return np.eye(dim)
    _, sv, vt = np.linalg.svd(rows)
    rank = int(np.sum(sv > 1e-10 * sv[0]))
    return vt[rank:]


def decode_linear_prior(oracle, state_priors, noise_priors, povm: Povm, pool=None, tol: float = EXACT_TOL):
    """State and noise from exact distributions plus linear prior knowledge.

    Parameters
    ----------
    oracle : callable
        Circuit -> noisy distribution.
    state_priors : list of (vector, value)
        Known functionals ``b . s = value`` of the traceless coefficient vector
        ``s`` (basis order). The first one must have a nonzero value.
    noise_priors : list of (vector, image)
        Known products ``A @ b = image``.
    povm : Povm
    pool : sequence of Circuit, optional
        Unitary pool for the numerical eliminators.

    Returns
    -------
    coefficients : dict
        ``P -> s_P`` over the traceless basis.
    noise : ndarray
    """
    n = povm.n
    D = povm.num_outcomes
    basis = enumerate_basis(n)
    if not state_priors:
        raise InsufficientPriorError("at least one state functional with a nonzero value is required")
    b_s = np.array([np.asarray(b, dtype=float) for b, _ in state_priors])
    d_s = np.array([float(v) for _, v in state_priors])
    if abs(d_s[0]) <= tol:
        raise InsufficientPriorError("first state functional must have a nonzero value")
    b_a = np.array([np.asarray(b, dtype=float) for b, _ in noise_priors]).reshape(len(noise_priors), D)
    d_a = np.array([np.asarray(v, dtype=float) for _, v in noise_priors]).reshape(len(noise_priors), D)
    free_a = _complement_rows(b_a, D)
    free_s = _complement_rows(b_s, len(basis))
    all_a = np.vstack([b_a, free_a])

    m = m_matrix(povm, basis)
    tilde = np.linalg.lstsq(m, all_a.T, rcond=None)[0].T
    images = tilde.copy()
    images[:, 0] = 0.0

    plans = PlanBook(povm, basis, pool=pool, force_numeric=True)
    z_id = compute_z(oracle, plans.identity())

    def response(weights, j):
        spec = spec_rank_one(n, weights, images[j], basis, ("linear_prior",))
        return compute_z(oracle, plans.custom(spec))

    # rows of A against every basis vector of R^D
    n_known = b_a.shape[0]
    rhs = np.zeros((D, D))
    rhs[:, :n_known] = d_a.T
    for j in range(n_known, D):
        z_j = response(b_s[0], j)
        rhs[:, j] = (z_j - z_id) / d_s[0] + all_a[j].sum() * z_id
    if abs(np.linalg.det(all_a)) < 1e-12:
        raise InsufficientPriorError("noise prior vectors are linearly dependent")
    noise = np.linalg.solve(all_a, rhs.T).T

    g = noise @ all_a.T - np.outer(z_id, all_a.sum(axis=1))
    k, j = np.unravel_index(np.argmax(np.abs(g)), g.shape)
    if abs(g[k, j]) <= tol:
        raise ConditionError("noise is an erasure channel (condition 1)", 1)
    values = list(d_s)
    for w in free_s:
        z_ij = response(w, j)
        values.append((z_ij[k] - z_id[k]) / g[k, j])
    system = np.vstack([b_s, free_s])
    if np.linalg.matrix_rank(system) < len(basis):
        raise InsufficientPriorError("state prior vectors are linearly dependent")
    s = np.linalg.solve(system, np.array(values))
    return dict(zip(basis, s)), noise


# --- binary symmetric readout -------------------------------------------------


def _character(q: PauliString) -> np.ndarray:
    """``<k|q|k>`` over outcomes ``k`` for a Z-string ``q``."""
    n = q.n
    k = np.arange(2**n)
    parity = np.zeros(2**n, dtype=int)
    for qubit in range(n):
        if q.z_bits[qubit]:
            parity ^= (k >> (n - 1 - qubit)) & 1
    return 1.0 - 2.0 * parity


def _z_string(n, qubits):
    z = [0] * n
    for q in qubits:
        z[q] = 1
    return PauliString(n, [0] * n, z)


def decode_bsc(oracle, n: int, tol: float = EXACT_TOL, min_eigenvalue: float = 1e-6):
    """Diagonal state coefficients and per-qubit flip rates under bit-flip readout.

    Each Z-string ``P`` with support ``S`` is read as ``m_P = <P-character, y>``
    which equals ``lambda_S Tr(rho P)`` with ``lambda_S = prod (1 - 2 p_i)``.
    Flip factors are separated using CNOT and SWAP circuits:

    * ``|S| = 1``, ``S = {i}``, partner ``j``: SWAP(i, j) read on ``Z_j`` gives
      ``lambda_j Tr(rho Z_i)``; CNOT with control ``j`` and target ``i`` read on
      ``Z_i Z_j`` gives ``lambda_i lambda_j Tr(rho Z_i)``.
    * ``|S| >= 2``: for each ``c`` in ``S`` with cyclic successor ``t``,
      CNOT(c, t) read on ``P`` without ``Z_c`` gives ``lambda_{S - c} Tr(rho P)``.

    Returns
    -------
    coefficients : dict
        ``P -> Tr(rho P) / 2**(n/2)`` for every nonidentity Z-string (zero when
        undetected).
    flips : ndarray
        Flip probabilities; NaN for qubits no detected string constrains.

    Raises
    ------
    NearSymmetricError
        If some ``|1 - 2 p_i|`` comes out below ``min_eigenvalue``.
    """
    if n < 2:
        raise DomainError("bit-flip decoding needs at least two qubits")

    def read(q, gates=()):
        return float(_character(q) @ np.asarray(oracle(Circuit(n, tuple(gates))), dtype=float))

    zs = enumerate_basis(n, "z_strings")[1:]
    base = {p: read(p) for p in zs}
    detected = [p for p in zs if abs(base[p]) > tol]
    if not detected:
        raise DegeneracyError("no diagonal signal: state has no Z-string component or a flip rate is 1/2")
    lambdas = {q: [] for q in range(n)}
    coeffs = {}
    for p in zs:
        if p not in detected:
            coeffs[p] = 0.0
            continue
        supp = p.support
        m_id = base[p]
        if len(supp) == 1:
            i = supp[0]
            j = 0 if i != 0 else 1
            m_swap = read(_z_string(n, [j]), [("SWAP", i, j)])
            m_cnot = read(_z_string(n, [i, j]), [("CNOT", j, i)])
            lam_j = m_cnot / m_id
            if abs(lam_j) < min_eigenvalue:
                raise NearSymmetricError(f"flip rate on qubit {j} is indistinguishable from 1/2")
            lam_i = m_cnot / m_swap
            lambdas[i].append(lam_i)
            lambdas[j].append(lam_j)
            coeffs[p] = m_id * m_swap / m_cnot
        else:
            prod = 1.0
            for a, c in enumerate(supp):
                t = supp[(a + 1) % len(supp)]
                reduced = _z_string(n, [q for q in supp if q != c])
                lam_c = m_id / read(reduced, [("CNOT", c, t)])
                if abs(lam_c) < min_eigenvalue:
                    raise NearSymmetricError(f"flip rate on qubit {c} is indistinguishable from 1/2")
                lambdas[c].append(lam_c)
                prod *= lam_c
            coeffs[p] = m_id / prod
    scale = 2 ** (n / 2)
    coeffs = {p: v / scale for p, v in coeffs.items()}
    flips = np.array([(1 - np.mean(lambdas[q])) / 2 if lambdas[q] else np.nan for q in range(n)])
    return coeffs, flips
