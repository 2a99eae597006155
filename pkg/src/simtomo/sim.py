"""Ground-truth simulation: states, readout noise, distributions, gauge family, shots.

Noise matrices are column stochastic and act on ideal distributions as
``noisy = A @ ideal``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import DimensionError, DomainError
from .pauli import Circuit, circuit_unitary, enumerate_basis, pauli_dense, pauli_stack
from .povm import Povm, pauli_coordinates

STATE_TOL = 1e-10
STATE_EIG_TOL = 1e-9
NOISE_TOL = 1e-10


# --- validation ---------------------------------------------------------------


def check_state(rho: np.ndarray, n: int | None = None) -> np.ndarray:
    """Validate a density matrix and return it as a complex array."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError("density matrix must be square")
    dim = rho.shape[0]
    if dim & (dim - 1) or (n is not None and dim != 2**n):
        raise DimensionError(f"density matrix has dimension {dim}")
    if np.abs(rho - rho.conj().T).max() > STATE_TOL:
        raise DomainError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > STATE_TOL:
        raise DomainError("density matrix does not have unit trace")
    if np.linalg.eigvalsh(rho).min() < -STATE_EIG_TOL:
        raise DomainError("density matrix is not positive semidefinite")
    return rho


def check_noise(a: np.ndarray, num_outcomes: int | None = None) -> np.ndarray:
    """Validate a column-stochastic noise matrix."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError("noise matrix must be square")
    if num_outcomes is not None and a.shape[0] != num_outcomes:
        raise DimensionError(f"noise matrix must be {num_outcomes}x{num_outcomes}")
    if a.min() < -NOISE_TOL or a.max() > 1 + NOISE_TOL:
        raise DomainError("noise matrix entries must lie in [0, 1]")
    if np.abs(a.sum(axis=0) - 1).max() > NOISE_TOL:
        raise DomainError("noise matrix columns must sum to 1")
    return a


def num_qubits(rho: np.ndarray) -> int:
    return int(round(np.log2(rho.shape[0])))


# --- distributions ------------------------------------------------------------


def ideal_distribution(rho: np.ndarray, u, povm: Povm) -> np.ndarray:
    """Outcome probabilities ``Tr(U rho U^dag M_k)``.

    ``u`` is a :class:`Circuit` or a dense unitary matrix.
    """
    mat = circuit_unitary(u) if isinstance(u, Circuit) else np.asarray(u)
    if mat.shape != rho.shape or rho.shape[0] != povm.dim:
        raise DimensionError("state, unitary and POVM dimensions disagree")
    return povm.probabilities(mat @ rho @ mat.conj().T)


def apply_noise(y: np.ndarray, a: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if a.shape[1] != y.shape[0]:
        raise DimensionError(f"noise matrix expects length {a.shape[1]}, got {y.shape[0]}")
    return a @ y


def noisy_distribution(rho, a, u, povm) -> np.ndarray:
    return apply_noise(ideal_distribution(rho, u, povm), a)


class Device:
    """Simulated noisy device exposing exact distributions and shot sampling.

    Distributions are cached per circuit, so repeated trials are cheap.
    """

    def __init__(self, rho, a, povm: Povm):
        self.rho = check_state(rho, povm.n)
        self.a = check_noise(a, povm.num_outcomes)
        self.povm = povm
        self.n = povm.n
        self._cache = {}

    def distribution(self, circuit: Circuit) -> np.ndarray:
        key = circuit.gates
        out = self._cache.get(key)
        if out is None:
            out = noisy_distribution(self.rho, self.a, circuit, self.povm)
            out.setflags(write=False)
            self._cache[key] = out
        return out

    __call__ = distribution


# --- shots and RNG streams ----------------------------------------------------


def rng_stream(master_seed: int, *stream_id: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(master_seed, *stream_id)``."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(s) for s in stream_id))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class ShotRecord:
    counts: np.ndarray
    total: int
    master_seed: int | None = None
    stream_id: tuple = ()

    @property
    def frequencies(self) -> np.ndarray:
        if self.total == 0:
            return np.zeros_like(self.counts, dtype=float)
        return self.counts / self.total


def _clean_probs(p):
    p = np.clip(np.asarray(p, dtype=float), 0.0, None)
    return p / p.sum()


def sample_shots(p, shots: int, rng: np.random.Generator, master_seed=None, stream_id=()) -> ShotRecord:
    """Multinomial outcome counts for ``shots`` draws from distribution ``p``."""
    if shots < 0:
        raise DomainError("shot count must be nonnegative")
    counts = rng.multinomial(int(shots), _clean_probs(p))
    return ShotRecord(counts, int(shots), master_seed, tuple(stream_id))


# --- coefficients, metrics, gauge ---------------------------------------------


def to_coefficients(rho: np.ndarray) -> dict:
    """Map each traceless Pauli ``P`` to ``Tr(rho P) / 2**(n/2)``."""
    n = num_qubits(rho)
    coords = pauli_coordinates(np.asarray(rho, dtype=complex), n)
    return dict(zip(enumerate_basis(n), coords[1:]))


def coefficient_vector(rho: np.ndarray) -> np.ndarray:
    """Coefficients as an array in basis order."""
    n = num_qubits(rho)
    return pauli_coordinates(np.asarray(rho, dtype=complex), n)[1:]


def from_coefficients(coeffs: dict, n: int) -> np.ndarray:
    """Inverse of :func:`to_coefficients`; missing strings count as zero."""
    dim = 2**n
    rho = np.eye(dim, dtype=complex) / dim
    for p, s in coeffs.items():
        rho = rho + s * pauli_dense(p, normalized=True)
    return rho


def from_coefficient_vector(vec, n: int) -> np.ndarray:
    stack = pauli_stack(n, normalized=True)
    return np.eye(2**n, dtype=complex) / 2**n + np.einsum("a,aij->ij", np.asarray(vec), stack[1:])


def m_norm(coeffs) -> float:
    """Largest magnitude among the traceless Pauli coefficients."""
    vals = np.fromiter(coeffs.values(), float) if isinstance(coeffs, dict) else np.asarray(coeffs)
    return float(np.abs(vals).max()) if vals.size else 0.0


def u_norm(a: np.ndarray) -> float:
    """Largest deviation of an entry of ``a`` from its row mean.

    Zero exactly for erasure channels (every row constant).
    """
    a = np.asarray(a, dtype=float)
    return float(np.abs(a - a.mean(axis=1, keepdims=True)).max())


def identity_offset(a: np.ndarray, povm: Povm) -> np.ndarray:
    """Row offsets ``sum_j A[k, j] Tr(M_j) / 2**n``, the noisy response to ``I / 2**n``."""
    return a @ (povm.traces() / povm.dim)


def gauge_transform(rho, a, alpha: float, povm: Povm):
    """Apply the one-parameter gauge family to a state and noise pair.

    ``rho -> rho / alpha + (1 - 1/alpha) I / 2**n`` and
    ``A -> alpha A + (1 - alpha) d 1^T`` with ``d`` the identity offset.
    Outputs are not checked for physical validity; see :func:`validity_margins`.
    """
    if alpha == 0:
        raise DomainError("gauge parameter must be nonzero")
    dim = povm.dim
    rho_t = rho / alpha + (1 - 1 / alpha) * np.eye(dim) / dim
    d = identity_offset(a, povm)
    a_t = alpha * a + (1 - alpha) * d[:, None]
    return rho_t, a_t


def validity_margins(rho, a) -> dict:
    """Distances from the physical sets; negative values flag violations."""
    eig_min = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    return {
        "state_min_eigenvalue": eig_min,
        "state_trace_error": float(abs(np.trace(rho) - 1)),
        "noise_min_entry": float(a.min()),
        "noise_max_entry": float(a.max()),
        "noise_column_sum_error": float(np.abs(a.sum(axis=0) - 1).max()),
    }


def is_valid_pair(margins: dict, tol: float = 1e-8) -> bool:
    return (
        margins["state_min_eigenvalue"] >= -tol
        and margins["state_trace_error"] <= tol
        and margins["noise_min_entry"] >= -tol
        and margins["noise_max_entry"] <= 1 + tol
        and margins["noise_column_sum_error"] <= tol
    )


# --- constructors -------------------------------------------------------------


def basis_state(bits: str) -> np.ndarray:
    """Projector onto ``|bits>`` with qubit 0 leftmost."""
    dim = 2 ** len(bits)
    rho = np.zeros((dim, dim), dtype=complex)
    idx = int(bits, 2)
    rho[idx, idx] = 1.0
    return rho


def bit_flip_noise(probs) -> np.ndarray:
    """Tensor product of per-qubit symmetric flip matrices."""
    mats = [np.array([[1 - p, p], [p, 1 - p]]) for p in probs]
    return reduce(np.kron, mats)


def haar_state_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * ph


def random_state(n: int, rng: np.random.Generator, weight=(0.2, 1.0)) -> np.ndarray:
    """Haar-random pure state mixed with ``I / 2**n`` at a random weight."""
    dim = 2**n
    w = rng.uniform(*weight) if isinstance(weight, tuple) else float(weight)
    psi = haar_state_vector(dim, rng)
    rho = w * np.outer(psi, psi.conj()) + (1 - w) * np.eye(dim) / dim
    return 0.5 * (rho + rho.conj().T)


def random_column_stochastic(num_outcomes: int, rng: np.random.Generator) -> np.ndarray:
    return rng.dirichlet(np.ones(num_outcomes), size=num_outcomes).T


def random_noise(num_outcomes: int, rng: np.random.Generator, min_u: float = 0.05, strength=None) -> np.ndarray:
    """Convex mix of the identity with a random column-stochastic matrix.

    ``strength`` is the weight of the random part; when omitted it is drawn
    uniformly, redrawing until ``u_norm >= min_u``.
    """
    for _ in range(1000):
        t = rng.uniform(0, 1) if strength is None else float(strength)
        a = (1 - t) * np.eye(num_outcomes) + t * random_column_stochastic(num_outcomes, rng)
        if u_norm(a) >= min_u:
            return a
    raise DomainError(f"could not reach u_norm >= {min_u}")
