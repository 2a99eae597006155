"""POVMs, their Pauli coefficient matrix and covariance, and dependent-POVM reduction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlreadyIndependentError, DimensionError, DomainError
from .pauli import DENSE_LIMIT, CapacityError, pauli_dense, pauli_stack

POVM_TOL = 1e-10
RANK_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class Povm:
    """Measurement with ``D`` elements on ``n`` qubits.

    Attributes
    ----------
    n : int
    elements : ndarray, shape (D, 2**n, 2**n)
        Hermitian PSD matrices summing to the identity.
    kind : {"computational", "general"}
    """

    n: int
    elements: np.ndarray
    kind: str = "general"

    def __post_init__(self):
        if self.n > DENSE_LIMIT:
            raise CapacityError(f"POVMs limited to n <= {DENSE_LIMIT}")
        els = np.array(self.elements, dtype=complex)
        dim = 2**self.n
        if els.ndim != 3 or els.shape[1:] != (dim, dim):
            raise DimensionError(f"elements must have shape (D, {dim}, {dim})")
        if not np.allclose(els, els.conj().transpose(0, 2, 1), atol=POVM_TOL, rtol=0):
            raise DomainError("POVM elements must be Hermitian")
        min_eig = min(np.linalg.eigvalsh(m).min() for m in els)
        if min_eig < -POVM_TOL:
            raise DomainError(f"POVM element not PSD (min eigenvalue {min_eig:.3g})")
        if np.abs(els.sum(axis=0) - np.eye(dim)).max() > POVM_TOL:
            raise DomainError("POVM elements do not sum to the identity")
        els.setflags(write=False)
        object.__setattr__(self, "elements", els)

    @property
    def num_outcomes(self) -> int:
        return self.elements.shape[0]

    @property
    def dim(self) -> int:
        return 2**self.n

    @property
    def is_computational(self) -> bool:
        return self.kind == "computational"

    def probabilities(self, rho: np.ndarray) -> np.ndarray:
        """``Tr(rho M_k)`` for every outcome."""
        if self.is_computational:
            return np.real(np.diagonal(rho)).copy()
        return np.real(np.einsum("kij,ji->k", self.elements, rho))

    def traces(self) -> np.ndarray:
        return np.real(np.einsum("kii->k", self.elements))


def computational_povm(n: int) -> Povm:
    """Projectors onto the computational basis states, in index order."""
    dim = 2**n
    els = np.zeros((dim, dim, dim), dtype=complex)
    els[np.arange(dim), np.arange(dim), np.arange(dim)] = 1.0
    return Povm(n, els, "computational")


def pauli_coordinates(ops: np.ndarray, n: int) -> np.ndarray:
    """Real coordinates ``Tr(op P)`` in the normalized Pauli basis (identity first).

    ``ops`` may be a single Hermitian matrix or a stack of them.
    """
    basis = pauli_stack(n, normalized=True)
    single = ops.ndim == 2
    ops = ops[None] if single else ops
    coords = np.real(np.einsum("aij,kji->ka", basis, ops))
    return coords[0] if single else coords


def m_matrix(povm: Povm, basis) -> np.ndarray:
    """Coefficients ``Tr(M_k Q)`` of each element; first column is the identity.

    Returns an array of shape ``(D, len(basis) + 1)``.
    """
    n = povm.n
    cols = [povm.traces() / 2 ** (n / 2)]
    for q in basis:
        if q.n != n:
            raise DimensionError("basis element acts on the wrong qubit count")
        qd = pauli_dense(q, normalized=True)
        cols.append(np.real(np.einsum("kij,ji->k", povm.elements, qd)))
    return np.column_stack(cols)


def traceless_parts(povm: Povm) -> np.ndarray:
    """Elements with their identity component removed, ``M_k - Tr(M_k) I / 2**n``."""
    tr = povm.traces()
    return povm.elements - tr[:, None, None] * np.eye(povm.dim)[None] / povm.dim


def covariance(povm: Povm) -> np.ndarray:
    """Gram matrix ``Tr(M_i M_j) - Tr(M_i) Tr(M_j) / 2**n`` of the traceless parts.

    Rows sum to zero for every POVM because the elements sum to the identity.
    """
    if povm.is_computational:
        dim = povm.dim
        return np.eye(dim) - 1.0 / dim
    gram = np.real(np.einsum("iab,jba->ij", povm.elements, povm.elements))
    tr = povm.traces()
    return gram - np.outer(tr, tr) / povm.dim


def independence_rank(povm: Povm) -> int:
    """Numerical rank of the ``D x 4**n`` matrix of vectorized elements."""
    vecs = povm.elements.reshape(povm.num_outcomes, -1)
    sv = np.linalg.svd(vecs, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > RANK_RTOL * sv[0]))


def reduce_povm(povm: Povm):
    """Merge a linearly dependent POVM into an independent one.

    Each new element is a nonnegative combination ``M'_j = sum_i p[j, i] M_i``
    with every column of ``p`` summing to one, so outcome probabilities of the
    reduced measurement are ``p @ probs`` of the original.

    Returns
    -------
    reduced : Povm
    p : ndarray, shape (r, D)
    """
    D = povm.num_outcomes
    r = independence_rank(povm)
    if r == D:
        raise AlreadyIndependentError("POVM is already linearly independent")
    # columns of V live in R^D; their span F is the complement of the
    # null space {c : sum_k c_k M_k = 0}
    V = pauli_coordinates(povm.elements, povm.n)
    left, sv, _ = np.linalg.svd(V, full_matrices=False)
    span = left[:, :r]
    u = povm.traces()
    q, _ = np.linalg.qr(np.column_stack([u / np.linalg.norm(u), span]))
    others = q[:, 1:r]
    shifted = [u]
    for v in others.T:
        alpha = np.abs(v).max() / u.min() + 1.0
        shifted.append(v + alpha * u)
    mu = np.array(shifted)
    p = mu / mu.sum(axis=0, keepdims=True)
    new = np.einsum("ji,iab->jab", p, povm.elements)
    new = 0.5 * (new + new.conj().transpose(0, 2, 1))
    return Povm(povm.n, new, "general"), p


def random_povm(n: int, num_outcomes: int, rng: np.random.Generator) -> Povm:
    """Random full-rank POVM from normalized Wishart-like elements."""
    dim = 2**n
    g = rng.normal(size=(num_outcomes, dim, dim)) + 1j * rng.normal(size=(num_outcomes, dim, dim))
    els = g @ g.conj().transpose(0, 2, 1)
    total = els.sum(axis=0)
    w, v = np.linalg.eigh(total)
    inv_sqrt = v @ np.diag(w**-0.5) @ v.conj().T
    els = inv_sqrt @ els @ inv_sqrt
    els = 0.5 * (els + els.conj().transpose(0, 2, 1))
    els[-1] = np.eye(dim) - els[:-1].sum(axis=0)
    return Povm(n, els, "general")
