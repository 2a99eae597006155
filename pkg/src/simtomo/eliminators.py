"""Eliminator superoperators as affine combinations of unitary circuits.

An eliminator plan is a list of ``(coefficient, circuit)`` terms whose
coefficients sum to one. Running every circuit and combining the noisy
distributions with the coefficients emulates the effective map
``sum_l c_l U_l (.) U_l^dag``. Only the part of that map visible to the
measurement (its projection onto the span of the POVM elements) matters,
and that is what :func:`verify_plan` scores.

Superoperators are handled as Pauli transfer matrices: real matrices in the
normalized Pauli basis with the identity first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DimensionError, DomainError, InsufficientPoolError
from .pauli import (
    Circuit,
    PauliString,
    circuit_unitary,
    commutes,
    enumerate_basis,
    pauli_circuit,
    pauli_stack,
    synthesize_clifford_map,
)
from .povm import Povm, pauli_coordinates, traceless_parts

RESIDUAL_THRESHOLD = 1e-8


@dataclass(frozen=True)
class EliminatorPlan:
    """Affine combination of circuits.

    Attributes
    ----------
    n : int
    terms : tuple of (float, Circuit)
    tag : tuple
        ``("E_I",)``, ``("E_Pi", P, i)``, ``("E_PQ", P, Q)`` or a custom tag.
    residual : float or None
        Observable-subspace residual when the plan came from a numerical solve.
    """

    n: int
    terms: tuple
    tag: tuple = ("custom",)
    residual: float | None = None

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms])

    @property
    def circuits(self) -> list:
        return [u for _, u in self.terms]

    def coefficient_sum(self) -> float:
        return float(self.coefficients.sum())

    def to_text(self) -> str:
        """Structured text export: JSON list of coefficient and gate strings."""
        payload = {
            "n": self.n,
            "tag": [str(t) for t in self.tag],
            "terms": [{"coefficient": float(c), "gates": u.to_text()} for c, u in self.terms],
        }
        return json.dumps(payload, indent=1)

    @classmethod
    def from_text(cls, text):
        data = json.loads(text)
        n = data["n"]
        terms = tuple((float(t["coefficient"]), Circuit.from_text(n, t["gates"])) for t in data["terms"])
        return cls(n, terms, tuple(data["tag"]))


def combine_plans(weighted, n, tag=("custom",)) -> EliminatorPlan:
    """Merge ``[(weight, plan), ...]`` into one plan, pooling identical circuits."""
    acc = {}
    order = []
    for w, plan in weighted:
        for c, u in plan.terms:
            if u.gates not in acc:
                acc[u.gates] = 0.0
                order.append(u)
            acc[u.gates] += w * c
    terms = tuple((acc[u.gates], u) for u in order if acc[u.gates] != 0.0)
    return EliminatorPlan(n, terms, tag)


# --- closed forms for the computational basis --------------------------------


@lru_cache(maxsize=None)
def plan_E_identity(n: int) -> EliminatorPlan:
    """Uniform average over conjugation by all X-strings."""
    xs = enumerate_basis(n, "x_strings")
    w = 1.0 / 2**n
    return EliminatorPlan(n, tuple((w, pauli_circuit(p)) for p in xs), ("E_I",))


def hadamard_coefficient(i: int, q: PauliString) -> float:
    """``<i|q|i> / 2**(n/2)`` for a Z-string ``q``."""
    if not q.is_diagonal:
        raise DomainError(f"{q.label} is not a Z-string")
    n = q.n
    if not 0 <= i < 2**n:
        raise DomainError(f"outcome index {i} out of range")
    parity = 0
    for qubit in range(n):
        bit = (i >> (n - 1 - qubit)) & 1
        parity ^= bit & q.z_bits[qubit]
    return (-1.0 if parity else 1.0) / 2 ** (n / 2)


@lru_cache(maxsize=None)
def plan_E_pq(p: PauliString, q: PauliString) -> EliminatorPlan:
    """Map ``p`` onto the diagonal string ``q`` and suppress everything else.

    Runs the Clifford taking ``p`` to ``+q``, followed by a uniform average over
    the X-strings that commute with ``q``.
    """
    if p.n != q.n:
        raise DimensionError("p and q act on different qubit counts")
    if p.is_identity:
        raise DomainError("p must be traceless")
    if not q.is_diagonal or q.is_identity:
        raise DomainError("q must be a nonidentity Z-string")
    n = p.n
    u_pq = synthesize_clifford_map(p, q)
    twirl = [x for x in enumerate_basis(n, "x_strings") if commutes(x, q)]
    w = 2.0 / 2**n
    return EliminatorPlan(n, tuple((w, u_pq.then(pauli_circuit(x))) for x in twirl), ("E_PQ", p, q))


@lru_cache(maxsize=None)
def plan_E_pi(p: PauliString, i: int) -> EliminatorPlan:
    """Map ``p`` onto the traceless part of the projector ``|i><i|``."""
    n = p.n
    if p.is_identity:
        raise DomainError("p must be traceless")
    if not 0 <= i < 2**n:
        raise DomainError(f"outcome index {i} out of range")
    zs = enumerate_basis(n, "z_strings")[1:]
    h = [hadamard_coefficient(i, q) for q in zs]
    weighted = [(1.0 - sum(h), plan_E_identity(n))]
    weighted += [(hq, plan_E_pq(p, q)) for hq, q in zip(h, zs)]
    return combine_plans(weighted, n, ("E_Pi", p, i))


# --- specs and dense verification ---------------------------------------------


@dataclass(frozen=True, eq=False)
class EliminatorSpec:
    """Required images of the identity and of each basis operator.

    ``targets`` has shape ``(1 + len(basis), 4**n)``: row 0 is the required
    image of the normalized identity and row ``b + 1`` the image of
    ``basis[b]``, all in normalized Pauli coordinates. Images only need to
    match after projection onto the span of the POVM elements.
    """

    n: int
    basis: tuple
    targets: np.ndarray
    tag: tuple = ("custom",)


def _base_targets(n, basis):
    t = np.zeros((1 + len(basis), 4**n))
    t[0, 0] = 1.0
    return t


def spec_identity(n: int, basis=None) -> EliminatorSpec:
    basis = tuple(basis or enumerate_basis(n))
    return EliminatorSpec(n, basis, _base_targets(n, basis), ("E_I",))


def spec_pi(povm: Povm, p: PauliString, i: int, basis=None) -> EliminatorSpec:
    n = povm.n
    basis = tuple(basis or enumerate_basis(n))
    t = _base_targets(n, basis)
    t[1 + basis.index(p)] = pauli_coordinates(traceless_parts(povm)[i], n)
    return EliminatorSpec(n, basis, t, ("E_Pi", p, i))


def spec_pq(p: PauliString, q: PauliString, basis=None) -> EliminatorSpec:
    n = p.n
    basis = tuple(basis or enumerate_basis(n))
    t = _base_targets(n, basis)
    t[1 + basis.index(p), enumerate_basis(n, "all_pauli").index(q)] = 1.0
    return EliminatorSpec(n, basis, t, ("E_PQ", p, q))


def spec_rank_one(n: int, weights, image, basis=None, tag=("custom",)) -> EliminatorSpec:
    """Target map sending basis operator ``b`` to ``weights[b] * image`` (Pauli coordinates)."""
    basis = tuple(basis or enumerate_basis(n))
    t = _base_targets(n, basis)
    t[1:] = np.outer(np.asarray(weights, dtype=float), np.asarray(image, dtype=float))
    return EliminatorSpec(n, basis, t, tag)


def ptm(circuit) -> np.ndarray:
    """Pauli transfer matrix ``R[a, b] = Tr(P_a U P_b U^dag)`` (normalized basis)."""
    if isinstance(circuit, Circuit):
        return _ptm_cached(circuit.n, circuit.gates)
    u = np.asarray(circuit)
    n = int(round(np.log2(u.shape[0])))
    return _ptm_dense(u, n)


def _ptm_dense(u, n):
    basis = pauli_stack(n, normalized=True)
    images = u[None] @ basis @ u.conj().T[None]
    return np.real(np.einsum("aij,bji->ab", basis, images))


@lru_cache(maxsize=100_000)
def _ptm_cached(n, gates):
    out = _ptm_dense(circuit_unitary(Circuit(n, gates)), n)
    out.setflags(write=False)
    return out


def effective_superoperator(plan: EliminatorPlan) -> np.ndarray:
    """Dense transfer matrix ``sum_l c_l R(U_l)``."""
    total = np.zeros((4**plan.n, 4**plan.n))
    for c, u in plan.terms:
        total += c * ptm(u)
    return total


def observable_basis(povm: Povm) -> np.ndarray:
    """Orthonormal columns spanning the POVM elements in Pauli coordinates."""
    coords = pauli_coordinates(povm.elements, povm.n)
    u, sv, vt = np.linalg.svd(coords, full_matrices=False)
    rank = int(np.sum(sv > 1e-9 * sv[0]))
    return vt[:rank].T


def _input_columns(spec):
    index = {p: k for k, p in enumerate(enumerate_basis(spec.n, "all_pauli"))}
    return [0] + [index[p] for p in spec.basis]


def verify_plan(plan: EliminatorPlan, spec: EliminatorSpec, povm: Povm) -> float:
    """Largest deviation between the plan's visible action and the spec.

    Builds the dense effective transfer matrix, takes the images of the
    identity and of every basis operator, projects the difference from the
    required image onto the span of the POVM elements and returns its largest
    absolute Pauli coordinate.
    """
    if plan.n != spec.n or povm.n != spec.n:
        raise DimensionError("plan, target and POVM act on different qubit counts")
    sup = effective_superoperator(plan)
    images = sup[:, _input_columns(spec)].T
    obs = observable_basis(povm)
    diff = (images - spec.targets) @ obs @ obs.T
    return float(np.abs(diff).max())


# --- numerical construction ---------------------------------------------------


@lru_cache(maxsize=None)
def default_pool(n: int) -> tuple:
    """Pauli strings composed after every Pauli-to-Pauli Clifford, deduplicated."""
    if n > 3:
        raise DomainError("default pool is only built for n <= 3")
    paulis = enumerate_basis(n, "all_pauli")
    traceless = paulis[1:]
    seen = set()
    pool = []
    for p in traceless:
        for q in traceless:
            u_pq = synthesize_clifford_map(p, q)
            for s in paulis:
                circ = u_pq.then(pauli_circuit(s))
                key = np.round(ptm(circ), 8).tobytes()
                if key not in seen:
                    seen.add(key)
                    pool.append(circ)
    return tuple(pool)


class PoolSolver:
    """Least-squares eliminator construction over a fixed unitary pool.

    The design matrix depends only on the POVM, the basis and the pool, so it
    is factorized once and reused for every spec.
    """

    def __init__(self, povm: Povm, basis=None, pool=None):
        self.povm = povm
        self.n = povm.n
        self.basis = tuple(basis or enumerate_basis(self.n))
        self.pool = tuple(pool if pool is not None else default_pool(self.n))
        if not self.pool:
            raise DomainError("unitary pool is empty")
        self.obs = observable_basis(povm)
        cols = _input_columns(EliminatorSpec(self.n, self.basis, None))
        feats = np.array([(ptm(u)[:, cols].T @ self.obs).ravel() for u in self.pool]).T
        # substitute c_0 = 1 - sum_{l>0} c_l to enforce the affine constraint
        self._anchor = feats[:, 0]
        self._reduced = feats[:, 1:] - self._anchor[:, None]
        self._pinv = np.linalg.pinv(self._reduced, rcond=1e-12) if self._reduced.size else None

    def solve(self, spec: EliminatorSpec, threshold: float = RESIDUAL_THRESHOLD) -> EliminatorPlan:
        if spec.basis != self.basis:
            raise DimensionError("target basis differs from the solver basis")
        target = (spec.targets @ self.obs).ravel()
        if self._pinv is None:
            coef = np.array([1.0])
        else:
            rest = self._pinv @ (target - self._anchor)
            coef = np.concatenate([[1.0 - rest.sum()], rest])
        keep = np.abs(coef) > 1e-13
        keep[0] = True
        coef = np.where(keep, coef, 0.0)
        coef[0] += 1.0 - coef.sum()
        terms = tuple((float(c), u) for c, u, k in zip(coef, self.pool, keep) if k)
        plan = EliminatorPlan(self.n, terms, spec.tag)
        residual = verify_plan(plan, spec, self.povm)
        if residual > threshold:
            raise InsufficientPoolError(
                f"pool cannot realize {spec.tag[0]}: residual {residual:.3g} > {threshold:g}", residual
            )
        return EliminatorPlan(self.n, terms, spec.tag, residual)


def general_eliminator_plan(povm: Povm, basis, spec: EliminatorSpec, pool=None) -> EliminatorPlan:
    """Solve for an eliminator plan over a unitary pool (``n <= 3``).

    Raises
    ------
    InsufficientPoolError
        If the best affine combination misses the target by more than 1e-8,
        meaning the pool is not tomographically complete for this POVM.
    """
    if povm.n > 3:
        raise DomainError("numerical eliminators are limited to n <= 3")
    return PoolSolver(povm, basis, pool).solve(spec)


class PlanBook:
    """Per-run cache of the eliminator plans needed by the decoders.

    Uses the closed forms for the computational POVM and the pool solver
    otherwise.
    """

    def __init__(self, povm: Povm, basis=None, pool=None, force_numeric=False):
        self.povm = povm
        self.n = povm.n
        self.basis = tuple(basis or enumerate_basis(self.n))
        self.closed_form = povm.is_computational and not force_numeric and pool is None
        self._pool = pool
        self._solver = None
        self._cache = {}

    @property
    def solver(self) -> PoolSolver:
        if self._solver is None:
            self._solver = PoolSolver(self.povm, self.basis, self._pool)
        return self._solver

    def identity(self) -> EliminatorPlan:
        if "I" not in self._cache:
            if self.closed_form:
                self._cache["I"] = plan_E_identity(self.n)
            else:
                self._cache["I"] = self.solver.solve(spec_identity(self.n, self.basis))
        return self._cache["I"]

    def pi(self, p: PauliString, i: int) -> EliminatorPlan:
        key = (p, i)
        if key not in self._cache:
            if self.closed_form:
                self._cache[key] = plan_E_pi(p, i)
            else:
                self._cache[key] = self.solver.solve(spec_pi(self.povm, p, i, self.basis))
        return self._cache[key]

    def custom(self, spec: EliminatorSpec) -> EliminatorPlan:
        return self.solver.solve(spec)
