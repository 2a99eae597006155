"""Simultaneous state and readout-noise tomography from exact noisy probabilities.

The pipeline aggregates noisy distributions into eliminator responses
(``z`` values), finds which Pauli coefficients of the state are nonzero,
recovers the noise matrix up to the gauge, and recovers every coefficient
as a ratio to a reference coefficient.

Conventions: ``z.identity[k]`` is the response of outcome ``k`` to the
state-eliminating plan, ``z.pauli[P][i, k]`` the response of outcome ``k``
to the plan that maps ``P`` onto the ``i``-th traceless POVM element. The
recovered noise candidate has ``noise[k, i] = z.pauli[R][i, k]`` in the
computational basis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .eliminators import EliminatorPlan, PlanBook
from .errors import ConditionError, DegeneracyError, PivotError, PovmDependenceError
from .pauli import PauliString, enumerate_basis, pauli_from_label
from .povm import Povm, covariance, independence_rank, m_matrix
from .sim import Device, coefficient_vector, m_norm, u_norm

EXACT_TOL = 1e-9


@dataclass
class ZValues:
    """Eliminator responses.

    Attributes
    ----------
    identity : ndarray, shape (D,)
    pauli : dict
        ``P -> ndarray (D, D)`` indexed ``[i, k]``.
    provenance : {"exact", "estimated"}
    shots : dict, optional
        Shots spent per entry key (``"I"`` or ``P``).
    stderr : dict, optional
        Standard errors with the same layout as the values (``"I"`` or ``P``).
    """

    identity: np.ndarray
    pauli: dict
    provenance: str = "exact"
    shots: dict = field(default_factory=dict)
    stderr: dict = field(default_factory=dict)

    def signal(self, p: PauliString) -> np.ndarray:
        """``|z^{P,i}_k - z^I_k|`` as a ``(D, D)`` array."""
        return np.abs(self.pauli[p] - self.identity[None, :])


@dataclass
class TomographyResult:
    """Decoded state coefficients and noise, up to the gauge.

    Attributes
    ----------
    n : int
    support : tuple of PauliString
        Strings whose coefficient was detected as nonzero, in basis order.
    reference : PauliString
    pivot : tuple (i, k)
        POVM-element index and outcome used for the ratios.
    ratios : dict
        ``P -> s_P / s_R`` for ``P`` in the support.
    noise : ndarray
        Noise candidate in the gauge where the reference coefficient is 1.
    offset : ndarray
        Identity offset ``z^I``, the same in every gauge.
    alpha : float or None
        Value of the reference coefficient once a gauge is fixed.
    diagnostics : dict
    """

    n: int
    support: tuple
    reference: PauliString
    pivot: tuple
    ratios: dict
    noise: np.ndarray
    offset: np.ndarray
    alpha: float | None = None
    errors: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    z: ZValues | None = field(default=None, repr=False, compare=False)

    def ratio_vector(self) -> np.ndarray:
        """Ratios over the full traceless basis (zero outside the support)."""
        basis = enumerate_basis(self.n)
        return np.array([self.ratios.get(p, 0.0) for p in basis])

    def with_alpha(self, alpha) -> "TomographyResult":
        return replace(self, alpha=None if alpha is None else float(alpha))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "support": [p.label for p in self.support],
            "reference": self.reference.label,
            "pivot": list(map(int, self.pivot)),
            "ratios": {p.label: float(v) for p, v in self.ratios.items()},
            "ratio_errors": {p.label: float(v) for p, v in self.errors.items()},
            "noise": np.asarray(self.noise).tolist(),
            "offset": np.asarray(self.offset).tolist(),
            "alpha": self.alpha,
            "gauge_fixed": self.alpha is not None,
            "diagnostics": _jsonable(self.diagnostics),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        return cls(
            n=int(data["n"]),
            support=tuple(pauli_from_label(s) for s in data["support"]),
            reference=pauli_from_label(data["reference"]),
            pivot=tuple(data["pivot"]),
            ratios={pauli_from_label(k): float(v) for k, v in data["ratios"].items()},
            noise=np.array(data["noise"], dtype=float),
            offset=np.array(data["offset"], dtype=float),
            alpha=data.get("alpha"),
            errors={pauli_from_label(k): float(v) for k, v in data.get("ratio_errors", {}).items()},
            diagnostics=data.get("diagnostics", {}),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, PauliString):
        return obj.label
    return obj


# --- pipeline steps -----------------------------------------------------------


def compute_z(oracle, plan: EliminatorPlan) -> np.ndarray:
    """Affine combination of the oracle's noisy distributions over the plan."""
    total = None
    for c, u in plan.terms:
        y = np.asarray(oracle(u), dtype=float)
        total = c * y if total is None else total + c * y
    return total


def compute_all_z(oracle, povm: Povm, basis=None, plans: PlanBook | None = None) -> ZValues:
    """``z^I`` and ``z^{P,i}`` for every basis string and POVM element."""
    plans = plans or PlanBook(povm, basis)
    basis = plans.basis
    z_id = compute_z(oracle, plans.identity())
    D = povm.num_outcomes
    table = {}
    for p in basis:
        table[p] = np.array([compute_z(oracle, plans.pi(p, i)) for i in range(D)])
    return ZValues(z_id, table, "exact")


def find_support(z: ZValues, tol: float = EXACT_TOL, basis=None):
    """Strings with a nonzero coefficient and the first pivot that fired.

    A string is in the support when some ``(i, k)`` with ``z^I_k != 0``
    shows ``|z^{P,i}_k - z^I_k| > tol``. The pivot is the first such
    ``(i, k)`` in scan order for the first detected string.

    Raises
    ------
    DegeneracyError
        If nothing is detected: the state is maximally mixed or the noise
        is an erasure channel.
    """
    basis = tuple(basis or z.pauli.keys())
    live = np.abs(z.identity) > tol
    support = []
    pivot = None
    for p in basis:
        sig = z.signal(p)[:, live]
        if (sig > tol).any():
            support.append(p)
            if pivot is None:
                i, kk = np.argwhere(sig > tol)[0]
                pivot = (int(i), int(np.flatnonzero(live)[kk]))
    if not support:
        raise DegeneracyError(
            "no nonzero signal: state is maximally mixed (condition 2) or noise is an erasure channel (condition 1)"
        )
    return tuple(support), pivot


def choose_reference(z: ZValues, support, rtol: float = 1e-9) -> PauliString:
    """String in the support with the largest signal; ties go to the earliest."""
    strength = [float(z.signal(p).max()) for p in support]
    top = max(strength)
    for p, s in zip(support, strength):
        if s >= top * (1 - rtol):
            return p
    return support[0]


def recover_noise(z: ZValues, reference: PauliString, povm: Povm, tol: float = EXACT_TOL) -> np.ndarray:
    """Noise candidate in the gauge where the reference coefficient equals one.

    For each outcome row ``k`` with ``z^I_k != 0`` solves

        sum_k' A'[k, k'] C[k', i] = z^{R,i}_k - z^I_k   for all i,
        sum_k' A'[k, k'] m_I[k']  = 2**(n/2) z^I_k,

    in the least-squares sense, checking the residual. Other rows are zero.
    For the computational basis this reduces to ``A'[k, i] = z^{R,i}_k``.
    """
    zr = z.pauli[reference]
    D = povm.num_outcomes
    live = np.abs(z.identity) > tol
    if povm.is_computational:
        out = zr.T.copy()
        out[~live] = 0.0
        return out
    cov = covariance(povm)
    m_id = m_matrix(povm, ())[:, 0]
    system = np.column_stack([cov, m_id])
    if np.linalg.matrix_rank(system) < D:
        raise PovmDependenceError("completed linear system is singular: POVM elements are dependent")
    out = np.zeros((D, D))
    scale = 2 ** (povm.n / 2)
    for k in np.flatnonzero(live):
        rhs = np.concatenate([zr[:, k] - z.identity[k], [scale * z.identity[k]]])
        row, *_ = np.linalg.lstsq(system.T, rhs, rcond=None)
        if np.abs(system.T @ row - rhs).max() > 1e-6:
            raise PovmDependenceError(f"noise row {k} inconsistent with the POVM covariance")
        out[k] = row
    return out


def recover_ratios(z: ZValues, reference: PauliString, support, pivot, tol: float = EXACT_TOL) -> dict:
    """``s_P / s_R`` from the signals at the pivot entry."""
    i, k = pivot
    denom = z.pauli[reference][i, k] - z.identity[k]
    if abs(denom) <= tol:
        raise PivotError(f"reference signal {denom:.3g} at pivot {pivot} is below tolerance")
    ratios = {}
    for p in support:
        ratios[p] = 1.0 if p == reference else float((z.pauli[p][i, k] - z.identity[k]) / denom)
    return ratios


def check_conditions(rho, a, povm: Povm, tol: float = EXACT_TOL):
    """Raise :class:`ConditionError` naming the first violated condition."""
    if u_norm(a) <= tol:
        raise ConditionError("noise matrix is an erasure channel (condition 1)", 1)
    if m_norm(coefficient_vector(rho)) <= tol:
        raise ConditionError("state is maximally mixed (condition 2)", 2)
    if independence_rank(povm) < povm.num_outcomes:
        raise PovmDependenceError("POVM elements are linearly dependent (condition 3)")


def decode_exact(oracle, povm: Povm, reference=None, tol: float = EXACT_TOL, plans=None, basis=None):
    """Run the exact pipeline against any circuit -> distribution oracle."""
    z = compute_all_z(oracle, povm, basis, plans)
    support, pivot = find_support(z, tol)
    if reference is None:
        reference = choose_reference(z, support)
    else:
        reference = reference if isinstance(reference, PauliString) else pauli_from_label(reference)
        if reference not in support:
            raise PivotError(f"reference {reference.label} is not in the detected support")
    noise = recover_noise(z, reference, povm, tol)
    ratios = recover_ratios(z, reference, support, pivot, tol)
    live = int(np.sum(np.abs(z.identity) > tol))
    return TomographyResult(
        n=povm.n,
        support=support,
        reference=reference,
        pivot=pivot,
        ratios=ratios,
        noise=noise,
        offset=z.identity.copy(),
        diagnostics={"live_outcomes": live},
        z=z,
    )


def run_exact(rho, a, povm: Povm, reference=None, tol: float = EXACT_TOL, pool=None, check=True):
    """Simulate exact noisy distributions for ``(rho, a)`` and decode them."""
    device = Device(rho, a, povm)
    if check:
        check_conditions(device.rho, device.a, povm, tol)
    plans = PlanBook(povm, pool=pool)
    return decode_exact(device, povm, reference, tol, plans)
