"""Pauli strings in the symplectic (x, z) encoding and small Clifford circuits.

A qubit carries ``(x, z)`` bits with ``(0,0)=I``, ``(1,0)=X``, ``(0,1)=Z`` and
``(1,1)=Y``. Qubit 0 is the leftmost label character and the most
significant tensor factor, so ``"ZI"`` acts as ``Z`` on qubit 0 and the
computational index of ``|q0 q1 ...>`` is the binary number ``q0 q1 ...``.
No global phase is stored; every string denotes a Hermitian operator.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CapacityError, DimensionError, DomainError, ParseError

DENSE_LIMIT = 6

_CHAR_TO_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_TO_CHAR = {v: k for k, v in _CHAR_TO_BITS.items()}
_RANK = {(0, 0): 0, (1, 0): 1, (1, 1): 2, (0, 1): 3}

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _check_dense(n):
    if n > DENSE_LIMIT:
        raise CapacityError(f"dense matrices limited to n <= {DENSE_LIMIT}, got n={n}")


class PauliString:
    """Hermitian Pauli string on ``n`` qubits (immutable, hashable).

    Sorting follows the label in the I<X<Y<Z alphabet, qubit 0 first.
    """

    __slots__ = ("n", "x_bits", "z_bits", "_key")

    def __init__(self, n, x_bits, z_bits):
        x_bits = tuple(int(b) & 1 for b in x_bits)
        z_bits = tuple(int(b) & 1 for b in z_bits)
        if len(x_bits) != n or len(z_bits) != n:
            raise DimensionError(f"bit vectors must have length {n}")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "x_bits", x_bits)
        object.__setattr__(self, "z_bits", z_bits)
        key = tuple(_RANK[(x, z)] for x, z in zip(x_bits, z_bits))
        object.__setattr__(self, "_key", key)

    def __setattr__(self, name, value):
        raise AttributeError("PauliString is immutable")

    def __hash__(self):
        return hash((self.x_bits, self.z_bits))

    def __eq__(self, other):
        if not isinstance(other, PauliString):
            return NotImplemented
        return self.x_bits == other.x_bits and self.z_bits == other.z_bits

    def __lt__(self, other):
        return (self.n, self._key) < (other.n, other._key)

    def __reduce__(self):
        return (PauliString, (self.n, self.x_bits, self.z_bits))

    @property
    def label(self) -> str:
        return "".join(_BITS_TO_CHAR[(x, z)] for x, z in zip(self.x_bits, self.z_bits))

    def __str__(self):
        return self.label

    def __repr__(self):
        return f"PauliString({self.label!r})"

    @property
    def is_identity(self) -> bool:
        return not any(self.x_bits) and not any(self.z_bits)

    @property
    def support(self) -> tuple:
        return tuple(i for i in range(self.n) if self.x_bits[i] or self.z_bits[i])

    @property
    def is_diagonal(self) -> bool:
        """True for strings made of I and Z only."""
        return not any(self.x_bits)


def pauli_from_label(label: str) -> PauliString:
    """Parse a label such as ``"ZIX"``."""
    if not isinstance(label, str) or not label:
        raise ParseError("Pauli label must be a non-empty string")
    xs, zs = [], []
    for pos, ch in enumerate(label):
        if ch not in _CHAR_TO_BITS:
            raise ParseError(f"invalid Pauli character {ch!r} at position {pos}")
        x, z = _CHAR_TO_BITS[ch]
        xs.append(x)
        zs.append(z)
    return PauliString(len(label), xs, zs)


def as_pauli(p) -> PauliString:
    return p if isinstance(p, PauliString) else pauli_from_label(p)


def identity(n: int) -> PauliString:
    return PauliString(n, (0,) * n, (0,) * n)


def commutes(p: PauliString, q: PauliString) -> bool:
    """True iff the symplectic product of ``p`` and ``q`` is even."""
    if p.n != q.n:
        raise DimensionError(f"qubit counts differ: {p.n} vs {q.n}")
    form = sum(a * d + b * c for a, b, c, d in zip(p.x_bits, p.z_bits, q.x_bits, q.z_bits))
    return form % 2 == 0


def pauli_dense(p: PauliString, normalized: bool = False) -> np.ndarray:
    """Dense matrix of ``p``; divided by ``2**(n/2)`` when ``normalized``."""
    _check_dense(p.n)
    return _dense_cached(p.label, bool(normalized)).copy()


@lru_cache(maxsize=8192)
def _dense_cached(label, normalized):
    out = np.ones((1, 1), dtype=complex)
    for ch in label:
        out = np.kron(out, _SINGLE[ch])
    if normalized:
        out = out / 2 ** (len(label) / 2)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _basis_cached(n, family):
    if family == "traceless_pauli":
        labels = ["".join(t) for t in itertools.product("IXYZ", repeat=n)][1:]
    elif family == "x_strings":
        labels = ["".join(t) for t in itertools.product("IX", repeat=n)]
    elif family == "z_strings":
        labels = ["".join(t) for t in itertools.product("IZ", repeat=n)]
    elif family == "all_pauli":
        labels = ["".join(t) for t in itertools.product("IXYZ", repeat=n)]
    else:
        raise DomainError(f"unknown basis family {family!r}")
    return tuple(pauli_from_label(s) for s in labels)


def enumerate_basis(n: int, family: str = "traceless_pauli") -> tuple:
    """Pauli strings of a family in deterministic lexicographic order.

    Parameters
    ----------
    n : int
        Qubit count, at least 1.
    family : {"traceless_pauli", "x_strings", "z_strings", "all_pauli"}
        ``traceless_pauli`` omits the identity; the X- and Z-string families
        include it. ``all_pauli`` is the full basis with identity first.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    return _basis_cached(int(n), family)


def pauli_stack(n: int, normalized: bool = True) -> np.ndarray:
    """All ``4**n`` Pauli matrices, identity first, shape ``(4**n, 2**n, 2**n)``."""
    _check_dense(n)
    return _stack_cached(n, normalized)


@lru_cache(maxsize=None)
def _stack_cached(n, normalized):
    out = np.array([_dense_cached(p.label, normalized) for p in enumerate_basis(n, "all_pauli")])
    out.setflags(write=False)
    return out


# --- circuits -----------------------------------------------------------------

_ONE_QUBIT = {"H", "S", "X", "Z"}
_TWO_QUBIT = {"CNOT", "SWAP"}
_GATE_MATS = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "X": _SINGLE["X"],
    "Z": _SINGLE["Z"],
}


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list; the first gate acts first.

    Gates are tuples such as ``("H", 0)`` or ``("CNOT", control, target)``.
    """

    n: int
    gates: tuple = ()

    def __post_init__(self):
        gates = tuple(tuple(g) for g in self.gates)
        for g in gates:
            name, qubits = g[0], g[1:]
            if name in _ONE_QUBIT:
                ok = len(qubits) == 1
            elif name in _TWO_QUBIT:
                ok = len(qubits) == 2 and qubits[0] != qubits[1]
            else:
                raise DomainError(f"unsupported gate {name!r}")
            if not ok or any(not 0 <= q < self.n for q in qubits):
                raise DomainError(f"bad qubit arguments in gate {g}")
        object.__setattr__(self, "gates", gates)

    def __len__(self):
        return len(self.gates)

    def then(self, other: "Circuit") -> "Circuit":
        """Circuit running ``self`` first and ``other`` second."""
        if other.n != self.n:
            raise DimensionError("circuits act on different qubit counts")
        return Circuit(self.n, self.gates + other.gates)

    def inverse(self) -> "Circuit":
        inv = []
        for g in reversed(self.gates):
            if g[0] == "S":
                inv.extend([g, g, g])
            else:
                inv.append(g)
        return Circuit(self.n, tuple(inv))

    @property
    def dense_unitary(self) -> np.ndarray:
        return circuit_unitary(self)

    def to_text(self) -> str:
        return "; ".join(" ".join(str(t) for t in g) for g in self.gates)

    @classmethod
    def from_text(cls, n, text):
        gates = []
        for chunk in text.split(";"):
            parts = chunk.split()
            if parts:
                gates.append((parts[0], *(int(q) for q in parts[1:])))
        return cls(n, tuple(gates))


def pauli_circuit(p: PauliString) -> Circuit:
    """Circuit equal to ``p`` up to a global phase (Y realized as Z then X)."""
    gates = []
    for q in range(p.n):
        if p.z_bits[q]:
            gates.append(("Z", q))
        if p.x_bits[q]:
            gates.append(("X", q))
    return Circuit(p.n, tuple(gates))


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Dense unitary of a circuit (read-only, cached)."""
    _check_dense(circuit.n)
    return _unitary_cached(circuit.n, circuit.gates)


@lru_cache(maxsize=200_000)
def _unitary_cached(n, gates):
    dim = 2**n
    u = np.eye(dim, dtype=complex)
    for g in gates:
        u = _apply_gate(u, n, g)
    u.setflags(write=False)
    return u


def _apply_gate(u, n, g):
    name = g[0]
    psi = u.reshape((2,) * n + (-1,))
    if name in _ONE_QUBIT:
        q = g[1]
        psi = np.moveaxis(np.tensordot(_GATE_MATS[name], psi, axes=([1], [q])), 0, q)
    elif name == "SWAP":
        psi = np.swapaxes(psi, g[1], g[2])
    else:
        c, t = g[1], g[2]
        psi = psi.copy()
        idx = [slice(None)] * (n + 1)
        idx[c] = 1
        sub = psi[tuple(idx)]
        t_axis = t if t < c else t - 1
        psi[tuple(idx)] = np.flip(sub, axis=t_axis)
    return psi.reshape(2**n, -1)


def conjugate_pauli(circuit: Circuit, p: PauliString, sign: int = 1):
    """Propagate ``sign * p`` through the circuit: returns ``(sign', U p U^dag)``.

    Uses the stabilizer-tableau update rules, so no dense matrices are built.
    """
    if p.n != circuit.n:
        raise DimensionError("circuit and Pauli act on different qubit counts")
    x = list(p.x_bits)
    z = list(p.z_bits)
    r = 0 if sign > 0 else 1
    for g in circuit.gates:
        name = g[0]
        if name == "H":
            a = g[1]
            r ^= x[a] & z[a]
            x[a], z[a] = z[a], x[a]
        elif name == "S":
            a = g[1]
            r ^= x[a] & z[a]
            z[a] ^= x[a]
        elif name == "X":
            r ^= z[g[1]]
        elif name == "Z":
            r ^= x[g[1]]
        elif name == "CNOT":
            c, t = g[1], g[2]
            r ^= x[c] & z[t] & (x[t] ^ z[c] ^ 1)
            x[t] ^= x[c]
            z[c] ^= z[t]
        elif name == "SWAP":
            a, b = g[1], g[2]
            x[a], x[b] = x[b], x[a]
            z[a], z[b] = z[b], z[a]
    return (-1 if r else 1), PauliString(p.n, x, z)


def _reduce_to_z0(p: PauliString) -> list:
    """Gates taking ``p`` to a signed single Z on qubit 0."""
    gates = []
    supp = p.support
    for q in supp:
        if p.x_bits[q] and p.z_bits[q]:
            gates += [("S", q), ("H", q)]
        elif p.x_bits[q]:
            gates.append(("H", q))
    head = supp[0]
    for q in supp[1:]:
        gates.append(("CNOT", q, head))
    if head != 0:
        gates.append(("SWAP", head, 0))
    return gates


def synthesize_clifford_map(p: PauliString, q: PauliString) -> Circuit:
    """Clifford circuit ``U`` with ``U p U^dag = +q``.

    Both strings are reduced to a single Z on qubit 0 (basis changes plus a
    CNOT fan-in over the support); the reduction of ``q`` is inverted and
    appended. A trailing X or Z fixes the sign when the result is ``-q``.
    Gate count is linear in ``n``.
    """
    if p.n != q.n:
        raise DimensionError("p and q act on different qubit counts")
    if p.is_identity or q.is_identity:
        raise DomainError("identity cannot be mapped to a traceless Pauli")
    return _synth_cached(p, q)


@lru_cache(maxsize=None)
def _synth_cached(p, q):
    n = p.n
    if p == q:
        circ = Circuit(n, ())
    else:
        vp = Circuit(n, tuple(_reduce_to_z0(p)))
        vq = Circuit(n, tuple(_reduce_to_z0(q)))
        circ = vp.then(vq.inverse())
    sign, image = conjugate_pauli(circ, p)
    assert image == q
    if sign < 0:
        a = q.support[0]
        fix = ("Z", a) if q.x_bits[a] else ("X", a)
        circ = Circuit(n, circ.gates + (fix,))
    return circ


def is_clifford_alphabet(circuit: Circuit) -> bool:
    return all(g[0] in _ONE_QUBIT | _TWO_QUBIT for g in circuit.gates)
