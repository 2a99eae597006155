import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simtomo.errors import CapacityError, DimensionError, DomainError, ParseError
from simtomo.pauli import (
    Circuit,
    circuit_unitary,
    commutes,
    conjugate_pauli,
    enumerate_basis,
    identity,
    is_clifford_alphabet,
    pauli_dense,
    pauli_from_label,
    synthesize_clifford_map,
)

labels = st.integers(1, 3).flatmap(lambda n: st.tuples(st.text("IXYZ", min_size=n, max_size=n), st.text("IXYZ", min_size=n, max_size=n)))


@pytest.mark.parametrize(
    "text, xs, zs",
    [("II", (0, 0), (0, 0)), ("ZI", (0, 0), (1, 0)), ("XY", (1, 1), (0, 1))],
)
def test_label_bits(text, xs, zs):
    p = pauli_from_label(text)
    assert p.n == len(text)
    assert tuple(p.x_bits) == xs and tuple(p.z_bits) == zs
    assert p.label == text


def test_bad_label_names_position():
    with pytest.raises(ParseError, match="2"):
        pauli_from_label("XZQ")


@pytest.mark.parametrize("a, b, expected", [("X", "Z", False), ("XX", "ZZ", True), ("XI", "IZ", True), ("Y", "Y", True)])
def test_commutes_examples(a, b, expected):
    assert commutes(pauli_from_label(a), pauli_from_label(b)) is expected


def test_commutes_dimension_mismatch():
    with pytest.raises(DimensionError):
        commutes(pauli_from_label("X"), pauli_from_label("XX"))


@pytest.mark.parametrize("n", [1, 2])
def test_commutes_matches_dense_exhaustive(n):
    ps = enumerate_basis(n, "all_pauli")
    for p, q in itertools.product(ps, ps):
        a, b = pauli_dense(p), pauli_dense(q)
        assert commutes(p, q) == np.allclose(a @ b, b @ a)


@settings(max_examples=60, deadline=None)
@given(labels)
def test_commutes_matches_dense_random(pair):
    p, q = map(pauli_from_label, pair)
    a, b = pauli_dense(p), pauli_dense(q)
    assert commutes(p, q) == np.allclose(a @ b, b @ a)


def test_dense_examples():
    assert np.allclose(pauli_dense(pauli_from_label("I"), normalized=True), np.eye(2) / np.sqrt(2))
    assert np.allclose(pauli_dense(pauli_from_label("ZZ")), np.diag([1, -1, -1, 1]))


def test_dense_capacity():
    with pytest.raises(CapacityError):
        pauli_dense(identity(7))


@pytest.mark.parametrize("n", [1, 2])
def test_normalized_basis_orthonormal(n):
    stack = np.array([pauli_dense(p, normalized=True) for p in enumerate_basis(n, "all_pauli")])
    gram = np.einsum("aji,bji->ab", stack.conj(), stack)
    assert np.allclose(gram, np.eye(4**n), atol=1e-12)


def test_basis_examples():
    assert [p.label for p in enumerate_basis(1)] == ["X", "Y", "Z"]
    assert [p.label for p in enumerate_basis(2, "x_strings")] == ["II", "IX", "XI", "XX"]
    assert [p.label for p in enumerate_basis(2, "z_strings")] == ["II", "IZ", "ZI", "ZZ"]
    assert len(enumerate_basis(3)) == 63


@pytest.mark.parametrize("n", [1, 2, 3])
def test_half_of_x_strings_commute_with_z_strings(n):
    xs = enumerate_basis(n, "x_strings")
    for q in enumerate_basis(n, "z_strings")[1:]:
        assert sum(commutes(x, q) for x in xs) == 2 ** (n - 1)


def test_synthesis_examples():
    assert len(synthesize_clifford_map(pauli_from_label("Z"), pauli_from_label("Z"))) == 0
    h = synthesize_clifford_map(pauli_from_label("X"), pauli_from_label("Z"))
    assert h.gates == (("H", 0),)


def test_synthesis_rejects_identity():
    with pytest.raises(DomainError):
        synthesize_clifford_map(identity(2), pauli_from_label("ZI"))


@pytest.mark.parametrize("seed", range(200))
def test_synthesis_maps_to_plus_q(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    basis = enumerate_basis(n)
    p, q = basis[rng.integers(len(basis))], basis[rng.integers(len(basis))]
    circ = synthesize_clifford_map(p, q)
    u = circuit_unitary(circ)
    assert np.abs(u @ pauli_dense(p) @ u.conj().T - pauli_dense(q)).max() < 1e-12
    assert len(circ) <= 10 * n + 4
    assert is_clifford_alphabet(circ)


def test_conjugate_pauli_tracks_sign():
    circ = Circuit(1, (("H", 0), ("S", 0)))
    u = circuit_unitary(circ)
    for p in enumerate_basis(1):
        sign, image = conjugate_pauli(circ, p)
        assert np.allclose(u @ pauli_dense(p) @ u.conj().T, sign * pauli_dense(image))


def test_circuit_text_and_inverse():
    circ = Circuit(2, (("H", 0), ("CNOT", 0, 1), ("S", 1), ("SWAP", 0, 1)))
    assert Circuit.from_text(2, circ.to_text()) == circ
    u = circuit_unitary(circ.then(circ.inverse()))
    assert np.allclose(u, np.eye(4) * u[0, 0]) and abs(abs(u[0, 0]) - 1) < 1e-12
