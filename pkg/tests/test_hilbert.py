import numpy as np
import pytest

from cavsei.hilbert import (Space, annihilation, atom_operator, build_space,
                            excitation_number, identity, number_operator)


@pytest.mark.parametrize("cutoff, dim", [(1, 8), (3, 16), (7, 32)])
def test_dimension(cutoff, dim):
    assert build_space(cutoff).dim == dim


def test_default_cutoff():
    assert build_space().photon_cutoff == 7


def test_invalid_cutoff():
    with pytest.raises(ValueError):
        build_space(0)


def test_index_label_roundtrip():
    s = build_space(4)
    for k in range(s.dim):
        assert s.index(*s.label(k)) == k


def test_ket_outside_space():
    with pytest.raises(ValueError):
        build_space(2).ket(3, "g", "g")


def test_annihilation_matrix_elements():
    s = build_space(5)
    a = annihilation(s)
    assert s.ket(0, "g", "g") @ a @ s.ket(1, "g", "g") == pytest.approx(1.0)
    assert s.ket(1, "g", "g") @ a @ s.ket(2, "g", "g") == pytest.approx(np.sqrt(2))
    for s1 in (0, 1):
        for s2 in (0, 1):
            assert np.allclose(a[:, s.index(0, s1, s2)], 0)


def test_annihilation_commutator_below_cutoff():
    s = build_space(6)
    a = annihilation(s)
    comm = a @ a.T - a.T @ a
    # [a, a^dag] = 1 except on the top Fock level
    top = s.photon_projector(6)
    assert np.allclose(comm + 7 * top, np.eye(s.dim))


def test_operators_read_only():
    a = annihilation(build_space(3))
    with pytest.raises(ValueError):
        a[0, 0] = 1.0


def test_atom_operators():
    s = build_space(2)
    sz1 = atom_operator(s, 1, "z")
    assert np.allclose(sz1 @ s.ket(0, "e", "g"), s.ket(0, "e", "g"))
    sm2 = atom_operator(s, 2, "minus")
    assert np.allclose(sm2 @ s.ket(0, "g", "e"), s.ket(0, "g", "g"))
    ex = atom_operator(s, 1, "plus") @ sm2 + atom_operator(s, 1, "minus") @ atom_operator(s, 2, "plus")
    assert np.allclose(ex @ s.ket(0, "g", "e"), s.ket(0, "e", "g"))


def test_pauli_algebra():
    s = build_space(1)
    for atom in (1, 2):
        x, y, z = (atom_operator(s, atom, k) for k in "xyz")
        assert np.allclose(x @ y - y @ x, 2j * z)
        assert np.allclose(x @ x, identity(s))
    assert np.allclose(atom_operator(s, 1, "x") @ atom_operator(s, 2, "z"),
                       atom_operator(s, 2, "z") @ atom_operator(s, 1, "x"))


def test_bad_atom_arguments():
    s = build_space(1)
    with pytest.raises(ValueError):
        atom_operator(s, 3, "z")
    with pytest.raises(ValueError):
        atom_operator(s, 1, "w")


def test_number_and_excitation():
    s = build_space(3)
    N = excitation_number(s)
    assert np.allclose(np.diag(number_operator(s)), [q for q, _, _ in s.labels()])
    assert np.allclose(np.diag(N), [q + a + b for q, a, b in s.labels()])


def test_space_is_hashable():
    assert Space(3) == build_space(3)
    assert len({Space(3), Space(3)}) == 1
