import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cavsei.hilbert import build_space
from cavsei.model import ModelParams, build_hamiltonian, default_params
from cavsei.spectrum import (closed_form_dark_states, collective_transform, dark_states,
                             dressed_levels, find_resonances_numeric, manifold_det,
                             manifold_matrix, resonance_detunings, resonance_residual,
                             sideband_energies, spectrum_rows, verify_bundle_eigenstates)

params_st = st.builds(
    ModelParams,
    Delta_a=st.floats(-4, 4), delta=st.floats(-3, 3), phi=st.floats(0, 2 * math.pi),
    V=st.floats(-2, 2), g_a=st.floats(0.2, 2.0), Omega=st.just(0.0),
)


def _full_block(p, n):
    """Manifold block cut from the full Hamiltonian (drive off), in the bare
    ordering |n-1,g,e>, |n-1,e,g>, |n-2,e,e>, |n,g,g>, measured from the
    n-pump-photon reference."""
    space = build_space(n + 1)
    H = build_hamiltonian(p.replace(Omega=0.0), space)
    states = [(n - 1, 0, 1), (n - 1, 1, 0)]
    if n >= 2:
        states.append((n - 2, 1, 1))
    states.append((n, 0, 0))
    idx = [space.index(*s) for s in states]
    return H[np.ix_(idx, idx)] + p.delta * np.eye(len(idx))


@settings(max_examples=40, deadline=None)
@given(p=params_st, n=st.integers(1, 4))
def test_manifold_matches_full_hamiltonian(p, n):
    assert np.allclose(manifold_matrix(n, p).matrix, _full_block(p, n), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(p=params_st, n=st.integers(1, 5))
def test_bare_and_collective_equivalent(p, n):
    bare = manifold_matrix(n, p, "bare").matrix
    coll = manifold_matrix(n, p, "collective").matrix
    assert np.allclose(bare, bare.T, atol=1e-12)
    assert np.allclose(np.linalg.eigvalsh(bare), np.linalg.eigvalsh(coll), atol=1e-10)
    U = collective_transform(n)
    assert np.allclose(U.T @ bare @ U, coll, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(p=params_st, n=st.integers(2, 4))
def test_darkness_is_basis_independent(p, n):
    U = collective_transform(n)
    bare = dark_states(n, p, "bare")
    coll = dark_states(n, p, "collective")
    assert len(bare) == len(coll)
    mm = manifold_matrix(n, p, "bare")
    for lvl in coll:
        v = U @ lvl.state
        assert np.linalg.norm(mm.coupling @ v) < 1e-9


def test_manifold_errors():
    with pytest.raises(ValueError):
        manifold_matrix(0, default_params())
    with pytest.raises(ValueError):
        manifold_matrix(1, default_params(), basis="dressed")


def test_single_excitation_sideband_condition():
    for D in (2.0, -2.0):
        p = default_params(phi=0.0, V=0.0, Delta_a=D, delta=D / 2)
        assert abs(np.linalg.det(manifold_matrix(1, p).matrix)) < 1e-12


def test_antisymmetric_state_decouples_at_phi_zero():
    p = default_params(phi=0.0, V=0.6, Delta_a=1.1, delta=-0.3)
    for n in (2, 3, 4):
        M = manifold_matrix(n, p, "collective").matrix
        assert np.allclose(M[1, [0, 2, 3]], 0.0)
        assert M[1, 1] == pytest.approx((n - 1) * p.Delta_a + p.delta - p.V)


def test_closed_form_dark_states_phi_zero():
    # degenerate dark pair sits at Delta_a = 0 (delta = Delta_a/2 = 0)
    p = default_params(phi=0.0, V=0.0, Delta_a=0.0, delta=0.0)
    mm = manifold_matrix(2, p)
    cf = closed_form_dark_states(2, -1)
    assert np.allclose(cf["A"], [1 / math.sqrt(2), -1 / math.sqrt(2), 0, 0])
    assert np.allclose(cf["S"], [0, 0, -math.sqrt(2 / 3), math.sqrt(1 / 3)])
    for v in cf.values():
        e = v @ mm.matrix @ v
        assert np.linalg.norm(mm.matrix @ v - e * v) < 1e-10
        assert np.linalg.norm(mm.coupling @ v) < 1e-10
    assert len(dark_states(2, p)) == 2


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_closed_form_dark_states_phi_pi(n):
    p = default_params(phi=math.pi, V=0.0, Delta_a=0.0, delta=0.0)
    mm = manifold_matrix(n, p)
    for v in closed_form_dark_states(n, +1).values():
        e = v @ mm.matrix @ v
        assert np.linalg.norm(mm.matrix @ v - e * v) < 1e-10
        assert np.linalg.norm(mm.coupling @ v) < 1e-10


def test_exchange_lifts_dark_degeneracy():
    p = default_params(phi=math.pi, V=1.0, Delta_a=0.7, delta=0.35)
    for n in (2, 3):
        assert len(dark_states(n, p)) == 1


def test_no_dark_states_at_quarter_phase():
    for D in np.linspace(-3, 3, 13):
        for V in (0.0, 0.5, 1.0):
            p = default_params(phi=math.pi / 2, V=V, Delta_a=D, delta=D / 2)
            for n in (1, 2, 3):
                if V == 0.0 and n == 1:
                    # atom 2 is decoupled, so |0,g,e> is trivially dark
                    (lvl,) = dark_states(n, p)
                    assert np.allclose(np.abs(lvl.state), [1, 0, 0])
                else:
                    assert dark_states(n, p) == []


def test_dressed_levels_sorted_and_orthonormal():
    p = default_params(phi=0.3, V=0.5, Delta_a=1.0, delta=0.2)
    levels = dressed_levels(manifold_matrix(3, p))
    E = [l.energy for l in levels]
    assert E == sorted(E)
    S = np.array([l.state for l in levels])
    assert np.allclose(S @ S.T, np.eye(4), atol=1e-12)


def test_sideband_energies_examples():
    D = 1.3
    Ep, Em = sideband_energies(default_params(phi=0.0, V=0.0, Delta_a=D, delta=D))
    assert (Ep, Em) == pytest.approx((D + math.sqrt(2), D - math.sqrt(2)))
    Ep, Em = sideband_energies(default_params(phi=0.0, V=2.0, Delta_a=D, delta=-2.0))
    assert (Ep, Em) == pytest.approx((D / 2 + 0.5 * math.sqrt(D * D + 8), D / 2 - 0.5 * math.sqrt(D * D + 8)))
    with pytest.raises(ValueError):
        sideband_energies(default_params(phi=1.0))


@settings(max_examples=40, deadline=None)
@given(D=st.floats(-4, 4), delta=st.floats(-3, 3), V=st.floats(-2, 2))
def test_sideband_energies_match_diagonalization(D, delta, V):
    p = default_params(phi=0.0, V=V, Delta_a=D, delta=delta)
    w = np.linalg.eigvalsh(manifold_matrix(1, p).matrix)
    Ep, Em = sideband_energies(p)
    # the third (antisymmetric) level sits at delta - V
    rest = sorted([Ep, Em, delta - V])
    assert np.allclose(w, rest, atol=1e-10)


def test_resonances_without_exchange():
    rs = resonance_detunings(default_params(V=0.0, phi=0.0), "ratio_of_Delta_a", 0.5)
    assert sorted(rs.values()) == pytest.approx([-2.0, 0.0, 2.0])
    rs = resonance_detunings(default_params(V=0.0, phi=1.0), "ratio_of_Delta_a", 0.5)
    side = math.sqrt(2 * (1 + math.cos(1.0) ** 2))
    assert sorted(rs.values("sideband")) == pytest.approx([-side, side])


def test_two_photon_resonances():
    p = default_params(V=0.4, phi=math.pi)
    rs = resonance_detunings(p, "ratio_of_V", -1.0)
    assert rs.values("two_photon_blue") == pytest.approx([-2.5])
    assert rs.values("two_photon_red") == pytest.approx([0.8])
    rs0 = resonance_detunings(default_params(V=0.0, phi=math.pi), "ratio_of_V", -1.0)
    assert any(r.at_infinity for r in rs0.resonances if r.family == "two_photon_blue")


def test_vacuum_rabi_resonances():
    rs = resonance_detunings(default_params(V=2.0, phi=0.0), "ratio_of_Delta_a", 0.5)
    assert sorted(rs.values()) == pytest.approx(sorted([-2 - math.sqrt(8), -2 + math.sqrt(8)]))
    for x in rs.values():
        assert x * x + 4 * x - 4 == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("p, mode, ratio", [
    (default_params(V=0.0, phi=0.0), "ratio_of_Delta_a", 0.5),
    (default_params(V=0.0, phi=2.0), "ratio_of_Delta_a", 0.5),
    (default_params(V=2.0, phi=0.0), "ratio_of_Delta_a", 0.5),
    (default_params(V=-0.7, phi=0.0), "ratio_of_Delta_a", 0.5),
    (default_params(V=2.0, phi=0.0, delta=-1.2), "fixed", None),
    (default_params(V=0.4, phi=math.pi), "ratio_of_V", -1.0),
    (default_params(V=1.3, phi=math.pi), "ratio_of_V", -1.0),
    (default_params(V=0.8, phi=1.1, delta=0.4), "fixed", None),
])
def test_every_resonance_is_singular(p, mode, ratio):
    rs = resonance_detunings(p, mode, ratio)
    assert rs.resonances
    for r in rs.resonances:
        if not r.at_infinity:
            assert resonance_residual(r, p, mode, ratio) < 1e-8


def test_numeric_scan_agrees_with_closed_form():
    p = default_params(V=2.0, phi=0.0)
    roots = find_resonances_numeric(1, p, "ratio_of_Delta_a", 0.5)
    # closed-form vacuum Rabi pair plus the decoupled antisymmetric level at delta = V
    expected = sorted([-2 - math.sqrt(8), -2 + math.sqrt(8), 4.0])
    assert sorted(roots) == pytest.approx(expected, abs=1e-10)
    p = default_params(V=0.4, phi=math.pi)
    roots = find_resonances_numeric(2, p, "ratio_of_V", -1.0)
    assert any(abs(r + 2.5) < 1e-9 for r in roots) and any(abs(r - 0.8) < 1e-9 for r in roots)
    assert abs(manifold_det(2, p, 0.8, "ratio_of_V", -1.0)) < 1e-12


def test_bundle_report_flags_published_discrepancies():
    rep = verify_bundle_eigenstates(default_params(V=0.4))
    checks = {c.name: c for c in rep.checks}
    assert checks["psi_1,1"].is_eigenvector and checks["psi_1,1"].norm_consistent
    assert checks["psi_2,1"].is_eigenvector
    assert not checks["psi_2,1"].norm_consistent
    c22 = checks["psi_2,2"]
    assert not c22.is_eigenvector and not c22.norm_consistent
    # the recomputed norm is sqrt(3 g^2 + 2 V^2)
    assert c22.computed_norm == pytest.approx(math.sqrt(3 + 2 * 0.16))
    # corrected vector: sqrt2 V |1,-> + g |0,ee> + g/sqrt2 |2,gg>
    assert np.allclose(c22.corrected, [0, math.sqrt(2) * 0.4, 1.0, 1 / math.sqrt(2)], atol=1e-10)
    mm = manifold_matrix(2, default_params(V=0.4, phi=math.pi, delta=-0.4, Delta_a=0.8), "collective")
    v = c22.corrected / np.linalg.norm(c22.corrected)
    assert np.linalg.norm(mm.matrix @ v - (v @ mm.matrix @ v) * v) < 1e-9
    assert any("psi_2,2" in d and "not an eigenvector" in d for d in rep.discrepancies)
    assert len(rep.lines()) == 3 + len(rep.discrepancies)


def test_bundle_state_at_equal_coupling():
    rep = verify_bundle_eigenstates(default_params(V=1.0))
    c = next(c for c in rep.checks if c.name == "psi_1,1")
    v = c.coefficients / c.computed_norm
    assert np.allclose(v, [0, 1 / math.sqrt(3), -math.sqrt(2) / math.sqrt(3)])
    assert c.residual < 1e-9
    with pytest.raises(ValueError):
        verify_bundle_eigenstates(default_params(V=0.0))


@pytest.mark.parametrize("V", [0.0, 1.0])
def test_branch_counts(V):
    rows = spectrum_rows(default_params(V=V), np.linspace(-3, 3, 7), n_max=2)
    for n, count in ((1, 3), (2, 4)):
        assert len({b for m, b, *_ in rows if m == n}) == count
    assert len(rows) == 7 * 7
