import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from rpchain.fock import CompositeBasis, PhononBasisSpec
from rpchain.model import InteractionSpec, ModelParams
from rpchain.operators import build_hamiltonian, build_transformed
from rpchain.transforms import (Bipartition, apply_lang_firsov, b_full, devectorize,
                                hole_particle_identities, hole_particle_map, lang_firsov,
                                lang_firsov_gap, lf_intertwining_defects, reflection_identities,
                                vectorize)


@pytest.mark.parametrize("ell", [1, 3, 5])
def test_hole_particle_operator_identities(ell):
    d = hole_particle_identities(ell)
    for key in ("odd", "even", "dn_stagger", "unitarity", "vacuum_corrected"):
        assert d[key] == 0.0, key


@pytest.mark.parametrize("ell", [1, 3, 5])
def test_vacuum_sign_is_opposite_to_printed_prefactor(ell):
    # documents the sign correction: U Omega = -(printed CDW vacuum)
    assert hole_particle_identities(ell)["vacuum_printed"] == pytest.approx(2.0)


def test_b_operators_anticommute():
    ell = 3
    I = sp.identity(1 << 6)
    for i in range(-ell, 0):
        for j in range(-ell, 0):
            bi, bj = b_full(ell, i), b_full(ell, j)
            anti = bi @ bj.T + bj.T @ bi
            assert abs((anti - (I if i == j else 0 * I)).toarray()).max() == 0
    with pytest.raises(ValueError):
        b_full(ell, 0)


@pytest.mark.parametrize("params", [
    ModelParams(ell=1, t=1.0, g=0.4, interaction=InteractionSpec.power_law(1.5), n_max=3),
    ModelParams(ell=3, t=0.8, g=0.3, interaction=InteractionSpec.nearest(1.0), n_max=1),
])
def test_reflection_identities_exact(params):
    d = reflection_identities(params)
    assert set(d) == {"i", "ii", "iii", "iv", "v"}
    assert max(d.values()) <= 1e-12


def test_lang_firsov_unitary_and_matches_matrix_free():
    p = ModelParams(ell=1, g=0.5, n_max=4)
    basis = CompositeBasis.all_fillings(1, PhononBasisSpec.fock(4))
    V = lang_firsov(p, basis).matrix
    assert abs(V @ V.conj().T - sp.identity(basis.dim)).max() < 1e-12
    psi = np.random.default_rng(1).standard_normal(basis.dim)
    assert np.abs(V @ psi - apply_lang_firsov(p, basis, psi)).max() < 1e-13
    assert np.abs(apply_lang_firsov(p, basis, V @ psi, inverse=True) - psi).max() < 1e-12


def test_lang_firsov_intertwining_on_probe():
    # truncation error shrinks as the probe moves away from the cutoff
    d = lf_intertwining_defects(ModelParams(ell=1, g=0.4, n_max=16), probe_max=4)
    assert d["a_defect"] < 1e-10
    assert d["c_defect"] < 1e-12


def test_lang_firsov_gap_converges():
    gaps = [lang_firsov_gap(ModelParams(ell=1, g=0.5, n_max=n))[0] for n in (2, 4, 6, 8)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] <= 1e-3


def test_transform_at_zero_coupling_is_unitary_equivalence():
    p = ModelParams(ell=3, t=1.0, interaction=InteractionSpec.power_law(2.0), n_max=0)
    ph = PhononBasisSpec.fock(0)
    half, bal = CompositeBasis.half_filled(3, ph), CompositeBasis.balanced(3, ph)
    U = hole_particle_map(half, bal)
    H = build_hamiltonian(p, half).matrix
    Ht = build_transformed(p, bal).matrix
    # g = 0: only the phonon phase of V is left, which is 1 at n_max = 0
    assert abs(U @ H @ U.conj().T - Ht).max() < 1e-12


@given(st.integers(0, 2 ** 31 - 1))
@settings(max_examples=15, deadline=None)
def test_vectorize_round_trip(seed):
    bal = CompositeBasis.balanced(3, PhononBasisSpec.fock(1))
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal(bal.dim) + 1j * rng.standard_normal(bal.dim)
    bip = Bipartition(3, bal.phonon)
    sm = vectorize(psi, bal, bip)
    assert sm.frobenius_sq() == pytest.approx(np.vdot(psi, psi).real, rel=1e-12)
    assert np.abs(devectorize(sm, bal, bip) - psi).max() < 1e-13


def test_theta_is_involutive_up_to_sign_and_maps_sectors():
    bip = Bipartition(3, PhononBasisSpec.fock(1))
    P = bip.theta.perm
    assert abs(P @ P.T - sp.identity(bip.half_dim)).max() == 0
    assert set(bip.sector_indices) == {-2, -1, 0, 1}
    sizes = sum(len(ix) for ix in bip.sector_indices.values())
    assert sizes == bip.half_dim


def test_vectorize_rejects_wrong_length():
    bal = CompositeBasis.balanced(1, PhononBasisSpec.fock(1))
    with pytest.raises(ValueError):
        vectorize(np.ones(bal.dim + 1), bal)
