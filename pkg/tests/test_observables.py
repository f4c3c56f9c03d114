import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from rpchain.cones import reflection_vector
from rpchain.fock import CompositeBasis, PhononBasisSpec
from rpchain.model import InteractionSpec, ModelParams
from rpchain.observables import (GroundData, all_strings, cdw_string, correlation_matrix,
                                 correlation_rows, correlator, energy_monotonicity, infrared_bound,
                                 laplacian_form, r_apply, r_matrix, stagger, structure_factor,
                                 susceptibility_bound, w_inner, write_correlation_csv)
from rpchain.operators import build_hamiltonian
from rpchain.spectral import ground_state

SPEC = InteractionSpec.power_law(1.5)


@pytest.fixture(scope="module")
def ground3():
    p = ModelParams(ell=3, g=0.3, interaction=InteractionSpec.nearest(1.0), n_max=1)
    half = CompositeBasis.half_filled(3, PhononBasisSpec.fock(1))
    _, psi, _ = ground_state(build_hamiltonian(p, half))
    return p, half, psi


def test_correlation_matrix_and_sum_rule(ground3):
    _, half, psi = ground3
    C = correlation_matrix(psi, half)
    assert np.allclose(np.diag(C), 0.25, atol=1e-15)
    assert C[1, 4] == pytest.approx(correlator(psi, half, -2, 1), abs=1e-14)
    p, S, G = structure_factor(C)
    assert G[0] == pytest.approx(0.25, abs=1e-15)
    assert S.mean() == pytest.approx(0.25, abs=1e-12)
    # CDW order: the p = pi mode dominates
    assert int(np.argmax(S)) == 3


def test_correlation_csv(tmp_path, ground3):
    _, half, psi = ground3
    rows = correlation_rows(correlation_matrix(psi, half), 3)
    assert len(rows) == 36
    path = tmp_path / "c.csv"
    write_correlation_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "i,j,corr,staggered" and len(lines) == 37


def test_cdw_strings_agree_across_pictures(ground3):
    p, half, psi = ground3
    bal = CompositeBasis.balanced(3, half.phonon)
    psi_t = reflection_vector(psi, p, half, bal)
    strings = all_strings(3)
    assert len(strings) == 8
    for s in strings:
        a = cdw_string(psi, half, s, "original")
        b = cdw_string(psi_t, bal, s, "transformed")
        assert a == pytest.approx(b, abs=1e-12)
        assert a >= -1e-10
    with pytest.raises(ValueError):
        cdw_string(psi, half, (0,))
    with pytest.raises(ValueError):
        cdw_string(psi, half, (-1,), picture="sideways")


def test_structure_factor_of_constant_correlation():
    C = 0.25 * np.eye(4)
    p, S, G = structure_factor(C)
    assert np.allclose(S, 0.25)


@given(arrays(np.float64, 6, elements=st.floats(-3, 3)), arrays(np.float64, 6, elements=st.floats(-3, 3)))
@settings(max_examples=40, deadline=None)
def test_weighted_form_is_r_quadratic_form(h, k):
    z = h + 1j * k
    assert w_inner(z, z, SPEC).real == pytest.approx(np.vdot(z, r_apply(SPEC, z)).real, abs=1e-9)
    assert np.allclose(stagger(stagger(z)), z)


def test_r_matrix_kills_constants():
    R = r_matrix(SPEC, 3)
    assert np.abs(R @ np.ones(6)).max() < 1e-12
    assert np.allclose(R, R.T)
    assert laplacian_form(np.ones(6)) == 0
    assert laplacian_form(stagger(np.ones(6))) == pytest.approx(24.0)


@pytest.fixture(scope="module")
def gd1():
    return GroundData.build(ModelParams(ell=1, g=0.3, interaction=SPEC, n_max=3))


def test_inequalities_on_seeded_fields(gd1):
    rng = np.random.default_rng(5)
    for _ in range(5):
        h = rng.standard_normal(2)
        assert energy_monotonicity(gd1, h)["holds"]
        z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        s = susceptibility_bound(gd1, z)
        assert s["holds"] and s["reliable"]
        assert s["lhs"] == pytest.approx(s["lhs_parts"], rel=1e-9, abs=1e-12)
        ir = infrared_bound(gd1, z)
        assert ir["holds"] and ir["reliable"]


def test_ground_means_vanish(gd1):
    assert np.abs(gd1.dn_means()).max() < 1e-9


def test_degenerate_ground_state_is_refused():
    with pytest.raises(RuntimeError):
        GroundData.build(ModelParams(ell=1, t=1e-14, g=0.0, n_max=0))


def test_energy_lanczos_matches_dense(gd1):
    h = np.array([0.4, -1.1])
    a = energy_monotonicity(gd1, h, method="dense")["Eh"]
    b = energy_monotonicity(gd1, h, method="lanczos")["Eh"]
    assert a == pytest.approx(b, abs=1e-10)
