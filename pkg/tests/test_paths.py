from itertools import combinations

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from rpchain.model import InteractionSpec, ModelParams
from rpchain.paths import (ConfigPath, DysonSetup, LeftSpace, Move, check_path, cluster_decompose,
                           connect_to_vacuum, dyson_oracle, dyson_remainder, dyson_term,
                           hole_particle_config, keyex_table, leading_order_fit, path_amplitude,
                           path_operator, vacuum_overlap)


def _left_configs(ell):
    left = range(-ell, 0)
    return [c for n in range(ell + 1) for c in combinations(left, n)]


def test_cluster_decompose():
    assert cluster_decompose(()) == []
    assert cluster_decompose((-5, -4, -2, -1)) == [(-5, -4), (-2, -1)]
    assert cluster_decompose((-1, -3, -4)) == [(-4, -3), (-1,)]


def test_hole_particle_config():
    # U flips occupations on odd sites
    assert hole_particle_config((-3, -1, 1), 3) == ((), ())
    assert hole_particle_config((), 1) == ((-1,), ())


@pytest.mark.parametrize("ell", [1, 3, 5])
def test_every_left_config_connects(ell):
    for c in _left_configs(ell):
        p = connect_to_vacuum(c, ell)
        ok, why = check_path(p)
        assert ok, (c, why)


@given(st.sets(st.integers(-7, -1)))
@settings(max_examples=40, deadline=None)
def test_connect_property_ell7(config):
    p = connect_to_vacuum(config, 7)
    assert check_path(p)[0]
    assert p.configs[0] == tuple(sorted(config))
    # each pair move changes the particle number by two, each seam move by one
    n_pair = sum(1 for m in p.moves if m.kind == "pair")
    assert p.order == n_pair


def test_single_site_path_is_a_seam_move():
    p = connect_to_vacuum((-1,), 1)
    assert [m.kind for m in p.moves] == ["seam"] and p.order == 0
    assert connect_to_vacuum((), 1).moves == []


def test_checker_rejects_bad_paths():
    bad_pair = ConfigPath(3, [(-3, -1), ()], [Move("pair", (-3, -1), "annihilate")])
    assert not check_path(bad_pair)[0]
    bad_seam = ConfigPath(3, [(-2,), ()], [Move("seam", (-2,), "annihilate")])
    assert not check_path(bad_seam)[0]
    not_done = ConfigPath(3, [(-2, -1), (-2, -1, -3)], [Move("pair", (-3, -2), "create")])
    assert not check_path(not_done)[0]
    stuck = ConfigPath(3, [(-1,)], [])
    assert not check_path(stuck)[0]
    assert check_path(stuck, require_vacuum=False)[0]
    with pytest.raises(ValueError):
        connect_to_vacuum((0,), 3)
    with pytest.raises(ValueError):
        connect_to_vacuum((), 2)


@pytest.fixture(scope="module")
def space3():
    return LeftSpace(ModelParams(ell=3, g=0.3, interaction=InteractionSpec.power_law(1.5), n_max=1))


def test_left_operator_hermitian(space3):
    K = space3.K
    assert np.abs(K - K.conj().T).max() < 1e-14
    assert np.abs(space3.B(-1, "create") - space3.B(-1, "annihilate").conj().T).max() == 0


@pytest.mark.parametrize("config", [(-3,), (-2,), (-3, -2), (-3, -1), (-3, -2, -1)])
def test_amplitude_order_matches_move_count(space3, config):
    fit = leading_order_fit(connect_to_vacuum(config, 3), space3)
    assert fit["ok"], fit


def test_amplitude_at_zero_tau_vanishes_for_pair_paths(space3):
    p = connect_to_vacuum((-3, -2), 3)
    assert p.order == 1
    assert path_amplitude(p, 0.0, space3) == 0


def test_keyex_all_pairs_nonzero(space3):
    configs = _left_configs(3)
    table = keyex_table(space3, configs)
    assert all(v is not None for v in table.values())
    assert vacuum_overlap(space3, 0.5).real > 0


# ------------------------------------------------------------ Dyson expansion

@pytest.fixture(scope="module")
def dyson1():
    return DysonSetup.build(ModelParams(ell=1, g=0.3, interaction=InteractionSpec.nearest(1.0), n_max=2))


@pytest.mark.parametrize("n", [0, 1, 2])
def test_dyson_terms_match_cauchy_oracle(dyson1, n):
    beta = 0.7
    D = dyson_term(dyson1, beta, n)
    O = dyson_oracle(dyson1, beta, n)
    assert np.abs(D - O).max() <= 1e-10 * max(1.0, np.abs(O).max())


def test_dyson_remainder_shrinks(dyson1):
    beta = 0.3
    s = dyson1
    H0 = s.G - s.w0 / 2 * s.P + s.w0 * 2 * s.basis.ell / 8 * np.eye(s.basis.dim)
    exact_gap = sla.expm(-beta * s.H) - sla.expm(-beta * H0)
    tails = [np.abs(dyson_remainder(s, beta, n) - exact_gap).max() for n in (0, 1, 2)]
    assert tails[0] > tails[1] > tails[2]
    assert tails[2] < 1e-3


def test_path_operator_at_time_zero(dyson1):
    beta = 0.4
    for X in [(), (-1,)]:
        P = path_operator(dyson1, [X], [0.0], beta)
        assert np.abs(P - dyson1.projector_EX(X) @ dyson1.expG(beta)).max() < 1e-13
    total = sum(dyson1.projector_EX(X) for X in [(), (-1,)])
    assert np.abs(total - dyson1.P).max() == 0
    with pytest.raises(ValueError):
        dyson1.ordered_product([0.3, 0.1], [dyson1.P, dyson1.P], beta)
    with pytest.raises(ValueError):
        dyson_term(dyson1, beta, 3)
