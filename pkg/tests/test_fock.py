from itertools import combinations
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rpchain.fock import (CompositeBasis, PhononBasisSpec, check_transform_orthonormality,
                          enumerate_half_filled, hermite_position_transform, mask_of, q_left,
                          q_right, sector_decompose, sites_of)


def test_enumeration_small():
    assert enumerate_half_filled(1) == [(-1,), (0,)]
    assert len(enumerate_half_filled(3)) == 20
    two = enumerate_half_filled(2)
    assert len(two) == 6 and two[0] == (-2, -1)
    brute = sorted(c for c in combinations(range(-2, 2), 2))
    assert two == brute


@pytest.mark.parametrize("ell", [1, 2, 3, 4, 5])
def test_enumeration_counts(ell):
    configs = enumerate_half_filled(ell)
    assert len(configs) == comb(2 * ell, ell)
    assert all(len(c) == ell for c in configs)
    assert configs == sorted(configs)


def test_enumeration_guard():
    with pytest.raises(ValueError):
        enumerate_half_filled(16)
    with pytest.raises(ValueError):
        enumerate_half_filled(0)


def test_sectors():
    assert sector_decompose(3).q_values == (-2, -1, 0, 1)
    t1 = sector_decompose(1)
    assert t1.q_values == (-1, 0)
    for ell in (1, 3, 5):
        t = sector_decompose(ell)
        assert t.size() == comb(2 * ell, ell)
        for q in t.q_values:
            assert all(q_left(x) == q for x in t.left_labels[q])
            assert all(q_right(y) == q for y in t.right_labels[q])


def test_balanced_basis_is_half_filled_image():
    ph = PhononBasisSpec.fock(0)
    bal = CompositeBasis.balanced(3, ph)
    assert bal.n_fermion == 20
    seen = set()
    for c in bal.configs():
        left = tuple(j for j in c if j < 0)
        right = tuple(j for j in c if j >= 0)
        assert q_left(left) == q_right(right)
        assert c not in seen
        seen.add(c)


def test_hermite_transform():
    T, w, _ = hermite_position_transform(0, 1)
    assert T.shape == (1, 1)
    assert check_transform_orthonormality(0, 1) < 1e-14
    assert check_transform_orthonormality(3, 8) <= 1e-10
    T, w, nodes = hermite_position_transform(4, 7)
    assert np.all(T[0] > 0)
    with pytest.raises(ValueError):
        hermite_position_transform(4, 4)


def test_grid_rotation_orthogonal():
    ph = PhononBasisSpec.grid(6)
    S = ph.rotation
    assert np.abs(S.T @ S - np.eye(6)).max() < 1e-12


@given(st.integers(0, 2 * 3 * 3 ** 6 - 1))
@settings(max_examples=60, deadline=None)
def test_index_round_trip(i):
    basis = CompositeBasis.half_filled(3, PhononBasisSpec.fock(2))
    i = i % basis.dim
    config, ph = basis.state_of(i)
    assert basis.index_of(config, ph) == i


@given(st.sets(st.integers(-4, 3)))
def test_mask_round_trip(sites):
    config = tuple(sorted(sites))
    assert sites_of(mask_of(config, 4), 4) == config
    left = tuple(j for j in config if j < 0)
    right = tuple(j for j in config if j >= 0)
    assert tuple(sorted(left + right)) == config


def test_dimensions():
    b = CompositeBasis.half_filled(2, PhononBasisSpec.fock(3))
    assert b.dim == 6 * 4 ** 4
    full = CompositeBasis.all_fillings(1, PhononBasisSpec.fock(1))
    assert full.dim == 4 * 2 ** 2
    with pytest.raises(ValueError):
        b.index_of((-2, -1), (0, 0, 0))
    with pytest.raises(IndexError):
        b.state_of(b.dim)
