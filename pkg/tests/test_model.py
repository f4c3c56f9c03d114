import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rpchain.model import (InteractionSpec, ModelParams, check_condition_B, check_condition_C,
                           condition_b_matrix, u_of, w_abs_sum, w_of)

SPECS = [
    InteractionSpec.none(),
    InteractionSpec.nearest(2.0),
    InteractionSpec.power_law(1.5),
    InteractionSpec.power_law(0.7, amplitude=3.0),
    InteractionSpec.from_table({1: 0.5, -1: 0.5, 2: -0.2, -2: -0.2}),
]


def test_u_examples():
    assert u_of(InteractionSpec.nearest(2.0), -1) == 2.0
    assert u_of(InteractionSpec.power_law(1.5), 2) == pytest.approx(-(2 ** -1.5), abs=1e-15)
    assert u_of(InteractionSpec.power_law(1.5), 2) == pytest.approx(-0.35355339, abs=1e-8)
    for spec in SPECS:
        assert u_of(spec, 0) == 0.0


def test_w_examples():
    assert w_of(InteractionSpec.nearest(2.0), 1) == 2.0
    assert w_of(InteractionSpec.power_law(1.5), 3) == pytest.approx(0.19245009, abs=1e-8)
    assert w_of(InteractionSpec.power_law(1.5), 3) == 3 ** -1.5


@pytest.mark.parametrize("spec", SPECS)
def test_u_and_w_symmetric(spec):
    for j in range(-12, 13):
        assert u_of(spec, j) == u_of(spec, -j)
        assert w_of(spec, j) == w_of(spec, -j)


@given(st.floats(0.1, 4.0), st.floats(0.1, 5.0), st.integers(1, 40))
def test_power_law_w_is_positive_decay(alpha, amp, j):
    spec = InteractionSpec.power_law(alpha, amp)
    assert w_of(spec, j) == pytest.approx(amp * j ** -alpha, rel=1e-14)


def test_invalid_specs_rejected():
    with pytest.raises(ValueError):
        InteractionSpec.nearest(-1.0)
    with pytest.raises(ValueError):
        InteractionSpec.power_law(0.0)
    with pytest.raises(ValueError):
        InteractionSpec.from_table({1: 1.0})
    with pytest.raises(ValueError):
        InteractionSpec.from_table({0: 1.0})
    with pytest.raises(ValueError):
        InteractionSpec("exotic")


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(ell=0)
    with pytest.raises(ValueError):
        ModelParams(t=0.0)
    with pytest.raises(ValueError):
        ModelParams(omega=-1.0)
    with pytest.raises(ValueError):
        ModelParams(ell=2).require_odd()
    p = ModelParams(ell=3, n_max=2)
    assert p.grid_nodes == 5
    assert p.alpha_lf == 0.0
    assert ModelParams(g=0.5, omega=2.0).alpha_lf == pytest.approx(math.sqrt(2) * 0.5 / math.sqrt(2))


def test_condition_b_nearest():
    r = check_condition_B(InteractionSpec.nearest(1.0), 3)
    m = np.zeros((3, 3))
    m[2, 2] = 1.0
    assert np.array_equal(r["matrix"], m)
    assert r["min_eig"] == pytest.approx(0.0, abs=1e-15)
    assert r["B1"] and not r["B2"]


def test_condition_b_power_law_and_none():
    r = check_condition_B(InteractionSpec.power_law(1.5), 3)
    assert r["min_eig"] > 0 and r["B2"] and r["B1"]
    r0 = check_condition_B(InteractionSpec.none(), 5)
    assert not np.any(r0["matrix"]) and r0["B1"] and not r0["B2"]


@pytest.mark.parametrize("ell", [1, 3, 5, 7])
@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 2.5])
def test_power_law_hankel_positive_definite(ell, alpha):
    m = condition_b_matrix(InteractionSpec.power_law(alpha), ell)
    left = np.arange(-ell, 0)
    hankel = np.abs(left[:, None] + left[None, :] + 1.0) ** -alpha
    assert np.allclose(m, hankel, atol=0)
    assert np.array_equal(m, m.T)
    assert np.linalg.eigvalsh(m)[0] > 0


@pytest.mark.parametrize("spec", SPECS)
def test_b2_implies_b1(spec):
    for ell in (1, 3, 5):
        r = check_condition_B(spec, ell)
        assert r["B1"] or not r["B2"]
        assert np.array_equal(r["matrix"], r["matrix"].T)


def test_condition_c():
    r = check_condition_C(InteractionSpec.power_law(1.5))
    assert r["c1_holds"] and r["c2_holds"]
    assert r["c1_sum"] == pytest.approx(2.6123753486854883, rel=1e-12)
    n = check_condition_C(InteractionSpec.nearest(1.0))
    assert n["c1_sum"] == 1.0 and n["c1_holds"] and not n["c2_holds"]
    assert math.isinf(w_abs_sum(InteractionSpec.power_law(1.0)))
    assert not check_condition_C(InteractionSpec.power_law(0.8))["c1_holds"]
