import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from biconserve.core import (BicKState, DegenerateDenominatorError, DomainError, NonFiniteError,
                             ProfileRangeError, PolynomialProfile)
from biconserve.systems import (SystemKind, bih_constraint_residual, gauss_constraint_residual,
                                make_rhs, pnmc_u_jet, rhs_bic, rhs_bic_k, rhs_bih, rhs_pnmc)

val = st.floats(-3, 3, allow_nan=False)
pos = st.floats(0.1, 3)
nonzero = st.one_of(st.floats(-3, -0.1), st.floats(0.1, 3))


def test_rhs_bic_examples():
    np.testing.assert_allclose(rhs_bic(0, (1, 1, 1, 0), 1.0, 0.0), [0, -1 / 3, 2, -3], atol=1e-15)
    np.testing.assert_allclose(rhs_bic(0, (-1, 1, 1, 1), 1.0, 1.0), [2, -0.5, -1, -1], atol=1e-15)
    with pytest.raises(DegenerateDenominatorError):
        rhs_bic(0, (1, 1, 1, 3), 1.0, 0.0)


def test_rhs_bic_profile_failure_propagates():
    v = PolynomialProfile((1.0,), interval=(0.0, 1.0))
    with pytest.raises(ProfileRangeError):
        rhs_bic(2.0, (1, 1, 1, 0), v, 0.0)
    with pytest.raises(NonFiniteError):
        rhs_bic(0.0, (1, math.inf, 1, 0), 1.0, 0.0)


def test_rhs_bic_k_example():
    # k' = -6 w^2 x v / (3w - y) - 4 u (w^2 - k + eps) = -6/3 - 4 * 2 = -10
    np.testing.assert_allclose(rhs_bic_k(0, (1, 1, 1, 0, -1), 1.0, 0.0),
                               [0, -1 / 3, 2, -3, -10], atol=1e-15)


def test_rhs_bic_k_u_rate_matches_bic_on_constraint():
    assert rhs_bic_k(0, (1, 1, 1, 1, 1), 1.0, 1.0)[0] == 2.0
    assert rhs_bic(0, (1, 1, 1, 1), 1.0, 1.0)[0] == 2.0


def test_gauss_constraint_residual_examples():
    assert gauss_constraint_residual((1, 1, 1, 0, -1), 0.0) == 0
    assert gauss_constraint_residual((1, 1, 1, 1, 1), 1.0) == 0
    assert gauss_constraint_residual((1, 1, 1, 0, 0), 0.0) == 1


@given(val, pos, pos, val, nonzero, val)
def test_bic_k_projects_to_bic_on_constraint(u, w, x, y, v, eps):
    if abs(3 * w - y) < 1e-3:
        return
    k = eps + y * (2 * w - y) - x * x
    full = rhs_bic_k(0, BicKState(u, w, x, y, k), v, eps)
    np.testing.assert_allclose(full[:4], rhs_bic(0, (u, w, x, y), v, eps), rtol=1e-13, atol=1e-12)


@given(val, pos, pos, val, nonzero, val)
def test_reversal_symmetry_of_vector_field(u, w, x, y, v, eps):
    # (-u(-s), w(-s), x(-s), y(-s)) with profile -v(-s): rates map to (u', -w', -x', -y')
    if abs(3 * w - y) < 1e-3:
        return
    d = rhs_bic(0, (u, w, x, y), v, eps)
    m = rhs_bic(0, (-u, w, x, y), -v, eps)
    np.testing.assert_allclose(m, [d[0], -d[1], -d[2], -d[3]], rtol=1e-13, atol=1e-12)


@given(val, pos, pos, val, nonzero, val)
def test_sign_flip_symmetry_of_vector_field(u, w, x, y, v, eps):
    if abs(3 * w - y) < 1e-3:
        return
    d = rhs_bic(0, (u, w, x, y), v, eps)
    m = rhs_bic(0, (u, w, -x, y), -v, eps)
    np.testing.assert_allclose(m, [d[0], d[1], -d[2], d[3]], rtol=1e-13, atol=1e-12)


def test_rhs_pnmc_examples():
    np.testing.assert_allclose(rhs_pnmc(0, (1, 1, 1), 1.0), [2 / 3, 2, 4 / 3], atol=1e-15)
    assert rhs_pnmc(0, (1, 1, math.sqrt(3)), 0.0)[2] == pytest.approx(4 / 3 * math.sqrt(3))
    small = rhs_pnmc(0, (1e-12, 1, 1), 0.0)
    assert abs(small[1]) < 1e-11 and abs(small[2]) < 1e-11


def test_rhs_bih_examples():
    state = (1, 1, 1, 1, 1, 1)
    np.testing.assert_allclose(rhs_bih(0, state, 0.0), [1, -1, 1, 3, -1, 4], atol=1e-15)
    assert bih_constraint_residual(state) == 3
    with pytest.raises(DomainError):
        rhs_bih(0, (1, 1, 0, 1, 1, 1), 0.0)


def test_bih_constraint_zero_when_z_solves_it():
    u, v, w, x, y = 0.7, -1.3, 1.1, 0.4, 0.2
    z = -w * x * v / (3 * w - y)
    assert abs(bih_constraint_residual((u, v, w, x, y, z))) < 1e-15
    assert bih_constraint_residual((0, -2, 1, 1, 1, 1)) == 0


def test_pnmc_u_jet_matches_symbolic_flow_derivatives():
    u, x, y, eps = sp.symbols("u x y eps")
    flow = {u: eps - y ** 2 / 3 - x ** 2 + u ** 2, x: 2 * x * u, y: sp.Rational(4, 3) * y * u}

    def d(expr):
        return sum(sp.diff(expr, var) * rate for var, rate in flow.items())

    jets = [u]
    for _ in range(3):
        jets.append(sp.expand(d(jets[-1])))
    point = {u: 0.8, x: 0.6, y: 1.1, eps: -0.4}
    expected = [float(j.subs(point)) for j in jets]
    got = pnmc_u_jet((0.8, 0.6, 1.1), -0.4)
    np.testing.assert_allclose(got, expected, rtol=1e-13)


def test_make_rhs_agrees_with_checked_evaluators():
    v = PolynomialProfile((1.0, 0.5))
    f = make_rhs(SystemKind.BIC_K, 0.3, v)
    y = np.array([0.4, 1.2, 0.8, 0.1, -0.2])
    np.testing.assert_array_equal(f(0.7, y), rhs_bic_k(0.7, y, v, 0.3))
    f = make_rhs(SystemKind.BIH, 0.3)
    y = np.array([0.4, 1.2, 0.8, 0.1, -0.2, 0.5])
    np.testing.assert_array_equal(f(0.0, y), rhs_bih(0.0, y, 0.3))


def test_system_kind_parse():
    assert SystemKind.parse("bic-k") is SystemKind.BIC_K
    assert SystemKind.BIH.dimension == 6
    with pytest.raises(ValueError):
        SystemKind.parse("nope")
