import math

import numpy as np
import pytest
import sympy as sp

from biconserve.core import DomainError, NoAdmissibleRangeError, ParameterError
from biconserve.families import (FamilyCurve, FamilyId, FamilyParams, chart_arclength,
                                 eval_family, family_bounds, family_rates, family_system_residual,
                                 first_integral_rhs, first_integral_sq, interior_grid,
                                 metric_curvature, metric_g22, second_order_residual,
                                 solve_u_riccati)
from biconserve.core import ConstantU

# one interior point per family, used by several tests
CASES = [
    (FamilyParams("y-zero", 1.0, 1.0, 3.0), 1.0),
    (FamilyParams("y-zero", -1.0, 0.7, -0.5), 0.6),
    (FamilyParams("k-equals-epsilon", 0.0, 1.0, 1.0), 1.0),
    (FamilyParams("k-equals-epsilon", -1.0, 0.5, 0.1), 1.5),
    (FamilyParams("general-plus", 0.0, 1.0, 1.0, c2=1.0), 0.5),
    (FamilyParams("general-minus", 1.0, 1.0, 3.0, c2=0.5), 1.0),
    (FamilyParams("three-f2", 0.0, -1.0, 17.0), 1.0),
]


def test_eval_family_examples():
    p = eval_family(FamilyParams("y-zero", 1, 1, 3), 1.0)
    assert tuple(p) == (1.0, 1.0, -2.0, 1.0, 1.0, 0.0, 0.0)
    p = eval_family(FamilyParams("k-equals-epsilon", 0, 1, 1), 1.0)
    np.testing.assert_allclose(p[1:], (1.5, -2, 1, 1, 1, 0), rtol=1e-15)
    p = eval_family(FamilyParams("three-f2", 0, -1, 17), 1.0)
    np.testing.assert_allclose(p[1:], (0.75, -1 / math.sqrt(3), 1, math.sqrt(3), 2, -3),
                               rtol=1e-15)


def test_family_params_validation():
    with pytest.raises(ParameterError):
        FamilyParams("y-zero", 0, -1, 1)
    with pytest.raises(ParameterError):
        FamilyParams("three-f2", 0, 1, 1)
    with pytest.raises(ParameterError):
        FamilyParams("general-minus", 0, 1, 1)
    with pytest.raises(ParameterError):
        FamilyParams("y-zero", 0, 1, 1, c2=1)
    with pytest.raises(ParameterError):
        FamilyParams("general-plus", 0, 1, 1, c2=-1)
    with pytest.raises(ParameterError):
        FamilyParams("k-equals-epsilon", 0, 1, 0)
    FamilyParams("general-plus", 1, 1, -2, c2=1)
    assert FamilyParams("k_equals_epsilon", 0, 1, 1).family is FamilyId.K_EQUALS_EPSILON
    assert isinstance(FamilyParams("y-zero", 0, 1, 1).eps, float)


def test_family_bounds_examples():
    lo, hi = family_bounds(FamilyParams("y-zero", 0, 1, 1))
    assert lo == 0 and hi == pytest.approx(1, abs=1e-15)
    with pytest.raises(NoAdmissibleRangeError):
        family_bounds(FamilyParams("y-zero", 1, 1, 1))
    lo, hi = family_bounds(FamilyParams("k-equals-epsilon", 0, 1, 1))
    assert lo == 0 and hi == pytest.approx(2, abs=1e-12)


def test_family_bounds_are_radicand_roots():
    # k-equals-epsilon with eps > 0: 9Cf^3 = 4 eps at the lower end
    lo, hi = family_bounds(FamilyParams("k-equals-epsilon", 1.0, 1.0, 2.0))
    assert lo == pytest.approx((4 / 18) ** (1 / 3), abs=1e-12)
    assert hi == pytest.approx(2.0, abs=1e-12)
    # three-f2, eps = 0: C f^(3/2) = 16 f^2 and 4 sqrt(f) = -c
    lo, hi = family_bounds(FamilyParams("three-f2", 0.0, -1.0, 17.0))
    assert lo == pytest.approx(1 / 16, rel=1e-12) and hi == pytest.approx((17 / 16) ** 2, rel=1e-12)
    lo, hi = family_bounds(FamilyParams("three-f2", 0.0, -0.5, 4.0))
    assert lo == pytest.approx(1 / 64, rel=1e-12) and hi == pytest.approx(1 / 16, rel=1e-12)


def test_empty_bounds_raise():
    with pytest.raises(NoAdmissibleRangeError):
        family_bounds(FamilyParams("three-f2", 1.0, -0.1, 1e-3))


@pytest.mark.parametrize("params,p", CASES)
def test_family_solves_system(params, p):
    assert np.max(np.abs(family_system_residual(params, p))) < 1e-12


@pytest.mark.parametrize("params,p", CASES)
def test_chart_derivatives_match_finite_differences(params, p):
    h = 1e-6
    point, rates = family_rates(params, p)
    speed = first_integral_rhs(params, p)
    plus = np.array(eval_family(params, p + h))[[1, 3, 4, 5, 6]]
    minus = np.array(eval_family(params, p - h))[[1, 3, 4, 5, 6]]
    fd = (plus - minus) / (2 * h)
    np.testing.assert_allclose(rates / speed, fd, rtol=1e-7, atol=1e-7)


def _symbolic_fields(fid, eps, c, C, c2, p):
    """Closed forms retyped in sympy; row 2 of the system defines the chart speed."""
    if fid == "y-zero":
        R = C * p ** 3 - p ** 6 - eps
        return sp.sqrt(R), -2 * c * sp.sqrt(R) / p ** 2, c * p, p ** 3, 0, eps - p ** 6
    if fid == "k-equals-epsilon":
        S, Q = 9 * C * p ** 3 - 4 * eps, 2 - c * p
        v = -(3 - c * p) * sp.sqrt(S) / (3 * sp.sqrt(c) * sp.sqrt(p) * sp.sqrt(Q))
        return sp.sqrt(S) / 2, v, p, sp.sqrt(c) * p ** sp.Rational(3, 2) * sp.sqrt(Q), c * p ** 2, eps
    if fid in ("general-plus", "general-minus"):
        sg = 1 if fid == "general-plus" else -1
        R = C * p ** 3 + sg * p ** 6 - eps
        P = 2 * c2 - c2 ** 2 * p - sg * p ** 3 / c ** 2
        v = 2 * sp.sqrt(R) * (c2 * p - 3) / (3 * sp.sqrt(p) * sp.sqrt(P))
        return (sp.sqrt(R), v, c * p, c * p ** sp.Rational(3, 2) * sp.sqrt(P), c * c2 * p ** 2,
                eps + sg * p ** 6)
    T = C * p ** sp.Rational(3, 2) - 16 * p ** 2 - sp.Rational(16, 9) * eps
    v = c * sp.sqrt(T) / sp.sqrt(-4 * c * sp.sqrt(p) - c ** 2)
    return (sp.Rational(3, 4) * sp.sqrt(T), v, p, sp.sqrt(-4 * c * p ** sp.Rational(3, 2) - c ** 2 * p),
            3 * p + c * sp.sqrt(p), eps - 3 * p ** 2)


@pytest.mark.parametrize("params,p", CASES)
def test_closed_forms_against_symbolic_oracle(params, p):
    ps = sp.Symbol("p", positive=True)
    nums = [sp.nsimplify(q) for q in (params.eps, params.c, params.C,
                                      params.c2 if params.c2 is not None else 0)]
    u, v, w, x, y, k = _symbolic_fields(params.family.value, *nums, ps)
    eps = nums[0]
    speed = (-w * x * v / (3 * w - y)) / sp.diff(w, ps)

    def dds(expr):
        return sp.diff(expr, ps) * speed

    rows = [dds(u) - (eps + y * (2 * w - y) - x ** 2 + u ** 2),
            dds(x) - (2 * x * u + y * v),
            dds(y) - (2 * u * (y - w) - x * v),
            dds(k) - (-6 * w ** 2 * x * v / (3 * w - y) - 4 * u * (w ** 2 - k + eps))]
    at = {ps: sp.nsimplify(p)}
    for row in rows:
        assert abs(float(row.subs(at).evalf(40))) < 1e-25
    got = eval_family(params, p)
    for sym, num in zip((u, v, w, x, y, k), got[1:]):
        assert float(sp.sympify(sym).subs(at).evalf(30)) == pytest.approx(num, rel=1e-14, abs=1e-15)
    assert float((speed ** 2).subs(at).evalf(30)) == pytest.approx(first_integral_sq(params, p),
                                                                   rel=1e-13)


def test_first_integral_examples():
    F = 0.5 ** (1 / 3)
    assert first_integral_rhs(FamilyParams("y-zero", 0, 1, 1), F) == pytest.approx(
        2 / 3 * F * math.sqrt(0.5 - 0.25), rel=1e-15)
    assert first_integral_rhs(FamilyParams("k-equals-epsilon", 0, 1, 1), 1.0) == pytest.approx(1.0)
    assert first_integral_rhs(FamilyParams("three-f2", 0, -1, 17), 1.0) == pytest.approx(1.0)


@pytest.mark.parametrize("params,p", CASES)
def test_second_order_residual_vanishes_for_any_C(params, p):
    assert abs(second_order_residual(params, p)) < 1e-12
    # the second-order ODE does not contain C, so any first-integral constant solves it
    shifted = FamilyParams(params.family, params.eps, params.c, params.C + 0.5, params.c2)
    try:
        value = second_order_residual(shifted, p)
    except DomainError:
        pytest.skip("shifted constant leaves the chart range")
    assert abs(value) < 1e-12


def test_second_order_residual_detects_wrong_acceleration():
    params = FamilyParams("k-equals-epsilon", 0, 1, 1)
    assert abs(second_order_residual(params, 1.0, p1=1.0, p2=2.0)) > 0.1


def test_general_minus_without_c2_is_y_zero():
    for eps, c, C in ((0.0, 1.0, 1.0), (1.0, 1.0, 3.0), (-1.0, 0.4, 0.5)):
        gm = FamilyParams("general-minus", eps, c, C, c2=0.0)
        yz = FamilyParams("y-zero", eps, c, C)
        assert family_bounds(gm) == family_bounds(yz)
        for F in interior_grid(family_bounds(yz), 7):
            assert eval_family(gm, F) == eval_family(yz, F)
            np.testing.assert_allclose(eval_family(gm, F, delegate=False), eval_family(yz, F),
                                       rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("params,p", CASES)
def test_family_invariants(params, p):
    pt = eval_family(params, p)
    fid = params.family
    if fid is FamilyId.Y_ZERO:
        assert pt.y == 0
        assert 2 * pt.w - pt.y == 2 * pt.w
    if fid is FamilyId.K_EQUALS_EPSILON:
        assert pt.k == params.eps
    if fid is FamilyId.THREE_F2:
        assert 3 * pt.w ** 2 + pt.k - params.eps == pytest.approx(0, abs=1e-14)
        assert 3 * pt.w - pt.y == pytest.approx(-params.c * math.sqrt(p), rel=1e-15)


def test_outside_bounds_raises():
    with pytest.raises(DomainError):
        eval_family(FamilyParams("y-zero", 0, 1, 1), 1.5)
    with pytest.raises(DomainError):
        eval_family(FamilyParams("y-zero", 0, 1, 1), -0.5)


def test_riccati_examples():
    assert solve_u_riccati(0.0, C=1.0)(0.0) == 1.0
    assert solve_u_riccati(1.0, C=0.0)(math.pi / 4) == pytest.approx(1.0, rel=1e-15)
    u = solve_u_riccati(-1.0, "const-plus")
    assert u.jet(3.0, 1) == (1.0, 0.0)


@pytest.mark.parametrize("eps,branch,C,s", [
    (0.0, "rational", 1.0, -0.3), (2.0, "tan", 0.1, 0.2), (-1.0, "tanh", 0.5, -2.0),
    (-2.0, "coth", 0.5, -1.1), (-1.0, "const-minus", 0.0, 0.4)])
def test_riccati_branches_solve_the_equation(eps, branch, C, s):
    u = solve_u_riccati(eps, branch, C)
    h = 1e-4
    fd = (u(s + h) - u(s - h)) / (2 * h)
    assert fd == pytest.approx(eps + u(s) ** 2, rel=1e-7)
    a, a1, a2, a3 = u.jet(s)
    assert a2 == pytest.approx((u.jet(s + h)[1] - u.jet(s - h)[1]) / (2 * h), rel=1e-7)
    assert a3 == pytest.approx((u.jet(s + h)[2] - u.jet(s - h)[2]) / (2 * h), rel=1e-7)
    assert u.integral(s - 0.1, s) == pytest.approx(
        sum(u(s - 0.1 + 0.1 * (i + 0.5) / 2000) for i in range(2000)) * 0.1 / 2000, rel=1e-7)


def test_riccati_exponential_quotients():
    a, C = 1.3, 0.4
    for s in (-2.0, -0.7):
        e = math.exp(2 * a * (s + C))
        assert solve_u_riccati(-a * a, "coth", C)(s) == pytest.approx(a * (1 + e) / (1 - e), rel=1e-14)
        assert solve_u_riccati(-a * a, "tanh", C)(s) == pytest.approx(a * (1 - e) / (1 + e), rel=1e-14)
    u = solve_u_riccati(-a * a, "tanh", C)
    assert u.positive_interval == (-math.inf, -C)
    assert u(-C - 0.01) > 0 > u(-C + 0.01)


def test_riccati_branch_requires_matching_sign():
    with pytest.raises(ParameterError):
        solve_u_riccati(1.0, "rational")
    with pytest.raises(DomainError):
        solve_u_riccati(0.0, C=1.0)(1.5)


def test_metric_examples():
    one = ConstantU(1.0)
    assert metric_g22(one, 0.0, 1.0) == pytest.approx(math.exp(-2), rel=1e-15)
    assert metric_g22(one, 0.3, 0.3) == 1.0
    assert metric_curvature(ConstantU(1.0), 0.0) == -1.0
    u = solve_u_riccati(0.0, C=2.0)
    assert metric_curvature(u, 0.5) == pytest.approx(0, abs=1e-15)


def test_metric_curvature_on_y_zero_family():
    params = FamilyParams("y-zero", 1.0, 1.0, 3.0)
    curve = FamilyCurve(params, 1.0, 0.0, (-0.2, 0.2))
    for s in (-0.1, 0.0, 0.15):
        F = curve.chart_param(s)
        assert metric_curvature(curve.u_profile(), s) == pytest.approx(1 - F ** 6, rel=1e-12)


def test_y_zero_metric_is_inverse_cube():
    params = FamilyParams("y-zero", 0.0, 1.0, 1.0)
    curve = FamilyCurve(params, 0.6, 0.0, (-0.5, 0.5))
    u = curve.u_profile()
    ref = metric_g22(u, 0.0, 0.0) * 0.6 ** 3
    for s in (-0.4, 0.1, 0.45):
        assert metric_g22(u, 0.0, s) * curve.chart_param(s) ** 3 == pytest.approx(ref, rel=1e-8)


def test_family_curve_follows_first_integral():
    params = FamilyParams("three-f2", 0.0, -1.0, 17.0)
    curve = FamilyCurve(params, 1.0, 0.0, (-0.2, 0.2))
    for s in (-0.2, 0.1, 0.2):
        p = curve.chart_param(s)
        assert chart_arclength(params, 1.0, p) == pytest.approx(s, abs=1e-10)


def test_family_curve_clips_at_bounds():
    params = FamilyParams("y-zero", 0.0, 1.0, 1.0)
    curve = FamilyCurve(params, 0.99, 0.0, (0.0, 5.0))
    assert curve.interval[1] < 5.0
    with pytest.raises(DomainError):
        curve.chart_param(5.0)
