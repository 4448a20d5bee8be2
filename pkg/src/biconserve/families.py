"""Closed-form solution families, their first integrals and chart bounds.

Every family is parameterized by a chart coordinate ``p`` derived from the
mean curvature: ``w = c p`` (y-zero, general-plus, general-minus) or
``w = p`` (k-equals-epsilon, three-f2).  Along a solution the chart coordinate
obeys a first integral ``p'^2 = G(p)``, so ``d/ds = sqrt(G) d/dp`` and
``p'' = G'(p) / 2``.  All chart derivatives are analytic.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .core import (BicKState, BicState, DomainError, NoAdmissibleRangeError, NormalProfile,
                   ParameterError, PreconditionError, UProfile, check_finite)


class FamilyId(enum.Enum):
    Y_ZERO = "y-zero"
    K_EQUALS_EPSILON = "k-equals-epsilon"
    GENERAL_PLUS = "general-plus"
    GENERAL_MINUS = "general-minus"
    THREE_F2 = "three-f2"

    @classmethod
    def parse(cls, text: str) -> "FamilyId":
        key = text.strip().lower().replace("_", "-")
        for fid in cls:
            if fid.value == key:
                return fid
        raise ParameterError(f"unknown family {text!r}; expected one of "
                             + ", ".join(f.value for f in cls))


@dataclass(frozen=True)
class FamilyParams:
    """Constants of a family.

    ``c`` is the family constant (c1 for the general families), ``c2`` the
    second constant of the general families and ``C`` the first-integral
    constant.
    """

    family: FamilyId
    eps: float
    c: float
    C: float
    c2: float | None = None

    def __post_init__(self):
        fid = FamilyId.parse(self.family) if isinstance(self.family, str) else self.family
        object.__setattr__(self, "family", fid)
        check_finite(self.eps, self.c, self.C, what="family parameter")
        for name in ("eps", "c", "C"):
            object.__setattr__(self, name, float(getattr(self, name)))
        general = fid in (FamilyId.GENERAL_PLUS, FamilyId.GENERAL_MINUS)
        if general:
            if self.c2 is None:
                raise ParameterError(f"{fid.value} needs c2")
            check_finite(self.c2, what="family parameter c2")
            object.__setattr__(self, "c2", float(self.c2))
        elif self.c2 is not None:
            raise ParameterError(f"{fid.value} takes no c2")
        if fid is FamilyId.THREE_F2:
            if not self.c < 0:
                raise ParameterError(f"three-f2 needs c < 0, got {self.c!r}")
        elif not self.c > 0:
            raise ParameterError(f"{fid.value} needs c > 0, got {self.c!r}")
        if fid is FamilyId.GENERAL_PLUS and not self.c2 > 0:
            raise ParameterError(f"general-plus needs c2 > 0, got {self.c2!r}")
        # general-plus keeps C free: its radicand C F^3 + F^6 - eps is positive
        # for large F whatever the sign of C
        if fid is not FamilyId.GENERAL_PLUS and self.eps >= 0 and not self.C > 0:
            raise ParameterError(f"{fid.value} with eps >= 0 needs C > 0, got {self.C!r}")


class FamilyPoint(NamedTuple):
    chart_param: float
    u: float
    v: float
    w: float
    x: float
    y: float
    k: float

    @property
    def bic_state(self) -> BicState:
        return BicState(self.u, self.w, self.x, self.y)

    @property
    def bic_k_state(self) -> BicKState:
        return BicKState(self.u, self.w, self.x, self.y, self.k)


# ---------------------------------------------------------------------------
# per-family closed forms
# ---------------------------------------------------------------------------
# Each model returns radicands (all must be > 0), the point, its chart
# derivative, G = p'^2 and G'.  Functions accept floats or numpy arrays.


class _Model:
    chart_scale: float  # w = chart_scale * p

    def __init__(self, params: FamilyParams):
        self.params = params

    def radicands(self, p):
        raise NotImplementedError

    def fields(self, p):
        """(u, v, w, x, y, k)"""
        raise NotImplementedError

    def dfields(self, p):
        """d/dp of (u, w, x, y, k)"""
        raise NotImplementedError

    def G(self, p):
        raise NotImplementedError

    def dG(self, p):
        raise NotImplementedError

    def second_order_residual(self, p, p1, p2):
        raise NotImplementedError


class _YZero(_Model):
    def __init__(self, params):
        super().__init__(params)
        self.chart_scale = params.c

    def _R(self, F):
        P = self.params
        return P.C * F ** 3 - F ** 6 - P.eps

    def radicands(self, F):
        return (self._R(F),)

    def fields(self, F):
        P = self.params
        r = math.sqrt(self._R(F))
        return r, -2 * P.c * r / F ** 2, P.c * F, F ** 3, 0.0, P.eps - F ** 6

    def dfields(self, F):
        P = self.params
        r = math.sqrt(self._R(F))
        dR = 3 * P.C * F ** 2 - 6 * F ** 5
        return dR / (2 * r), P.c, 3 * F ** 2, 0.0, -6 * F ** 5

    def G(self, F):
        return 4 / 9 * F ** 2 * self._R(F)

    def dG(self, F):
        P = self.params
        return 4 / 9 * (2 * F * self._R(F) + F ** 2 * (3 * P.C * F ** 2 - 6 * F ** 5))

    def second_order_residual(self, F, F1, F2):
        eps = self.params.eps
        return F2 * F - 2.5 * F1 ** 2 - 2 / 3 * eps * F ** 2 + 2 / 3 * F ** 8


class _KEqualsEpsilon(_Model):
    chart_scale = 1.0

    def _S(self, f):
        P = self.params
        return 9 * P.C * f ** 3 - 4 * P.eps

    def _Q(self, f):
        return 2 - self.params.c * f

    def radicands(self, f):
        return self._S(f), self._Q(f)

    def fields(self, f):
        P = self.params
        sS, sQ, sc, sf = math.sqrt(self._S(f)), math.sqrt(self._Q(f)), math.sqrt(P.c), math.sqrt(f)
        u = sS / 2
        x = sc * f * sf * sQ
        v = -(3 - P.c * f) * sS / (3 * sc * sf * sQ)
        return u, v, f, x, P.c * f ** 2, P.eps

    def dfields(self, f):
        P = self.params
        sS, sQ, sf = math.sqrt(self._S(f)), math.sqrt(self._Q(f)), math.sqrt(f)
        du = 27 * P.C * f ** 2 / (4 * sS)
        dx = math.sqrt(P.c) * (1.5 * sf * sQ - f * sf * P.c / (2 * sQ))
        return du, 1.0, dx, 2 * P.c * f, 0.0

    def G(self, f):
        return f ** 2 * self._S(f) / 9

    def dG(self, f):
        P = self.params
        return (2 * f * self._S(f) + 27 * P.C * f ** 4) / 9

    def second_order_residual(self, f, f1, f2):
        return f2 * f - 2.5 * f1 ** 2 - 2 / 3 * self.params.eps * f ** 2


class _General(_Model):
    def __init__(self, params, sign):
        super().__init__(params)
        self.sign = sign
        self.chart_scale = params.c

    def _R(self, F):
        P = self.params
        return P.C * F ** 3 + self.sign * F ** 6 - P.eps

    def _P(self, F):
        P = self.params
        return 2 * P.c2 - P.c2 ** 2 * F - self.sign * F ** 3 / P.c ** 2

    def radicands(self, F):
        return self._R(F), self._P(F)

    def fields(self, F):
        P = self.params
        r, sP, sF = math.sqrt(self._R(F)), math.sqrt(self._P(F)), math.sqrt(F)
        u = r
        w = P.c * F
        x = P.c * F * sF * sP
        y = P.c * P.c2 * F ** 2
        k = P.eps + self.sign * F ** 6
        v = 2 * r * (P.c2 * F - 3) / (3 * sF * sP)
        return u, v, w, x, y, k

    def dfields(self, F):
        P = self.params
        r, sP, sF = math.sqrt(self._R(F)), math.sqrt(self._P(F)), math.sqrt(F)
        dR = 3 * P.C * F ** 2 + 6 * self.sign * F ** 5
        dP = -P.c2 ** 2 - 3 * self.sign * F ** 2 / P.c ** 2
        dx = P.c * (1.5 * sF * sP + F * sF * dP / (2 * sP))
        return dR / (2 * r), P.c, dx, 2 * P.c * P.c2 * F, 6 * self.sign * F ** 5

    def G(self, F):
        return 4 / 9 * F ** 2 * self._R(F)

    def dG(self, F):
        P = self.params
        return 4 / 9 * (2 * F * self._R(F) + F ** 2 * (3 * P.C * F ** 2 + 6 * self.sign * F ** 5))

    def second_order_residual(self, F, F1, F2):
        eps = self.params.eps
        return F2 * F - 2.5 * F1 ** 2 - 2 / 3 * eps * F ** 2 - self.sign * 2 / 3 * F ** 8


class _ThreeF2(_Model):
    chart_scale = 1.0

    def _T(self, f):
        P = self.params
        return P.C * f ** 1.5 - 16 * f ** 2 - 16 * P.eps / 9

    def _X(self, f):
        c = self.params.c
        return -4 * c * f ** 1.5 - c * c * f

    def radicands(self, f):
        # x^2 = f (-4c sqrt(f) - c^2); the bracket is the square-root argument of v
        c = self.params.c
        return self._T(f), -4 * c * np.sqrt(f) - c * c

    def fields(self, f):
        P = self.params
        sT, sf = math.sqrt(self._T(f)), math.sqrt(f)
        u = 0.75 * sT
        x = math.sqrt(self._X(f))
        y = 3 * f + P.c * sf
        v = P.c * sT / math.sqrt(-4 * P.c * sf - P.c ** 2)
        return u, v, f, x, y, P.eps - 3 * f ** 2

    def dfields(self, f):
        P = self.params
        sT, sf = math.sqrt(self._T(f)), math.sqrt(f)
        dT = 1.5 * P.C * sf - 32 * f
        dX = -6 * P.c * sf - P.c ** 2
        return 0.75 * dT / (2 * sT), 1.0, dX / (2 * math.sqrt(self._X(f))), 3 + P.c / (2 * sf), -6 * f

    def G(self, f):
        return f ** 2 * self._T(f)

    def dG(self, f):
        P = self.params
        return 2 * f * self._T(f) + f ** 2 * (1.5 * P.C * np.sqrt(f) - 32 * f)

    def second_order_residual(self, f, f1, f2):
        eps = self.params.eps
        return f2 * f - 1.75 * f1 ** 2 + 4 * f ** 4 - 4 / 3 * eps * f ** 2


def _model(params: FamilyParams, delegate: bool = True) -> _Model:
    fid = params.family
    if fid is FamilyId.Y_ZERO:
        return _YZero(params)
    if fid is FamilyId.K_EQUALS_EPSILON:
        return _KEqualsEpsilon(params)
    if fid is FamilyId.THREE_F2:
        return _ThreeF2(params)
    if fid is FamilyId.GENERAL_MINUS and params.c2 == 0 and delegate:
        # c2 = 0 collapses general-minus onto y-zero; reuse those formulas so
        # both evaluate to identical floats
        return _YZero(FamilyParams(FamilyId.Y_ZERO, params.eps, params.c, params.C))
    return _General(params, 1 if fid is FamilyId.GENERAL_PLUS else -1)


def _checked(model: _Model, p: float) -> float:
    p = float(p)
    check_finite(p, what="chart parameter")
    if not p > 0:
        raise DomainError(f"chart parameter must be positive, got {p!r}")
    for i, r in enumerate(model.radicands(p)):
        if not r > 0:
            raise DomainError(
                f"{model.params.family.value}: square-root argument {i + 1} is {r:.6g} at p={p!r}")
    return p


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def eval_family(params: FamilyParams, p: float, *, delegate: bool = True) -> FamilyPoint:
    """All fields of the family at chart parameter ``p``.

    ``delegate=False`` evaluates general-minus with c2 = 0 through the general
    formulas instead of the y-zero ones.
    """
    model = _model(params, delegate)
    p = _checked(model, p)
    return FamilyPoint(p, *model.fields(p))


def chart_param_of(params: FamilyParams, w: float) -> float:
    """Invert w = chart_scale * p."""
    return w / _model(params).chart_scale


def first_integral_rhs(params: FamilyParams, p: float) -> float:
    """dp/ds = sqrt(G(p)) > 0 along the family."""
    model = _model(params)
    p = _checked(model, p)
    return math.sqrt(model.G(p))


def first_integral_sq(params: FamilyParams, p: float) -> float:
    """G(p) = (dp/ds)^2, defined wherever the formula is, inside bounds or not."""
    return float(_model(params).G(p))


def second_order_rhs(params: FamilyParams, p: float) -> float:
    """p'' = G'(p) / 2, the acceleration implied by the first integral."""
    return float(_model(params).dG(p)) / 2


def second_order_residual(params: FamilyParams, p: float, p1: float | None = None,
                          p2: float | None = None) -> float:
    """Residual of the family's autonomous second-order ODE for p.

    Without ``p1``/``p2`` the velocity and acceleration come from the first
    integral, so the result vanishes identically for any constant C.
    """
    model = _model(params)
    if p1 is None:
        p = _checked(model, p)
        p1 = math.sqrt(model.G(p))
    if p2 is None:
        p2 = float(model.dG(p)) / 2
    return float(model.second_order_residual(p, p1, p2))


def family_rates(params: FamilyParams, p: float) -> tuple[FamilyPoint, np.ndarray]:
    """The point and its s-derivatives (u', w', x', y', k') along the family."""
    model = _model(params)
    p = _checked(model, p)
    point = FamilyPoint(p, *model.fields(p))
    rate = math.sqrt(model.G(p))
    return point, rate * np.array(model.dfields(p))


def family_system_residual(params: FamilyParams, p: float) -> np.ndarray:
    """Right-hand side minus derivative for the four Bic rows and the k row."""
    point, (du, dw, dx, dy, dk) = family_rates(params, p)
    u, v, w, x, y, k = point[1:]
    eps = params.eps
    d = 3 * w - y
    return np.array([
        eps + y * (2 * w - y) - x * x + u * u - du,
        -w * x * v / d - dw,
        2 * x * u + y * v - dx,
        2 * u * (y - w) - x * v - dy,
        -6 * w * w * x * v / d - 4 * u * (w * w - k + eps) - dk,
    ])


def family_bounds(params: FamilyParams, *, cap: float = 1e6, samples: int = 6001
                  ) -> tuple[float, float]:
    """Open chart interval on which every square-root argument is positive.

    y-zero has closed-form bounds.  The other families scan a logarithmic grid
    on (1e-9, cap] and refine sign changes with Brent's method; when the
    positive set has several components the lowest one is returned.  A lower
    bound of 0 means the radicands stay positive as p -> 0+.
    """
    model = _model(params)
    if isinstance(model, _YZero):
        return _y_zero_bounds(model.params.eps, model.params.C)
    grid = np.geomspace(1e-9, cap, samples)
    with np.errstate(invalid="ignore", over="ignore"):
        g = np.min(np.vstack([np.asarray(r, dtype=float) * np.ones_like(grid)
                              for r in model.radicands(grid)]), axis=0)
    positive = np.nan_to_num(g, nan=-1.0) > 0
    if not positive.any():
        raise NoAdmissibleRangeError(f"{params.family.value}: no admissible chart range")
    i = int(np.argmax(positive))
    j = i
    while j + 1 < len(grid) and positive[j + 1]:
        j += 1

    def gmin(p):
        return min(float(r) for r in model.radicands(p))

    lo = 0.0 if i == 0 else brentq(gmin, grid[i - 1], grid[i], xtol=1e-15, rtol=1e-14)
    hi = cap if j == len(grid) - 1 else brentq(gmin, grid[j], grid[j + 1], xtol=1e-15, rtol=1e-14)
    return lo, hi


def _y_zero_bounds(eps: float, C: float) -> tuple[float, float]:
    disc = C * C - 4 * eps
    if eps < 0:
        return 0.0, ((C + math.sqrt(disc)) / 2) ** (1 / 3)
    if not disc > 0:
        raise NoAdmissibleRangeError(f"y-zero: C^2 - 4 eps = {disc:g} <= 0, empty chart range")
    root = math.sqrt(disc)
    return ((C - root) / 2) ** (1 / 3), ((C + root) / 2) ** (1 / 3)


def interior_grid(bounds: tuple[float, float], n: int) -> np.ndarray:
    """n points strictly inside the open interval, excluding both ends."""
    lo, hi = bounds
    return lo + (hi - lo) * np.arange(1, n + 1) / (n + 1)


def bih_sixth_eq_residual(params: FamilyParams, p: float) -> float:
    """w'' - (u w' + w (v^2 + (2w - y)^2 + y^2 - 2 eps)) along the family."""
    model = _model(params)
    p = _checked(model, p)
    u, v, w, x, y, k = model.fields(p)
    a = model.chart_scale
    dw = a * math.sqrt(model.G(p))
    ddw = a * float(model.dG(p)) / 2
    return ddw - (u * dw + w * (v * v + (2 * w - y) ** 2 + y * y - 2 * params.eps))


def chart_arclength(params: FamilyParams, p0: float, p1: float) -> float:
    """Arclength s(p1) - s(p0) along the family, by quadrature of dp / sqrt(G)."""
    model = _model(params)
    _checked(model, p0)
    _checked(model, p1)
    value, _ = quad(lambda p: 1 / math.sqrt(model.G(p)), p0, p1, epsabs=1e-13, epsrel=1e-12)
    return value


# ---------------------------------------------------------------------------
# Riccati solutions u' = eps + u^2
# ---------------------------------------------------------------------------


RICCATI_BRANCHES = ("rational", "tan", "const-plus", "const-minus", "tanh", "coth")


class RiccatiProfile(UProfile):
    """A closed-form solution of u' = eps + u^2.

    ``interval`` is where the formula is smooth; ``positive_interval`` is the
    sub-interval on which u > 0 (None when u is never positive).
    """

    def __init__(self, eps: float, branch: str, C: float = 0.0):
        check_finite(eps, C, what="Riccati parameter")
        if branch not in RICCATI_BRANCHES:
            raise ParameterError(f"unknown Riccati branch {branch!r}")
        wanted = {"rational": "eps = 0", "tan": "eps > 0"}.get(branch, "eps < 0")
        ok = {"eps = 0": eps == 0, "eps > 0": eps > 0, "eps < 0": eps < 0}[wanted]
        if not ok:
            raise ParameterError(f"branch {branch!r} needs {wanted}, got eps={eps!r}")
        self.eps, self.branch, self.C = eps, branch, C
        inf = math.inf
        if branch == "rational":
            self.interval = self.positive_interval = (-inf, C)
        elif branch == "tan":
            half = math.pi / (2 * math.sqrt(eps))
            self.interval = (-C - half, half - C)
            self.positive_interval = (-C, half - C)
        elif branch.startswith("const"):
            self.interval = (-inf, inf)
            self.positive_interval = self.interval if branch == "const-plus" else None
        elif branch == "tanh":
            self.interval = (-inf, inf)
            self.positive_interval = (-inf, -C)
        else:
            self.interval = self.positive_interval = (-inf, -C)

    def _check(self, s):
        lo, hi = self.interval
        if not (lo < s < hi or (math.isinf(lo) and math.isinf(hi))):
            raise DomainError(f"s={s!r} outside the {self.branch} branch interval ({lo}, {hi})")

    def __call__(self, s):
        self._check(s)
        eps, C = self.eps, self.C
        if self.branch == "rational":
            return 1 / (C - s)
        if self.branch == "tan":
            r = math.sqrt(eps)
            return r * math.tan(r * (s + C))
        a = math.sqrt(-eps)
        if self.branch == "const-plus":
            return a
        if self.branch == "const-minus":
            return -a
        if self.branch == "tanh":
            return -a * math.tanh(a * (s + C))
        return -a / math.tanh(a * (s + C))

    def jet(self, s, order=3):
        u = self(s)
        out = [u]
        if order >= 1:
            out.append(self.eps + u * u)
        if order >= 2:
            out.append(2 * u * out[1])
        if order >= 3:
            out.append(2 * out[1] ** 2 + 2 * u * out[2])
        if order > 3:
            raise PreconditionError("Riccati jets are provided up to third order")
        return tuple(out)

    def primitive(self, s) -> float:
        self._check(s)
        eps, C = self.eps, self.C
        if self.branch == "rational":
            return -math.log(C - s)
        if self.branch == "tan":
            r = math.sqrt(eps)
            return -math.log(math.cos(r * (s + C)))
        a = math.sqrt(-eps)
        if self.branch == "const-plus":
            return a * s
        if self.branch == "const-minus":
            return -a * s
        if self.branch == "tanh":
            return -math.log(math.cosh(a * (s + C)))
        return -math.log(abs(math.sinh(a * (s + C))))

    def integral(self, a, b):
        return self.primitive(b) - self.primitive(a)


def solve_u_riccati(eps: float, branch: str | None = None, C: float = 0.0) -> RiccatiProfile:
    """Closed-form u with u' = eps + u^2.

    The default branch is ``rational`` for eps = 0, ``tan`` for eps > 0 and
    ``tanh`` for eps < 0.
    """
    if branch is None:
        branch = "rational" if eps == 0 else "tan" if eps > 0 else "tanh"
    return RiccatiProfile(eps, branch, C)


def metric_g22(u: UProfile, s0: float, s: float) -> float:
    """exp(-2 * integral of u from s0 to s), normalized so that g22(s0) = 1."""
    return math.exp(-2 * u.integral(s0, s))


def metric_curvature(u: UProfile, s: float) -> float:
    """Gaussian curvature u' - u^2 of ds^2 + g22 dt^2."""
    u0, u1 = u.jet(s, 1)[:2]
    return u1 - u0 * u0


# ---------------------------------------------------------------------------
# families as functions of arclength
# ---------------------------------------------------------------------------


class FamilyCurve:
    """A family solution as a function of arclength, with p(s0) = p0.

    The chart coordinate is obtained by integrating p' = sqrt(G(p)) over
    ``[s_lo, s_hi]`` (clipped where p would leave the chart bounds) and
    interpolated with cubic Hermite polynomials.
    """

    def __init__(self, params: FamilyParams, p0: float, s0: float = 0.0,
                 s_range: tuple[float, float] | None = None, *, tol: float = 1e-13,
                 samples: int = 2000):
        from .integrate import solve_ode

        self.params = params
        self.model = _model(params)
        self.p0 = _checked(self.model, p0)
        self.s0 = float(s0)
        lo, hi = family_bounds(params)
        if not lo < p0 < hi:
            raise DomainError(f"p0={p0!r} outside chart bounds ({lo}, {hi})")
        if s_range is None:
            s_range = (self.s0 - 1.0, self.s0 + 1.0)
        s_lo, s_hi = (float(v) for v in s_range)
        if not s_lo <= self.s0 <= s_hi:
            raise PreconditionError("s_range must contain s0")
        margin = 1e-9 * max(1.0, hi - lo)
        conditions = (("above_lower_bound", lambda y: y[0] - lo, False),
                      ("below_upper_bound", lambda y: hi - y[0], False))

        def rhs(s, y):
            g = self.model.G(y[0])
            if not g > 0:
                raise DomainError("chart parameter left the admissible range")
            return np.array([math.sqrt(g)])

        pieces = []
        for end in (s_lo, s_hi):
            if end == self.s0:
                continue
            stride = abs(end - self.s0) / samples
            s, y, f, _ = solve_ode(rhs, self.s0, [self.p0], end, atol=tol, rtol=tol,
                                   sample_stride=stride, conditions=conditions, margin=margin)
            pieces.append((s, y[:, 0], f[:, 0]))
        s_all = np.concatenate([pc[0] for pc in pieces]) if pieces else np.array([self.s0])
        p_all = np.concatenate([pc[1] for pc in pieces]) if pieces else np.array([self.p0])
        d_all = np.concatenate([pc[2] for pc in pieces]) if pieces else np.array([0.0])
        # the last sample of a clipped side may sit just past a bound; drop it
        keep = [i for i in range(len(s_all)) if lo + margin < p_all[i] < hi - margin]
        order = np.argsort(s_all[keep], kind="stable")
        s_sorted = s_all[keep][order]
        uniq = np.concatenate([[True], np.diff(s_sorted) > 0])
        self._s = s_sorted[uniq]
        self._p = p_all[keep][order][uniq]
        self._dp = d_all[keep][order][uniq]
        self.interval = (float(self._s[0]), float(self._s[-1]))

    def chart_param(self, s: float) -> float:
        from .integrate import hermite

        lo, hi = self.interval
        if not lo <= s <= hi:
            raise DomainError(f"s={s!r} outside family curve range [{lo}, {hi}]")
        i = min(max(int(np.searchsorted(self._s, s, side="right")) - 1, 0), len(self._s) - 2)
        if s == self._s[i]:
            return float(self._p[i])
        return float(hermite(self._s[i], self._p[i], self._dp[i],
                             self._s[i + 1], self._p[i + 1], self._dp[i + 1], s))

    def point(self, s: float) -> FamilyPoint:
        return eval_family(self.params, self.chart_param(s))

    def normal_profile(self) -> "FamilyNormalProfile":
        return FamilyNormalProfile(self)

    def u_profile(self) -> "FamilyU":
        return FamilyU(self)


class FamilyNormalProfile(NormalProfile):
    """v(s) along a family curve."""

    def __init__(self, curve: FamilyCurve):
        self.curve = curve
        self.interval = curve.interval

    def value(self, s):
        return self.curve.point(s).v

    def __repr__(self):
        P = self.curve.params
        return (f"FamilyNormalProfile({P.family.value}, eps={P.eps}, c={P.c}, C={P.C}, "
                f"c2={P.c2}, p0={self.curve.p0})")


class FamilyU(UProfile):
    """u(s) along a family curve; integrals go through the chart, du/ds via the system."""

    def __init__(self, curve: FamilyCurve):
        self.curve = curve
        self.interval = curve.interval

    def __call__(self, s):
        return self.curve.point(s).u

    def jet(self, s, order=3):
        if order > 1:
            raise PreconditionError("family u-profiles provide first derivatives only")
        pt = self.curve.point(s)
        du = self.curve.params.eps + pt.y * (2 * pt.w - pt.y) - pt.x ** 2 + pt.u ** 2
        return (pt.u, du)[: order + 1]

    def integral(self, a, b):
        model = self.curve.model
        pa, pb = self.curve.chart_param(a), self.curve.chart_param(b)
        value, _ = quad(lambda p: model.fields(p)[0] / math.sqrt(model.G(p)), pa, pb,
                        epsabs=1e-14, epsrel=1e-13)
        return value
