"""Residual checks along trajectories and families.

Covers the differential identities every biconservative solution satisfies,
the PNMC constants and compatibility condition, and the biharmonicity
obstruction along the closed-form families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import (DomainError, PreconditionError, ToleranceConfig, UProfile, check_finite)
from .families import (FamilyId, FamilyParams, bih_sixth_eq_residual, family_bounds,
                       interior_grid)
from .integrate import Trajectory
from .systems import SystemKind


@dataclass(frozen=True)
class CheckResult:
    max_abs: float
    argmax_s: float
    samples: int
    passed: bool

    def as_dict(self) -> dict:
        return {"max_abs": self.max_abs, "argmax_s": self.argmax_s, "samples": self.samples,
                "pass": self.passed}


@dataclass
class ResidualReport:
    """Named checks, each passing when its largest residual is within ``tol``."""

    tol: float
    checks: dict[str, CheckResult] = field(default_factory=dict)
    info: dict[str, float] = field(default_factory=dict)

    def add(self, name: str, s: np.ndarray, residual: np.ndarray) -> CheckResult:
        r = np.abs(np.asarray(residual, dtype=float))
        if r.size == 0:
            raise PreconditionError(f"check {name!r} has no samples")
        nan = np.isnan(r)
        i = int(np.argmax(nan)) if nan.any() else int(np.argmax(r))
        worst = float(r[i])
        result = CheckResult(worst, float(s[i]), int(r.size), bool(worst <= self.tol))
        self.checks[name] = result
        return result

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def __getitem__(self, name: str) -> CheckResult:
        return self.checks[name]

    def as_dict(self) -> dict:
        return {"tol": self.tol, "pass": self.passed,
                "checks": {k: v.as_dict() for k, v in self.checks.items()},
                "info": dict(self.info)}


# ---------------------------------------------------------------------------
# trajectory identities
# ---------------------------------------------------------------------------


def codazzi_residuals(traj: Trajectory, tol: float | None = None) -> ResidualReport:
    """Check the Codazzi-type identities sample by sample.

    Derivatives are the right-hand side values stored with each sample, so a
    sample whose state was altered after integration no longer satisfies them.
    With k1 = 2w - y and K the Gaussian curvature (the k field for BicK, the
    Gauss equation value for Bic):

    * ``e1_kappa1``: k1' - (y - k1) / (2w) * (w' - 2 w u)
    * ``biconservativity``: (k1 + w) w' + w x v
    * ``e1_gaussian_curvature``: K' - (6 w w' - 4 u (w^2 - K + eps))
    * ``gauss_equation``: (u' - u^2) - (eps + y (2w - y) - x^2)
    """
    if traj.system not in (SystemKind.BIC, SystemKind.BIC_K):
        raise PreconditionError(f"codazzi checks need a bic or bic_k trajectory, "
                                f"got {traj.system.value}")
    tol = traj.tol.residual_tol if tol is None else tol
    eps = traj.eps
    st, d = traj.states, traj.derivs
    u, w, x, y = st[:, 0], st[:, 1], st[:, 2], st[:, 3]
    du, dw, dx, dy = d[:, 0], d[:, 1], d[:, 2], d[:, 3]
    v = np.array([traj.profile(s) for s in traj.s])
    k1 = 2 * w - y
    gauss = eps + y * (2 * w - y) - x * x
    if traj.system is SystemKind.BIC_K:
        K, dK = st[:, 4], d[:, 4]
    else:
        K = gauss
        dK = dy * (2 * w - y) + y * (2 * dw - dy) - 2 * x * dx
    report = ResidualReport(tol)
    report.add("e1_kappa1", traj.s, (2 * dw - dy) - (y - k1) / (2 * w) * (dw - 2 * w * u))
    report.add("biconservativity", traj.s, (k1 + w) * dw + w * x * v)
    report.add("e1_gaussian_curvature", traj.s, dK - (6 * w * dw - 4 * u * (w * w - K + eps)))
    report.add("gauss_equation", traj.s, (du - u * u) - gauss)
    return report


def constraint_drift(traj: Trajectory) -> CheckResult:
    """Largest Gauss-constraint residual along a BicK trajectory, at constraint_tol."""
    if traj.system is not SystemKind.BIC_K:
        raise PreconditionError("constraint drift is defined for bic_k trajectories")
    report = ResidualReport(traj.tol.constraint_tol)
    return report.add("gauss_constraint", traj.s, traj.diagnostics["gauss_residual"])


# ---------------------------------------------------------------------------
# PNMC
# ---------------------------------------------------------------------------


class PnmcConstants(NamedTuple):
    c1_sq: float
    c2_sq: float
    realizable: bool


def pnmc_constants(u: UProfile, s0: float, eps: float, base: float | None = None
                   ) -> PnmcConstants:
    """Squared constants of a PNMC surface determined by u, read off at s0.

    The primitive U of u vanishes at ``base`` (default ``s0``).  Realizable
    means both squares are positive.
    """
    check_finite(s0, eps, what="pnmc parameter")
    a, a1, a2 = u.jet(s0, 2)[:3]
    if a == 0:
        raise DomainError(f"u vanishes at s0={s0!r}")
    U = 0.0 if base is None or base == s0 else u.integral(base, s0)
    c1_sq = math.exp(-4 * U) * (3.5 * a1 - 0.75 * a2 / a - 2 * a * a - 2 * eps)
    c2_sq = 9 * math.exp(-8 * U / 3) * (a2 / (4 * a) - 1.5 * a1 + a * a + eps)
    return PnmcConstants(c1_sq, c2_sq, c1_sq > 0 and c2_sq > 0)


def pnmc_initial_state(u: UProfile, s0: float, eps: float) -> tuple[float, float]:
    """The unique positive (x0, y0) satisfying both initial constraints at s0."""
    c1_sq, c2_sq, realizable = pnmc_constants(u, s0, eps)
    if not realizable:
        raise DomainError(f"no positive initial state: x0^2={c1_sq:.6g}, y0^2={c2_sq:.6g}")
    return math.sqrt(c1_sq), math.sqrt(c2_sq)


def pnmc_compat_residual(u: UProfile, s: float, eps: float) -> float:
    """3u'''u - 3u''u' + 72u'u^3 - 26u''u^2 - 32 eps u^3 - 32 u^5."""
    a, a1, a2, a3 = u.jet(s, 3)
    return (3 * a3 * a - 3 * a2 * a1 + 72 * a1 * a ** 3 - 26 * a2 * a * a
            - 32 * eps * a ** 3 - 32 * a ** 5)


def pnmc_initial_constraint_residuals(u: UProfile, s0: float, x0: float, y0: float,
                                      eps: float) -> tuple[float, float]:
    a, a1, a2 = u.jet(s0, 2)[:3]
    first = x0 * x0 + y0 * y0 / 3 - (eps + a * a - a1)
    second = 6 * a * x0 * x0 + 14 / 9 * a * y0 * y0 - (-a2 + 2 * eps * a + 2 * a ** 3)
    return first, second


def pnmc_beta_check(u: UProfile, ic: tuple[float, float, float], eps: float,
                    interval: tuple[float, float], *, samples: int = 201,
                    tol: ToleranceConfig | None = None) -> ResidualReport:
    """Solve the x and y equations for the given u and measure the remaining equation.

    x' = 2xu and y' = 4yu/3 are linear in (x, y), so x = x0 exp(2U) and
    y = y0 exp(4U/3) with U the primitive of u vanishing at s0.  The report's
    ``beta`` check is max |u' - eps + y^2/3 + x^2 - u^2| at 10 constraint_tol;
    the compatibility residual is reported alongside but not enforced.
    """
    tol = tol or ToleranceConfig()
    s0, x0, y0 = (float(v) for v in ic)
    check_finite(s0, x0, y0, eps, what="beta-check input")
    r1, r2 = pnmc_initial_constraint_residuals(u, s0, x0, y0, eps)
    for name, r in (("first", r1), ("second", r2)):
        if abs(r) > tol.constraint_tol:
            raise PreconditionError(
                f"initial state violates the {name} initial constraint by {r:.3g}")
    a, b = (float(v) for v in interval)
    if not a <= s0 <= b or a == b:
        raise PreconditionError("interval must be non-degenerate and contain s0")
    grid = np.linspace(a, b, samples)
    beta = np.empty(samples)
    compat = np.empty(samples)
    for i, s in enumerate(grid):
        U = u.integral(s0, s)
        x = x0 * math.exp(2 * U)
        y = y0 * math.exp(4 * U / 3)
        val, der = u.jet(s, 1)[:2]
        beta[i] = der - eps + y * y / 3 + x * x - val * val
        compat[i] = pnmc_compat_residual(u, s, eps)
    report = ResidualReport(10 * tol.constraint_tol)
    report.add("beta", grid, beta)
    j = int(np.argmax(np.abs(compat)))
    report.info["compat_residual_max"] = float(abs(compat[j]))
    report.info["compat_residual_argmax_s"] = float(grid[j])
    return report


# ---------------------------------------------------------------------------
# biharmonicity obstruction
# ---------------------------------------------------------------------------


def bih_poly_y_zero(F: float, c: float, C: float, eps: float) -> float:
    """5cF^10 - 2cCF^7 - 10c eps F^4 + 18c^3 C F^3 - 18c^3 eps."""
    return (5 * c * F ** 10 - 2 * c * C * F ** 7 - 10 * c * eps * F ** 4
            + 18 * c ** 3 * C * F ** 3 - 18 * c ** 3 * eps)


def bih_poly_k_eps(f: float, c: float, C: float, eps: float) -> float:
    return (-18 * c ** 4 * f ** 6 + 18 * c ** 2 * (4 * c + C) * f ** 5
            - 36 * c * (3 * c + 2 * C) * f ** 4 + 9 * (8 * c + 9 * C) * f ** 3
            + 16 * c ** 2 * eps * f ** 2 - 16 * c * eps * f - 36 * eps)


def _is_y_zero(params: FamilyParams) -> bool:
    # general-minus with c2 = 0 is the y-zero family
    return params.family is FamilyId.Y_ZERO or (
        params.family is FamilyId.GENERAL_MINUS and params.c2 == 0)


def obstruction_polynomial(params: FamilyParams, p: float) -> float | None:
    """The closed-form obstruction polynomial, or None for families without one."""
    if _is_y_zero(params):
        return bih_poly_y_zero(p, params.c, params.C, params.eps)
    if params.family is FamilyId.K_EQUALS_EPSILON:
        return bih_poly_k_eps(p, params.c, params.C, params.eps)
    return None


def obstruction_chart_factor(params: FamilyParams, p: float) -> float | None:
    """Chart-dependent factor h(p) with sixth residual / (polynomial * h) constant."""
    if _is_y_zero(params):
        return p ** -3
    if params.family is FamilyId.K_EQUALS_EPSILON:
        return 1 / (params.c * p - 2)
    return None


def _sign_changes(values: np.ndarray) -> int:
    signs = np.sign(values)
    signs = signs[signs != 0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


@dataclass(frozen=True)
class ObstructionScan:
    """Obstruction evidence on an interior chart grid of one parameter set.

    ``*_min_normalized`` is min |value| / max |value| over the grid.  The
    ratio statistics are only present for families with a closed-form polynomial.
    """

    params: FamilyParams
    bounds: tuple[float, float]
    grid_size: int
    sixth_min_normalized: float
    sixth_sign_changes: int
    poly_min_normalized: float | None
    poly_sign_changes: int | None
    ratio_mean: float | None
    ratio_spread: float | None

    @property
    def nonvanishing(self) -> bool:
        ok = self.sixth_min_normalized > 0
        if self.poly_min_normalized is not None:
            ok = ok and self.poly_min_normalized > 0
        return ok


def obstruction_scan(params: FamilyParams, n: int = 200) -> ObstructionScan:
    bounds = family_bounds(params)
    grid = interior_grid(bounds, n)
    sixth = np.array([bih_sixth_eq_residual(params, p) for p in grid])
    poly = obstruction_polynomial(params, grid[0])
    poly_min = poly_changes = ratio_mean = ratio_spread = None
    if poly is not None:
        poly = np.array([obstruction_polynomial(params, p) for p in grid])
        factor = np.array([obstruction_chart_factor(params, p) for p in grid])
        poly_min = float(np.min(np.abs(poly)) / np.max(np.abs(poly)))
        poly_changes = _sign_changes(poly)
        # near a root of the polynomial both sides are tiny; skip those points
        keep = np.abs(poly) > 1e-8 * np.max(np.abs(poly))
        ratio = sixth[keep] / (poly[keep] * factor[keep])
        ratio_mean = float(np.mean(ratio))
        ratio_spread = float((np.max(ratio) - np.min(ratio)) / abs(ratio_mean))
    return ObstructionScan(params, bounds, n,
                           float(np.min(np.abs(sixth)) / np.max(np.abs(sixth))),
                           _sign_changes(sixth), poly_min, poly_changes, ratio_mean,
                           ratio_spread)
