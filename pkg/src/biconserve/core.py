"""Domain types, tolerances, normal-connection profiles and domain predicates.

State vectors are immutable named tuples so they unpack, index and convert
to numpy arrays directly.  Field names follow the moving-frame reduction:

    u = a2 (connection coefficient)     w = f (mean curvature)
    x = alpha (A4 eigenvalue)           y = k2 (A3 eigenvalue)
    k = K (Gaussian curvature)          v = b1 (normal connection)
    z = df/ds
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

#: Sectional curvature of the target space form.  Any finite real.
Epsilon = float


# ---------------------------------------------------------------------------
# errors
# ---------------------------------------------------------------------------


class BiconserveError(Exception):
    """Base class for all errors raised by this package."""


class NonFiniteError(BiconserveError, ValueError):
    """A state, parameter or profile value is NaN or infinite."""


class DomainError(BiconserveError, ValueError):
    """A state lies outside the domain of the operation."""


class DegenerateDenominatorError(DomainError):
    """The denominator 3w - y vanished."""


class ProfileRangeError(BiconserveError, ValueError):
    """A profile was evaluated outside its range or returned zero."""


class ParameterError(BiconserveError, ValueError):
    """Family or configuration parameters violate their sign constraints."""


class NoAdmissibleRangeError(BiconserveError, ValueError):
    """The admissible chart-parameter interval of a family is empty."""


class PreconditionError(BiconserveError, ValueError):
    """Inputs violate a documented precondition."""


def check_finite(*values: float, what: str = "value") -> None:
    for value in values:
        if not math.isfinite(value):
            raise NonFiniteError(f"non-finite {what}: {value!r}")


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------


class BicState(NamedTuple):
    u: float
    w: float
    x: float
    y: float


class BicKState(NamedTuple):
    u: float
    w: float
    x: float
    y: float
    k: float


class PnmcState(NamedTuple):
    u: float
    x: float
    y: float


class BihState(NamedTuple):
    u: float
    v: float
    w: float
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class ToleranceConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    constraint_tol: float = 1e-8
    residual_tol: float = 1e-8
    domain_margin: float = 1e-9

    def __post_init__(self):
        for name in ("abs_tol", "rel_tol", "constraint_tol", "residual_tol", "domain_margin"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be a positive finite real, got {value!r}")


# ---------------------------------------------------------------------------
# domain membership
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MembershipReport:
    """Per-condition outcome of a domain check.

    ``values`` holds the quantity compared against the margin (absolute
    values for the "nonzero" conditions), so ``min(values.values())`` is the
    distance to the nearest boundary.
    """

    conditions: dict[str, bool]
    values: dict[str, float]
    margin: float

    @property
    def ok(self) -> bool:
        return all(self.conditions.values())

    @property
    def failed(self) -> list[str]:
        return [name for name, passed in self.conditions.items() if not passed]

    @property
    def distance(self) -> float:
        return min(self.values.values())


#: Boundary functions per domain: name -> (signed value, must be nonzero only).
#: "nonzero" conditions pass when |g| > margin, the others when g > margin.
BoundarySpec = tuple[tuple[str, Callable[..., float], bool], ...]


def _omega_quadratic(s) -> float:
    return 3 * s[1] ** 2 + s[3] * (2 * s[1] - s[3]) - s[2] ** 2


def boundary_functions(kind: str, eps: float = 0.0, strict_signs: bool = True) -> BoundarySpec:
    """Signed boundary functions of the domain of a system.

    ``kind`` is one of ``bic`` (Omega), ``bic_k`` (Omega bar), ``pnmc`` and
    ``bih``.  With ``strict_signs=False`` the sign convention x > 0 is relaxed
    to x != 0, which is the domain before the orientation of E4 is fixed.
    """
    x_cond = ("x_positive", lambda s: s[2], not strict_signs)
    if kind == "bic":
        return (
            ("u_nonzero", lambda s: s[0], True),
            ("w_positive", lambda s: s[1], False),
            x_cond,
            ("three_w_minus_y", lambda s: 3 * s[1] - s[3], True),
            ("omega_quadratic", _omega_quadratic, True),
        )
    if kind == "bic_k":
        return (
            ("u_nonzero", lambda s: s[0], True),
            ("w_positive", lambda s: s[1], False),
            x_cond,
            ("three_w_minus_y", lambda s: 3 * s[1] - s[3], True),
            ("omega_bar_quadratic", lambda s: 3 * s[1] ** 2 + s[4] - eps, True),
        )
    if kind == "pnmc":
        return (
            ("u_positive", lambda s: s[0], False),
            ("x_positive", lambda s: s[1], not strict_signs),
            ("y_positive", lambda s: s[2], False),
        )
    if kind == "bih":
        return (
            ("u_nonzero", lambda s: s[0], True),
            ("v_nonzero", lambda s: s[1], True),
            ("w_positive", lambda s: s[2], False),
            ("x_positive", lambda s: s[3], not strict_signs),
            ("z_positive", lambda s: s[5], False),
        )
    raise ValueError(f"unknown domain kind {kind!r}")


def membership(kind: str, state: Sequence[float], margin: float, eps: float = 0.0,
               strict_signs: bool = True) -> MembershipReport:
    if not margin >= 0:
        raise PreconditionError(f"margin must be >= 0, got {margin!r}")
    check_finite(*state, what="state component")
    conditions: dict[str, bool] = {}
    values: dict[str, float] = {}
    for name, fn, nonzero in boundary_functions(kind, eps, strict_signs):
        g = float(fn(state))
        value = abs(g) if nonzero else g
        values[name] = value
        conditions[name] = value > margin
    return MembershipReport(conditions, values, margin)


def omega_membership(state: Sequence[float], margin: float = 0.0, *,
                     strict_signs: bool = True) -> MembershipReport:
    """Check a (u, w, x, y) state against the domain Omega."""
    return membership("bic", state, margin, strict_signs=strict_signs)


def omega_bar_membership(state: Sequence[float], eps: float, margin: float = 0.0, *,
                         strict_signs: bool = True) -> MembershipReport:
    """Check a (u, w, x, y, k) state against Omega bar."""
    return membership("bic_k", state, margin, eps, strict_signs)


# ---------------------------------------------------------------------------
# normal connection profiles v(s) = b1(s)
# ---------------------------------------------------------------------------


class NormalProfile:
    """A nonzero function of arclength prescribing the normal connection."""

    interval: tuple[float, float] = (-math.inf, math.inf)

    def value(self, s: float) -> float:  # pragma: no cover - abstract
        raise NotImplementedError

    def __call__(self, s: float) -> float:
        lo, hi = self.interval
        if not (lo <= s <= hi):
            raise ProfileRangeError(f"s={s!r} outside profile range [{lo}, {hi}]")
        v = float(self.value(s))
        if not math.isfinite(v):
            raise NonFiniteError(f"profile value at s={s!r} is {v!r}")
        if v == 0.0:
            raise ProfileRangeError(f"profile vanishes at s={s!r}")
        return v

    def reflected(self) -> "NormalProfile":
        """The profile s -> -v(-s) used by the reversal symmetry."""
        return _Transformed(self, reflect=True, sign=-1.0)

    def negated(self) -> "NormalProfile":
        return _Transformed(self, reflect=False, sign=-1.0)


@dataclass(frozen=True)
class ConstantProfile(NormalProfile):
    constant: float

    def __post_init__(self):
        check_finite(self.constant, what="profile constant")
        if self.constant == 0:
            raise ParameterError("constant profile must be nonzero")

    def value(self, s):
        return self.constant


@dataclass(frozen=True)
class PolynomialProfile(NormalProfile):
    """v(s) = c0 + c1 s + c2 s^2 + ..."""

    coefficients: tuple[float, ...]
    interval: tuple[float, float] = (-math.inf, math.inf)

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if not coeffs:
            raise ParameterError("polynomial profile needs at least one coefficient")
        check_finite(*coeffs, what="polynomial coefficient")
        object.__setattr__(self, "coefficients", coeffs)

    def value(self, s):
        return np.polynomial.polynomial.polyval(s, self.coefficients)


@dataclass(frozen=True)
class TabulatedProfile(NormalProfile):
    """Piecewise linear interpolation of (s, v) samples, no extrapolation."""

    samples: tuple[tuple[float, float], ...]
    _s: np.ndarray = field(init=False, repr=False, compare=False)
    _v: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pairs = tuple((float(a), float(b)) for a, b in self.samples)
        if len(pairs) < 2:
            raise ParameterError("tabulated profile needs at least two samples")
        s = np.array([p[0] for p in pairs])
        v = np.array([p[1] for p in pairs])
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(v))):
            raise NonFiniteError("tabulated profile contains non-finite samples")
        if np.any(np.diff(s) <= 0):
            raise ParameterError("tabulated profile abscissae must be strictly increasing")
        if np.any(v == 0):
            raise ParameterError("tabulated profile values must be nonzero")
        object.__setattr__(self, "samples", pairs)
        object.__setattr__(self, "_s", s)
        object.__setattr__(self, "_v", v)

    @property
    def interval(self):
        return (float(self._s[0]), float(self._s[-1]))

    def value(self, s):
        return np.interp(s, self._s, self._v)

    @classmethod
    def from_csv(cls, path: str | Path) -> "TabulatedProfile":
        """Read ``s,v`` rows; a non-numeric first row is taken as a header."""
        rows: list[tuple[float, float]] = []
        with open(path, newline="") as fh:
            for i, row in enumerate(csv.reader(fh)):
                if not row:
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except (ValueError, IndexError):
                    if i == 0:
                        continue
                    raise ParameterError(f"{path}: malformed row {i + 1}: {row!r}")
        return cls(tuple(rows))


class _Transformed(NormalProfile):
    def __init__(self, base: NormalProfile, reflect: bool, sign: float):
        self.base, self.reflect, self.sign = base, reflect, sign
        lo, hi = base.interval
        self.interval = (-hi, -lo) if reflect else (lo, hi)

    def value(self, s):
        return self.sign * self.base(-s if self.reflect else s)

    def __repr__(self):
        op = "reflected" if self.reflect else "negated"
        return f"{op}({self.base!r})"


# ---------------------------------------------------------------------------
# connection coefficient profiles u(s) = a2(s)
# ---------------------------------------------------------------------------


class UProfile:
    """A scalar function u(s) with derivatives, used for metric and PNMC checks.

    Subclasses with closed forms override :meth:`jet`; the default falls back
    to Richardson-extrapolated central differences with base step ``fd_step``.
    """

    interval: tuple[float, float] = (-math.inf, math.inf)
    fd_step: float = 1e-4

    def __call__(self, s: float) -> float:  # pragma: no cover - abstract
        raise NotImplementedError

    def jet(self, s: float, order: int = 3) -> tuple[float, ...]:
        """Return (u, u', ..., u^(order)) at s."""
        return (float(self(s)),) + tuple(
            richardson_derivative(self, s, n, self.fd_step) for n in range(1, order + 1))

    def integral(self, a: float, b: float) -> float:
        """Adaptive quadrature of u over [a, b]."""
        from scipy.integrate import quad

        value, err = quad(self, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)
        if not math.isfinite(value) or err > 1e-8 * max(1.0, abs(value)):
            raise BiconserveError(f"quadrature of u over [{a}, {b}] did not converge (err={err:.3g})")
        return value


@dataclass(frozen=True)
class ConstantU(UProfile):
    constant: float

    def __call__(self, s):
        return self.constant

    def jet(self, s, order=3):
        return (self.constant,) + (0.0,) * order

    def integral(self, a, b):
        return self.constant * (b - a)


@dataclass(frozen=True)
class PolynomialU(UProfile):
    """u(s) = c0 + c1 s + ... with exact derivatives."""

    coefficients: tuple[float, ...]

    def __call__(self, s):
        return float(np.polynomial.polynomial.polyval(s, self.coefficients))

    def jet(self, s, order=3):
        out = [self(s)]
        c = np.asarray(self.coefficients, dtype=float)
        for _ in range(order):
            c = np.polynomial.polynomial.polyder(c) if c.size > 1 else np.zeros(1)
            out.append(float(np.polynomial.polynomial.polyval(s, c)))
        return tuple(out)

    def integral(self, a, b):
        c = np.polynomial.polynomial.polyint(np.asarray(self.coefficients, dtype=float))
        return float(np.polynomial.polynomial.polyval(b, c) - np.polynomial.polynomial.polyval(a, c))


class CallableU(UProfile):
    """Wrap a plain callable; derivatives come from finite differences."""

    def __init__(self, fn: Callable[[float], float], interval=(-math.inf, math.inf),
                 fd_step: float = 1e-4):
        self.fn, self.interval, self.fd_step = fn, interval, fd_step

    def __call__(self, s):
        return float(self.fn(s))


_CENTRAL = {
    1: ((-1, -0.5), (1, 0.5)),
    2: ((-1, 1.0), (0, -2.0), (1, 1.0)),
    3: ((-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)),
}


def richardson_derivative(fn: Callable[[float], float], s: float, order: int,
                          h: float = 1e-4) -> float:
    """Central difference of the given order, Richardson-extrapolated (h, h/2).

    The second-order stencil error is removed, leaving O(h^4).
    """
    stencil = _CENTRAL[order]

    def central(step):
        return sum(w * fn(s + k * step) for k, w in stencil) / step ** order

    coarse, fine = central(h), central(h / 2)
    return (4 * fine - coarse) / 3


def as_floats(values: Iterable[float]) -> tuple[float, ...]:
    out = tuple(float(v) for v in values)
    check_finite(*out, what="state component")
    return out
