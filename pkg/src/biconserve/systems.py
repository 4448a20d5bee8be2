"""Right-hand sides and constraint residuals of the four ODE systems.

All evaluators take the state as any length-n sequence (a state tuple, a list
or a numpy array) and return a float64 array of derivatives.
"""

from __future__ import annotations

import enum
import math
from typing import Callable, Sequence

import numpy as np

from .core import (BicKState, BicState, BihState, DegenerateDenominatorError, DomainError,
                   NormalProfile, PnmcState, as_floats, check_finite)


class SystemKind(enum.Enum):
    BIC = "bic"
    BIC_K = "bic_k"
    PNMC = "pnmc"
    BIH = "bih"

    @classmethod
    def parse(cls, text: str) -> "SystemKind":
        key = text.strip().lower().replace("-", "_")
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown system {text!r}; expected one of bic, bic-k, pnmc, bih")

    @property
    def state_type(self):
        return _STATE_TYPES[self]

    @property
    def fields(self) -> tuple[str, ...]:
        return self.state_type._fields

    @property
    def dimension(self) -> int:
        return len(self.fields)

    @property
    def needs_profile(self) -> bool:
        return self in (SystemKind.BIC, SystemKind.BIC_K)


_STATE_TYPES = {
    SystemKind.BIC: BicState,
    SystemKind.BIC_K: BicKState,
    SystemKind.PNMC: PnmcState,
    SystemKind.BIH: BihState,
}


def _profile_value(v: NormalProfile | float | Callable[[float], float], s: float) -> float:
    value = float(v(s)) if callable(v) else float(v)
    check_finite(value, what="profile value")
    return value


def _bic(u, w, x, y, v, eps):
    d = 3 * w - y
    if d == 0:
        raise DegenerateDenominatorError("3w - y = 0")
    return (eps + y * (2 * w - y) - x * x + u * u,
            -w * x * v / d,
            2 * x * u + y * v,
            2 * u * (y - w) - x * v)


def rhs_bic(s: float, state: Sequence[float], v, eps: float) -> np.ndarray:
    """Derivatives (u', w', x', y') of the biconservative system F_v."""
    u, w, x, y = as_floats(state)
    check_finite(s, eps)
    return np.array(_bic(u, w, x, y, _profile_value(v, s), eps))


def _bic_k(u, w, x, y, k, v, eps):
    d = 3 * w - y
    if d == 0:
        raise DegenerateDenominatorError("3w - y = 0")
    xv = x * v
    return (k + u * u,
            -w * xv / d,
            2 * x * u + y * v,
            2 * u * (y - w) - xv,
            -6 * w * w * xv / d - 4 * u * (w * w - k + eps))


def rhs_bic_k(s: float, state: Sequence[float], v, eps: float) -> np.ndarray:
    """Derivatives of the system augmented with the Gaussian curvature k."""
    u, w, x, y, k = as_floats(state)
    check_finite(s, eps)
    return np.array(_bic_k(u, w, x, y, k, _profile_value(v, s), eps))


def gauss_constraint_residual(state: Sequence[float], eps: float) -> float:
    """k - (eps + y(2w - y) - x^2)."""
    u, w, x, y, k = as_floats(state)
    return k - (eps + y * (2 * w - y) - x * x)


def _pnmc(u, x, y, eps):
    return (eps - y * y / 3 - x * x + u * u, 2 * x * u, 4 * y * u / 3)


def rhs_pnmc(s: float, state: Sequence[float], eps: float) -> np.ndarray:
    u, x, y = as_floats(state)
    check_finite(s, eps)
    return np.array(_pnmc(u, x, y, eps))


def pnmc_u_jet(state: Sequence[float], eps: float) -> tuple[float, float, float, float]:
    """(u, u', u'', u''') along a solution of the PNMC system, from the state alone."""
    u, x, y = as_floats(state)
    x2, y2 = x * x, y * y
    u1 = eps - y2 / 3 - x2 + u * u
    # x' = 2xu, y' = 4yu/3
    u2 = -8 * y2 * u / 9 - 4 * x2 * u + 2 * u * u1
    u3 = (-8 / 9 * (8 * y2 * u * u / 3 + y2 * u1)
          - 4 * (4 * x2 * u * u + x2 * u1)
          + 2 * u1 * u1 + 2 * u * u2)
    return u, u1, u2, u3


def _bih(u, v, w, x, y, z, eps):
    if not w > 0:
        raise DomainError(f"w must be positive, got {w!r}")
    k1 = 2 * w - y
    return (eps + y * k1 - x * x + u * u,
            -2 * v * z / w + u * v + 2 * x * (w - y),
            z,
            2 * x * u + y * v,
            2 * u * (y - w) - x * v,
            u * z + w * (v * v + k1 * k1 + y * y - 2 * eps))


def rhs_bih(s: float, state: Sequence[float], eps: float) -> np.ndarray:
    """Derivatives (u', v', w', x', y', z') of the biharmonic system."""
    u, v, w, x, y, z = as_floats(state)
    check_finite(s, eps)
    return np.array(_bih(u, v, w, x, y, z, eps))


def bih_constraint_residual(state: Sequence[float]) -> float:
    """(3w - y) z + w x v, which vanishes on biharmonic solutions."""
    u, v, w, x, y, z = as_floats(state)
    return (3 * w - y) * z + w * x * v


def make_rhs(kind: SystemKind, eps: float, profile: NormalProfile | None = None
             ) -> Callable[[float, np.ndarray], np.ndarray]:
    """A fast f(s, y) closure for the integrator; skips per-call validation."""
    if kind.needs_profile and profile is None:
        raise ValueError(f"system {kind.value} needs a normal profile")
    if kind is SystemKind.BIC:
        def f(s, y):
            u, w, x, yy = y.tolist()
            return np.array(_bic(u, w, x, yy, profile(s), eps))
    elif kind is SystemKind.BIC_K:
        def f(s, y):
            u, w, x, yy, k = y.tolist()
            return np.array(_bic_k(u, w, x, yy, k, profile(s), eps))
    elif kind is SystemKind.PNMC:
        def f(s, y):
            u, x, yy = y.tolist()
            return np.array(_pnmc(u, x, yy, eps))
    else:
        def f(s, y):
            return np.array(_bih(*y.tolist(), eps))
    return f


def is_finite_state(y: np.ndarray) -> bool:
    return all(math.isfinite(c) for c in y.tolist())
