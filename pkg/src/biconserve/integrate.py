"""Adaptive Dormand-Prince 5(4) integration with domain monitoring.

The stepper is written out here rather than taken from scipy because the
trajectory contract needs things ``solve_ivp`` does not expose together:
steps that land exactly on a sample grid, rejection and retry when the
right-hand side raises (finite-range profiles), bisection of domain exits to
an absolute tolerance, and per-sample residual diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (BiconserveError, NormalProfile, PreconditionError, ToleranceConfig, UProfile,
                   boundary_functions, check_finite)
from .systems import (SystemKind, bih_constraint_residual, gauss_constraint_residual, make_rhs,
                      pnmc_u_jet)

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
# difference between the 5th and embedded 4th order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 5.0
_BETA = 0.04            # PI controller memory term
_ALPHA = 0.2 - 0.75 * _BETA

_STEP_ERRORS = (BiconserveError, ZeroDivisionError, OverflowError, FloatingPointError)

RhsFn = Callable[[float, np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# terminal reasons
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReachedEnd:
    kind = "reached_end"


@dataclass(frozen=True)
class DomainExit:
    condition: str
    s_exit: float
    kind = "domain_exit"


@dataclass(frozen=True)
class StepLimit:
    s_last: float
    kind = "step_limit"


@dataclass(frozen=True)
class StepFailure:
    s_last: float
    reason: str
    kind = "step_failure"


Terminal = ReachedEnd | DomainExit | StepLimit | StepFailure


# ---------------------------------------------------------------------------
# core stepper
# ---------------------------------------------------------------------------


def _dopri_step(f: RhsFn, s: float, y: np.ndarray, k1: np.ndarray, h: float):
    """One step; returns (y_new, f(s+h, y_new), error vector)."""
    ks = [k1]
    for i in range(1, 7):
        yi = y + h * sum(a * k for a, k in zip(_A[i], ks) if a)
        ks.append(np.asarray(f(s + _C[i] * h, yi), dtype=float))
    y_new = yi  # row 7 of the tableau equals the 5th order weights (FSAL)
    err = h * (_E @ np.array(ks))
    return y_new, ks[6], err


def _error_norm(err, y, y_new, atol, rtol) -> float:
    scale = np.maximum(atol, rtol * np.maximum(np.abs(y), np.abs(y_new)))
    return float(np.max(np.abs(err) / scale))


def hermite(s0, y0, f0, s1, y1, f1, s):
    """Cubic Hermite interpolant through (s0, y0, f0) and (s1, y1, f1)."""
    h = s1 - s0
    t = (s - s0) / h
    t2, t3 = t * t, t * t * t
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + t
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


class _Monitor:
    """Domain conditions of a state: g > margin, or |g| > margin without sign change."""

    def __init__(self, conditions, margin: float):
        self.conditions = tuple(conditions)
        self.margin = margin

    def values(self, y: np.ndarray) -> list[float]:
        return [float(fn(y)) for _, fn, _ in self.conditions]

    def first_failure(self, g_ref: Sequence[float], g: Sequence[float]) -> int | None:
        for i, (_, _, nonzero) in enumerate(self.conditions):
            if nonzero:
                if abs(g[i]) <= self.margin or (g[i] > 0) != (g_ref[i] > 0):
                    return i
            elif not g[i] > self.margin:
                return i
        return None

    def distance(self, g: Sequence[float]) -> float:
        return min((abs(v) if nz else v) for v, (_, _, nz) in zip(g, self.conditions))


@dataclass
class _RawSolution:
    s: list[float]
    y: list[np.ndarray]
    f: list[np.ndarray]
    terminal: Terminal
    accepted: int
    rejected: int


def _initial_step(f, s0, y0, f0, direction, atol, rtol, max_h) -> float:
    scale = atol + rtol * np.abs(y0)
    d0 = float(np.max(np.abs(y0) / scale))
    d1 = float(np.max(np.abs(f0) / scale))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, max_h)
    try:
        f1 = f(s0 + direction * h0, y0 + direction * h0 * f0)
        d2 = float(np.max(np.abs(f1 - f0) / scale)) / h0
    except _STEP_ERRORS:
        return h0 * 1e-3
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, max_h)


def _solve(f: RhsFn, s0: float, y0: np.ndarray, s_end: float, atol: float, rtol: float,
           max_steps: int, stride: float, monitor: _Monitor | None, bisect_tol: float
           ) -> _RawSolution:
    direction = 1.0 if s_end > s0 else -1.0
    span = abs(s_end - s0)
    n_grid = max(1, math.ceil(span / stride - 1e-9))

    def grid_point(k):
        return s_end if k >= n_grid else s0 + direction * k * stride

    s, y = s0, y0.copy()
    fy = np.asarray(f(s, y), dtype=float)
    out = _RawSolution([s], [y], [fy], ReachedEnd(), 0, 0)
    g_prev = monitor.values(y) if monitor else None
    h = _initial_step(f, s0, y0, fy, direction, atol, rtol, stride)
    err_prev = 1e-4
    k_next = 1

    def finish(terminal):
        out.terminal = terminal
        return out

    while True:
        if out.accepted >= max_steps:
            return finish(StepLimit(s))
        target = grid_point(k_next)
        remaining = abs(target - s)
        lands = h >= remaining
        h_step = remaining if lands else h
        if h_step < 16 * np.spacing(abs(s)) or h_step < 1e-300:
            if monitor is not None:
                exit_ = _predictor_exit(out, monitor, g_prev, s, y, fy,
                                        s + direction * max(h_step, 16 * np.spacing(abs(s))))
                if exit_ is not None:
                    return finish(exit_)
            return finish(StepFailure(s, "step size underflow"))
        s_new = target if lands else s + direction * h_step
        try:
            y_new, f_new, err = _dopri_step(f, s, y, fy, s_new - s)
            if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(f_new))):
                raise FloatingPointError("non-finite stage")
            en = _error_norm(err, y, y_new, atol, rtol)
        except _STEP_ERRORS:
            out.rejected += 1
            h = 0.25 * h_step
            continue
        if en > 1.0:
            out.rejected += 1
            h = h_step * max(_FAC_MIN, _SAFETY * en ** -0.2)
            continue

        if monitor is not None:
            g_new = monitor.values(y_new)
            if monitor.first_failure(g_prev, g_new) is not None:
                return finish(_locate_exit(f, out, monitor, g_prev, s, y, fy,
                                           s_new, y_new, f_new, bisect_tol))
            g_prev = g_new

        out.accepted += 1
        en = max(en, 1e-10)
        fac = _SAFETY * en ** -_ALPHA * err_prev ** _BETA
        h_next = h_step * min(_FAC_MAX, max(_FAC_MIN, fac))
        err_prev = en
        s, y, fy = s_new, y_new, f_new
        out.s.append(s)
        out.y.append(y)
        out.f.append(fy)
        if lands:
            if k_next >= n_grid:
                return finish(ReachedEnd())
            k_next += 1
            # a clipped step says nothing about the controller's preferred size
            h = max(h, h_next)
        else:
            h = h_next


def _predictor_exit(out, monitor, g_ref, s, y, fy, s_probe) -> Terminal | None:
    """Domain exit closer than the smallest representable step.

    Near a pole of the right-hand side (3w - y -> 0) the boundary can be
    reached within a few ulps of s.  The explicit Euler predictor then decides
    whether the solution leaves the domain there.
    """
    s_probe = float(s_probe)
    y_probe = y + (s_probe - s) * fy
    if not np.all(np.isfinite(y_probe)):
        return None
    idx = monitor.first_failure(g_ref, monitor.values(y_probe))
    if idx is None:
        return None
    out.s.append(s_probe)
    out.y.append(y_probe)
    out.f.append(fy)
    return DomainExit(monitor.conditions[idx][0], s_probe)


def _locate_exit(f, out, monitor, g_ref, s, y, fy, s_bad, y_bad, f_bad, tol) -> Terminal:
    """Bisect the offending step, append the last good and first bad states.

    Each probe is a real step from the last accepted state, so the reported
    samples are the ones the bisection decided on.
    """
    def real_step(target):
        try:
            y_t, f_t, _ = _dopri_step(f, s, y, fy, target - s)
        except _STEP_ERRORS:
            return None
        if not np.all(np.isfinite(y_t)):
            return None
        return y_t, f_t

    def failure(step):
        if step is None:
            return -1
        return monitor.first_failure(g_ref, monitor.values(step[0]))

    lo, hi = s, s_bad
    lo_step, hi_step = None, (y_bad, f_bad)
    hi_idx = failure(hi_step)
    while abs(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        step = real_step(mid)
        idx = failure(step)
        if idx is None:
            lo, lo_step = mid, step
        else:
            hi, hi_step, hi_idx = mid, step, idx
    if hi_idx == -1 or hi_step is None:
        # the step itself failed inside the bracket; report the accepted endpoint
        hi, hi_step = s_bad, (y_bad, f_bad)
        hi_idx = failure(hi_step)
    if lo_step is not None:
        out.s.append(lo)
        out.y.append(lo_step[0])
        out.f.append(lo_step[1])
        out.accepted += 1
    out.s.append(hi)
    out.y.append(hi_step[0])
    out.f.append(hi_step[1])
    out.accepted += 1
    return DomainExit(monitor.conditions[hi_idx][0], hi)


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntegrationSpec:
    """Everything needed to integrate one system from one initial state.

    ``sample_stride`` is the largest allowed spacing between emitted samples:
    steps are clipped so that every point ``s0 + k * sample_stride`` is a
    sample.  ``None`` means one hundredth of the interval.

    ``extra_conditions`` adds boundary functions ``(name, g(state), nonzero)``
    to the domain monitor, for example family square-root arguments.
    """

    system: SystemKind
    s0: float
    s_end: float
    initial_state: Sequence[float]
    eps: float = 0.0
    profile: NormalProfile | None = None
    tol: ToleranceConfig = ToleranceConfig()
    max_steps: int = 100_000
    sample_stride: float | None = None
    strict_signs: bool = True
    extra_conditions: tuple = ()

    def __post_init__(self):
        check_finite(self.s0, self.s_end, self.eps, what="integration parameter")
        if self.s_end == self.s0:
            raise PreconditionError("s_end must differ from s0")
        if self.max_steps <= 0:
            raise PreconditionError("max_steps must be positive")
        if self.sample_stride is not None and not self.sample_stride > 0:
            raise PreconditionError("sample_stride must be positive")
        if len(self.initial_state) != self.system.dimension:
            raise PreconditionError(
                f"{self.system.value} needs {self.system.dimension} state components, "
                f"got {len(self.initial_state)}")
        if self.system.needs_profile and self.profile is None:
            raise PreconditionError(f"system {self.system.value} needs a normal profile")

    @property
    def stride(self) -> float:
        return self.sample_stride or abs(self.s_end - self.s0) / 100


@dataclass
class Trajectory:
    system: SystemKind
    eps: float
    profile: NormalProfile | None
    s: np.ndarray
    states: np.ndarray
    derivs: np.ndarray
    diagnostics: dict[str, np.ndarray]
    terminal: Terminal
    accepted_steps: int
    rejected_steps: int
    tol: ToleranceConfig = field(default_factory=ToleranceConfig)

    def __len__(self):
        return len(self.s)

    def component(self, name: str) -> np.ndarray:
        return self.states[:, self.system.fields.index(name)]

    def state_at(self, i: int):
        return self.system.state_type(*self.states[i].tolist())

    @property
    def span(self) -> tuple[float, float]:
        return float(self.s.min()), float(self.s.max())


def domain_monitor(kind: SystemKind, eps: float, margin: float, strict_signs: bool = True,
                   extra=()) -> _Monitor:
    return _Monitor(boundary_functions(kind.value, eps, strict_signs) + tuple(extra), margin)


def integrate(spec: IntegrationSpec) -> Trajectory:
    """Integrate ``spec.system`` until ``s_end`` or the first domain exit."""
    tol = spec.tol
    y0 = np.array([float(c) for c in spec.initial_state])
    check_finite(*y0, what="initial state component")
    monitor = domain_monitor(spec.system, spec.eps, tol.domain_margin, spec.strict_signs,
                             spec.extra_conditions)
    g0 = monitor.values(y0)
    if monitor.first_failure(g0, g0) is not None:
        bad = monitor.conditions[monitor.first_failure(g0, g0)][0]
        raise PreconditionError(
            f"initial state violates {bad} at margin {tol.domain_margin:g}")
    f = make_rhs(spec.system, spec.eps, spec.profile)
    try:
        f(spec.s0, y0)
    except BiconserveError as exc:
        raise PreconditionError(f"right-hand side undefined at the initial state: {exc}") from exc
    raw = _solve(f, spec.s0, y0, spec.s_end, tol.abs_tol, tol.rel_tol, spec.max_steps,
                 spec.stride, monitor, tol.abs_tol)
    states = np.array(raw.y)
    diag: dict[str, np.ndarray] = {}
    if spec.system is SystemKind.BIC_K:
        diag["gauss_residual"] = np.array([gauss_constraint_residual(st, spec.eps) for st in states])
    if spec.system is SystemKind.BIH:
        diag["bih_residual"] = np.array([bih_constraint_residual(st) for st in states])
    diag["omega_margin"] = np.array([monitor.distance(monitor.values(st)) for st in states])
    return Trajectory(spec.system, spec.eps, spec.profile, np.array(raw.s), states,
                      np.array(raw.f), diag, raw.terminal, raw.accepted, raw.rejected, tol)


def solve_ode(f: RhsFn, s0: float, y0: Sequence[float], s_end: float, *, atol: float = 1e-10,
              rtol: float = 1e-10, max_steps: int = 100_000, sample_stride: float | None = None,
              conditions=(), margin: float = 0.0):
    """Integrate a generic system y' = f(s, y); returns (s, y, f(s, y), terminal)."""
    y0 = np.array([float(c) for c in y0])
    stride = sample_stride or abs(s_end - s0) / 100
    monitor = _Monitor(conditions, margin) if conditions else None
    raw = _solve(f, float(s0), y0, float(s_end), atol, rtol, max_steps, stride, monitor, atol)
    return np.array(raw.s), np.array(raw.y), np.array(raw.f), raw.terminal


def dense_eval(traj: Trajectory, s: float) -> np.ndarray:
    """State at ``s`` by cubic Hermite interpolation of the stored samples."""
    s = float(s)
    lo, hi = traj.span
    if not (lo <= s <= hi):
        raise PreconditionError(f"s={s!r} outside trajectory range [{lo}, {hi}]")
    n = len(traj)
    if n == 1:
        return traj.states[0].copy()
    ascending = traj.s[-1] > traj.s[0]
    grid = traj.s if ascending else traj.s[::-1]
    i = min(max(int(np.searchsorted(grid, s, side="right")) - 1, 0), n - 2)
    a, b = (i, i + 1) if ascending else (n - 1 - i, n - 2 - i)
    if s == traj.s[a]:
        return traj.states[a].copy()
    if s == traj.s[b]:
        return traj.states[b].copy()
    return hermite(traj.s[a], traj.states[a], traj.derivs[a],
                   traj.s[b], traj.states[b], traj.derivs[b], s)


class TrajectoryU(UProfile):
    """The u component of a trajectory, usable wherever a u-profile is expected.

    Values come from the Hermite interpolant; derivatives are evaluated from
    the system right-hand side at the interpolated state, which is exact to
    interpolation accuracy (up to third order for PNMC, first for Bic/BicK).
    Integrals are exact integrals of the piecewise cubic interpolant.
    """

    def __init__(self, traj: Trajectory):
        if traj.system is SystemKind.BIH:
            raise PreconditionError("TrajectoryU supports bic, bic_k and pnmc trajectories")
        self.traj = traj
        self.interval = traj.span
        order = np.argsort(traj.s)
        self._s = traj.s[order]
        self._u = traj.states[order, 0]
        self._du = traj.derivs[order, 0]
        h = np.diff(self._s)
        delta = np.diff(self._u)
        d0, d1 = self._du[:-1], self._du[1:]
        self._c2 = (3 * delta / h - 2 * d0 - d1) / h
        self._c3 = (d0 + d1 - 2 * delta / h) / h ** 2
        seg = self._u[:-1] * h + d0 * h ** 2 / 2 + self._c2 * h ** 3 / 3 + self._c3 * h ** 4 / 4
        self._cum = np.concatenate([[0.0], np.cumsum(seg)])
        self._rhs = make_rhs(traj.system, traj.eps, traj.profile)

    def __call__(self, s):
        return float(dense_eval(self.traj, s)[0])

    def state(self, s) -> np.ndarray:
        return dense_eval(self.traj, s)

    def jet(self, s, order=3):
        state = dense_eval(self.traj, s)
        if self.traj.system is SystemKind.PNMC:
            if order > 3:
                raise PreconditionError("PNMC jets are available up to third order")
            return pnmc_u_jet(state, self.traj.eps)[: order + 1]
        if order > 1:
            raise PreconditionError("Bic/BicK trajectory jets are available up to first order")
        out = (float(state[0]),)
        if order == 1:
            out += (float(self._rhs(float(s), state)[0]),)
        return out

    def _primitive(self, s: float) -> float:
        lo, hi = self.interval
        if not (lo <= s <= hi):
            raise PreconditionError(f"s={s!r} outside trajectory range [{lo}, {hi}]")
        i = int(np.searchsorted(self._s, s, side="right")) - 1
        i = min(max(i, 0), len(self._s) - 2)
        t = s - self._s[i]
        return float(self._cum[i] + self._u[i] * t + self._du[i] * t ** 2 / 2
                     + self._c2[i] * t ** 3 / 3 + self._c3[i] * t ** 4 / 4)

    def integral(self, a, b):
        return self._primitive(b) - self._primitive(a)
