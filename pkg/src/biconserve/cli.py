"""Command-line front end: ``biconserve integrate | family | pnmc | scan``.

Every option can also come from a TOML file given with ``--config``; keys are
the long option names with dashes replaced by underscores, either at the top
level or inside a table named after the subcommand.  Flags override the file.

Exit codes: 0 success, 1 invalid configuration, 2 empty or exited geometry,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from itertools import product
from pathlib import Path
from typing import Any, Sequence

from .core import (BiconserveError, ConstantProfile, ConstantU, NoAdmissibleRangeError,
                   NormalProfile, PolynomialProfile, PolynomialU, TabulatedProfile,
                   ToleranceConfig, UProfile)
from .families import (FamilyCurve, FamilyId, FamilyParams, bih_sixth_eq_residual, eval_family,
                       family_bounds, family_system_residual, interior_grid, solve_u_riccati)
from .integrate import (DomainExit, IntegrationSpec, ReachedEnd, Trajectory, TrajectoryU,
                        integrate)
from .systems import SystemKind
from .verify import (codazzi_residuals, obstruction_polynomial, obstruction_scan, pnmc_beta_check,
                     pnmc_compat_residual, pnmc_constants, pnmc_initial_state)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_CONFIG, EXIT_GEOMETRY, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# formatting
# ---------------------------------------------------------------------------


def fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".17g")


def csv_text(header: Sequence[str], rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _json_clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    return obj


def json_text(obj) -> str:
    return json.dumps(_json_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _emit(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# option parsing helpers
# ---------------------------------------------------------------------------


def _floats(text, what: str) -> list[float]:
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, (list, tuple)):
        items = list(text)
    else:
        items = [t for t in str(text).split(",") if t.strip()]
    try:
        out = [float(v) for v in items]
    except (TypeError, ValueError):
        raise ConfigError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if not all(math.isfinite(v) for v in out):
        raise ConfigError(f"{what}: values must be finite")
    return out


def _float(value, what: str) -> float:
    vals = _floats(value, what)
    if len(vals) != 1:
        raise ConfigError(f"{what}: expected a single number, got {value!r}")
    return vals[0]


def _range(value) -> tuple[float, float]:
    if isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        parts = str(value).split(":")
    if len(parts) != 2:
        raise ConfigError(f"range: expected a:b, got {value!r}")
    a, b = (_float(p, "range") for p in parts)
    return a, b


def _kv_params(text: str) -> dict[str, float]:
    out = {}
    for item in filter(None, (t.strip() for t in text.split(","))):
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"expected key=value, got {item!r}")
        out[key.strip()] = _float(val, key.strip())
    return out


def _family_params(fid: FamilyId, eps: float, c, C, c2) -> FamilyParams:
    if c is None or C is None:
        raise ConfigError(f"{fid.value} needs both --c and --C")
    return FamilyParams(fid, eps, c, C, c2)


def parse_profile(spec: str, eps: float, s0: float, s_range: tuple[float, float]
                  ) -> tuple[NormalProfile, FamilyCurve | None]:
    """Parse ``const:v``, ``poly:c0,c1,...``, ``table:path`` or ``family:id:k=v,...``."""
    kind, _, rest = str(spec).partition(":")
    if kind == "const":
        return ConstantProfile(_float(rest, "const profile")), None
    if kind == "poly":
        return PolynomialProfile(tuple(_floats(rest, "poly profile"))), None
    if kind == "table":
        if not Path(rest).is_file():
            raise ConfigError(f"profile table {rest!r} not found")
        return TabulatedProfile.from_csv(rest), None
    if kind == "family":
        fam, _, params = rest.partition(":")
        fid = FamilyId.parse(fam)
        kv = _kv_params(params)
        unknown = set(kv) - {"eps", "c", "C", "c2", "p0"}
        if unknown:
            raise ConfigError(f"family profile: unknown keys {sorted(unknown)}")
        if "eps" in kv and kv["eps"] != eps:
            raise ConfigError("family profile eps differs from --epsilon")
        if "p0" not in kv:
            raise ConfigError("family profile needs p0 (chart parameter at s0)")
        fp = _family_params(fid, eps, kv.get("c"), kv.get("C"), kv.get("c2"))
        lo, hi = min(s_range), max(s_range)
        curve = FamilyCurve(fp, kv["p0"], s0, (lo, hi))
        return curve.normal_profile(), curve
    raise ConfigError(f"unknown profile kind {kind!r}; use const:, poly:, table: or family:")


def parse_u(spec: str, eps: float, s0: float, interval: tuple[float, float]) -> UProfile:
    """Parse ``const:v``, ``poly:c0,...``, ``riccati:branch[:C]`` or ``pnmc:u0,x0,y0``."""
    kind, _, rest = str(spec).partition(":")
    if kind == "const":
        return ConstantU(_float(rest, "const u"))
    if kind == "poly":
        return PolynomialU(tuple(_floats(rest, "poly u")))
    if kind == "riccati":
        branch, _, c = rest.partition(":")
        return solve_u_riccati(eps, branch or None, _float(c, "riccati C") if c else 0.0)
    if kind == "pnmc":
        ic = _floats(rest, "pnmc initial state")
        if len(ic) != 3:
            raise ConfigError("pnmc u needs u0,x0,y0")
        if interval[0] != s0:
            raise ConfigError("with a pnmc u the interval must start at s0")
        traj = integrate(IntegrationSpec(SystemKind.PNMC, s0, interval[1], ic, eps=eps,
                                         tol=ToleranceConfig(abs_tol=1e-12, rel_tol=1e-12)))
        if not isinstance(traj.terminal, ReachedEnd):
            raise ConfigError(f"pnmc trajectory stopped early: {traj.terminal}")
        return TrajectoryU(traj)
    raise ConfigError(f"unknown u kind {kind!r}; use const:, poly:, riccati: or pnmc:")


class _Options:
    """Flag values with TOML fallback and built-in defaults."""

    def __init__(self, args: argparse.Namespace, command: str):
        self.args = args
        self.file: dict[str, Any] = {}
        if getattr(args, "config", None):
            try:
                with open(args.config, "rb") as fh:
                    doc = tomllib.load(fh)
            except (OSError, tomllib.TOMLDecodeError) as exc:
                raise ConfigError(f"cannot read config {args.config}: {exc}") from None
            table = doc.get(command, {})
            self.file = {k: v for k, v in doc.items() if not isinstance(v, dict)}
            if isinstance(table, dict):
                self.file.update(table)
            known = set(vars(args))
            unknown = set(self.file) - known
            if unknown:
                raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

    def get(self, name: str, default=None):
        value = getattr(self.args, name, None)
        if value is None:
            value = self.file.get(name, default)
        return value


def _tolerances(opt: _Options) -> ToleranceConfig:
    base = ToleranceConfig()
    return ToleranceConfig(**{name: _float(opt.get(name, getattr(base, name)), name)
                              for name in ("abs_tol", "rel_tol", "constraint_tol",
                                           "residual_tol", "domain_margin")})


def _threads() -> int:
    raw = os.environ.get("BICONSERVE_THREADS")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"BICONSERVE_THREADS must be an integer, got {raw!r}") from None
        if n < 1:
            raise ConfigError("BICONSERVE_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _max_abs(values) -> float:
    return max((abs(float(v)) for v in values), default=0.0)


def _terminal_dict(term) -> dict:
    out = {"kind": term.kind}
    for name in ("condition", "s_exit", "s_last", "reason"):
        if hasattr(term, name):
            out[name] = getattr(term, name)
    return out


def trajectory_csv(traj: Trajectory) -> str:
    fields = list(traj.system.fields)
    # header order s,u,w,x,y[,k][,v,z]
    order = [f for f in ("u", "w", "x", "y", "k", "v", "z") if f in fields]
    idx = [fields.index(f) for f in order]
    diag = [d for d in ("gauss_residual", "bih_residual", "omega_margin") if d in traj.diagnostics]
    rows = []
    for i, s in enumerate(traj.s):
        rows.append([s] + [traj.states[i, j] for j in idx] + [traj.diagnostics[d][i] for d in diag])
    return csv_text(["s"] + order + diag, rows)


def cmd_integrate(opt: _Options) -> int:
    try:
        system = SystemKind.parse(str(opt.get("system", "")))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    eps = _float(opt.get("epsilon", 0.0), "epsilon")
    if opt.get("range") is None:
        raise ConfigError("--range is required")
    s0, s_end = _range(opt.get("range"))
    tol = _tolerances(opt)
    profile = curve = None
    if system.needs_profile:
        if opt.get("profile") is None:
            raise ConfigError(f"system {system.value} needs --profile")
        profile, curve = parse_profile(opt.get("profile"), eps, s0, (s0, s_end))
    ic_raw = opt.get("ic")
    if ic_raw is None:
        raise ConfigError("--ic is required")
    if str(ic_raw) == "family":
        if curve is None:
            raise ConfigError("--ic family needs a family: profile")
        pt = curve.point(s0)
        ic = list(pt.bic_state if system is SystemKind.BIC else pt.bic_k_state)
    else:
        ic = _floats(ic_raw, "ic")
    stride = opt.get("stride")
    spec = IntegrationSpec(system, s0, s_end, ic, eps=eps, profile=profile, tol=tol,
                           max_steps=int(opt.get("max_steps", 100_000)),
                           sample_stride=None if stride is None else _float(stride, "stride"),
                           strict_signs=not opt.get("relaxed_signs", False))
    traj = integrate(spec)
    summary = {
        "command": "integrate",
        "system": system.value,
        "epsilon": eps,
        "s0": s0,
        "s_end": s_end,
        "samples": len(traj),
        "accepted_steps": traj.accepted_steps,
        "rejected_steps": traj.rejected_steps,
        "terminal": _terminal_dict(traj.terminal),
        "max_abs_residuals": {k: _max_abs(v) for k, v in traj.diagnostics.items()
                              if k != "omega_margin"},
        "min_omega_margin": float(min(traj.diagnostics["omega_margin"])),
    }
    if system in (SystemKind.BIC, SystemKind.BIC_K):
        report = codazzi_residuals(traj, tol.residual_tol)
        summary["codazzi"] = report.as_dict()
    _emit(trajectory_csv(traj), opt.get("csv"))
    if opt.get("json"):
        _emit(json_text(summary), opt.get("json"))
    if isinstance(traj.terminal, ReachedEnd):
        return EXIT_OK
    if isinstance(traj.terminal, DomainExit):
        return EXIT_GEOMETRY
    return EXIT_NUMERIC


def cmd_family(opt: _Options) -> int:
    fid = FamilyId.parse(str(opt.get("family", "")))
    eps = _float(opt.get("epsilon", 0.0), "epsilon")
    c = opt.get("c")
    C = opt.get("C")
    c2 = opt.get("c2")
    params = _family_params(fid, eps, None if c is None else _float(c, "c"),
                            None if C is None else _float(C, "C"),
                            None if c2 is None else _float(c2, "c2"))
    n = int(opt.get("grid", 50))
    if n < 1:
        raise ConfigError("--grid must be positive")
    try:
        bounds = family_bounds(params)
    except NoAdmissibleRangeError as exc:
        print(f"biconserve: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    grid = interior_grid(bounds, n)
    has_poly = obstruction_polynomial(params, grid[0]) is not None
    header = ["chart_param", "u", "v", "w", "x", "y", "k", "res1", "res2", "res3", "res4", "res5"]
    header += (["bih_poly"] if has_poly else []) + ["bih_residual"]
    rows, res_max, polys, sixths = [], [0.0] * 5, [], []
    for p in grid:
        pt = eval_family(params, p)
        res = family_system_residual(params, p)
        res_max = [max(m, abs(float(r))) for m, r in zip(res_max, res)]
        row = list(pt) + list(res)
        if has_poly:
            polys.append(obstruction_polynomial(params, p))
            row.append(polys[-1])
        sixths.append(bih_sixth_eq_residual(params, p))
        row.append(sixths[-1])
        rows.append(row)
    summary = {
        "command": "family",
        "family": fid.value,
        "params": {"epsilon": eps, "c": params.c, "C": params.C, "c2": params.c2},
        "bounds": list(bounds),
        "grid": n,
        "max_abs_residuals": res_max,
        "max_abs_residual": max(res_max),
        "min_abs_bih_residual": min(abs(v) for v in sixths),
        "min_abs_bih_poly": min(abs(v) for v in polys) if has_poly else None,
    }
    _emit(csv_text(header, rows), opt.get("csv"))
    if opt.get("json"):
        _emit(json_text(summary), opt.get("json"))
    return EXIT_OK


def cmd_pnmc(opt: _Options) -> int:
    eps = _float(opt.get("epsilon", 0.0), "epsilon")
    s0 = _float(opt.get("s0", 0.0), "s0")
    interval = _range(opt.get("interval", f"{s0}:{s0 + 1}"))
    if not min(interval) <= s0 <= max(interval):
        raise ConfigError("interval must contain s0")
    if opt.get("u") is None:
        raise ConfigError("--u is required")
    tol = _tolerances(opt)
    u = parse_u(opt.get("u"), eps, s0, interval)
    consts = pnmc_constants(u, s0, eps)
    lo, hi = min(interval), max(interval)
    grid = [lo + (hi - lo) * i / 200 for i in range(201)]
    compat = max(abs(pnmc_compat_residual(u, s, eps)) for s in grid)
    beta_max = None
    beta_pass = None
    if consts.realizable:
        x0, y0 = pnmc_initial_state(u, s0, eps)
        report = pnmc_beta_check(u, (s0, x0, y0), eps, (lo, hi), tol=tol)
        beta_max = report["beta"].max_abs
        beta_pass = report["beta"].passed
    out = {
        "command": "pnmc",
        "epsilon": eps,
        "s0": s0,
        "interval": [lo, hi],
        "c1_sq": consts.c1_sq,
        "c2_sq": consts.c2_sq,
        "realizable": consts.realizable,
        "compat_residual_max": compat,
        "beta_max": beta_max,
        "beta_pass": beta_pass,
    }
    _emit(json_text(out), opt.get("json"))
    return EXIT_OK


_SCAN_DEFAULTS = {
    FamilyId.Y_ZERO: {"c": [0.5, 1.0, 2.0], "C": [0.5, 1.0, 2.0, 3.0, 5.0, 8.0], "c2": [None]},
    FamilyId.K_EQUALS_EPSILON: {"c": [0.5, 1.0, 2.0], "C": [0.5, 1.0, 2.0, 3.0, 5.0, 8.0],
                                "c2": [None]},
    FamilyId.GENERAL_PLUS: {"c": [0.5, 1.0, 2.0], "C": [-1.0, 1.0, 3.0], "c2": [0.25, 0.5, 1.0]},
    FamilyId.GENERAL_MINUS: {"c": [0.5, 1.0, 2.0], "C": [1.0, 3.0, 5.0],
                             "c2": [-0.5, 0.0, 0.5, 1.0]},
    FamilyId.THREE_F2: {"c": [-0.5, -1.0, -2.0], "C": [12.0, 17.0, 25.0, 40.0, 60.0, 80.0],
                        "c2": [None]},
}

SCAN_HEADER = ["family", "epsilon", "c", "c2", "C", "lower", "upper", "min_abs_bih_residual",
               "bih_residual_sign_changes", "min_abs_bih_poly", "bih_poly_sign_changes", "flagged"]


def _scan_one(params: FamilyParams, n: int):
    try:
        return obstruction_scan(params, n)
    except NoAdmissibleRangeError:
        return None


def cmd_scan(opt: _Options) -> int:
    fams_raw = opt.get("family")
    if fams_raw is None:
        fams = list(FamilyId)
    else:
        items = fams_raw if isinstance(fams_raw, list) else str(fams_raw).split(",")
        fams = [FamilyId.parse(f) for f in items]
    epsilons = _floats(opt.get("epsilon", "-1,0,1"), "epsilon")
    n = int(opt.get("grid", 200))
    if n < 2:
        raise ConfigError("--grid must be at least 2")
    jobs: list[FamilyParams] = []
    invalid = 0
    for fid in fams:
        d = _SCAN_DEFAULTS[fid]
        cs = _floats(opt.get("c"), "c") if opt.get("c") is not None else d["c"]
        Cs = _floats(opt.get("C"), "C") if opt.get("C") is not None else d["C"]
        if fid in (FamilyId.GENERAL_PLUS, FamilyId.GENERAL_MINUS):
            c2s = _floats(opt.get("c2"), "c2") if opt.get("c2") is not None else d["c2"]
        else:
            c2s = [None]
        for eps, c, c2, C in product(epsilons, cs, c2s, Cs):
            try:
                jobs.append(FamilyParams(fid, eps, c, C, c2))
            except BiconserveError:
                invalid += 1
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(lambda p: _scan_one(p, n), jobs))
    rows, empty, flagged = [], 0, 0
    for params, res in zip(jobs, results):
        if res is None:
            empty += 1
            continue
        poly_min = res.poly_min_normalized
        vanishes = (res.sixth_sign_changes > 0 or res.sixth_min_normalized == 0
                    or (poly_min is not None and (poly_min == 0 or res.poly_sign_changes > 0)))
        flagged += vanishes
        rows.append([params.family.value, params.eps, params.c,
                     math.nan if params.c2 is None else params.c2, params.C,
                     res.bounds[0], res.bounds[1], res.sixth_min_normalized,
                     res.sixth_sign_changes, math.nan if poly_min is None else poly_min,
                     -1 if res.poly_sign_changes is None else res.poly_sign_changes, vanishes])
    _emit(csv_text(SCAN_HEADER, rows), opt.get("csv"))
    if opt.get("json"):
        _emit(json_text({"command": "scan", "rows": len(rows), "empty_ranges": empty,
                         "invalid_params": invalid, "flagged_rows": int(flagged),
                         "grid": n}), opt.get("json"))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parser
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML file with option defaults")
    p.add_argument("--csv", help="CSV output path (default: stdout)")
    p.add_argument("--json", help="JSON summary path")


def _tolerance_flags(p: argparse.ArgumentParser) -> None:
    for name in ("abs-tol", "rel-tol", "constraint-tol", "residual-tol", "domain-margin"):
        p.add_argument(f"--{name}", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="biconserve", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("integrate", help="integrate one of the ODE systems")
    _common(p)
    p.add_argument("--system", help="bic, bic-k, pnmc or bih")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--ic", help="comma-separated initial state, or 'family'")
    p.add_argument("--profile", help="const:v | poly:c0,c1,.. | table:path | family:id:k=v,..")
    p.add_argument("--range", help="s0:s_end (use --range=-1:0 for a negative start)")
    p.add_argument("--max-steps", type=int)
    p.add_argument("--stride", type=float, help="largest spacing between output samples")
    p.add_argument("--relaxed-signs", action="store_true", default=None,
                   help="allow x < 0 (domain before the E4 orientation is fixed)")
    _tolerance_flags(p)

    p = sub.add_parser("family", help="tabulate a closed-form family and its residuals")
    _common(p)
    p.add_argument("family", nargs="?", help="y-zero, k-equals-epsilon, general-plus, "
                                             "general-minus or three-f2")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--C", type=float)
    p.add_argument("--c2", type=float)
    p.add_argument("--grid", type=int)

    p = sub.add_parser("pnmc", help="PNMC constants and compatibility for a given u")
    _common(p)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--u", help="const:v | poly:c0,.. | riccati:branch[:C] | pnmc:u0,x0,y0")
    p.add_argument("--s0", type=float)
    p.add_argument("--interval", help="a:b containing s0")
    _tolerance_flags(p)

    p = sub.add_parser("scan", help="non-biharmonicity sweep over family parameters")
    _common(p)
    p.add_argument("--family", help="comma-separated family ids (default: all)")
    p.add_argument("--epsilon", help="comma-separated values (default -1,0,1)")
    p.add_argument("--c", help="comma-separated values")
    p.add_argument("--C", help="comma-separated values")
    p.add_argument("--c2", help="comma-separated values")
    p.add_argument("--grid", type=int)
    return parser


_COMMANDS = {"integrate": cmd_integrate, "family": cmd_family, "pnmc": cmd_pnmc,
             "scan": cmd_scan}


def run(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise ConfigError("missing command: integrate, family, pnmc or scan")
        return _COMMANDS[args.command](_Options(args, args.command))
    except (ConfigError, BiconserveError, ValueError) as exc:
        msg = " ".join(str(exc).split())
        print(f"biconserve: error: {msg}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv: Sequence[str] | None = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
