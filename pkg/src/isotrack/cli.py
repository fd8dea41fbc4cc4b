"""Batch command line: ``isotrack {simulate,sweep,stability,lemma,gen-field}``.

Scenario configs are flat ``key = value`` files::

    # circular field, started 20 m out
    field.kind = circular
    field.i0 = 20
    field.sigma = 0.1
    sd = 10
    v = 0.5
    kp = 10
    ki = 1
    c1 = 0.2
    c2 = 1
    init_x = 0
    init_y = 20
    init_theta = -pi/2
    duration = 400

Exit codes: 0 success, 1 configuration/usage error, 2 aborted run or failed
check.
"""

from __future__ import annotations

import argparse
import ast
import logging
import math
import operator
import os
import sys
import tempfile

import numpy as np

from . import field as fld
from . import stability as stab
from .controller import ControllerParams
from .dubins import RobotState
from .errors import IsotrackError, InvalidScenario
from .field import fmt
from .simulator import SWEEP_AXES, Scenario, metrics, run, sweep, sweep_to_csv

log = logging.getLogger("isotrack")

FIELD_KEYS = {
    "field.kind",
    "field.i0",
    "field.sigma",
    "field.alpha",
    "field.rd",
    "field.sd",
    "field.center_x",
    "field.center_y",
    "field.grid_path",
    "field.components",
}
SCENARIO_KEYS = {
    "sd",
    "v",
    "kp",
    "ki",
    "c1",
    "c2",
    "derivative_mode",
    "tau_f",
    "sigma_limit",
    "omega_limit",
    "init_x",
    "init_y",
    "init_theta",
    "sim_dt",
    "controller_dt",
    "duration",
    "noise_std",
    "seed",
    "tail_fraction",
    "band",
}
KNOWN_KEYS = FIELD_KEYS | SCENARIO_KEYS
REQUIRED_KEYS = ("sd", "v", "kp", "ki", "c1", "c2", "init_x", "init_y", "init_theta", "duration")
FIELD_REQUIRED = {
    "circular": ("field.i0", "field.sigma"),
    "linear_radial": ("field.alpha", "field.rd", "field.sd"),
    "gaussian_mixture": ("field.components",),
    "grid": ("field.grid_path",),
}


class ConfigError(IsotrackError, ValueError):
    pass


_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
    ast.USub: operator.neg,
    ast.UAdd: operator.pos,
}


def _eval_number(text: str) -> float:
    """Evaluate a numeric literal or simple arithmetic with ``pi`` and ``e``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in ("pi", "e"):
            return getattr(math, node.id)
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError(text)

    return ev(ast.parse(text.strip(), mode="eval"))


def parse_config(text: str, required=REQUIRED_KEYS) -> dict:
    """Parse ``key = value`` lines. Unknown and duplicate keys are errors."""
    cfg: dict[str, str] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        if key in cfg:
            raise ConfigError(f"line {lineno}: duplicate key '{key}' (first on line {lines[key]})")
        cfg[key] = val
        lines[key] = lineno
    missing = [k for k in required if k not in cfg]
    if missing:
        raise ConfigError(f"missing required key '{missing[0]}'")
    cfg["__lines__"] = lines  # type: ignore[assignment]
    return cfg


def _num(cfg, key, default=None):
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing required key '{key}'")
        return default
    try:
        return _eval_number(cfg[key])
    except (ValueError, SyntaxError, ZeroDivisionError):
        line = cfg["__lines__"].get(key)
        raise ConfigError(f"line {line}: key '{key}' has non-numeric value {cfg[key]!r}") from None


def _opt(cfg, key):
    return _num(cfg, key) if key in cfg else None


def parse_components(text: str):
    """``amp,cx,cy,sxx,sxy,syy; amp,cx,cy,sxx,sxy,syy; ...``"""
    comps = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        parts = [_eval_number(t) for t in chunk.split(",")]
        if len(parts) != 6:
            raise ConfigError(f"mixture component needs 6 numbers, got {chunk.strip()!r}")
        a, cx, cy, sxx, sxy, syy = parts
        comps.append((a, (cx, cy), [[sxx, sxy], [sxy, syy]]))
    return comps


def build_field(cfg, base_dir="."):
    kind = cfg.get("field.kind")
    if kind is None:
        raise ConfigError("missing required key 'field.kind'")
    if kind not in FIELD_REQUIRED:
        raise ConfigError(f"unknown field.kind {kind!r}; choose from {sorted(FIELD_REQUIRED)}")
    for key in FIELD_REQUIRED[kind]:
        if key not in cfg:
            raise ConfigError(f"missing required key '{key}' for field.kind = {kind}")
    center = (_num(cfg, "field.center_x", 0.0), _num(cfg, "field.center_y", 0.0))
    try:
        if kind == "circular":
            return fld.Circular(_num(cfg, "field.i0"), _num(cfg, "field.sigma"), center)
        if kind == "linear_radial":
            return fld.LinearRadial(
                _num(cfg, "field.sd"), _num(cfg, "field.alpha"), _num(cfg, "field.rd"), center
            )
        if kind == "gaussian_mixture":
            return fld.GaussianMixture(parse_components(cfg["field.components"]))
        path = cfg["field.grid_path"]
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        return fld.load_grid(path)
    except OSError as exc:
        raise ConfigError(f"cannot read field.grid_path: {exc}") from None
    except (ValueError, IsotrackError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid field parameters: {exc}") from None


def build_scenario(cfg, base_dir=".") -> Scenario:
    f = build_field(cfg, base_dir)
    mode = cfg.get("derivative_mode", "dirty")
    params = ControllerParams(
        kp=_num(cfg, "kp"),
        ki=_num(cfg, "ki"),
        c1=_num(cfg, "c1"),
        c2=_num(cfg, "c2"),
        derivative_mode=mode,
        tau_f=_opt(cfg, "tau_f"),
        sigma_limit=_opt(cfg, "sigma_limit"),
        omega_limit=_opt(cfg, "omega_limit"),
    )
    seed = _num(cfg, "seed", 0.0)
    if seed != int(seed):
        raise ConfigError("seed must be an integer")
    sc = Scenario(
        field=f,
        s_d=_num(cfg, "sd"),
        initial=RobotState(_num(cfg, "init_x"), _num(cfg, "init_y"), _num(cfg, "init_theta")),
        v=_num(cfg, "v"),
        params=params,
        sim_dt=_num(cfg, "sim_dt", 0.01),
        controller_dt=_opt(cfg, "controller_dt"),
        duration=_num(cfg, "duration"),
        noise_std=_num(cfg, "noise_std", 0.0),
        seed=int(seed),
    )
    try:
        sc.validate()
    except InvalidScenario as exc:
        raise ConfigError(f"invalid scenario: {exc}") from None
    return sc


def load_config(path, required=REQUIRED_KEYS):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, required)


def _metric_opts(cfg, s_d):
    return _num(cfg, "tail_fraction", 0.1), _num(cfg, "band", 0.05 * abs(s_d))


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".isotrack-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="ascii", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    sc = build_scenario(cfg, os.path.dirname(os.path.abspath(args.config)))
    tail, band = _metric_opts(cfg, sc.s_d)
    traj = run(sc)
    if len(traj) == 0:
        print(f"completed = false\nfailure_reason = {traj.failure_reason}")
        return 2
    text = traj.to_csv()
    if args.out:
        _atomic_write(args.out, text)
    sys.stdout.write(metrics(traj, sc.s_d, tail, band).as_text())
    return 0 if traj.completed else 2


def _parse_values(text):
    vals = []
    for tok in text.split(","):
        if tok.strip():
            try:
                vals.append(_eval_number(tok))
            except (ValueError, SyntaxError):
                raise ConfigError(f"bad sweep value {tok!r}") from None
    if not vals:
        raise ConfigError("empty value list")
    unique = list(dict.fromkeys(vals))
    if len(unique) != len(vals):
        log.warning("duplicate sweep values removed")
    return unique


def cmd_sweep(args) -> int:
    if args.axis not in SWEEP_AXES:
        raise ConfigError(f"unknown axis {args.axis!r}; choose from {', '.join(SWEEP_AXES)}")
    values = _parse_values(args.values or "")
    cfg = load_config(args.config)
    sc = build_scenario(cfg, os.path.dirname(os.path.abspath(args.config)))
    tail, band = _metric_opts(cfg, sc.s_d)
    entries = sweep(sc, args.axis, values, tail, band, workers=args.workers)
    text = sweep_to_csv(entries)
    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    for en in entries:
        if en.error:
            log.warning("value %s: %s", fmt(en.value), en.error)
    return 0 if all(en.completed for en in entries) else 2


def _radial_loop(cfg):
    """Linearised circular-loop parameters for radial fields, else None."""
    kind = cfg.get("field.kind")
    v, s_d = _num(cfg, "v"), _num(cfg, "sd")
    if kind == "circular":
        i0, rate = _num(cfg, "field.i0"), _num(cfg, "field.sigma")
        r_d = fld.circular_isoline_radius(i0, rate, s_d)
        alpha = rate * s_d  # gradient norm on the isoline
    elif kind == "linear_radial":
        alpha, r_d = _num(cfg, "field.alpha"), _num(cfg, "field.rd")
    else:
        return None
    return stab.CircularLoopParams(
        kp=_num(cfg, "kp"),
        ki=_num(cfg, "ki"),
        c1=_num(cfg, "c1"),
        c2=_num(cfg, "c2"),
        alpha=alpha,
        v=v,
        r_d=r_d,
    )


def cmd_stability(args) -> int:
    cfg = load_config(args.config)
    sc = build_scenario(cfg, os.path.dirname(os.path.abspath(args.config)))
    p = sc.params
    report: dict = {}
    ok = True
    loop = _radial_loop(cfg)
    if p.ki > 0:
        if loop is None:
            report["prop1"] = "skipped (field is not radial)"
        else:
            items = stab.certificate_report(loop)
            report.update(items)
            ok = (
                items["gain.integral_condition"]
                and items["gain.rate_condition"]
                and items["A.hurwitz"]
                and items["certificate"] == "pass"
                and items["lyapunov_residual"] <= 1e-8
            )
            failed = [k for k in ("gain.integral_condition", "gain.rate_condition") if not items[k]]
            if failed:
                report["failed_conditions"] = ",".join(failed)
    else:
        report["prop1"] = "skipped (ki = 0)"
        if loop is None:
            report["prop2"] = "skipped (no operating region for this field)"
        else:
            src = sc.field.source
            region = fld.Annulus(src, 0.75 * loop.r_d, 1.25 * loop.r_d)
            b = fld.smoothness_bounds(sc.field, region, loop.r_d / 50)
            report.update({"gamma1": b.gamma1, "gamma2": b.gamma2, "gamma3": b.gamma3})
            eps = math.pi / 3
            try:
                res = stab.prop2_analysis(p.kp, p.c1, p.c2, b.gamma1, b.gamma2, b.gamma3, sc.v, eps)
                report.update(
                    {
                        "prop2.epsilon_angle": eps,
                        "prop2.kp_threshold": res.kp_threshold,
                        "prop2.rho": res.rho,
                        "prop2.error_bound": res.error_bound,
                        "prop2.kp_above_threshold": p.kp > res.kp_threshold,
                    }
                )
                ok = p.kp > res.kp_threshold
            except IsotrackError as exc:
                report["prop2"] = f"fail ({type(exc).__name__}: {exc})"
                ok = False
    report["all_pass"] = bool(ok)
    sys.stdout.write(stab.format_report(report))
    return 0 if ok else 2


def cmd_lemma(args) -> int:
    k, b, z0, T = args.k, args.b, args.z0, args.T
    bound = stab.lemma1_bound(k, b)
    t, z = stab.simulate_lemma1(k, b, z0, T)
    n_tail = max(1, len(z) // 10)
    tail_max = float(np.abs(z[-n_tail:]).max())
    drift = float(np.abs(z - z0).max())
    passed = tail_max <= bound + 1e-3
    sys.stdout.write(
        stab.format_report(
            {"bound": bound, "tail_max_abs_z": tail_max, "drift": drift, "pass": bool(passed)}
        )
    )
    return 0 if passed else 2


def _parse_region(text):
    try:
        xmin, xmax, ymin, ymax = (_eval_number(t) for t in text.split(","))
    except (ValueError, SyntaxError):
        raise ConfigError("region must be 'xmin,xmax,ymin,ymax'") from None
    return fld.Rectangle(xmin, xmax, ymin, ymax)


def cmd_gen_field(args) -> int:
    cfg = load_config(args.config, required=())
    f = build_field(cfg, os.path.dirname(os.path.abspath(args.config)))
    region = _parse_region(args.region)
    if not args.resolution > 0:
        raise ConfigError("resolution must be positive")
    if not args.out:
        raise ConfigError("--out is required")
    try:
        grid = fld.sample_grid(f, region, args.resolution)
    except (fld.EmptyRegion, fld.OutOfDomain) as exc:
        raise ConfigError(str(exc)) from None
    _atomic_write(args.out, fld.write_grid_text(grid))
    print(f"wrote {grid.nx}x{grid.ny} grid to {args.out}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="isotrack", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one closed-loop scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="vary one parameter and tabulate metrics")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", required=True)
    p.add_argument("--values", required=True)
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stability", help="check gain conditions and certificates")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("lemma", help="simulate z' = -k tanh z + b against its bound")
    for name in ("k", "b", "z0", "T"):
        p.add_argument(name, type=float)
    p.set_defaults(func=cmd_lemma)

    p = sub.add_parser("gen-field", help="sample a field onto a grid file")
    p.add_argument("--config", required=True)
    p.add_argument("--region", required=True, help="xmin,xmax,ymin,ymax")
    p.add_argument("--resolution", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_field)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    ap = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # argparse takes "-5,5,-5,5" for an option; glue it to its flag instead
    for i in range(len(argv) - 1, 0, -1):
        if argv[i - 1] == "--region" and argv[i].startswith("-"):
            argv[i - 1 : i + 1] = [f"--region={argv[i]}"]
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        return args.func(args)
    except IsotrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
