"""Command-line front end.

``lagflow run <config>`` reads an INI experiment file::

    [operator]
    tau = 1.5707963267948966

    [omega]
    kind = disc            ; or ellipse
    center = 0, 0
    radius = 1             ; ellipse: semi_axes = 2, 1

    [omega_tilde]
    kind = disc
    center = 0, 0
    radius = 1

    [flow]
    spacing = 0.03125
    cfl = 0.5
    kappa = 0, 0
    tol_c = 1e-8
    tol_bc = 1e-10
    t_max = 100
    initial = quadratic    ; or file:<node file>
    record_every = 100
    seed = 0

    [output]
    dir = out

and writes ``ledger.csv``, ``final_state.txt`` and ``summary.txt`` into the
output directory. ``summary.txt`` is itself a valid config holding every
resolved setting, so it can be fed back to ``lagflow run``.

Exit codes: 0 converged healthy run, 1 config or I/O error, 2 not
converged, 3 an estimate was violated (or convexity/obliqueness was lost),
4 the admissibility gate failed.
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import checks
from .diagnostics import EstimateLedger, check_admissibility
from .domains import ConvexDomain
from .errors import (ConfigError, ConvexityLost, LagflowError, NewtonDiverged, ObliquenessLost,
                     SingularHessian)
from .flow import FlowProblem, ForcingFunction, build_grid, quadratic_initial
from .nodefile import read_nodes, write_nodes
from .operators import SpectralOperator

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_VIOLATION, EXIT_INADMISSIBLE = 0, 1, 2, 3, 4

LEDGER_FILE = "ledger.csv"
STATE_FILE = "final_state.txt"
SUMMARY_FILE = "summary.txt"


# --------------------------------------------------------------------------
# config


@dataclass(frozen=True)
class DomainSpec:
    kind: str
    center: tuple[float, float]
    semi_axes: tuple[float, float]

    def build(self) -> ConvexDomain:
        if self.kind == "disc":
            return ConvexDomain.disc(self.center, self.semi_axes[0])
        return ConvexDomain.ellipse(self.center, self.semi_axes)

    def items(self) -> dict:
        out = {"kind": self.kind, "center": _fmt_vec(self.center)}
        if self.kind == "disc":
            out["radius"] = repr(self.semi_axes[0])
        else:
            out["semi_axes"] = _fmt_vec(self.semi_axes)
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    tau: float
    omega: DomainSpec
    omega_tilde: DomainSpec
    spacing: float
    cfl: float = 0.5
    kappa: tuple[float, float] = (0.0, 0.0)
    tol_c: float = 1e-8
    tol_bc: float = 1e-10
    t_max: float = 100.0
    initial: str = "quadratic"  # or an absolute node-file path
    record_every: int = 100
    output_dir: str = "out"
    seed: int = 0

    def to_ini(self) -> configparser.ConfigParser:
        cp = configparser.ConfigParser(interpolation=None)
        cp["operator"] = {"tau": repr(self.tau)}
        cp["omega"] = self.omega.items()
        cp["omega_tilde"] = self.omega_tilde.items()
        cp["flow"] = {
            "spacing": repr(self.spacing), "cfl": repr(self.cfl), "kappa": _fmt_vec(self.kappa),
            "tol_c": repr(self.tol_c), "tol_bc": repr(self.tol_bc), "t_max": repr(self.t_max),
            "initial": self.initial if self.initial == "quadratic" else f"file:{self.initial}",
            "record_every": str(self.record_every), "seed": str(self.seed),
        }
        cp["output"] = {"dir": self.output_dir}
        return cp


def _describe(exc) -> str:
    msg = str(exc)
    name = type(exc).__name__
    return msg if msg.startswith(name) else f"{name}: {msg}"


def _fmt_vec(v) -> str:
    return ", ".join(repr(float(x)) for x in v)


def _vec(text, name) -> tuple[float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"{name}: expected two comma-separated numbers, got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError(f"{name}: not numeric: {text!r}") from None


def _num(section, key, default=None, cast=float):
    if key not in section:
        if default is None:
            raise ConfigError(f"[{section.name}] missing required key {key!r}")
        return default
    try:
        return cast(section[key])
    except ValueError:
        raise ConfigError(f"[{section.name}] {key}: cannot parse {section[key]!r}") from None


def _domain(cp, name) -> DomainSpec:
    if name not in cp:
        raise ConfigError(f"missing section [{name}]")
    sec = cp[name]
    kind = sec.get("kind", "disc").strip().lower()
    center = _vec(sec.get("center", "0, 0"), f"[{name}] center")
    if kind == "disc":
        r = _num(sec, "radius")
        axes = (r, r)
    elif kind == "ellipse":
        if "semi_axes" not in sec:
            raise ConfigError(f"[{name}] ellipse needs semi_axes")
        axes = _vec(sec["semi_axes"], f"[{name}] semi_axes")
    else:
        raise ConfigError(f"[{name}] kind must be disc or ellipse, got {kind!r}")
    if min(axes) <= 0:
        raise ConfigError(f"[{name}] sizes must be positive")
    return DomainSpec(kind, center, axes)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if "operator" not in cp or "flow" not in cp:
        raise ConfigError(f"{path}: need [operator] and [flow] sections")
    tau = _num(cp["operator"], "tau")
    fl = cp["flow"]
    spacing = _num(fl, "spacing")
    cfl = _num(fl, "cfl", 0.5)
    tol_c = _num(fl, "tol_c", 1e-8)
    tol_bc = _num(fl, "tol_bc", 1e-10)
    t_max = _num(fl, "t_max", 100.0)
    record_every = _num(fl, "record_every", 100, int)
    seed = _num(fl, "seed", 0, int)
    kappa = _vec(fl.get("kappa", "0, 0"), "[flow] kappa")
    if not spacing > 0:
        raise ConfigError("spacing must be positive")
    if not 0.0 < cfl <= 1.0:
        raise ConfigError("cfl must lie in (0, 1]")
    if not (tol_c > 0 and tol_bc > 0 and t_max > 0):
        raise ConfigError("tol_c, tol_bc and t_max must be positive")
    if record_every < 1:
        raise ConfigError("record_every must be >= 1")
    initial = fl.get("initial", "quadratic").strip()
    if initial.startswith("file:"):
        p = Path(initial[5:].strip())
        initial = str(p if p.is_absolute() else (path.parent / p).resolve())
    elif initial != "quadratic":
        raise ConfigError(f"initial must be 'quadratic' or 'file:<path>', got {initial!r}")
    out = cp["output"].get("dir", "out") if "output" in cp else "out"
    out_path = Path(out)
    out = str(out_path if out_path.is_absolute() else (path.parent / out_path).resolve())
    return ExperimentConfig(tau, _domain(cp, "omega"), _domain(cp, "omega_tilde"), spacing, cfl,
                            kappa, tol_c, tol_bc, t_max, initial, record_every, out, seed)


# --------------------------------------------------------------------------
# run


def _initial_values(cfg, grid, omega, omega_tilde):
    if cfg.initial == "quadratic":
        return grid.sample(quadratic_initial(omega, omega_tilde))
    try:
        values, mask, spacing, _ = read_nodes(cfg.initial)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"initial data: {exc}") from None
    if values.shape != grid.shape or not np.array_equal(mask, grid.active):
        raise ConfigError(f"initial data {cfg.initial}: node set does not match the grid")
    if not math.isclose(spacing, grid.spacing, rel_tol=1e-12):
        raise ConfigError(f"initial data spacing {spacing!r} != {grid.spacing!r}")
    return values


def _write_summary(path, cfg, result: dict, admissibility=None, violations=()):
    cp = cfg.to_ini()
    cp["result"] = {k: (repr(v) if isinstance(v, float) else str(v)) for k, v in result.items()}
    if admissibility is not None:
        cp["admissibility"] = {k: (repr(v) if isinstance(v, float) else str(v).lower())
                               for k, v in admissibility.as_dict().items()}
    cp["violations"] = {"count": str(len(violations))}
    for k, v in enumerate(violations):
        cp["violations"][f"v{k}"] = f"t={v.t!r} {v.which} margin={v.margin!r}"
    with open(path, "w") as fh:
        cp.write(fh)


def run_experiment(config_path, threads: int = 1, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        cfg = load_config(config_path)
        op = SpectralOperator(cfg.tau)
        omega, omega_tilde = cfg.omega.build(), cfg.omega_tilde.build()
        grid = build_grid(omega, cfg.spacing)
        values = _initial_values(cfg, grid, omega, omega_tilde)
        forcing = ForcingFunction.linear(cfg.kappa)
        problem = FlowProblem(grid, omega_tilde, op, forcing, tol_bc=cfg.tol_bc, threads=threads)
        os.makedirs(cfg.output_dir, exist_ok=True)
    except (LagflowError, OSError, ValueError) as exc:
        print(f"error: {_describe(exc)}", file=stderr)
        return EXIT_ERROR
    out = Path(cfg.output_dir)

    adm = check_admissibility(forcing, values, op, omega, omega_tilde, grid, problem)
    if not adm.admissible:
        result = {"status": "inadmissible", "exit_code": EXIT_INADMISSIBLE,
                  "message": "; ".join(adm.failures())}
        _write_summary(out / SUMMARY_FILE, cfg, result, adm)
        print(f"inadmissible: {result['message']}", file=stderr)
        return EXIT_INADMISSIBLE

    last = {}

    def track(state, rep):
        last["state"] = state
        ledger.record(state, rep)

    run_errors = (ConvexityLost, ObliquenessLost, NewtonDiverged, SingularHessian)
    try:
        state = problem.initial_state(values)
        ledger = EstimateLedger.for_run(problem, state)
    except run_errors as exc:
        print(f"error: {_describe(exc)}", file=stderr)
        return EXIT_VIOLATION

    message = ""
    try:
        res = problem.run(state, cfl=cfg.cfl, tol_c=cfg.tol_c, t_max=cfg.t_max,
                          record_every=cfg.record_every, monitor=track)
        final, converged, c_inf, steps = res.state, res.converged, res.c_infinity, res.steps
        failed = False
    except run_errors as exc:
        message = _describe(exc)
        final = last.get("state")
        converged, steps, failed = False, -1, True
        c_inf = float(np.mean(final.udot)) if final is not None else math.nan

    try:
        ledger.write_csv(out / LEDGER_FILE)
        if final is not None:
            write_nodes(out / STATE_FILE, final.u, grid.active, grid.spacing, final.t)
    except OSError as exc:
        print(f"error: {_describe(exc)}", file=stderr)
        return EXIT_ERROR

    if failed or ledger.violations:
        status, code = "estimate_violation", EXIT_VIOLATION
        if not message:
            message = f"{len(ledger.violations)} estimate violation(s)"
    elif not converged:
        status, code = "not_converged", EXIT_NOT_CONVERGED
        message = f"osc(udot) still >= tol_c at t={final.t!r}"
    else:
        status, code = "ok", EXIT_OK
    result = {"status": status, "exit_code": code, "c_infinity": c_inf, "converged": converged,
              "steps": steps, "t_final": final.t if final is not None else math.nan,
              "c2_constant": ledger.c2_constant, "message": message}
    _write_summary(out / SUMMARY_FILE, cfg, result, adm, ledger.violations)
    print(f"c_infinity = {c_inf!r}", file=stdout)
    print(f"converged = {converged}  status = {status}", file=stdout)
    if message:
        print(message, file=stderr)
    return code


# --------------------------------------------------------------------------
# argument parsing


def _pair(text):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'a,b', got {text!r}") from None
    return a, b


def _report(rows, stdout) -> int:
    print(checks.format_table(rows), file=stdout)
    return EXIT_OK if checks.all_passed(rows) else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lagflow", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--threads", type=int, default=1)

    o = sub.add_parser("check-operator", help="verify operator invariants")
    o.add_argument("--tau", type=float, required=True)
    o.add_argument("--samples", type=int, default=1000)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--n", type=int, default=2)

    d = sub.add_parser("check-domain", help="verify domain invariants")
    g = d.add_mutually_exclusive_group(required=True)
    g.add_argument("--disc", type=float, metavar="R")
    g.add_argument("--ellipse", type=_pair, metavar="A1,A2")
    d.add_argument("--center", type=_pair, default=(0.0, 0.0))
    d.add_argument("--samples", type=int, default=360)
    d.add_argument("--seed", type=int, default=0)

    lg = sub.add_parser("legendre-verify", help="verify the discrete Legendre transform")
    lg.add_argument("--field", required=True, help="quadratic:m1,m2 | quartic:eps | exp:k1,k2")
    lg.add_argument("--spacing", type=float, default=1.0 / 32)
    lg.add_argument("--tau", type=float, default=math.pi / 2)
    return p


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    if args.command == "run":
        if args.threads < 1:
            print("error: --threads must be >= 1", file=stderr)
            return EXIT_ERROR
        return run_experiment(args.config, args.threads, stdout, stderr)
    try:
        if args.command == "check-operator":
            if args.samples < 1 or args.n < 1:
                raise ValueError("--samples and --n must be >= 1")
            rows = checks.verify_operator(SpectralOperator(args.tau), args.samples, args.seed, args.n)
        elif args.command == "check-domain":
            if args.disc is not None:
                dom = ConvexDomain.disc(args.center, args.disc)
            else:
                dom = ConvexDomain.ellipse(args.center, args.ellipse)
            print(f"domain: {dom.kind.value} center={dom.center} semi_axes={dom.semi_axes}", file=stdout)
            rows = checks.verify_domain(dom, args.samples, args.seed)
        else:
            if not args.spacing > 0:
                raise ValueError("--spacing must be positive")
            rows = checks.verify_legendre(checks.ProbeField.parse(args.field), args.spacing, args.tau)
    except (LagflowError, ValueError) as exc:
        print(f"error: {_describe(exc)}", file=stderr)
        return EXIT_ERROR
    return _report(rows, stdout)


if __name__ == "__main__":
    sys.exit(main())
