"""Command line front end: ``verify``, ``solve``, ``integrate`` and ``report``.

Every command prints one JSON document (sorted keys, LF line endings) to
stdout or to ``--output``.  ``integrate`` additionally writes the diagnostics
CSV to ``--csv``.  Exit status is 0 on success, 1 when an identity fails or the
implicit solver diverges, and 2 on usage or configuration errors.

Flags mirror the fields of :class:`RunConfig`; ``--config file.json`` loads a
configuration whose entries override the flags.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .funcalg import ConfigurationError, parse
from .integrate import ConvergenceError, IntegratorConfig, csv_text, drift_report, integrate_with_tangent
from .invariance import (
    AnsatzSpec,
    default_ansatz,
    jacobi_analysis,
    solve,
    solver_report,
    verify_jacobi_scaled_numeric,
)
from .systems import SYSTEM_NAMES, build_system, run_checks
from .tensor import CANONICAL

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
COMMANDS = ("verify", "solve", "integrate", "report")


class UsageError(Exception):
    pass


def _section(cls, data, name):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise UsageError(f"{name} must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise UsageError(f"unknown keys in {name}: {', '.join(unknown)}")
    return cls(**data)


@dataclass
class MenuConfig:
    qdeg: int | None = None
    momentum_degree: int = 2
    exp_height: int | None = None
    pin12: str | None = None
    escalate: bool = True


@dataclass
class IntegrateSection:
    method: str = "stormer_verlet"
    h: float = 1e-2
    steps: int = 1000
    y0: list = field(default_factory=lambda: [0.3, -0.2, 0.4, 0.1])
    tol: float = 1e-14
    max_iter: int = 50
    cadence: int = 1


@dataclass
class OutputConfig:
    json: str | None = None
    csv: str | None = None


@dataclass
class RunConfig:
    """Complete description of one run; serializes to and from JSON."""

    command: str = "verify"
    system: str = "henon_heiles"
    params: dict = field(default_factory=dict)
    menu: MenuConfig = field(default_factory=MenuConfig)
    integrator: IntegrateSection = field(default_factory=IntegrateSection)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    numeric_jacobi: bool = False
    inputs: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise UsageError("configuration must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise UsageError(f"unknown configuration keys: {', '.join(unknown)}")
        data = dict(data)
        sections = {"menu": MenuConfig, "integrator": IntegrateSection, "outputs": OutputConfig}
        for key, sub in sections.items():
            if key in data:
                data[key] = _section(sub, data[key], key)
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.command != "report" and self.system not in SYSTEM_NAMES:
            raise UsageError(f"unknown system {self.system!r}; known: {', '.join(SYSTEM_NAMES)}")
        unknown_tol = sorted(set(self.tolerances) - {"jacobi"})
        if unknown_tol:
            raise UsageError(f"unknown tolerance keys: {', '.join(unknown_tol)}")


# ---------------------------------------------------------------------------
# Commands

def _params(cfg: RunConfig) -> dict:
    out = {}
    for k, v in cfg.params.items():
        if isinstance(v, str) and v.lower() in ("true", "false"):
            v = v.lower() == "true"
        elif isinstance(v, str):
            try:
                v = Fraction(v)
            except ValueError:
                pass
        out[k] = v
    return out


def _system(cfg: RunConfig):
    return build_system(cfg.system, _params(cfg))


def cmd_verify(cfg: RunConfig) -> tuple[dict, int]:
    s = _system(cfg)
    results = [r.as_dict() for r in run_checks(s)]
    report = {"command": "verify", "system": s.name, "checks": results}
    ok = all(r["status"] == "pass" for r in results)
    if cfg.numeric_jacobi:
        scaling = s.extras.get("scaled_poisson")
        if scaling is None:
            raise ConfigurationError(f"no scaled Jacobi check registered for {s.name}")
        exponent, partner = scaling
        rep = verify_jacobi_scaled_numeric(
            s.invariant("P_tilde"), exponent, s.hamiltonian, tol=float(cfg.tolerances.get("jacobi", 1e-9)),
            compatible_with=(CANONICAL.P, partner), seed=cfg.seed)
        report["numeric_jacobi"] = rep.as_dict()
        ok = ok and bool(rep.passed)
    report["passed"] = ok
    return report, EXIT_OK if ok else EXIT_FAIL


def _spec(cfg: RunConfig, s):
    m = cfg.menu
    pins = None
    if m.pin12 is not None:
        pins = {(0, 1): parse(m.pin12, d=s.discriminant)}
    if m.qdeg is None and m.exp_height is None and m.momentum_degree == 2:
        return default_ansatz(s, pins=pins) if pins else None
    base = default_ansatz(s, qdeg=m.qdeg, pins=pins)
    ext = s.extension
    return AnsatzSpec.from_menu(
        base.menu["qdeg"], momentum_degree=m.momentum_degree, radical=ext.radical,
        exp_generators=ext.exponentials,
        exp_height=(m.exp_height if m.exp_height is not None else base.menu["exp_height"]),
        pins=pins)


def cmd_solve(cfg: RunConfig) -> tuple[dict, int]:
    s = _system(cfg)
    spec = _spec(cfg, s)
    result = solve(s, spec, escalate=cfg.menu.escalate)
    jac = jacobi_analysis(result.basis) if result.basis.dimension else None
    report = {"command": "solve", **solver_report(result, jac)}
    ok = result.basis.verified and all(report.get("expected_span", {}).values())
    if s.expected_nullity is not None:
        report["matches_expected_nullity"] = result.basis.dimension == s.expected_nullity
    report["passed"] = ok
    return report, EXIT_OK if ok else EXIT_FAIL


def _finite(v: float):
    return v if np.isfinite(v) else str(v)


def cmd_integrate(cfg: RunConfig) -> tuple[dict, int, str]:
    s = _system(cfg)
    ic = cfg.integrator
    icfg = IntegratorConfig(method=ic.method, h=float(ic.h), steps=int(ic.steps), y0=tuple(map(float, ic.y0)),
                            tol=float(ic.tol), max_iter=int(ic.max_iter), cadence=int(ic.cadence))
    try:
        rec = integrate_with_tangent(icfg, s)
    except ConvergenceError as exc:
        return {"command": "integrate", "system": s.name, "error": str(exc),
                "iterations": [list(e) for e in exc.log]}, EXIT_FAIL, ""
    rep = drift_report(rec, s)
    body = csv_text(rec, rep, include_initial=icfg.steps > 0)
    summ = rep.summary()
    summary = {
        "command": "integrate",
        "system": s.name,
        "method": icfg.method,
        "h": icfg.h,
        "steps": icfg.steps,
        "y0": list(icfg.y0),
        "samples": summ["samples"],
        "max_energy_drift": _finite(summ["max_energy_drift"]),
        "max_canonical_defect": _finite(summ["max_canonical_defect"]),
        "max_det_deviation": _finite(summ["max_det_deviation"]),
        "max_form_defects": {k: _finite(v) for k, v in summ["max_form_defects"].items()},
        "max_integral_drifts": {k: _finite(v) for k, v in summ["max_integral_drifts"].items()},
        "final_tangent_norm": _finite(float(np.max(np.abs(rec.tangents[-1])))),
        "events": summ["events"],
        "truncated": rec.truncated,
    }
    return summary, EXIT_OK, body


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, (int, float, str, bool)) or v is None:
            out[key] = v
    return out


def cmd_report(cfg: RunConfig) -> tuple[dict, int]:
    """Merge summary JSON files into one comparison table."""
    if not cfg.inputs:
        raise UsageError("report needs at least one input file")
    rows = []
    for path in cfg.inputs:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read {path}: {exc}") from exc
        rows.append({"source": str(path), **_flatten(data)})
    columns = ["source"] + sorted({k for r in rows for k in r} - {"source"})
    table = [[r.get(c) for c in columns] for r in rows]
    return {"command": "report", "columns": columns, "rows": table}, EXIT_OK


# ---------------------------------------------------------------------------
# Argument handling

PARAM_FLAGS = ("a", "b", "kappa", "alpha", "beta", "c1", "c2", "harmonic")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tensorinv", description="Tensor invariants of Hamiltonian flows.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON configuration; its entries override flags")
        p.add_argument("--output", help="write the JSON report here instead of stdout")
        if name == "report":
            p.add_argument("inputs", nargs="*", help="summary JSON files")
            continue
        p.add_argument("--system", default=None, help=f"one of: {', '.join(SYSTEM_NAMES)}")
        for flag in PARAM_FLAGS:
            p.add_argument(f"--{flag}", default=None, help="exact rational, e.g. 1/3")
        p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
        p.add_argument("--periodic", action="store_true")
        p.add_argument("--seed", type=int, default=None)
        if name == "verify":
            p.add_argument("--numeric-jacobi", action="store_true")
            p.add_argument("--jacobi-tol", type=float, default=None)
        if name == "solve":
            p.add_argument("--qdeg", type=int, default=None)
            p.add_argument("--momentum-degree", type=int, default=None)
            p.add_argument("--exp-height", type=int, default=None)
            p.add_argument("--pin12", default=None, help='fix the 12 component, e.g. "2*(q2*p1-q1*p2)"')
            p.add_argument("--no-escalate", action="store_true")
        if name == "integrate":
            p.add_argument("--method", default=None)
            p.add_argument("--h", type=float, default=None)
            p.add_argument("--steps", type=int, default=None)
            p.add_argument("--y0", type=float, nargs=4, default=None)
            p.add_argument("--tol", type=float, default=None)
            p.add_argument("--max-iter", type=int, default=None)
            p.add_argument("--cadence", type=int, default=None)
            p.add_argument("--csv", default=None)
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=ns.command)
    if ns.command == "report":
        cfg.inputs = list(ns.inputs)
    else:
        if ns.system is not None:
            cfg.system = ns.system
        for flag in PARAM_FLAGS:
            v = getattr(ns, flag)
            if v is not None:
                cfg.params[flag] = v
        for item in ns.param:
            if "=" not in item:
                raise UsageError(f"--param expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            cfg.params[k] = v
        if ns.periodic:
            cfg.params["periodic"] = "true"
        if ns.seed is not None:
            cfg.seed = ns.seed
    if ns.command == "verify":
        cfg.numeric_jacobi = ns.numeric_jacobi
        if ns.jacobi_tol is not None:
            cfg.tolerances["jacobi"] = ns.jacobi_tol
    if ns.command == "solve":
        m = cfg.menu
        m.qdeg = ns.qdeg
        if ns.momentum_degree is not None:
            m.momentum_degree = ns.momentum_degree
        m.exp_height = ns.exp_height
        m.pin12 = ns.pin12
        m.escalate = not ns.no_escalate
    if ns.command == "integrate":
        ic = cfg.integrator
        for name in ("method", "h", "steps", "tol", "max_iter", "cadence"):
            v = getattr(ns, name)
            if v is not None:
                setattr(ic, name, v)
        if ns.y0 is not None:
            ic.y0 = list(ns.y0)
        cfg.outputs.csv = ns.csv
    cfg.outputs.json = ns.output
    if ns.config:
        try:
            text = Path(ns.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        data = json.loads(text) if text.strip() else {}
        merged = _merge(cfg.to_dict(), data)
        merged["command"] = ns.command
        cfg = RunConfig.from_dict(merged)
    cfg.validate()
    return cfg


def _merge(base: dict, over: dict) -> dict:
    if not isinstance(over, dict):
        raise UsageError("configuration must be a JSON object")
    out = dict(base)
    for k, v in over.items():
        if k not in base:
            raise UsageError(f"unknown configuration key: {k}")
        if isinstance(base[k], dict) and isinstance(v, dict) and k != "params" and k != "tolerances":
            out[k] = _merge(base[k], v)
        else:
            out[k] = v
    return out


def _write(path: str | None, text: str, stream) -> None:
    if path is None:
        stream.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def run(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    if cfg.command == "verify":
        report, code = cmd_verify(cfg)
    elif cfg.command == "solve":
        report, code = cmd_solve(cfg)
    elif cfg.command == "integrate":
        report, code, body = cmd_integrate(cfg)
        if cfg.outputs.csv and code == EXIT_OK:
            _write(cfg.outputs.csv, body, stdout)
    else:
        report, code = cmd_report(cfg)
    _write(cfg.outputs.json, json.dumps(report, sort_keys=True, indent=2) + "\n", stdout)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = config_from_args(ns)
        return run(cfg)
    except (UsageError, ConfigurationError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
