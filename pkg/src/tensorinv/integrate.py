"""Fixed-step integrators with tangent maps and structure diagnostics.

Forces, Hessians and vector-field Jacobians are obtained by exact symbolic
differentiation and compiled to plain Python callables, so nothing here is
hand-differentiated.

Methods
-------
``stormer_verlet``
    Kick-drift-kick for ``H = |p|^2/2 + V(q)``.  The tangent update is the
    exact Jacobian of the discrete map.
``implicit_midpoint``
    ``y1 = y0 + h f((y0 + y1)/2)``, solved by fixed-point iteration (at most
    10 sweeps) and then Newton with the exact Jacobian.
``rk4``
    Classical Runge-Kutta applied to the state and the variational equation
    ``J' = Df(y) J``.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .funcalg import ConfigurationError, GeneralizedFunction, SingularityError, compile_functions
from .systems import SystemDef, kinetic
from .tensor import CANONICAL, DIM, TensorField

METHODS = ("stormer_verlet", "implicit_midpoint", "rk4")
J_OMEGA = np.array([[0, 0, -1, 0], [0, 0, 0, -1], [1, 0, 0, 0], [0, 1, 0, 0]], dtype=float)


class ConvergenceError(RuntimeError):
    """The implicit midpoint solver did not converge; ``log`` holds the residual history."""

    def __init__(self, message: str, log: list):
        super().__init__(message)
        self.log = log


@dataclass
class IntegratorConfig:
    method: str = "stormer_verlet"
    h: float = 1e-2
    steps: int = 1000
    y0: Sequence[float] = (0.0, 0.0, 0.0, 0.0)
    tol: float = 1e-14
    max_iter: int = 50
    cadence: int = 1
    min_radius: float = 1e-6

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ConfigurationError("step h must be positive and finite")
        if self.steps < 0 or self.cadence < 1:
            raise ConfigurationError("steps must be >= 0 and cadence >= 1")
        if not self.tol > 0:
            raise ConfigurationError("tolerance must be positive")
        if len(self.y0) != DIM:
            raise ConfigurationError("initial state needs four components")


@dataclass
class TrajectoryRecord:
    steps: np.ndarray
    times: np.ndarray
    states: np.ndarray           # (n, 4)
    tangents: np.ndarray         # (n, 4, 4)
    duration: float
    method: str
    h: float
    events: list = field(default_factory=list)

    @property
    def truncated(self) -> bool:
        return any(e.get("kind") == "singularity" for e in self.events)


@dataclass
class DriftReport:
    steps: np.ndarray
    times: np.ndarray
    energy_drift: np.ndarray
    canonical_defect: np.ndarray
    form_defects: dict
    integral_drifts: dict
    det_deviation: np.ndarray
    events: list

    def summary(self) -> dict:
        def mx(a):
            return float(np.max(a)) if len(a) else 0.0
        return {
            "samples": int(len(self.steps)),
            "max_energy_drift": mx(self.energy_drift),
            "max_canonical_defect": mx(self.canonical_defect),
            "max_det_deviation": mx(self.det_deviation),
            "max_form_defects": {k: mx(v) for k, v in self.form_defects.items()},
            "max_integral_drifts": {k: mx(v) for k, v in self.integral_drifts.items()},
            "events": self.events,
        }


# ---------------------------------------------------------------------------
# Compiled system

class NumericSystem:
    """Compiled numeric views of a :class:`SystemDef`."""

    def __init__(self, s: SystemDef):
        self.system = s
        H = s.hamiltonian
        V = H - kinetic()
        self.separable = all(k.p1 == 0 and k.p2 == 0 for k in V.terms)
        self.singular = s.extension.radical
        self._H = compile_functions([H])
        X = [s.vector_field[i] for i in range(DIM)]
        self._f = compile_functions(X)
        self._Df = compile_functions([X[i].derive(j) for i in range(DIM) for j in range(DIM)])
        if self.separable:
            g = [V.derive(0), V.derive(1)]
            self._grad = compile_functions(g)
            self._hess = compile_functions([g[0].derive(0), g[0].derive(1), g[1].derive(0), g[1].derive(1)])

    def _guard(self, q1, q2, min_radius):
        if self.singular and math.hypot(q1, q2) < min_radius:
            raise SingularityError(f"radius {math.hypot(q1, q2):.3e} below {min_radius:g}")

    def H(self, y) -> float:
        return self._H(*y)[0]

    def f(self, y) -> np.ndarray:
        return np.array(self._f(*y), dtype=float)

    def Df(self, y) -> np.ndarray:
        return np.array(self._Df(*y), dtype=float).reshape(DIM, DIM)

    def grad(self, q1, q2) -> tuple:
        return self._grad(q1, q2, 0.0, 0.0)

    def hess(self, q1, q2) -> np.ndarray:
        return np.array(self._hess(q1, q2, 0.0, 0.0), dtype=float).reshape(2, 2)


# ---------------------------------------------------------------------------
# Steps

def _sv(ns: NumericSystem, y, h, J, cfg):
    q1, q2, p1, p2 = y
    ns._guard(q1, q2, cfg.min_radius)
    g1, g2 = ns.grad(q1, q2)
    ph1, ph2 = p1 - 0.5 * h * g1, p2 - 0.5 * h * g2
    n1, n2 = q1 + h * ph1, q2 + h * ph2
    ns._guard(n1, n2, cfg.min_radius)
    k1, k2 = ns.grad(n1, n2)
    out = np.array([n1, n2, ph1 - 0.5 * h * k1, ph2 - 0.5 * h * k2])
    if J is None:
        return out, None
    A0 = ns.hess(q1, q2)
    A1 = ns.hess(n1, n2)
    dq, dp = J[:2], J[2:]
    dph = dp - 0.5 * h * (A0 @ dq)
    dqn = dq + h * dph
    dpn = dph - 0.5 * h * (A1 @ dqn)
    return out, np.vstack([dqn, dpn])


def _midpoint(ns: NumericSystem, y, h, J, cfg):
    y = np.asarray(y, float)
    ns._guard(y[0], y[1], cfg.min_radius)
    z = y + h * ns.f(y)
    log = []
    scale = max(1.0, float(np.max(np.abs(y))))
    converged = False
    for it in range(min(10, cfg.max_iter)):
        znew = y + h * ns.f(0.5 * (y + z))
        inc = float(np.max(np.abs(znew - z)))
        log.append(("fixed_point", it, inc))
        z = znew
        if inc <= cfg.tol * scale:
            converged = True
            break
    if not converged:
        best = math.inf
        for it in range(cfg.max_iter):
            m = 0.5 * (y + z)
            G = z - y - h * ns.f(m)
            DG = np.eye(DIM) - 0.5 * h * ns.Df(m)
            dz = np.linalg.solve(DG, -G)
            z = z + dz
            inc = float(np.max(np.abs(dz)))
            log.append(("newton", it, inc))
            if not math.isfinite(inc):
                break
            if inc <= cfg.tol * scale:
                converged = True
                break
            # roundoff floor: the increment stopped shrinking at machine precision
            if inc <= 64 * np.finfo(float).eps * scale and inc >= best:
                converged = True
                break
            best = min(best, inc)
    if not converged:
        raise ConvergenceError("implicit midpoint did not converge", log)
    ns._guard(z[0], z[1], cfg.min_radius)
    if J is None:
        return z, None
    A = 0.5 * h * ns.Df(0.5 * (y + z))
    M = np.linalg.solve(np.eye(DIM) - A, np.eye(DIM) + A)
    return z, M @ J


def _rk4(ns: NumericSystem, y, h, J, cfg):
    y = np.asarray(y, float)

    def F(yy, JJ):
        ns._guard(yy[0], yy[1], cfg.min_radius)
        fy = ns.f(yy)
        return fy, (ns.Df(yy) @ JJ if JJ is not None else None)

    k1, K1 = F(y, J)
    k2, K2 = F(y + 0.5 * h * k1, None if J is None else J + 0.5 * h * K1)
    k3, K3 = F(y + 0.5 * h * k2, None if J is None else J + 0.5 * h * K2)
    k4, K4 = F(y + h * k3, None if J is None else J + h * K3)
    yn = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    Jn = None if J is None else J + (h / 6) * (K1 + 2 * K2 + 2 * K3 + K4)
    return yn, Jn


_STEPPERS = {"stormer_verlet": _sv, "implicit_midpoint": _midpoint, "rk4": _rk4}


def _numeric(s) -> NumericSystem:
    return s if isinstance(s, NumericSystem) else NumericSystem(s)


def step(method: str, s, y, h: float, cfg: IntegratorConfig | None = None) -> np.ndarray:
    """One step of ``method`` from state ``y``; raises SingularityError near collisions."""
    ns = _numeric(s)
    if method == "stormer_verlet" and not ns.separable:
        raise ConfigurationError("Stormer-Verlet needs a separable Hamiltonian")
    cfg = cfg or IntegratorConfig(method=method, h=abs(h) or 1.0, y0=tuple(y))
    y_out, _ = _STEPPERS[method](ns, np.asarray(y, float), h, None, cfg)
    return y_out


def integrate_with_tangent(cfg: IntegratorConfig, s) -> TrajectoryRecord:
    """Trajectory and tangent maps sampled every ``cfg.cadence`` steps (and at the end)."""
    ns = _numeric(s)
    if cfg.method == "stormer_verlet" and not ns.separable:
        raise ConfigurationError("Stormer-Verlet needs a separable Hamiltonian")
    stepper = _STEPPERS[cfg.method]
    y = np.asarray(cfg.y0, float)
    J = np.eye(DIM)
    steps, states, tangents = [0], [y.copy()], [J.copy()]
    events = []
    t0 = time.perf_counter()
    for n in range(1, cfg.steps + 1):
        try:
            y, J = stepper(ns, y, cfg.h, J, cfg)
        except SingularityError as exc:
            events.append({"kind": "singularity", "step": n, "t": n * cfg.h, "message": str(exc)})
            break
        if n % cfg.cadence == 0 or n == cfg.steps:
            steps.append(n)
            states.append(y.copy())
            tangents.append(J.copy())
    duration = time.perf_counter() - t0
    steps = np.array(steps, dtype=int)
    return TrajectoryRecord(steps, steps * cfg.h, np.array(states), np.array(tangents), duration,
                            cfg.method, cfg.h, events)


# ---------------------------------------------------------------------------
# Diagnostics

def canonical_defect(J: np.ndarray) -> float:
    return float(np.max(np.abs(J.T @ J_OMEGA @ J - J_OMEGA)))


def form_matrix_function(W: TensorField):
    """Numeric ``x -> W(x)`` for a 2-form."""
    funcs = [W[i, j] for i in range(DIM) for j in range(DIM)]
    f = compile_functions(funcs)
    return lambda x: np.array(f(*x), dtype=float).reshape(DIM, DIM)


def pullback_defect(rec: TrajectoryRecord, W: TensorField) -> np.ndarray:
    """``max |J_n^T W(y_n) J_n - W(y_0)|`` per sample."""
    Wf = form_matrix_function(W)
    W0 = Wf(rec.states[0])
    out = np.empty(len(rec.steps))
    for n, (y, J) in enumerate(zip(rec.states, rec.tangents)):
        out[n] = float(np.max(np.abs(J.T @ Wf(y) @ J - W0)))
    return out


def integral_drift(rec: TrajectoryRecord, F: Mapping[str, GeneralizedFunction] | Sequence) -> dict:
    """``|F(y_n) - F(y_0)|`` series for each function."""
    if not isinstance(F, Mapping):
        F = {f"F{i}": f for i, f in enumerate(F)}
    names = list(F)
    fn = compile_functions([F[k] for k in names])
    vals = np.array([fn(*y) for y in rec.states], dtype=float).reshape(len(rec.states), len(names))
    return {k: np.abs(vals[:, i] - vals[0, i]) for i, k in enumerate(names)}


def drift_report(rec: TrajectoryRecord, s: SystemDef, forms: Mapping | None = None,
                 integrals: Mapping | None = None) -> DriftReport:
    forms = s.invariant_forms if forms is None else forms
    integrals = s.first_integrals if integrals is None else integrals
    energy = integral_drift(rec, {"H": s.hamiltonian})["H"]
    canon = np.array([canonical_defect(J) for J in rec.tangents])
    det = np.array([abs(np.linalg.det(J) - 1.0) for J in rec.tangents])
    fd = {name: pullback_defect(rec, W) for name, W in forms.items()}
    idr = integral_drift(rec, integrals) if integrals else {}
    return DriftReport(rec.steps, rec.times, energy, canon, fd, idr, det, list(rec.events))


def csv_columns(report: DriftReport) -> list[str]:
    """Fixed order: step, t, y1..y4, energy_drift, canonical_defect, forms, integrals."""
    return (["step", "t", "y1", "y2", "y3", "y4", "energy_drift", "canonical_defect"]
            + [f"form_{k}" for k in report.form_defects] + [f"integral_{k}" for k in report.integral_drifts])


def write_csv(rec: TrajectoryRecord, report: DriftReport, stream, include_initial: bool = True) -> None:
    """One row per diagnostic sample.  With ``cfg.steps = 0`` only the header is written
    when ``include_initial`` is False."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(csv_columns(report))
    start = 0 if include_initial else 1
    for n in range(start, len(rec.steps)):
        row = [int(rec.steps[n]), repr(float(rec.times[n]))]
        row += [repr(float(v)) for v in rec.states[n]]
        row += [repr(float(report.energy_drift[n])), repr(float(report.canonical_defect[n]))]
        row += [repr(float(v[n])) for v in report.form_defects.values()]
        row += [repr(float(v[n])) for v in report.integral_drifts.values()]
        w.writerow(row)


def csv_text(rec: TrajectoryRecord, report: DriftReport, include_initial: bool = True) -> str:
    buf = io.StringIO()
    write_csv(rec, report, buf, include_initial)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Finite-difference Lie derivative check

def reference_flow(s, y0, t: float, dt: float = 1e-3, min_radius: float = 1e-6):
    """State and tangent map of the time-``t`` flow by small-step RK4 (t may be negative)."""
    ns = _numeric(s)
    n = max(1, int(math.ceil(abs(t) / dt)))
    h = t / n
    cfg = IntegratorConfig(method="rk4", h=abs(h) or 1.0, y0=tuple(y0), min_radius=min_radius)
    y, J = np.asarray(y0, float), np.eye(DIM)
    for _ in range(n):
        y, J = _rk4(ns, y, h, J, cfg)
    return y, J


def _tensor_evaluator(T):
    if isinstance(T, GeneralizedFunction):
        f = compile_functions([T])
        return (0, 0), lambda x: np.array(f(*x)[0])
    idxs = list(T.indices())
    f = compile_functions([T[i] for i in idxs])
    shape = (DIM,) * T.order
    return T.type, lambda x: np.array(f(*x), dtype=float).reshape(shape)


def _pullback(kind, Tx, J):
    if kind == (0, 0):
        return Tx
    if kind == (1, 0):
        return np.linalg.solve(J, Tx)
    if kind == (0, 1):
        return J.T @ Tx
    if kind == (2, 0):
        Ji = np.linalg.inv(J)
        return Ji @ Tx @ Ji.T
    if kind == (0, 2):
        return J.T @ Tx @ J
    raise ConfigurationError(f"pullback of type {kind} not supported")


@dataclass
class FDLieTable:
    h: list
    residual: list

    @property
    def ratios(self) -> list:
        return [a / b if b else math.inf for a, b in zip(self.residual, self.residual[1:])]

    def as_dict(self) -> dict:
        return {"h": self.h, "residual": self.residual, "ratios": self.ratios}


def fd_lie_check(s, T, points: Sequence, h_list: Sequence[float], dt: float | None = None) -> FDLieTable:
    """Central difference ``(Phi_h^* T - Phi_{-h}^* T)/(2h)`` at each point, max over points."""
    ns = _numeric(s)
    kind, Tf = _tensor_evaluator(T)
    res = []
    for h in h_list:
        sub = dt if dt is not None else h / 50
        worst = 0.0
        for x in points:
            yp, Jp = reference_flow(ns, x, h, sub)
            ym, Jm = reference_flow(ns, x, -h, sub)
            d = (_pullback(kind, Tf(yp), Jp) - _pullback(kind, Tf(ym), Jm)) / (2 * h)
            worst = max(worst, float(np.max(np.abs(d))))
        res.append(worst)
    return FDLieTable(list(h_list), res)
