import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tensorinv.funcalg import ConfigurationError, q1
from tensorinv.integrate import (
    J_OMEGA,
    METHODS,
    ConvergenceError,
    IntegratorConfig,
    NumericSystem,
    canonical_defect,
    csv_columns,
    csv_text,
    drift_report,
    fd_lie_check,
    integrate_with_tangent,
    pullback_defect,
    reference_flow,
    step,
)
from tensorinv.systems import build_system
from tensorinv.tensor import CANONICAL, canonical_form

REGULAR_Y0 = (0.2, 0.0, 0.0, 0.35)
CHAOTIC_Y0 = (0.3, -0.2, 0.4, 0.1)


@pytest.fixture(scope="module")
def hh():
    return NumericSystem(build_system("henon_heiles", {"a": 1, "b": 1}))


@pytest.fixture(scope="module")
def hh_harmonic():
    return NumericSystem(build_system("henon_heiles", {"a": 1, "b": Fraction(-1, 3), "harmonic": 1}))


@pytest.fixture(scope="module")
def kepler():
    return NumericSystem(build_system("kepler", {"kappa": 1}))


# ---------------------------------------------------------------------------
# Configuration

@pytest.mark.parametrize("kwargs", [
    {"method": "euler"}, {"h": 0.0}, {"h": math.nan}, {"steps": -1}, {"cadence": 0},
    {"tol": 0.0}, {"y0": (1.0, 2.0)},
])
def test_bad_configuration(kwargs):
    with pytest.raises(ConfigurationError):
        IntegratorConfig(**kwargs)


def test_registered_systems_are_separable():
    s = build_system("weight_homogeneous", {"alpha": 1, "f_coeffs": (1, 0, 0, 0, 1)})
    assert NumericSystem(s).separable and NumericSystem(build_system("g2_toda")).separable


# ---------------------------------------------------------------------------
# Single steps

def test_free_particle_verlet_is_exact():
    s = NumericSystem(build_system("free_motion"))
    y = np.array([0.3, -1.0, 2.0, 0.5])
    out = step("stormer_verlet", s, y, 0.25)
    np.testing.assert_allclose(out, [0.3 + 0.5, -1.0 + 0.125, 2.0, 0.5], rtol=0, atol=1e-15)


@pytest.mark.parametrize("method,order", [("stormer_verlet", 2), ("implicit_midpoint", 2), ("rk4", 4)])
def test_local_error_order(hh, method, order):
    y0 = (1.0, 1.0, 0.0, 0.0)
    errs = []
    for h in (0.02, 0.01):
        ref, _ = reference_flow(hh, y0, h, dt=h / 200)
        errs.append(np.max(np.abs(step(method, hh, y0, h) - ref)))
    assert errs[0] / errs[1] == pytest.approx(2 ** (order + 1), rel=0.15)


@pytest.mark.parametrize("method", ["stormer_verlet", "implicit_midpoint"])
def test_symmetric_methods_reverse(hh, method):
    y0 = np.array([0.3, -0.2, 0.4, 0.1])
    back = step(method, hh, step(method, hh, y0, 0.05), -0.05)
    np.testing.assert_allclose(back, y0, atol=1e-14)


def test_rk4_is_not_symmetric(hh):
    y0 = np.array([1.0, 1.0, 0.0, 0.0])
    back = step("rk4", hh, step("rk4", hh, y0, 0.05), -0.05)
    assert np.max(np.abs(back - y0)) > 1e-12


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-0.5, 0.5), min_size=4, max_size=4), st.sampled_from(METHODS))
def test_single_step_tangent_matches_finite_difference(y, method):
    s = NumericSystem(build_system("henon_heiles"))
    cfg = IntegratorConfig(method=method, h=0.05, steps=1, y0=tuple(y))
    J = integrate_with_tangent(cfg, s).tangents[-1]
    eps = 1e-6
    fd = np.empty((4, 4))
    for j in range(4):
        e = np.zeros(4)
        e[j] = eps
        fd[:, j] = (step(method, s, np.array(y) + e, 0.05) - step(method, s, np.array(y) - e, 0.05)) / (2 * eps)
    np.testing.assert_allclose(J, fd, atol=1e-7)


# ---------------------------------------------------------------------------
# Trajectories

def test_zero_steps(hh):
    rec = integrate_with_tangent(IntegratorConfig(steps=0, y0=CHAOTIC_Y0), hh)
    assert len(rec.steps) == 1
    np.testing.assert_array_equal(rec.tangents[0], np.eye(4))
    rep = drift_report(rec, hh.system)
    assert rep.energy_drift[0] == 0.0 and rep.canonical_defect[0] == 0.0
    text = csv_text(rec, rep, include_initial=False)
    assert text == ",".join(csv_columns(rep)) + "\n"


def test_cadence_sampling(hh):
    rec = integrate_with_tangent(IntegratorConfig(steps=25, cadence=10, y0=CHAOTIC_Y0), hh)
    assert list(rec.steps) == [0, 10, 20, 25]
    np.testing.assert_allclose(rec.times, [0.0, 0.1, 0.2, 0.25])


def test_kepler_circular_period(kepler):
    n = 6284
    cfg = IntegratorConfig(method="stormer_verlet", h=2 * math.pi / n, steps=n, y0=(1.0, 0.0, 0.0, 1.0))
    rec = integrate_with_tangent(cfg, kepler)
    assert np.linalg.norm(rec.states[-1] - rec.states[0]) <= 1e-5


def test_kepler_collision_truncates(kepler):
    cfg = IntegratorConfig(method="stormer_verlet", h=1e-2, steps=500, y0=(1.0, 0.0, 0.0, 0.0), min_radius=0.05)
    rec = integrate_with_tangent(cfg, kepler)
    assert rec.truncated
    (ev,) = rec.events
    assert ev["kind"] == "singularity" and ev["step"] < 500
    assert drift_report(rec, kepler.system).events == rec.events


def test_implicit_midpoint_convergence_failure(kepler):
    cfg = IntegratorConfig(method="implicit_midpoint", h=2.0, steps=5, y0=(1.0, 0.0, 0.0, 1.4), max_iter=1)
    with pytest.raises(ConvergenceError) as info:
        integrate_with_tangent(cfg, kepler)
    assert info.value.log


def test_pullback_of_canonical_form_equals_defect(hh_harmonic):
    rec = integrate_with_tangent(IntegratorConfig(method="rk4", h=0.05, steps=200, y0=CHAOTIC_Y0), hh_harmonic)
    series = pullback_defect(rec, canonical_form())
    np.testing.assert_allclose(series, [canonical_defect(J) for J in rec.tangents], rtol=0, atol=1e-15)
    assert np.allclose(J_OMEGA, -J_OMEGA.T)


def test_omega_tilde_pullback_converges_second_order(hh):
    defects = []
    for h in (1e-2, 5e-3, 2.5e-3):
        rec = integrate_with_tangent(IntegratorConfig(h=h, steps=round(1 / h), y0=CHAOTIC_Y0), hh)
        defects.append(drift_report(rec, hh.system).form_defects["omega_tilde"][-1])
    assert defects[0] / defects[1] == pytest.approx(4, rel=0.1)
    assert defects[1] / defects[2] == pytest.approx(4, rel=0.1)


def test_omega_tilde_under_coarse_verlet_is_reported(hh):
    # measured, not asserted conserved; the window ends before this cubic orbit escapes
    rec = integrate_with_tangent(IntegratorConfig(h=0.05, steps=100, y0=(0.1, -0.1, 0.1, 0.05)), hh)
    series = drift_report(rec, hh.system).form_defects["omega_tilde"]
    assert np.all(np.isfinite(series))
    assert 1e-8 < series.max() < 1e-3


def test_free_motion_energy_exact():
    s = NumericSystem(build_system("free_motion"))
    rec = integrate_with_tangent(IntegratorConfig(h=0.1, steps=100, y0=(0.0, 1.0, 0.3, -0.7)), s)
    assert drift_report(rec, s.system).energy_drift.max() <= 1e-15


@pytest.mark.parametrize("method", ["stormer_verlet", "implicit_midpoint"])
def test_symplectic_on_regular_orbit(hh_harmonic, method):
    rec = integrate_with_tangent(IntegratorConfig(method=method, h=1e-2, steps=20000, y0=REGULAR_Y0,
                                                  cadence=100), hh_harmonic)
    rep = drift_report(rec, hh_harmonic.system)
    assert rep.canonical_defect.max() <= 1e-10
    assert rep.det_deviation.max() <= 1e-10


def test_rk4_canonical_defect_grows_on_regular_orbit(hh_harmonic):
    rec = integrate_with_tangent(IntegratorConfig(method="rk4", h=1e-2, steps=100000, y0=REGULAR_Y0,
                                                  cadence=1000), hh_harmonic)
    assert drift_report(rec, hh_harmonic.system).canonical_defect[-1] > 1e-8


@pytest.fixture(scope="module")
def chaotic_runs(hh_harmonic):
    out = {}
    for method in ("stormer_verlet", "rk4"):
        cfg = IntegratorConfig(method=method, h=1e-2, steps=100000, y0=CHAOTIC_Y0, cadence=100)
        rec = integrate_with_tangent(cfg, hh_harmonic)
        out[method] = (rec, drift_report(rec, hh_harmonic.system))
    return out


def test_chaotic_verlet_defect_is_roundoff_relative_to_tangent(chaotic_runs):
    rec, rep = chaotic_runs["stormer_verlet"]
    norms = np.array([np.linalg.norm(J, 2) for J in rec.tangents])
    assert np.max(rep.canonical_defect / norms ** 2) <= 1e-12
    # the tangent map itself grows exponentially on this orbit
    assert norms[-1] > 1e20


def test_chaotic_verlet_energy_bounded(chaotic_runs):
    _, rep = chaotic_runs["stormer_verlet"]
    early = rep.energy_drift[: len(rep.energy_drift) // 100 + 1].max()
    assert rep.energy_drift.max() <= 10 * early


def test_chaotic_rk4_energy_exceeds_verlet(chaotic_runs):
    # measured: rk4 stays near 5e-10, below the Verlet oscillation of about 3e-6
    _, sv = chaotic_runs["stormer_verlet"]
    _, rk = chaotic_runs["rk4"]
    assert rk.energy_drift.max() > sv.energy_drift.max()


def test_kepler_integral_drifts(kepler):
    cfg = IntegratorConfig(h=1e-2, steps=10000, y0=(1.0, 0.0, 0.0, 1.2), cadence=100)
    rep = drift_report(integrate_with_tangent(cfg, kepler), kepler.system)
    assert rep.integral_drifts["K3"].max() <= 1e-12
    assert 1e-6 < rep.integral_drifts["K1"].max() <= 1e-2


def test_summary_and_csv_layout(kepler):
    cfg = IntegratorConfig(h=1e-2, steps=30, y0=(1.0, 0.0, 0.0, 1.2), cadence=10)
    rec = integrate_with_tangent(cfg, kepler)
    rep = drift_report(rec, kepler.system)
    assert csv_columns(rep) == ["step", "t", "y1", "y2", "y3", "y4", "energy_drift", "canonical_defect",
                                "integral_K1", "integral_K2", "integral_K3"]
    lines = csv_text(rec, rep).splitlines()
    assert len(lines) == 1 + 4
    assert lines[1].startswith("0,0.0,1.0,0.0,0.0,1.2")
    summary = rep.summary()
    assert summary["samples"] == 4 and set(summary["max_integral_drifts"]) == {"K1", "K2", "K3"}


def test_runs_are_deterministic(hh_harmonic):
    cfg = IntegratorConfig(method="implicit_midpoint", h=0.05, steps=100, y0=CHAOTIC_Y0, cadence=10)
    a = integrate_with_tangent(cfg, hh_harmonic)
    b = integrate_with_tangent(cfg, hh_harmonic)
    ra, rb = drift_report(a, hh_harmonic.system), drift_report(b, hh_harmonic.system)
    assert csv_text(a, ra) == csv_text(b, rb)


# ---------------------------------------------------------------------------
# Finite-difference Lie derivative

def test_reference_flow_reverses(hh):
    y, J = reference_flow(hh, CHAOTIC_Y0, 0.3, dt=1e-3)
    back, Jb = reference_flow(hh, y, -0.3, dt=1e-3)
    np.testing.assert_allclose(back, CHAOTIC_Y0, atol=1e-12)
    np.testing.assert_allclose(Jb @ J, np.eye(4), atol=1e-10)


def test_fd_lie_of_non_invariant_bivector_converges(hh):
    rng = np.random.default_rng(0)
    pts = rng.uniform(-0.5, 0.5, size=(3, 4))
    table = fd_lie_check(hh, CANONICAL.P * q1(), pts, [0.1, 0.05, 0.025])
    assert all(v > 1e-3 for v in table.residual)
    limit = table.residual[-1]
    dev = [abs(v - limit) for v in table.residual[:2]]
    assert dev[0] / dev[1] == pytest.approx(5, rel=0.2)  # (h1^2 - h3^2)/(h2^2 - h3^2)


def test_fd_lie_of_invariants_is_small(hh):
    pts = [(0.1, -0.2, 0.3, 0.05)]
    table = fd_lie_check(hh, hh.system.invariant("P_tilde"), pts, [0.1, 0.05])
    assert max(table.residual) <= 1e-10
    assert fd_lie_check(hh, hh.system.hamiltonian, pts, [0.1]).residual[0] <= 1e-10
    assert set(table.as_dict()) == {"h", "residual", "ratios"}
