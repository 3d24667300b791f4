"""Acceptance gate: every criterion at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS/FAIL line
per criterion.
"""

import csv
import math
import time

import numpy as np
import pytest

from eplab import (MassProfile, ScenarioConfig, SigmaTrajectory, SpatialGrid,
                   TauFunction, TimeGrid, coefficients_from_sigma,
                   electric_field, exponential_scenario, GaussianSpec,
                   integrate_coefficient_system, integrate_complex_split,
                   integrate_modified_ep, pinney_closed_form,
                   pinney_coefficients_from_initial, pinney_lambda_squared,
                   ep_residual, run_refinement_study, sigma_consistent_init,
                   tau_ode_residual)
from eplab.cli import main
from eplab.ep_solver import SolverMeta

DUMMY_META = SolverMeta("rk4_fixed", 1e-3, None, None, 0, 0)

M0 = 1.0
TAU0 = 0.01
CANONICAL_OMEGA = math.sqrt(0.05)  # q = 0.4


def report(number: int, name: str, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    print(f"[criterion {number}] {status} {name}: {detail}")
    assert ok, f"criterion {number} ({name}): {detail}"


def test_criterion_1_exponential_closed_form():
    worst_err, worst_time = 0.0, 0.0
    for omega in (0.3, 0.5, 0.7, 0.9):
        scenario = exponential_scenario(M0, omega, TAU0)
        grid = TimeGrid(0.0, 20.0, abs_tol=1e-12, rel_tol=1e-12, samples=2001)
        cfg = scenario.scenario_config(grid)
        started = time.perf_counter()
        traj = integrate_modified_ep(cfg)
        elapsed = time.perf_counter() - started
        ref = np.exp(0.5 * scenario.q * traj.t)
        err = float(np.max(np.abs(traj.sigma - ref) / ref))
        worst_err = max(worst_err, err)
        worst_time = max(worst_time, elapsed)
    ok = worst_err < 1e-6 and worst_time < 1.0
    report(1, "exponential closed form", ok,
           f"max rel err {worst_err:.3e} (< 1e-06), slowest case {worst_time:.2f}s (< 1s)")


def test_criterion_2_constant_mass_reduction():
    triples = ((1.0, 0.0, 1.0), (4.0, 0.0, 1.0), (2.0, 0.5, 1.0))
    omega = 1.0
    worst_match, worst_residual = 0.0, 0.0
    for A, B, C in triples:
        lam2 = pinney_lambda_squared(A, B, C)
        sigma0, sigma_dot0 = math.sqrt(A), B / math.sqrt(A)
        cfg = ScenarioConfig(mass=MassProfile.constant(1.0), omega=omega,
                             tau=TauFunction.constant(lam2), sigma0=sigma0,
                             sigma_dot0=sigma_dot0,
                             grid=TimeGrid(0.0, 20.0, abs_tol=1e-11, rel_tol=1e-11,
                                           samples=2001))
        traj = integrate_modified_ep(cfg)
        ref = pinney_closed_form(A, B, C, omega, traj.t)
        worst_match = max(worst_match, float(np.max(np.abs(traj.sigma - ref) / ref)))

        # lambda^2 = (AC - B^2) W^2 confirmed on analytic samples (W = 1 pair)
        t = np.linspace(0.0, 10.0, 5001)
        r, s = np.cos(omega * t), np.sin(omega * t) / omega
        rd, sd = -omega * np.sin(omega * t), np.cos(omega * t)
        x = np.sqrt(A * r ** 2 + 2 * B * r * s + C * s ** 2)
        xd = (2 * A * r * rd + 2 * B * (rd * s + r * sd) + 2 * C * s * sd) / (2 * x)
        analytic = SigmaTrajectory(t=t, sigma=x, sigma_dot=xd, meta=DUMMY_META)
        worst_residual = max(worst_residual, ep_residual(analytic, cfg))
    ok = worst_match < 1e-6 and worst_residual < 1e-8
    report(2, "constant-mass reduction", ok,
           f"solver vs closed form {worst_match:.3e} (< 1e-06), "
           f"equation residual {worst_residual:.3e} (< 1e-08)")


def _two_route_pair(grid):
    scenario = exponential_scenario(M0, CANONICAL_OMEGA, TAU0)
    cfg = scenario.scenario_config(grid)
    traj = integrate_modified_ep(cfg)
    alpha = traj.sigma ** 2
    delta = -cfg.mass.mass_at(traj.t) * traj.sigma_dot * traj.sigma
    e_samples = electric_field(cfg.mass, alpha, delta, traj.t)
    route_a = coefficients_from_sigma(traj, cfg.mass, cfg.tau, e_samples)
    from scipy.interpolate import CubicSpline
    e_spline = CubicSpline(traj.t, e_samples)
    init = sigma_consistent_init(cfg.sigma0, cfg.sigma_dot0, cfg.mass, cfg.tau,
                                 e0=float(e_samples[0]), t0=float(traj.t[0]))
    route_b = integrate_coefficient_system(cfg.mass, cfg.omega,
                                           lambda t: float(e_spline(t)), init, grid)
    return scenario, route_a, route_b


def test_criterion_3_two_route_equivalence():
    grid = TimeGrid(0.0, 20.0, abs_tol=1e-13, rel_tol=1e-12, samples=2001)
    _scenario, route_a, route_b = _two_route_pair(grid)
    gap = 0.0
    for name in ("alpha", "delta", "epsilon", "gamma"):
        a, b = getattr(route_a, name), getattr(route_b, name)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)
        gap = max(gap, float(np.max(np.abs(a - b) / denom)))
    delta_spread = float(np.max(np.abs(route_a.delta - route_a.delta[0])))
    ok = gap < 1e-7 and delta_spread < 1e-8
    report(3, "two-route coefficient equivalence", ok,
           f"route gap {gap:.3e} (< 1e-07), delta spread {delta_spread:.3e} (< 1e-08)")


def test_criterion_4_electric_field_closed_form():
    grid = TimeGrid(0.0, 20.0, abs_tol=1e-13, rel_tol=1e-12, samples=2001)
    scenario, route_a, route_b = _two_route_pair(grid)
    ref = (1.0 / M0) * np.exp(-0.5 * scenario.q * route_a.t)
    field_err = float(np.max(np.abs(route_a.efield - ref) / ref))
    mass_vals = scenario.mass_profile().mass_at(route_b.t)
    closure = float(np.max(np.abs(
        route_b.gamma - 2.0 * mass_vals * route_b.alpha * route_b.efield)))
    ok = field_err < 1e-7 and closure < 1e-8
    report(4, "field quadrature closed form", ok,
           f"field rel err {field_err:.3e} (< 1e-07), closure gap {closure:.3e} (< 1e-08)")


def test_criterion_5_tau_compatibility():
    scenario = exponential_scenario(M0, CANONICAL_OMEGA, TAU0)
    t = np.linspace(0.0, 20.0, 2001)
    traj = SigmaTrajectory(t=t, sigma=scenario.sigma(t),
                           sigma_dot=scenario.sigma_dot(t), meta=DUMMY_META)
    compatible = tau_ode_residual(scenario.tau_function(), traj,
                                  scenario.mass_profile()).max_residual
    incompatible = tau_ode_residual(TauFunction.constant(1.0), traj,
                                    scenario.mass_profile()).max_residual
    ok = compatible < 1e-9 and incompatible > 0.0
    report(5, "tau compatibility equation", ok,
           f"monomial pair residual {compatible:.3e} (< 1e-09), "
           f"constant pair residual {incompatible:.3e} (> 0)")


def test_criterion_6_quantum_invariance():
    scenario = exponential_scenario(M0, CANONICAL_OMEGA, TAU0)
    grid = SpatialGrid(-28.0, 28.0, 1023)
    started = time.perf_counter()
    study = run_refinement_study(scenario.coefficient_model(), grid, 1e-3, 5.0,
                                 initial_state=GaussianSpec(0.0, 2.6, 2.2),
                                 levels=3, measure_every=50)
    elapsed = time.perf_counter() - started
    finest = study.checks[-1]
    ok = (finest.drift < 1e-3 and abs(study.order - 2.0) <= 0.3
          and finest.valid and elapsed < 60.0)
    report(6, "quantum invariance drift", ok,
           f"drift {finest.drift:.3e} (< 1e-03) at n=1023 dt=1e-3, "
           f"order {study.order:.2f} (2.0 +/- 0.3), valid={finest.valid}, "
           f"runtime {elapsed:.1f}s (< 60s)")


def test_criterion_7_figure1_reproduction(tmp_path):
    out = tmp_path / "fig"
    code = main(["figure1", "--out", str(out), "--no-plot"])
    assert code == 0
    with open(out / "figure1.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(v) for v in row] for row in rows[1:]])
    t = data[:, 0]
    expected_q = (0.0, 0.565685424949238, 0.9797958971132712,
                  1.3856406460551018, 1.7888543819998317)
    # recover each decay rate from the curve itself
    q_err = 0.0
    for idx, q_ref in enumerate(expected_q):
        col = data[:, idx + 1]
        q_fit = -math.log(col[-1] / M0) / t[-1]
        q_err = max(q_err, abs(q_fit - q_ref))
    flat = bool(np.all(data[:, 1] == M0))
    ordered = all(np.all(data[1:, c] > data[1:, c + 1]) for c in range(1, 5))
    ok = (len(header) == 6 and q_err < 1e-6 and flat and ordered)
    report(7, "mass-family figure data", ok,
           f"5 curves, q err {q_err:.2e} (< 1e-06), flat first curve={flat}, "
           f"strict ordering={ordered}")


def test_criterion_8_complex_split_consistency():
    scenario = exponential_scenario(M0, CANONICAL_OMEGA, TAU0)
    grid = TimeGrid(0.0, 10.0, dt=1e-3)
    cfg = scenario.scenario_config(grid, solver="rk4_fixed")
    real = integrate_modified_ep(cfg)
    split = integrate_complex_split(cfg, 1.0, 0.2, 0.0, 0.0)
    match = float(np.max(np.abs(split.xi - real.sigma) / real.sigma))

    circle_cfg = ScenarioConfig(mass=MassProfile.constant(1.0),
                                omega=math.sqrt(2.0), tau=TauFunction.monomial(1.0),
                                sigma0=1.0, sigma_dot0=0.0,
                                grid=TimeGrid(0.0, 10.0, abs_tol=1e-12,
                                              rel_tol=1e-12, samples=501))
    circle = integrate_complex_split(circle_cfg, 1.0, 0.0, 0.0, 1.0)
    circle_err = max(float(np.max(np.abs(circle.xi - 1.0))),
                     float(np.max(np.abs(circle.eta - circle.t))))
    ok = match < 1e-10 and circle_err < 1e-8
    report(8, "complex-split consistency", ok,
           f"zero-phase match {match:.3e} (< 1e-10), "
           f"unit-circle error {circle_err:.3e} (< 1e-08)")
