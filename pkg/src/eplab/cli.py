"""Command-line front end.

Subcommands
-----------
solve-ep   integrate the sigma equation from a JSON scenario; writes
           sigma.csv (+ figure) and a manifest with the defect summary.
coeffs     build the invariant coefficients by both routes; writes
           coeffs.csv (+ figure) and a manifest with the route gap.
verify     run the grid quantum check of invariant constancy; writes
           verify.csv, verify.json (+ figure) and a manifest.
figure1    emit the locked exponential mass family m(t) = m0 exp(-q t),
           one column per frequency; writes figure1.csv (+ figure).

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from . import csvio, figures
from .ep_solver import ep_residual, integrate_modified_ep
from .errors import ConfigError, ConstraintError, EPLabError
from .invariants import (coefficient_model_from_trajectory, coefficients_from_sigma,
                         electric_field, exponential_scenario,
                         integrate_coefficient_system, sigma_consistent_init,
                         tau_ode_residual)
from .profiles import ScenarioConfig, TimeGrid, scenario_from_dict
from .tdse import (GaussianSpec, SpatialGrid, run_invariance_check,
                   run_refinement_study)

_SOLVER_FLAG = {"rk4": "rk4_fixed", "rk45": "rk45_adaptive"}

DEFAULT_RESIDUAL_TOL = 1e-6
DEFAULT_ROUTE_TOL = 1e-7
DEFAULT_CLOSURE_TOL = 1e-8
DEFAULT_DRIFT_TOL = 1e-3

# evolution settings used when a config has no "quantum" block; the kick
# (momentum 2.2) cancels most of the field-driven centroid excursion of the
# default exponential scenario so the packet stays far from the walls
QUANTUM_DEFAULTS = {
    "xmin": -28.0,
    "xmax": 28.0,
    "n": 1023,
    "dt": 1e-3,
    "t_final": 5.0,
    "measure_every": 50,
    "refine": True,
    "state": {"center": 0.0, "width": 2.6, "momentum": 2.2},
    "snapshots": [],
}


class _Parser(argparse.ArgumentParser):
    """argparse exits with code 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _load_config(path: str) -> tuple[dict, str]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(raw.decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return doc, _sha256_bytes(raw)


def _scenario_from_doc(doc: dict, args) -> ScenarioConfig:
    cfg = scenario_from_dict(doc)
    if getattr(args, "solver", None):
        cfg = dataclasses.replace(cfg, solver=_SOLVER_FLAG[args.solver])
    if getattr(args, "samples", None) and cfg.grid.mode == "adaptive":
        cfg = dataclasses.replace(cfg, grid=dataclasses.replace(cfg.grid, samples=args.samples))
    return cfg


def _write_manifest(out_dir: Path, command: str, config_hash: str,
                    outputs: list[Path], residual_summary: dict,
                    flags: dict[str, str]) -> dict:
    manifest = {
        "command": command,
        "config_sha256": config_hash,
        "outputs": [{"path": p.name, "sha256": csvio.sha256_of(p)} for p in outputs],
        "residual_summary": residual_summary,
        "flags": flags,
    }
    csvio.write_json(out_dir / "manifest.json", manifest)
    return manifest


def _flags_ok(flags: dict[str, str]) -> bool:
    return all(v in ("pass", "skipped") for v in flags.values())


def _prepare_out(args) -> Path:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _exponential_family(cfg: ScenarioConfig):
    """Return the locked exponential scenario when the config describes one."""
    if cfg.mass.kind != "exponential" or cfg.tau.kind != "monomial":
        return None
    scenario = exponential_scenario(cfg.mass.m0, cfg.omega, cfg.tau.value)
    if abs(cfg.mass.q - scenario.q) > 1e-9 * max(1.0, scenario.q):
        return None
    return scenario


# --- solve-ep ----------------------------------------------------------------

def cmd_solve_ep(args) -> int:
    doc, config_hash = _load_config(args.config)
    doc.pop("quantum", None)
    cfg = _scenario_from_doc(doc, args)
    out_dir = _prepare_out(args)

    scenario = None
    if args.scenario == "exponential":
        if cfg.mass.kind != "exponential" or cfg.tau.kind != "monomial":
            raise ConfigError(
                "--scenario exponential needs an exponential mass and a monomial tau")
        scenario = exponential_scenario(cfg.mass.m0, cfg.omega, cfg.tau.value)
        if abs(cfg.mass.q - scenario.q) > 1e-9 * max(1.0, scenario.q):
            raise ConstraintError(
                f"mass decay rate q = {cfg.mass.q:g} is inconsistent with "
                f"tau0 = omega^2 - q^2/4, which gives q = {scenario.q:.9g}")

    traj = integrate_modified_ep(cfg)
    residual = ep_residual(traj, cfg)

    outputs = [csvio.write_sigma_csv(out_dir / "sigma.csv", traj)]
    if not args.no_plot:
        outputs.append(figures.plot_sigma(out_dir / "sigma.png", traj))

    flags = {"residual_under_tolerance": "pass" if residual <= args.residual_tol else "fail"}
    summary = {"max_ep_residual": residual, "residual_tolerance": args.residual_tol,
               "n_samples": len(traj)}
    if scenario is not None:
        reference = scenario.sigma(traj.t)
        closed_form_dev = float(np.max(np.abs(traj.sigma - reference) / np.abs(reference)))
        summary["closed_form_max_rel_dev"] = closed_form_dev
        ic_consistent = (abs(cfg.sigma0 - 1.0) < 1e-12
                         and abs(cfg.sigma_dot0 - 0.5 * scenario.q) < 1e-12)
        if ic_consistent:
            flags["closed_form_match"] = "pass" if closed_form_dev <= 1e-6 else "fail"
        else:
            flags["closed_form_match"] = "skipped"

    _write_manifest(out_dir, "solve-ep", config_hash, outputs, summary, flags)
    print(f"solve-ep: wrote {outputs[0]} (max residual {residual:.3e})")
    return 0 if _flags_ok(flags) else 2


# --- coeffs ------------------------------------------------------------------

def cmd_coeffs(args) -> int:
    doc, config_hash = _load_config(args.config)
    doc.pop("quantum", None)
    cfg = _scenario_from_doc(doc, args)
    out_dir = _prepare_out(args)

    traj = integrate_modified_ep(cfg)
    mass, tau = cfg.mass, cfg.tau

    alpha_a = traj.sigma ** 2
    delta_a = -mass.mass_at(traj.t) * traj.sigma_dot * traj.sigma
    e_samples = electric_field(mass, alpha_a, delta_a, traj.t)
    coeff_a = coefficients_from_sigma(traj, mass, tau, e_samples)

    e_spline = CubicSpline(traj.t, e_samples)
    init = list(sigma_consistent_init(cfg.sigma0, cfg.sigma_dot0, mass, tau,
                                      e0=float(e_samples[0]), t0=float(traj.t[0])))
    init[2] *= args.epsilon0_scale
    coeff_b = integrate_coefficient_system(mass, cfg.omega, lambda t: float(e_spline(t)),
                                           init, cfg.grid, solver=cfg.solver)

    gaps = []
    for name in ("alpha", "delta", "epsilon", "gamma"):
        a = getattr(coeff_a, name)
        b = getattr(coeff_b, name)
        scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), 1e-300)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-12 * scale)
        gaps.append(float(np.max(np.abs(a - b) / denom)))
    two_route_gap = max(gaps)

    closure_gap = float(np.max(np.abs(
        coeff_b.gamma - 2.0 * mass.mass_at(coeff_b.t) * coeff_b.alpha * coeff_b.efield)))

    try:
        tau_res = tau_ode_residual(tau, traj, mass)
        max_tau_residual = tau_res.max_residual
        skipped_samples = tau_res.n_skipped
    except EPLabError:
        max_tau_residual = None
        skipped_samples = len(traj)

    summary = {
        "max_ep_residual": ep_residual(traj, cfg),
        "max_tau_residual": max_tau_residual,
        "max_closure_gap": closure_gap,
        "skipped_samples": skipped_samples,
        "two_route_gap": two_route_gap,
    }
    flags = {
        "two_route_agreement": "pass" if two_route_gap <= args.route_tol else "fail",
        "closure_gap": "pass" if closure_gap <= args.closure_tol else "fail",
    }
    scenario = _exponential_family(cfg)
    ic_consistent = scenario is not None and (
        abs(cfg.sigma0 - 1.0) < 1e-12 and abs(cfg.sigma_dot0 - 0.5 * scenario.q) < 1e-12)
    if ic_consistent:
        delta_spread = float(np.max(np.abs(coeff_a.delta - coeff_a.delta[0])))
        summary["delta_spread"] = delta_spread
        flags["delta_constant"] = "pass" if delta_spread <= 1e-8 else "fail"
    else:
        flags["delta_constant"] = "skipped"

    outputs = [csvio.write_coefficients_csv(out_dir / "coeffs.csv", coeff_a)]
    if not args.no_plot:
        outputs.append(figures.plot_coefficients(out_dir / "coeffs.png", coeff_a))
    _write_manifest(out_dir, "coeffs", config_hash, outputs, summary, flags)
    print(f"coeffs: wrote {outputs[0]} (two-route gap {two_route_gap:.3e})")
    return 0 if _flags_ok(flags) else 2


# --- verify ------------------------------------------------------------------

def _quantum_settings(doc: dict, args) -> dict:
    block = doc.pop("quantum", {})
    if not isinstance(block, dict):
        raise ConfigError("quantum: expected an object")
    settings = {k: v for k, v in QUANTUM_DEFAULTS.items()}
    settings["state"] = dict(QUANTUM_DEFAULTS["state"])
    allowed = set(QUANTUM_DEFAULTS)
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"quantum: unknown key(s) {sorted(unknown)}")
    for key, value in block.items():
        if key == "state":
            if not isinstance(value, dict):
                raise ConfigError("quantum.state: expected an object")
            bad = set(value) - {"center", "width", "momentum"}
            if bad:
                raise ConfigError(f"quantum.state: unknown key(s) {sorted(bad)}")
            settings["state"].update({k: float(v) for k, v in value.items()})
        else:
            settings[key] = value
    if args.no_refine:
        settings["refine"] = False
    return settings


def cmd_verify(args) -> int:
    doc, config_hash = _load_config(args.config)
    quantum = _quantum_settings(doc, args)
    cfg = _scenario_from_doc(doc, args)
    out_dir = _prepare_out(args)

    t0 = cfg.grid.t0
    t_final = t0 + float(quantum["t_final"])
    dense = TimeGrid(t0=t0, t1=t_final, abs_tol=1e-12, rel_tol=1e-12, samples=2001)
    cfg_dense = dataclasses.replace(cfg, grid=dense, solver="rk45_adaptive")
    traj = integrate_modified_ep(cfg_dense)
    alpha_a = traj.sigma ** 2
    delta_a = -cfg.mass.mass_at(traj.t) * traj.sigma_dot * traj.sigma
    e_samples = electric_field(cfg.mass, alpha_a, delta_a, traj.t)
    coeff = coefficients_from_sigma(traj, cfg.mass, cfg.tau, e_samples)
    model = coefficient_model_from_trajectory(coeff, cfg.mass, cfg.omega)

    grid = SpatialGrid(float(quantum["xmin"]), float(quantum["xmax"]), int(quantum["n"]))
    spec = GaussianSpec(center=quantum["state"]["center"],
                        width=quantum["state"]["width"],
                        momentum=quantum["state"]["momentum"])
    dt = float(quantum["dt"])
    duration = float(quantum["t_final"])
    measure_every = int(quantum["measure_every"])

    snapshot_times = [float(ts) for ts in quantum["snapshots"]]
    if quantum["refine"]:
        study = run_refinement_study(model, grid, dt, t0 + duration,
                                     initial_state=spec, levels=3, t_start=t0,
                                     measure_every=measure_every,
                                     compute_residual=True,
                                     snapshot_times=snapshot_times)
        checks = study.checks
        check = checks[-1]
        order = study.order
        pair_orders = list(study.pair_orders)
        drift_by_n = {str(c.n): c.drift for c in checks}
    else:
        check = run_invariance_check(model, grid, dt, t0 + duration,
                                     initial_state=spec, t_start=t0,
                                     measure_every=measure_every,
                                     compute_residual=True,
                                     snapshot_times=snapshot_times)
        order = None
        pair_orders = []
        drift_by_n = {str(check.n): check.drift}

    flags = {
        "drift_under_tolerance": "pass" if check.drift <= args.drift_tol else "fail",
        "boundary_amplitude": "pass" if check.valid else "fail",
    }
    if order is None:
        flags["convergence_order"] = "skipped"
    else:
        flags["convergence_order"] = "pass" if abs(order - 2.0) <= 0.3 else "fail"

    finite_res = check.residual[np.isfinite(check.residual)]
    report = {
        "drift": check.drift,
        "drift_tolerance": args.drift_tol,
        "drift_by_n": drift_by_n,
        "convergence_order": order,
        "pair_orders": pair_orders,
        "max_norm_drift": check.max_norm_drift,
        "max_boundary_amplitude": check.max_boundary_amplitude,
        "max_invariance_residual": float(np.max(finite_res)) if len(finite_res) else None,
        "valid": check.valid,
        "n": check.n,
        "dt": check.dt,
        "domain": [grid.xmin, grid.xmax],
        "state": dataclasses.asdict(spec),
        "runtime_seconds": check.runtime_seconds,
        "flags": flags,
    }

    outputs = [
        csvio.write_invariance_csv(out_dir / "verify.csv", check.times,
                                   check.expectation, check.norm, check.residual),
        csvio.write_json(out_dir / "verify.json", report),
    ]
    if check.snapshots:
        payload = {
            "x": [float(v) for v in grid.x],
            "times": [float(ts) for ts, _dens in check.snapshots],
            "density": [[float(v) for v in dens] for _ts, dens in check.snapshots],
        }
        outputs.append(csvio.write_json(out_dir / "psi_snapshots.json", payload))
    if not args.no_plot:
        outputs.append(figures.plot_invariance(out_dir / "verify.png", check))
    _write_manifest(out_dir, "verify", config_hash, outputs, report, flags)
    order_text = "n/a" if order is None else f"{order:.2f}"
    print(f"verify: drift {check.drift:.3e} (order {order_text}) "
          f"[{'pass' if _flags_ok(flags) else 'fail'}]")
    return 0 if _flags_ok(flags) else 2


# --- figure1 -----------------------------------------------------------------

def cmd_figure1(args) -> int:
    try:
        omegas = [float(w) for w in args.omegas.split(",") if w.strip()]
    except ValueError as exc:
        raise ConfigError(f"--omegas: expected comma-separated numbers, got {args.omegas!r}") from exc
    if not omegas:
        raise ConfigError("--omegas: at least one frequency is required")
    if args.m0 <= 0.0:
        raise ConfigError(f"--m0 must be positive, got {args.m0}")
    if args.t_max <= 0.0 or args.samples < 2:
        raise ConfigError("--t-max must be positive and --samples at least 2")
    q_values = []
    for omega in omegas:
        try:
            q_values.append(exponential_scenario(args.m0, omega, args.tau0).q)
        except ConstraintError as exc:
            raise ConstraintError(
                f"omega = {omega:g} violates omega^2 >= tau0 = {args.tau0:g}; "
                f"the decay rate q = 2*sqrt(omega^2 - tau0) would be imaginary") from exc

    out_dir = _prepare_out(args)
    t = np.linspace(0.0, args.t_max, args.samples)
    curves = [args.m0 * np.exp(-q * t) for q in q_values]

    # m(t) = m0 exp(-q t) is strictly decreasing in omega for t > 0 exactly
    # when q is strictly increasing across the omega-sorted curves
    by_omega = sorted(range(len(omegas)), key=lambda i: omegas[i])
    qs_sorted = [q_values[i] for i in by_omega]
    strict = all(qs_sorted[i] < qs_sorted[i + 1] for i in range(len(qs_sorted) - 1))
    monotone = "pass" if strict else "fail"

    params = {"tau0": args.tau0, "omegas": omegas, "m0": args.m0,
              "t_max": args.t_max, "samples": args.samples}
    config_hash = _sha256_bytes(json.dumps(params, sort_keys=True).encode())

    outputs = [csvio.write_figure1_csv(out_dir / "figure1.csv", t, omegas, curves)]
    if not args.no_plot:
        outputs.append(figures.plot_figure1(out_dir / "figure1.png", t, omegas, curves))

    summary = {"tau0": args.tau0, "m0": args.m0,
               "q_values": {f"{w:g}": q for w, q in zip(omegas, q_values)}}
    flags = {"monotone_in_omega": monotone}
    _write_manifest(out_dir, "figure1", config_hash, outputs, summary, flags)
    print(f"figure1: wrote {outputs[0]} ({len(omegas)} curves)")
    return 0 if _flags_ok(flags) else 2


# --- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eplab",
                     description="Scale-equation solvers, invariant coefficients and "
                                 "quantum checks for time-dependent-mass oscillators")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="path to the JSON scenario")
            p.add_argument("--solver", choices=sorted(_SOLVER_FLAG),
                           help="override the configured integrator")
        p.add_argument("--out", default=".", help="output directory (default: .)")
        p.add_argument("--no-plot", action="store_true",
                       help="skip rendering the companion figure")

    p = sub.add_parser("solve-ep", help="integrate the sigma equation")
    add_common(p)
    p.add_argument("--samples", type=int, default=None,
                   help="output samples for adaptive runs (default 1001)")
    p.add_argument("--residual-tol", type=float, default=DEFAULT_RESIDUAL_TOL,
                   help="pass/fail gate on the max defect (default 1e-6)")
    p.add_argument("--scenario", choices=("generic", "exponential"), default="generic",
                   help="validate the locked exponential family before solving")
    p.set_defaults(func=cmd_solve_ep)

    p = sub.add_parser("coeffs", help="build invariant coefficients by two routes")
    add_common(p)
    p.add_argument("--samples", type=int, default=None,
                   help="output samples for adaptive runs (default 1001)")
    p.add_argument("--route-tol", type=float, default=DEFAULT_ROUTE_TOL,
                   help="pass/fail gate on the two-route gap (default 1e-7)")
    p.add_argument("--closure-tol", type=float, default=DEFAULT_CLOSURE_TOL,
                   help="pass/fail gate on the gamma closure gap (default 1e-8)")
    p.add_argument("--epsilon0-scale", type=float, default=1.0,
                   help="scale the epsilon initial value (route-sensitivity diagnostic)")
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("verify", help="grid quantum check of invariant constancy")
    add_common(p)
    p.add_argument("--drift-tol", type=float, default=DEFAULT_DRIFT_TOL,
                   help="pass/fail gate on the expectation drift (default 1e-3)")
    p.add_argument("--no-refine", action="store_true",
                   help="skip the grid-refinement convergence study")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("figure1", help="emit the exponential mass family")
    add_common(p, needs_config=False)
    p.add_argument("--tau0", type=float, default=0.01, help="monomial coupling (default 0.01)")
    p.add_argument("--omegas", default="0.1,0.3,0.5,0.7,0.9",
                   help="comma-separated frequencies (default 0.1,0.3,0.5,0.7,0.9)")
    p.add_argument("--m0", type=float, default=1.0, help="initial mass (default 1)")
    p.add_argument("--t-max", type=float, default=10.0, help="end of the time window (default 10)")
    p.add_argument("--samples", type=int, default=1001, help="number of samples (default 1001)")
    p.set_defaults(func=cmd_figure1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ConstraintError) as exc:
        print(f"eplab {args.command}: config error: {exc}", file=sys.stderr)
        return 1
    except EPLabError as exc:
        print(f"eplab {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
