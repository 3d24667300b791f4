"""Mass profiles, tau functions, time grids and scenario configuration.

All types here are immutable after construction and safe to share across
threads; the evaluation operations are pure functions.  Natural units
(hbar = c = 1) are used throughout, so masses, times and frequencies are
dimensionless scales.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError, DomainError, PositivityError

MASS_KINDS = ("constant", "exponential", "tabulated")
TAU_KINDS = ("constant", "monomial")
SOLVER_KINDS = ("rk4_fixed", "rk45_adaptive")

DEFAULT_ADAPTIVE_SAMPLES = 1001


def _as_float_array(values: Iterable[float], name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ConfigError(f"{name}: expected a one-dimensional sequence")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name}: contains non-finite entries")
    return arr


def _scalar_or_array(values: np.ndarray, scalar_input: bool):
    if scalar_input:
        return float(values)
    return values


@dataclass(frozen=True)
class MassProfile:
    """Time-dependent particle mass m(t) > 0 and its rate dm/dt.

    Kinds:
      constant     m(t) = m0
      exponential  m(t) = m0 * exp(-q t); the rate is exactly -q * m(t)
      tabulated    cubic interpolation through (t, m) samples, evaluated
                   only inside the closed sample interval (no extrapolation);
                   the rate is the analytic derivative of the interpolant
    """

    kind: str
    m0: float = 1.0
    q: float = 0.0
    table_t: np.ndarray | None = None
    table_m: np.ndarray | None = None
    _spline: Any = field(default=None, repr=False, compare=False)
    _spline_rate: Any = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in MASS_KINDS:
            raise ConfigError(f"mass.kind: expected one of {MASS_KINDS}, got {self.kind!r}")
        if self.kind in ("constant", "exponential"):
            if not (self.m0 > 0.0 and math.isfinite(self.m0)):
                raise PositivityError(f"mass.m0 must be positive, got {self.m0}")
        if self.kind == "tabulated":
            if self.table_t is None or self.table_m is None:
                raise ConfigError("tabulated mass profile requires a (t, m) table")
            t = _as_float_array(self.table_t, "mass.table t")
            m = _as_float_array(self.table_m, "mass.table m")
            if len(t) != len(m):
                raise ConfigError("mass.table: t and m columns differ in length")
            if len(t) < 4:
                raise ConfigError("mass.table: cubic interpolation needs at least 4 samples")
            if np.any(np.diff(t) <= 0.0):
                raise ConfigError("mass.table: t samples must be strictly increasing")
            if np.any(m <= 0.0):
                raise PositivityError("mass.table: all mass samples must be positive")
            t.flags.writeable = False
            m.flags.writeable = False
            object.__setattr__(self, "table_t", t)
            object.__setattr__(self, "table_m", m)
            spline = CubicSpline(t, m)
            # the interpolant can undershoot between positive samples
            probe = np.linspace(t[0], t[-1], max(16 * len(t), 256))
            if np.any(spline(probe) <= 0.0):
                raise PositivityError("mass.table: interpolant dips to a non-positive value")
            object.__setattr__(self, "_spline", spline)
            object.__setattr__(self, "_spline_rate", spline.derivative())

    @classmethod
    def constant(cls, m0: float) -> "MassProfile":
        return cls(kind="constant", m0=m0)

    @classmethod
    def exponential(cls, m0: float, q: float) -> "MassProfile":
        return cls(kind="exponential", m0=m0, q=q)

    @classmethod
    def tabulated(cls, t: Iterable[float], m: Iterable[float]) -> "MassProfile":
        return cls(kind="tabulated", table_t=np.asarray(t, dtype=float),
                   table_m=np.asarray(m, dtype=float))

    @property
    def domain(self) -> tuple[float, float]:
        """Closed evaluation interval; infinite for analytic kinds."""
        if self.kind == "tabulated":
            return float(self.table_t[0]), float(self.table_t[-1])
        return (-math.inf, math.inf)

    def _check_domain(self, t: np.ndarray) -> None:
        lo, hi = self.domain
        if np.any(t < lo) or np.any(t > hi):
            raise DomainError(
                f"mass profile evaluated outside its table domain [{lo:g}, {hi:g}]")

    def mass_at(self, t):
        """m(t); raises PositivityError if the value is not positive."""
        scalar = np.isscalar(t)
        tt = np.asarray(t, dtype=float)
        if self.kind == "constant":
            out = np.full_like(tt, self.m0)
        elif self.kind == "exponential":
            out = self.m0 * np.exp(-self.q * tt)
        else:
            self._check_domain(tt)
            out = np.asarray(self._spline(tt), dtype=float)
            if np.any(out <= 0.0):
                raise PositivityError("tabulated mass interpolant returned a non-positive value")
        return _scalar_or_array(out, scalar)

    def mass_rate_at(self, t):
        """dm/dt at t; exact for analytic kinds, interpolant derivative otherwise."""
        scalar = np.isscalar(t)
        tt = np.asarray(t, dtype=float)
        if self.kind == "constant":
            out = np.zeros_like(tt)
        elif self.kind == "exponential":
            out = -self.q * self.m0 * np.exp(-self.q * tt)
        else:
            self._check_domain(tt)
            out = np.asarray(self._spline_rate(tt), dtype=float)
        return _scalar_or_array(out, scalar)

    def log_rate_at(self, t):
        """dm/dt divided by m, the damping coefficient of the sigma equation."""
        if self.kind == "constant":
            return 0.0 if np.isscalar(t) else np.zeros_like(np.asarray(t, dtype=float))
        if self.kind == "exponential":
            return -self.q if np.isscalar(t) else np.full_like(np.asarray(t, dtype=float), -self.q)
        return self.mass_rate_at(t) / self.mass_at(t)


@dataclass(frozen=True)
class TauFunction:
    """Inverse-cube coupling strength tau as a function of sigma.

    constant kind: tau(sigma) = value (a squared amplitude, required > 0).
    monomial kind: tau(sigma) = value * sigma**4, which turns the nonlinear
    sigma equation into a linear one; value may take either sign.
    """

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in TAU_KINDS:
            raise ConfigError(f"tau.kind: expected one of {TAU_KINDS}, got {self.kind!r}")
        if not math.isfinite(self.value):
            raise ConfigError("tau.value must be finite")
        if self.kind == "constant" and self.value <= 0.0:
            raise PositivityError(f"constant tau requires value > 0, got {self.value}")

    @classmethod
    def constant(cls, lambda_squared: float) -> "TauFunction":
        return cls(kind="constant", value=lambda_squared)

    @classmethod
    def monomial(cls, tau0: float) -> "TauFunction":
        return cls(kind="monomial", value=tau0)

    def _check_sigma(self, sigma: np.ndarray) -> None:
        if np.any(sigma <= 0.0):
            raise DomainError("tau evaluated at non-positive sigma")

    def tau_at(self, sigma):
        scalar = np.isscalar(sigma)
        ss = np.asarray(sigma, dtype=float)
        self._check_sigma(ss)
        if self.kind == "constant":
            out = np.full_like(ss, self.value)
        else:
            out = self.value * ss ** 4
        return _scalar_or_array(out, scalar)

    def tau_prime_at(self, sigma):
        """Derivative with respect to sigma."""
        scalar = np.isscalar(sigma)
        ss = np.asarray(sigma, dtype=float)
        self._check_sigma(ss)
        if self.kind == "constant":
            out = np.zeros_like(ss)
        else:
            out = 4.0 * self.value * ss ** 3
        return _scalar_or_array(out, scalar)


@dataclass(frozen=True)
class TimeGrid:
    """Integration window with either a fixed step or adaptive tolerances.

    Fixed mode (dt given): the output grid is uniform with the number of
    steps rounded so the grid lands exactly on t1.  Adaptive mode
    (abs_tol, rel_tol given): the integrator picks its own steps and the
    solution is sampled on `samples` uniform output points.
    """

    t0: float
    t1: float
    dt: float | None = None
    abs_tol: float | None = None
    rel_tol: float | None = None
    samples: int | None = None

    def __post_init__(self):
        if not (self.t1 > self.t0):
            raise ConfigError(f"grid: t1 must exceed t0 (got t0={self.t0}, t1={self.t1})")
        has_dt = self.dt is not None
        has_tol = self.abs_tol is not None or self.rel_tol is not None
        if has_dt and has_tol:
            raise ConfigError("grid: give either dt or (abs_tol, rel_tol), not both")
        if not has_dt and not has_tol:
            raise ConfigError("grid: one of dt or (abs_tol, rel_tol) is required")
        if has_dt and not (self.dt > 0.0):
            raise ConfigError(f"grid.dt must be positive, got {self.dt}")
        if has_tol:
            if self.abs_tol is None or self.rel_tol is None:
                raise ConfigError("grid: adaptive mode needs both abs_tol and rel_tol")
            if not (self.abs_tol > 0.0 and self.rel_tol > 0.0):
                raise ConfigError("grid: tolerances must be positive")
        if self.samples is not None and self.samples < 2:
            raise ConfigError("grid.samples must be at least 2")

    @property
    def mode(self) -> str:
        return "fixed" if self.dt is not None else "adaptive"

    def times(self) -> np.ndarray:
        """Uniform output grid covering [t0, t1]."""
        if self.mode == "fixed":
            n_steps = max(1, round((self.t1 - self.t0) / self.dt))
            return np.linspace(self.t0, self.t1, n_steps + 1)
        n = self.samples if self.samples is not None else DEFAULT_ADAPTIVE_SAMPLES
        return np.linspace(self.t0, self.t1, n)


@dataclass(frozen=True)
class ScenarioConfig:
    """Full problem statement for one sigma-equation integration."""

    mass: MassProfile
    omega: float
    tau: TauFunction
    sigma0: float
    sigma_dot0: float
    grid: TimeGrid
    solver: str = "rk45_adaptive"

    def __post_init__(self):
        if not (self.omega > 0.0 and math.isfinite(self.omega)):
            raise ConfigError(f"omega must be positive, got {self.omega}")
        if not (self.sigma0 > 0.0):
            raise ConfigError(f"sigma0 must be positive, got {self.sigma0}")
        if not math.isfinite(self.sigma_dot0):
            raise ConfigError("sigma_dot0 must be finite")
        if self.solver not in SOLVER_KINDS:
            raise ConfigError(f"solver: expected one of {SOLVER_KINDS}, got {self.solver!r}")


# --- JSON configuration ----------------------------------------------------

def _require_keys(doc: dict, allowed: dict[str, bool], where: str) -> None:
    """allowed maps key -> required flag."""
    unknown = set(doc) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    missing = [k for k, required in allowed.items() if required and k not in doc]
    if missing:
        raise ConfigError(f"{where}: missing required key(s) {missing}")


def _number(doc: dict, key: str, where: str) -> float:
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {type(val).__name__}")
    return float(val)


def _mass_from_dict(doc: dict) -> MassProfile:
    if not isinstance(doc, dict):
        raise ConfigError("mass: expected an object")
    kind = doc.get("kind")
    if kind == "constant":
        _require_keys(doc, {"kind": True, "m0": True}, "mass")
        return MassProfile.constant(_number(doc, "m0", "mass"))
    if kind == "exponential":
        _require_keys(doc, {"kind": True, "m0": True, "q": True}, "mass")
        return MassProfile.exponential(_number(doc, "m0", "mass"), _number(doc, "q", "mass"))
    if kind == "tabulated":
        _require_keys(doc, {"kind": True, "table": True}, "mass")
        table = doc["table"]
        if (not isinstance(table, list) or
                any(not isinstance(row, list) or len(row) != 2 for row in table)):
            raise ConfigError("mass.table: expected a list of [t, m] pairs")
        t = [row[0] for row in table]
        m = [row[1] for row in table]
        return MassProfile.tabulated(t, m)
    raise ConfigError(f"mass.kind: expected one of {MASS_KINDS}, got {kind!r}")


def _tau_from_dict(doc: dict) -> TauFunction:
    if not isinstance(doc, dict):
        raise ConfigError("tau: expected an object")
    _require_keys(doc, {"kind": True, "value": True}, "tau")
    kind = doc.get("kind")
    if kind not in TAU_KINDS:
        raise ConfigError(f"tau.kind: expected one of {TAU_KINDS}, got {kind!r}")
    return TauFunction(kind=kind, value=_number(doc, "value", "tau"))


def _grid_from_dict(doc: dict) -> TimeGrid:
    if not isinstance(doc, dict):
        raise ConfigError("grid: expected an object")
    allowed = {"t0": True, "t1": True, "dt": False, "abs_tol": False, "rel_tol": False}
    _require_keys(doc, allowed, "grid")
    kwargs: dict[str, float] = {}
    for key in ("dt", "abs_tol", "rel_tol"):
        if key in doc:
            kwargs[key] = _number(doc, key, "grid")
    return TimeGrid(t0=_number(doc, "t0", "grid"), t1=_number(doc, "t1", "grid"), **kwargs)


def scenario_from_dict(doc: dict) -> ScenarioConfig:
    """Build a ScenarioConfig from a parsed JSON document; unknown keys are rejected."""
    if not isinstance(doc, dict):
        raise ConfigError("config: expected a JSON object at top level")
    allowed = {"mass": True, "omega": True, "tau": True, "sigma0": True,
               "sigma_dot0": True, "grid": True, "solver": True}
    _require_keys(doc, allowed, "config")
    solver = doc["solver"]
    if solver not in SOLVER_KINDS:
        raise ConfigError(f"config.solver: expected one of {SOLVER_KINDS}, got {solver!r}")
    return ScenarioConfig(
        mass=_mass_from_dict(doc["mass"]),
        omega=_number(doc, "omega", "config"),
        tau=_tau_from_dict(doc["tau"]),
        sigma0=_number(doc, "sigma0", "config"),
        sigma_dot0=_number(doc, "sigma_dot0", "config"),
        grid=_grid_from_dict(doc["grid"]),
        solver=solver,
    )


def scenario_from_json(text: str) -> ScenarioConfig:
    """Parse a JSON scenario document; parse errors carry line/column info."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(doc)


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    """Round-trippable plain-dict form of a scenario (for reports)."""
    if cfg.mass.kind == "constant":
        mass: dict[str, Any] = {"kind": "constant", "m0": cfg.mass.m0}
    elif cfg.mass.kind == "exponential":
        mass = {"kind": "exponential", "m0": cfg.mass.m0, "q": cfg.mass.q}
    else:
        mass = {"kind": "tabulated",
                "table": [[float(t), float(m)]
                          for t, m in zip(cfg.mass.table_t, cfg.mass.table_m)]}
    grid: dict[str, Any] = {"t0": cfg.grid.t0, "t1": cfg.grid.t1}
    if cfg.grid.mode == "fixed":
        grid["dt"] = cfg.grid.dt
    else:
        grid["abs_tol"] = cfg.grid.abs_tol
        grid["rel_tol"] = cfg.grid.rel_tol
    return {
        "mass": mass,
        "omega": cfg.omega,
        "tau": {"kind": cfg.tau.kind, "value": cfg.tau.value},
        "sigma0": cfg.sigma0,
        "sigma_dot0": cfg.sigma_dot0,
        "grid": grid,
        "solver": cfg.solver,
    }


# --- operation-style wrappers ----------------------------------------------

def mass_at(profile: MassProfile, t):
    """Evaluate m(t)."""
    return profile.mass_at(t)


def mass_rate_at(profile: MassProfile, t):
    """Evaluate dm/dt."""
    return profile.mass_rate_at(t)


def tau_at(tau: TauFunction, sigma):
    """Evaluate tau(sigma)."""
    return tau.tau_at(sigma)
