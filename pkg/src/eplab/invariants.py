"""Invariant coefficient functions and the driving electric field.

The quadratic invariant I = (alpha p^2 + gamma x + delta {x,p} + eps x^2)/2
is determined, up to initialization, by four coupled linear conditions:

    alpha' = -2 delta / m
    delta' = alpha m omega^2 - eps / m
    eps'   = 2 delta m omega^2
    gamma' = 2 delta E

with the algebraic closure gamma = 2 m alpha E and the field fixed, up to
a constant, by E = exp(int Q dt) / m with Q = 3 delta / (alpha m).

Two independent construction routes are provided: direct integration of
the conditions, and substitution of a sigma trajectory through

    alpha = sigma^2,  delta = -m sigma' sigma,
    eps = m^2 sigma'^2 + tau(sigma) m^2 / sigma^2,  gamma = 2 sigma^2 m E.

Their agreement is the main consistency check on any scenario.  The
exponential-mass scenario (m = m0 exp(-q t), monomial tau) additionally
has closed forms for everything, collected in ExponentialScenario.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (ConfigError, ConstraintError, DegenerateTrajectoryError,
                     DomainError, PositivityError)
from .ep_solver import SigmaTrajectory, _run
from .profiles import MassProfile, ScenarioConfig, TauFunction, TimeGrid

SIGMA_DOT_FLOOR = 1e-8


def _samples(fn_or_array, t: np.ndarray, name: str) -> np.ndarray:
    """Evaluate a callable on t, or validate an aligned sample array."""
    if callable(fn_or_array):
        try:
            out = np.asarray(fn_or_array(t), dtype=float)
        except TypeError:
            out = np.asarray([fn_or_array(ti) for ti in t], dtype=float)
        if out.shape != t.shape:
            out = np.broadcast_to(out, t.shape).astype(float)
        return out
    arr = np.asarray(fn_or_array, dtype=float)
    if arr.shape != t.shape:
        raise ConfigError(f"{name}: expected a callable or an array aligned with t")
    return arr


@dataclass(frozen=True)
class CoefficientTrajectory:
    """Invariant coefficients and field sampled on a common time grid."""

    t: np.ndarray
    alpha: np.ndarray
    delta: np.ndarray
    epsilon: np.ndarray
    gamma: np.ndarray
    efield: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        cols = {name: np.asarray(getattr(self, name), dtype=float)
                for name in ("alpha", "delta", "epsilon", "gamma", "efield")}
        if len(t) < 2 or np.any(np.diff(t) <= 0.0):
            raise ConfigError("coefficient samples need a strictly increasing time grid")
        if any(len(c) != len(t) for c in cols.values()):
            raise ConfigError("coefficient columns differ in length")
        t.flags.writeable = False
        object.__setattr__(self, "t", t)
        for name, c in cols.items():
            c.flags.writeable = False
            object.__setattr__(self, name, c)

    def __len__(self) -> int:
        return len(self.t)


def coefficients_from_sigma(traj: SigmaTrajectory, mass: MassProfile,
                            tau: TauFunction, efield) -> CoefficientTrajectory:
    """Substitute a sigma trajectory into the coefficient parameterization.

    efield may be a callable E(t) or an array aligned with traj.t.
    """
    t = traj.t
    sigma, sigma_dot = traj.sigma, traj.sigma_dot
    if np.any(sigma <= 0.0):
        raise PositivityError("sigma trajectory contains non-positive samples")
    m = mass.mass_at(t)
    e = _samples(efield, t, "efield")
    alpha = sigma ** 2
    delta = -m * sigma_dot * sigma
    gamma = 2.0 * sigma ** 2 * m * e
    epsilon = m ** 2 * sigma_dot ** 2 + tau.tau_at(sigma) * m ** 2 / sigma ** 2
    return CoefficientTrajectory(t=t, alpha=alpha, delta=delta,
                                 epsilon=epsilon, gamma=gamma, efield=e)


def sigma_consistent_init(sigma0: float, sigma_dot0: float, mass: MassProfile,
                          tau: TauFunction, e0: float, t0: float = 0.0
                          ) -> tuple[float, float, float, float]:
    """Initial (alpha, delta, epsilon, gamma) matching a sigma initial condition."""
    m0 = mass.mass_at(t0)
    alpha0 = sigma0 ** 2
    delta0 = -m0 * sigma_dot0 * sigma0
    epsilon0 = m0 ** 2 * sigma_dot0 ** 2 + tau.tau_at(sigma0) * m0 ** 2 / sigma0 ** 2
    gamma0 = 2.0 * sigma0 ** 2 * m0 * e0
    return alpha0, delta0, epsilon0, gamma0


def integrate_coefficient_system(mass: MassProfile, omega: float,
                                 efield: Callable[[float], float],
                                 init: Sequence[float], grid: TimeGrid,
                                 solver: str = "rk45_adaptive") -> CoefficientTrajectory:
    """Integrate the four coupled coefficient conditions directly."""
    if len(init) != 4:
        raise ConfigError("init must supply (alpha0, delta0, epsilon0, gamma0)")
    omega2 = omega ** 2

    def rhs(t, y):
        alpha, delta, epsilon, _gamma = y
        m = mass.mass_at(t)
        e = efield(t)
        return np.array([
            -2.0 * delta / m,
            alpha * m * omega2 - epsilon / m,
            2.0 * delta * m * omega2,
            2.0 * delta * e,
        ])

    res, _meta = _run(rhs, grid, np.asarray(init, dtype=float), solver)
    e_samples = _samples(efield, res.t, "efield")
    return CoefficientTrajectory(t=res.t, alpha=res.y[:, 0], delta=res.y[:, 1],
                                 epsilon=res.y[:, 2], gamma=res.y[:, 3],
                                 efield=e_samples)


def _cumulative_simpson(f: np.ndarray, dt: float) -> np.ndarray:
    """Cumulative integral on a uniform grid, quadratic through triples."""
    n = len(f)
    out = np.zeros(n)
    if n >= 3:
        # half-interval rules from the quadratic through (j-1, j, j+1)
        left = dt / 12.0 * (5.0 * f[:-2] + 8.0 * f[1:-1] - f[2:])
        right = dt / 12.0 * (-f[:-2] + 8.0 * f[1:-1] + 5.0 * f[2:])
        inc = np.empty(n - 1)
        inc[0] = left[0]
        inc[1:] = right
        out[1:] = np.cumsum(inc)
    elif n == 2:
        out[1] = 0.5 * dt * (f[0] + f[1])
    return out


def _cumulative_trapezoid(f: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros(len(f))
    out[1:] = np.cumsum(0.5 * np.diff(t) * (f[:-1] + f[1:]))
    return out


def electric_field(mass: MassProfile, alpha, delta, grid, method: str = "simpson") -> np.ndarray:
    """Field samples E(t) = exp(int Q dt) / m with Q = 3 delta / (alpha m).

    The integration constant is fixed so the integral vanishes at the first
    sample, hence E(t0) = 1 / m(t0) when the coefficients carry unit scale.
    alpha and delta may be callables of t or arrays aligned with the grid.
    """
    t = grid.times() if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    if len(t) < 2 or np.any(np.diff(t) <= 0.0):
        raise DomainError("quadrature requires a strictly increasing time grid")
    a = _samples(alpha, t, "alpha")
    m = mass.mass_at(t)
    if np.any(a <= 0.0):
        raise PositivityError("alpha must stay positive for the field quadrature")
    d = _samples(delta, t, "delta")
    q_integrand = 3.0 * d / (a * m)
    if method == "simpson":
        dt = np.diff(t)
        if dt.max() - dt.min() > 1e-9 * dt.mean():
            raise DomainError("simpson quadrature requires a uniform grid; use method='trapezoid'")
        integral = _cumulative_simpson(q_integrand, float(dt.mean()))
    elif method == "trapezoid":
        integral = _cumulative_trapezoid(q_integrand, t)
    else:
        raise ConfigError(f"unknown quadrature method {method!r}")
    return np.exp(integral) / m


@dataclass(frozen=True)
class TauOdeResidual:
    """Result of the tau compatibility check along a trajectory."""

    max_residual: float
    n_evaluated: int
    n_skipped: int


def tau_ode_residual(tau: TauFunction, traj: SigmaTrajectory, mass: MassProfile,
                     sigma_dot_floor: float = SIGMA_DOT_FLOOR) -> TauOdeResidual:
    """Max |tau'(sigma) + 2 (m'/(m sigma')) tau(sigma)| over usable samples.

    Samples with |sigma'| below the floor sit on the equation's own
    singularity and are skipped and counted rather than regularized.
    """
    keep = np.abs(traj.sigma_dot) >= sigma_dot_floor
    n_skipped = int(np.sum(~keep))
    if not np.any(keep):
        raise DegenerateTrajectoryError(
            "every sample has |sigma_dot| below the floor; tau residual undefined")
    t = traj.t[keep]
    sigma = traj.sigma[keep]
    sigma_dot = traj.sigma_dot[keep]
    log_rate = mass.mass_rate_at(t) / mass.mass_at(t)
    residual = tau.tau_prime_at(sigma) + 2.0 * (log_rate / sigma_dot) * tau.tau_at(sigma)
    return TauOdeResidual(max_residual=float(np.max(np.abs(residual))),
                          n_evaluated=int(np.sum(keep)), n_skipped=n_skipped)


@dataclass(frozen=True)
class ExponentialScenario:
    """Closed forms for the exponentially decaying mass m = m0 exp(-q t).

    The decay rate is locked to the frequency and monomial coupling by
    tau0 = omega^2 - q^2 / 4, and every quantity of interest follows:
    sigma = exp(q t / 2), alpha = sigma^2, constant delta = -m0 q / 2,
    eps = m0^2 omega^2 exp(-q t), gamma = 2 exp(-q t / 2) and
    E = exp(-q t / 2) / m0.  tau0 is even in q, so either sign of the
    decay rate produces the same coupling.
    """

    m0: float
    omega: float
    tau0: float
    q: float

    def sigma(self, t):
        return np.exp(0.5 * self.q * np.asarray(t, dtype=float))

    def sigma_dot(self, t):
        return 0.5 * self.q * self.sigma(t)

    def alpha(self, t):
        return np.exp(self.q * np.asarray(t, dtype=float))

    def delta(self, t):
        return np.full_like(np.asarray(t, dtype=float), -0.5 * self.m0 * self.q)

    def epsilon(self, t):
        return self.m0 ** 2 * self.omega ** 2 * np.exp(-self.q * np.asarray(t, dtype=float))

    def gamma(self, t):
        return 2.0 * np.exp(-0.5 * self.q * np.asarray(t, dtype=float))

    def efield(self, t):
        return np.exp(-0.5 * self.q * np.asarray(t, dtype=float)) / self.m0

    def mass_profile(self) -> MassProfile:
        return MassProfile.exponential(self.m0, self.q)

    def tau_function(self) -> TauFunction:
        return TauFunction.monomial(self.tau0)

    def scenario_config(self, grid: TimeGrid, solver: str = "rk45_adaptive") -> ScenarioConfig:
        """Initial-value problem selecting the closed-form branch at t0 = 0."""
        return ScenarioConfig(mass=self.mass_profile(), omega=self.omega,
                              tau=self.tau_function(), sigma0=1.0,
                              sigma_dot0=0.5 * self.q, grid=grid, solver=solver)

    def coefficient_trajectory(self, t) -> CoefficientTrajectory:
        t = np.asarray(t, dtype=float)
        return CoefficientTrajectory(t=t, alpha=self.alpha(t), delta=self.delta(t),
                                     epsilon=self.epsilon(t), gamma=self.gamma(t),
                                     efield=self.efield(t))

    def coefficient_model(self) -> "CoefficientModel":
        return CoefficientModel(mass=self.mass_profile(), omega=self.omega,
                                alpha=self.alpha, delta=self.delta,
                                epsilon=self.epsilon, gamma=self.gamma,
                                efield=self.efield)

    def closure_residuals(self, t) -> dict[str, float]:
        """Max absolute defects of every governing relation on the closed forms."""
        t = np.asarray(t, dtype=float)
        sigma = self.sigma(t)
        sigma_dot = self.sigma_dot(t)
        sigma_ddot = (0.5 * self.q) ** 2 * sigma
        m = self.m0 * np.exp(-self.q * t)
        alpha, delta = self.alpha(t), self.delta(t)
        epsilon, gamma, e = self.epsilon(t), self.gamma(t), self.efield(t)
        log_rate = -self.q
        sigma_eq = (sigma_ddot + self.omega ** 2 * sigma + log_rate * sigma_dot
                    - self.tau0 * sigma ** 4 / sigma ** 3)
        if self.q != 0.0:
            tau_ode = (4.0 * self.tau0 * sigma ** 3
                       + 2.0 * (log_rate / sigma_dot) * self.tau0 * sigma ** 4)
        else:
            # q = 0: sigma_dot vanishes everywhere, so use the un-divided form
            # tau' sigma_dot + 2 (m'/m) tau, which is identically zero here
            tau_ode = np.zeros_like(t)
        alpha_dot = self.q * np.exp(self.q * t)
        epsilon_dot = -self.q * epsilon
        gamma_dot = -0.5 * self.q * gamma
        return {
            "sigma_equation": float(np.max(np.abs(sigma_eq))),
            "tau_ode": float(np.max(np.abs(tau_ode))),
            "alpha_condition": float(np.max(np.abs(alpha_dot + 2.0 * delta / m))),
            "delta_condition": float(np.max(np.abs(alpha * m * self.omega ** 2 - epsilon / m))),
            "epsilon_condition": float(np.max(np.abs(epsilon_dot - 2.0 * delta * m * self.omega ** 2))),
            "gamma_condition": float(np.max(np.abs(gamma_dot - 2.0 * delta * e))),
            "gamma_closure": float(np.max(np.abs(gamma - 2.0 * m * alpha * e))),
        }


def exponential_scenario(m0: float, omega: float, tau0: float) -> ExponentialScenario:
    """Build the exponential-mass scenario; requires omega^2 >= tau0."""
    if not (m0 > 0.0):
        raise PositivityError(f"m0 must be positive, got {m0}")
    gap = omega ** 2 - tau0
    # omega^2 == tau0 is the constant-mass edge; absorb rounding of omega**2
    # so it yields q = 0 exactly instead of a spurious tiny or negative gap
    if abs(gap) <= 4.0 * np.finfo(float).eps * max(omega ** 2, abs(tau0)):
        gap = 0.0
    if gap < 0.0:
        raise ConstraintError(
            f"exponential scenario requires tau0 = omega^2 - q^2/4 with real q, "
            f"i.e. omega^2 >= tau0; got omega^2 = {omega ** 2:g} < tau0 = {tau0:g}")
    q = 2.0 * math.sqrt(gap)
    return ExponentialScenario(m0=m0, omega=omega, tau0=tau0, q=q)


@dataclass(frozen=True)
class CoefficientModel:
    """Coefficient functions of time, bundled with their mass and frequency.

    The quantum checks consume this interface; it can wrap either analytic
    closures or spline fits through a sampled trajectory.
    """

    mass: MassProfile
    omega: float
    alpha: Callable
    delta: Callable
    epsilon: Callable
    gamma: Callable
    efield: Callable

    def values_at(self, t: float) -> tuple[float, float, float, float, float]:
        return (float(self.alpha(t)), float(self.delta(t)), float(self.epsilon(t)),
                float(self.gamma(t)), float(self.efield(t)))

    def derivatives_at(self, t: float) -> tuple[float, float, float, float]:
        """Coefficient time-derivatives from the governing conditions."""
        alpha, delta, epsilon, _gamma, e = self.values_at(t)
        m = self.mass.mass_at(t)
        alpha_dot = -2.0 * delta / m
        delta_dot = alpha * m * self.omega ** 2 - epsilon / m
        epsilon_dot = 2.0 * delta * m * self.omega ** 2
        gamma_dot = 2.0 * delta * e
        return alpha_dot, delta_dot, epsilon_dot, gamma_dot


def coefficient_model_from_trajectory(coeff: CoefficientTrajectory, mass: MassProfile,
                                      omega: float) -> CoefficientModel:
    """Spline interpolation of a sampled coefficient trajectory."""
    splines = {name: CubicSpline(coeff.t, getattr(coeff, name))
               for name in ("alpha", "delta", "epsilon", "gamma", "efield")}
    return CoefficientModel(mass=mass, omega=omega, alpha=splines["alpha"],
                            delta=splines["delta"], epsilon=splines["epsilon"],
                            gamma=splines["gamma"], efield=splines["efield"])
