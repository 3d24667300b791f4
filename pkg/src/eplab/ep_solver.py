"""Integrators and oracles for the Ermakov-Pinney family of equations.

The central object is the damped, tau-generalized oscillator equation for
the scale function sigma,

    sigma'' + omega^2 sigma + (m'/m) sigma' = tau(sigma) / sigma^3,

together with three companions: the classic constant-mass equation (the
tau = lambda^2 limit) with its quadratic-form closed solution, a variant
with time-dependent-frequency damping of the opposite sign, and the polar
split of the complex solutions that exist when tau is the quartic
monomial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, InsufficientDataError
from .odeint import OdeResult, integrate_dopri45, integrate_rk4
from .profiles import MassProfile, ScenarioConfig, TimeGrid

POSITIVITY_FLOOR = 1e-10

DEFAULT_ABS_TOL = 1e-10
DEFAULT_REL_TOL = 1e-10


@dataclass(frozen=True)
class SolverMeta:
    """Bookkeeping for how a trajectory was produced."""

    solver: str
    dt: float | None
    abs_tol: float | None
    rel_tol: float | None
    n_accepted: int
    n_rejected: int


def _freeze(*arrays: np.ndarray) -> None:
    for arr in arrays:
        arr.flags.writeable = False


def _check_time_axis(t: np.ndarray) -> None:
    if len(t) < 2:
        raise ConfigError("trajectory needs at least two samples")
    if np.any(np.diff(t) <= 0.0):
        raise ConfigError("trajectory time samples must be strictly increasing")


@dataclass(frozen=True)
class SigmaTrajectory:
    """Sampled solution (t, sigma, sigma_dot), sigma > 0 everywhere."""

    t: np.ndarray
    sigma: np.ndarray
    sigma_dot: np.ndarray
    meta: SolverMeta

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        s = np.asarray(self.sigma, dtype=float)
        sd = np.asarray(self.sigma_dot, dtype=float)
        _check_time_axis(t)
        if not (len(t) == len(s) == len(sd)):
            raise ConfigError("trajectory columns differ in length")
        if np.any(s <= 0.0):
            raise ConfigError("sigma samples must be strictly positive")
        _freeze(t, s, sd)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "sigma_dot", sd)

    def __len__(self) -> int:
        return len(self.t)


@dataclass(frozen=True)
class ComplexSplitTrajectory:
    """Polar decomposition samples: modulus xi > 0 and phase eta."""

    t: np.ndarray
    xi: np.ndarray
    xi_dot: np.ndarray
    eta: np.ndarray
    eta_dot: np.ndarray
    meta: SolverMeta

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        cols = [np.asarray(c, dtype=float)
                for c in (self.xi, self.xi_dot, self.eta, self.eta_dot)]
        _check_time_axis(t)
        if any(len(c) != len(t) for c in cols):
            raise ConfigError("trajectory columns differ in length")
        if np.any(cols[0] <= 0.0):
            raise ConfigError("xi samples must be strictly positive")
        _freeze(t, *cols)
        object.__setattr__(self, "t", t)
        for name, c in zip(("xi", "xi_dot", "eta", "eta_dot"), cols):
            object.__setattr__(self, name, c)

    def sigma_complex(self) -> np.ndarray:
        """Reconstructed complex solution xi * exp(i eta)."""
        return self.xi * np.exp(1j * self.eta)

    def __len__(self) -> int:
        return len(self.t)


def _run(rhs, grid: TimeGrid, y0, solver: str, positivity_index=None) -> tuple[OdeResult, SolverMeta]:
    t_eval = grid.times()
    if solver == "rk4_fixed" or (solver is None and grid.mode == "fixed"):
        res = integrate_rk4(rhs, t_eval, y0,
                            positivity_index=positivity_index,
                            positivity_floor=POSITIVITY_FLOOR)
        dt = float(t_eval[1] - t_eval[0])
        meta = SolverMeta("rk4_fixed", dt, None, None, res.n_accepted, res.n_rejected)
        return res, meta
    abs_tol = grid.abs_tol if grid.abs_tol is not None else DEFAULT_ABS_TOL
    rel_tol = grid.rel_tol if grid.rel_tol is not None else DEFAULT_REL_TOL
    res = integrate_dopri45(rhs, t_eval, y0, abs_tol, rel_tol,
                            positivity_index=positivity_index,
                            positivity_floor=POSITIVITY_FLOOR)
    meta = SolverMeta("rk45_adaptive", None, abs_tol, rel_tol,
                      res.n_accepted, res.n_rejected)
    return res, meta


def _inverse_cube_term(tau, sigma: float) -> float:
    """tau(sigma) / sigma^3 for trial evaluations, without domain checks.

    The monomial kind reduces algebraically to tau0 * sigma, which stays
    finite through sigma = 0; the constant kind genuinely blows up there
    and returns nan so the step controller rejects and shrinks.
    """
    if tau.kind == "monomial":
        return tau.value * sigma
    den = sigma ** 3
    if den == 0.0:
        return math.nan
    return tau.value / den


def integrate_modified_ep(cfg: ScenarioConfig) -> SigmaTrajectory:
    """Integrate the damped tau-generalized equation for sigma(t).

    Aborts with SingularityError (reporting the crossing time) if sigma
    reaches the positivity floor, and StiffnessError on adaptive step
    underflow.
    """
    mass, tau, omega2 = cfg.mass, cfg.tau, cfg.omega ** 2

    def rhs(t, y):
        sigma, sigma_dot = y
        acc = (-omega2 * sigma - mass.log_rate_at(t) * sigma_dot
               + _inverse_cube_term(tau, sigma))
        return np.array([sigma_dot, acc])

    res, meta = _run(rhs, cfg.grid, np.array([cfg.sigma0, cfg.sigma_dot0]),
                     cfg.solver, positivity_index=0)
    return SigmaTrajectory(t=res.t, sigma=res.y[:, 0], sigma_dot=res.y[:, 1], meta=meta)


def integrate_ft_variant(f_profile: MassProfile, chi0: float, chi_dot0: float,
                         grid: TimeGrid, solver: str = "rk45_adaptive") -> SigmaTrajectory:
    """Integrate the companion equation chi'' + f^2 chi - (f'/f) chi' = f^2 / chi^3.

    Compared with the sigma equation the damping enters with the opposite
    sign and the positive parametrizing function f(t) plays the role of
    both frequency and coupling amplitude.  Any positive MassProfile-shaped
    object serves as f.
    """
    if not (chi0 > 0.0):
        raise ConfigError(f"chi0 must be positive, got {chi0}")

    def rhs(t, y):
        chi, chi_dot = y
        den = chi ** 3
        if den == 0.0:
            return np.array([chi_dot, math.nan])
        f2 = f_profile.mass_at(t) ** 2
        acc = -f2 * chi + f_profile.log_rate_at(t) * chi_dot + f2 / den
        return np.array([chi_dot, acc])

    res, meta = _run(rhs, grid, np.array([chi0, chi_dot0]), solver, positivity_index=0)
    return SigmaTrajectory(t=res.t, sigma=res.y[:, 0], sigma_dot=res.y[:, 1], meta=meta)


def pinney_closed_form(A: float, B: float, C: float, omega: float, t):
    """Closed-form positive solution sqrt(A r^2 + 2 B r s + C s^2).

    r = cos(omega t) and s = sin(omega t) / omega are the unit-Wronskian
    fundamental pair, so the solved constant-mass equation has
    lambda^2 = (A C - B^2) * W^2 with W = 1.  (The W-exponent was settled
    numerically; see pinney_lambda_squared and the residual tests.)
    """
    scalar = np.isscalar(t)
    tt = np.asarray(t, dtype=float)
    r = np.cos(omega * tt)
    s = np.sin(omega * tt) / omega
    form = A * r ** 2 + 2.0 * B * r * s + C * s ** 2
    if np.any(form <= 0.0):
        raise DomainError("quadratic form is not positive at the requested time(s)")
    out = np.sqrt(form)
    return float(out) if scalar else out


def pinney_lambda_squared(A: float, B: float, C: float) -> float:
    """Coupling lambda^2 implied by the quadratic-form coefficients (W = 1)."""
    return A * C - B * B


def pinney_coefficients_from_initial(sigma0: float, sigma_dot0: float,
                                     lambda_squared: float) -> tuple[float, float, float]:
    """Map initial conditions at t = 0 onto quadratic-form coefficients (A, B, C)."""
    if not (sigma0 > 0.0):
        raise ConfigError(f"sigma0 must be positive, got {sigma0}")
    A = sigma0 ** 2
    B = sigma0 * sigma_dot0
    C = (lambda_squared + B ** 2) / A
    return A, B, C


def integrate_complex_split(cfg: ScenarioConfig, xi0: float, xi_dot0: float,
                            eta0: float, eta_dot0: float) -> ComplexSplitTrajectory:
    """Integrate the coupled modulus/phase system of the complex solutions.

    Valid only for the monomial tau, where sigma satisfies the linear
    equation sigma'' + (m'/m) sigma' + (omega^2 - tau0) sigma = 0 and the
    substitution sigma = xi exp(i eta) splits into

        xi''  + (m'/m) xi'  + (Omega^2 - eta'^2) xi = 0
        2 xi' eta' + xi (eta'' + (m'/m) eta') = 0

    with Omega^2 = omega^2 - tau0.
    """
    if cfg.tau.kind != "monomial":
        raise ConfigError("complex split is defined for the monomial tau kind only")
    if not (xi0 > 0.0):
        raise ConfigError(f"xi0 must be positive, got {xi0}")
    mass = cfg.mass
    omega_eff2 = cfg.omega ** 2 - cfg.tau.value

    def rhs(t, y):
        xi, xi_dot, _eta, eta_dot = y
        if xi == 0.0:
            return np.array([xi_dot, math.nan, eta_dot, math.nan])
        damping = mass.log_rate_at(t)
        xi_acc = -damping * xi_dot - (omega_eff2 - eta_dot ** 2) * xi
        eta_acc = -damping * eta_dot - 2.0 * xi_dot * eta_dot / xi
        return np.array([xi_dot, xi_acc, eta_dot, eta_acc])

    res, meta = _run(rhs, cfg.grid, np.array([xi0, xi_dot0, eta0, eta_dot0]),
                     cfg.solver, positivity_index=0)
    return ComplexSplitTrajectory(t=res.t, xi=res.y[:, 0], xi_dot=res.y[:, 1],
                                  eta=res.y[:, 2], eta_dot=res.y[:, 3], meta=meta)


def _require_uniform(t: np.ndarray) -> float:
    dt = np.diff(t)
    if dt.max() - dt.min() > 1e-8 * dt.mean():
        raise DomainError("residual stencils require a uniform time grid")
    return float(dt.mean())


def ep_residual(traj: SigmaTrajectory, cfg: ScenarioConfig) -> float:
    """Max interior defect of the sigma equation, with sigma'' from a 5-point stencil."""
    if len(traj) < 5:
        raise InsufficientDataError("residual stencil needs at least 5 samples")
    dt = _require_uniform(traj.t)
    s = traj.sigma
    sdd = (-s[:-4] + 16.0 * s[1:-3] - 30.0 * s[2:-2] + 16.0 * s[3:-1] - s[4:]) / (12.0 * dt ** 2)
    ti = traj.t[2:-2]
    si = s[2:-2]
    sdi = traj.sigma_dot[2:-2]
    defect = (sdd + cfg.omega ** 2 * si + cfg.mass.log_rate_at(ti) * sdi
              - cfg.tau.tau_at(si) / si ** 3)
    return float(np.max(np.abs(defect)))


def ft_residual(traj: SigmaTrajectory, f_profile: MassProfile) -> float:
    """Max interior defect of the companion equation (same stencil contract)."""
    if len(traj) < 5:
        raise InsufficientDataError("residual stencil needs at least 5 samples")
    dt = _require_uniform(traj.t)
    c = traj.sigma
    cdd = (-c[:-4] + 16.0 * c[1:-3] - 30.0 * c[2:-2] + 16.0 * c[3:-1] - c[4:]) / (12.0 * dt ** 2)
    ti = traj.t[2:-2]
    ci = c[2:-2]
    cdi = traj.sigma_dot[2:-2]
    f2 = f_profile.mass_at(ti) ** 2
    defect = cdd + f2 * ci - f_profile.log_rate_at(ti) * cdi - f2 / ci ** 3
    return float(np.max(np.abs(defect)))


def split_linear_residual(traj: ComplexSplitTrajectory, cfg: ScenarioConfig) -> float:
    """Defect of the reconstructed complex sigma against its linear equation.

    sigma and sigma' come from the sampled (xi, eta) pair exactly; sigma''
    is a 5-point stencil applied to sigma'.
    """
    if len(traj) < 5:
        raise InsufficientDataError("residual stencil needs at least 5 samples")
    if cfg.tau.kind != "monomial":
        raise ConfigError("linear-equation residual requires the monomial tau kind")
    dt = _require_uniform(traj.t)
    omega_eff2 = cfg.omega ** 2 - cfg.tau.value
    sigma = traj.sigma_complex()
    sigma_dot = (traj.xi_dot + 1j * traj.xi * traj.eta_dot) * np.exp(1j * traj.eta)
    d = sigma_dot
    sigma_ddot = (d[:-4] - 8.0 * d[1:-3] + 8.0 * d[3:-1] - d[4:]) / (12.0 * dt)
    ti = traj.t[2:-2]
    defect = (sigma_ddot + cfg.mass.log_rate_at(ti) * sigma_dot[2:-2]
              + omega_eff2 * sigma[2:-2])
    return float(np.max(np.abs(defect)))
