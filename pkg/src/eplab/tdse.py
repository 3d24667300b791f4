"""Grid quantum mechanics for checking invariance directly.

The Hamiltonian H = p^2/(2 m(t)) + m(t) omega^2 x^2 / 2 + x E(t) and the
candidate invariant I = (alpha p^2 + gamma x + delta {x,p} + eps x^2)/2
are discretized on a uniform Dirichlet grid: p^2 by the 3-point second
difference, p by the central first difference (symmetrized inside {x,p}),
x diagonal.  Wavefunctions evolve with the Crank-Nicolson scheme, sampling
H at midstep, which is unitary for Hermitian H and second order in dt.

Two verification signals are provided: constancy of the expectation
<I(t)> along the evolution (basis independent, the primary check) and the
operator residual || (dI/dt + (1/i)[I, H]) psi || / || psi || on a smooth
test state, which sits at the O(h^2) stencil floor when the coefficients
satisfy their governing conditions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import (ConfigError, HermiticityError, InvalidStateError,
                     NumericsError)
from .invariants import (CoefficientModel, CoefficientTrajectory,
                         coefficient_model_from_trajectory)
from .profiles import MassProfile

HERMITICITY_TOL = 1e-13
EXPECTATION_IMAG_LIMIT = 1e-8
BOUNDARY_AMPLITUDE_LIMIT = 1e-8


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid of n interior points with Dirichlet walls at xmin, xmax."""

    xmin: float
    xmax: float
    n: int

    def __post_init__(self):
        if not (self.xmax > self.xmin):
            raise ConfigError("grid: xmax must exceed xmin")
        if self.n < 16:
            raise ConfigError(f"grid: need at least 16 interior points, got {self.n}")

    @property
    def h(self) -> float:
        return (self.xmax - self.xmin) / (self.n + 1)

    @property
    def x(self) -> np.ndarray:
        return self.xmin + self.h * np.arange(1, self.n + 1)

    def refined(self, factor: int) -> "SpatialGrid":
        """Same domain with spacing reduced by an integer factor."""
        return SpatialGrid(self.xmin, self.xmax, (self.n + 1) * factor - 1)

    def coarsened(self, factor: int) -> "SpatialGrid":
        if (self.n + 1) % factor != 0:
            raise ConfigError(f"grid with n={self.n} cannot be coarsened by {factor}")
        return SpatialGrid(self.xmin, self.xmax, (self.n + 1) // factor - 1)


@dataclass(frozen=True)
class OperatorMatrix:
    """Hermitian banded operator in LAPACK band storage.

    bands[bw + i - j, j] holds element (i, j); bandwidth is at most 2
    (products of tridiagonal factors are pentadiagonal).
    """

    bands: np.ndarray
    bandwidth: int
    label: str

    def __post_init__(self):
        bands = np.asarray(self.bands, dtype=complex)
        if self.bandwidth not in (0, 1, 2):
            raise ConfigError("operator bandwidth must be 0, 1 or 2")
        if bands.shape[0] != 2 * self.bandwidth + 1:
            raise ConfigError("band array shape inconsistent with bandwidth")
        n = bands.shape[1]
        if np.max(np.abs(bands[self.bandwidth].imag)) > HERMITICITY_TOL:
            raise HermiticityError(f"{self.label}: diagonal is not real")
        for d in range(1, self.bandwidth + 1):
            upper = bands[self.bandwidth - d, d:]
            lower = bands[self.bandwidth + d, :n - d]
            if np.max(np.abs(upper - np.conj(lower))) > HERMITICITY_TOL:
                raise HermiticityError(f"{self.label}: band {d} breaks M = M^dagger")
        bands.flags.writeable = False
        object.__setattr__(self, "bands", bands)

    @property
    def n(self) -> int:
        return self.bands.shape[1]

    def matvec(self, psi: np.ndarray) -> np.ndarray:
        bw, bands = self.bandwidth, self.bands
        out = bands[bw] * psi
        for d in range(1, bw + 1):
            out[:-d] += bands[bw - d, d:] * psi[d:]
            out[d:] += bands[bw + d, :-d] * psi[:-d]
        return out

    def to_sparse(self) -> scipy.sparse.spmatrix:
        bw, bands, n = self.bandwidth, self.bands, self.n
        diagonals = [bands[bw]]
        offsets = [0]
        for d in range(1, bw + 1):
            diagonals.append(bands[bw - d, d:])
            offsets.append(d)
            diagonals.append(bands[bw + d, :n - d])
            offsets.append(-d)
        return scipy.sparse.diags(diagonals, offsets, format="csr")

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()


def build_hamiltonian(grid: SpatialGrid, mass: MassProfile, omega: float,
                      e_value: float, t: float) -> OperatorMatrix:
    """H(t) on the grid, with the field strength E(t) supplied by the caller."""
    m = mass.mass_at(t)
    x, h = grid.x, grid.h
    diag = 1.0 / (m * h ** 2) + 0.5 * m * omega ** 2 * x ** 2 + x * e_value
    off = np.full(grid.n - 1, -0.5 / (m * h ** 2))
    bands = np.zeros((3, grid.n), dtype=complex)
    bands[0, 1:] = off
    bands[1] = diag
    bands[2, :-1] = off
    return OperatorMatrix(bands=bands, bandwidth=1, label="hamiltonian")


def build_invariant(grid: SpatialGrid, alpha: float, delta: float,
                    epsilon: float, gamma: float) -> OperatorMatrix:
    """I on the grid for one set of coefficient values.

    {x, p} is assembled as XP + PX with the central-difference p, which is
    Hermitian by construction and keeps the matrix tridiagonal.
    """
    x, h = grid.x, grid.h
    diag = alpha / h ** 2 + 0.5 * gamma * x + 0.5 * epsilon * x ** 2
    x_mid = x[:-1] + x[1:]
    upper = -0.5 * alpha / h ** 2 - 0.25j * delta * x_mid / h
    bands = np.zeros((3, grid.n), dtype=complex)
    bands[0, 1:] = upper
    bands[1] = diag
    bands[2, :-1] = np.conj(upper)
    return OperatorMatrix(bands=bands, bandwidth=1, label="invariant")


@dataclass
class WaveState:
    """Complex amplitudes on the interior points, with a time stamp."""

    psi: np.ndarray
    time: float = 0.0

    def norm(self, grid: SpatialGrid) -> float:
        return float(np.sqrt(grid.h * np.sum(np.abs(self.psi) ** 2)))

    def normalized(self, grid: SpatialGrid) -> "WaveState":
        return WaveState(psi=self.psi / self.norm(grid), time=self.time)

    def boundary_amplitude(self) -> float:
        return float(max(abs(self.psi[0]), abs(self.psi[-1])))


@dataclass(frozen=True)
class GaussianSpec:
    """Initial Gaussian packet: exp(-(x-center)^2/(4 width^2) + i momentum x)."""

    center: float = 0.0
    width: float = 1.0
    momentum: float = 0.0


def gaussian_state(grid: SpatialGrid, center: float = 0.0, width: float = 1.0,
                   momentum: float = 0.0) -> WaveState:
    """Normalized Gaussian packet; width is the rms position spread."""
    if width <= 0.0:
        raise ConfigError("gaussian width must be positive")
    x = grid.x
    psi = np.exp(-((x - center) ** 2) / (4.0 * width ** 2) + 1j * momentum * x)
    state = WaveState(psi=psi.astype(complex), time=0.0)
    return state.normalized(grid)


def evolve_crank_nicolson(state: WaveState, hamiltonian_at: Callable[[float], OperatorMatrix],
                          grid: SpatialGrid, dt: float, steps: int) -> WaveState:
    """Advance `steps` Crank-Nicolson steps, sampling H at each midstep."""
    if dt <= 0.0:
        raise ConfigError("dt must be positive")
    psi = state.psi.astype(complex, copy=True)
    t = state.time
    for _ in range(steps):
        h_op = hamiltonian_at(t + 0.5 * dt)
        if h_op.bandwidth != 1:
            raise ConfigError("crank-nicolson stepping expects a tridiagonal Hamiltonian")
        z = 0.5j * dt
        b_bands = -z * h_op.bands
        b_bands[1] += 1.0
        rhs = b_bands[1] * psi
        rhs[:-1] += b_bands[0, 1:] * psi[1:]
        rhs[1:] += b_bands[2, :-1] * psi[:-1]
        a_bands = z * np.asarray(h_op.bands)
        a_bands[1] += 1.0
        try:
            psi = scipy.linalg.solve_banded((1, 1), a_bands, rhs,
                                            overwrite_ab=True, overwrite_b=True,
                                            check_finite=False)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise NumericsError(f"banded Crank-Nicolson solve failed at t={t:.6g}") from exc
        t += dt
    return WaveState(psi=psi, time=t)


def invariant_expectation(state: WaveState, invariant: OperatorMatrix,
                          grid: SpatialGrid) -> float:
    """h * psi^dagger I psi; the imaginary part is a Hermiticity witness."""
    val = grid.h * np.vdot(state.psi, invariant.matvec(state.psi))
    if abs(val.imag) > EXPECTATION_IMAG_LIMIT:
        raise HermiticityError(
            f"expectation imaginary part {val.imag:.3e} exceeds {EXPECTATION_IMAG_LIMIT:g}")
    return float(val.real)


def _model_from(coefficients, mass: MassProfile, omega: float) -> CoefficientModel:
    if isinstance(coefficients, CoefficientModel):
        return coefficients
    if isinstance(coefficients, CoefficientTrajectory):
        return coefficient_model_from_trajectory(coefficients, mass, omega)
    raise ConfigError("expected a CoefficientTrajectory or CoefficientModel")


def invariance_residual(coefficients, mass: MassProfile, omega: float,
                        test_state: WaveState, grid: SpatialGrid, t: float,
                        derivatives: str = "substitution") -> float:
    """|| (dI/dt + (1/i)[I, H]) psi || / || psi || at time t.

    Coefficient time-derivatives come from the governing conditions
    (default) or from central differences on the sampled trajectory.
    """
    if test_state.boundary_amplitude() > BOUNDARY_AMPLITUDE_LIMIT:
        raise InvalidStateError(
            "test state has non-negligible boundary amplitude; enlarge the domain")
    model = _model_from(coefficients, mass, omega)
    alpha, delta, epsilon, gamma, e_val = model.values_at(t)
    if derivatives == "substitution":
        alpha_dot, delta_dot, epsilon_dot, gamma_dot = model.derivatives_at(t)
    elif derivatives == "finite_difference":
        if not isinstance(coefficients, CoefficientTrajectory):
            raise ConfigError("finite-difference derivatives need a sampled trajectory")
        alpha_dot, delta_dot, epsilon_dot, gamma_dot = _fd_derivatives(coefficients, t)
    else:
        raise ConfigError(f"unknown derivatives mode {derivatives!r}")

    i_op = build_invariant(grid, alpha, delta, epsilon, gamma)
    h_op = build_hamiltonian(grid, mass, omega, e_val, t)
    idot_op = build_invariant(grid, alpha_dot, delta_dot, epsilon_dot, gamma_dot)

    i_sp = i_op.to_sparse()
    h_sp = h_op.to_sparse()
    residual_op = idot_op.to_sparse() + (i_sp @ h_sp - h_sp @ i_sp) / 1j
    r = residual_op @ test_state.psi
    return float(np.linalg.norm(r) / np.linalg.norm(test_state.psi))


def _fd_derivatives(coeff: CoefficientTrajectory, t: float) -> tuple[float, float, float, float]:
    j = int(np.clip(np.searchsorted(coeff.t, t), 1, len(coeff.t) - 2))
    dt2 = coeff.t[j + 1] - coeff.t[j - 1]
    return tuple(
        float((getattr(coeff, name)[j + 1] - getattr(coeff, name)[j - 1]) / dt2)
        for name in ("alpha", "delta", "epsilon", "gamma")
    )


@dataclass(frozen=True)
class InvarianceCheck:
    """Time series and summary from one invariant-constancy run."""

    times: np.ndarray
    expectation: np.ndarray
    norm: np.ndarray
    residual: np.ndarray
    boundary_amplitude: np.ndarray
    n: int
    h: float
    dt: float
    drift: float
    max_norm_drift: float
    max_boundary_amplitude: float
    valid: bool
    runtime_seconds: float
    snapshots: tuple = ()

    @property
    def expectation0(self) -> float:
        return float(self.expectation[0])


def run_invariance_check(model: CoefficientModel, grid: SpatialGrid, dt: float,
                         t_final: float, initial_state: WaveState | GaussianSpec | None = None,
                         t_start: float = 0.0, measure_every: int = 50,
                         compute_residual: bool = True,
                         snapshot_times: Sequence[float] = ()) -> InvarianceCheck:
    """Evolve under H(t) and track <I(t)>, the norm and the boundary amplitude.

    The drift is max_t |<I(t)> - <I(0)>| / |<I(0)>| over the measurement
    times; a run is valid while the boundary amplitude stays negligible.
    Each requested snapshot time captures |psi|^2 at the first measurement
    at or after it (h * sum equals the squared norm).
    """
    started = time.perf_counter()
    if isinstance(initial_state, WaveState):
        state = WaveState(psi=initial_state.psi.copy(), time=t_start)
    else:
        spec = initial_state if isinstance(initial_state, GaussianSpec) else GaussianSpec()
        state = gaussian_state(grid, spec.center, spec.width, spec.momentum)
        state.time = t_start
    state = state.normalized(grid)
    state.time = t_start

    def hamiltonian_at(t: float) -> OperatorMatrix:
        return build_hamiltonian(grid, model.mass, model.omega, float(model.efield(t)), t)

    steps_total = max(1, round((t_final - t_start) / dt))
    measure_every = max(1, int(measure_every))

    times, expectation, norms, residuals, boundary = [], [], [], [], []
    snapshots: list[tuple[float, np.ndarray]] = []
    pending_snapshots = sorted(float(ts) for ts in snapshot_times)

    def capture(s: WaveState) -> None:
        while pending_snapshots and s.time >= pending_snapshots[0] - 1e-12:
            pending_snapshots.pop(0)
            snapshots.append((s.time, np.abs(s.psi) ** 2))

    def measure(s: WaveState) -> None:
        alpha, delta, epsilon, gamma, _e = model.values_at(s.time)
        i_op = build_invariant(grid, alpha, delta, epsilon, gamma)
        times.append(s.time)
        expectation.append(invariant_expectation(s, i_op, grid))
        norms.append(s.norm(grid))
        boundary.append(s.boundary_amplitude())
        if compute_residual:
            try:
                residuals.append(invariance_residual(model, model.mass, model.omega,
                                                     s, grid, s.time))
            except InvalidStateError:
                # boundary leakage already invalidates the run via its flag
                residuals.append(np.nan)
        else:
            residuals.append(np.nan)

    measure(state)
    capture(state)
    done = 0
    while done < steps_total:
        chunk = min(measure_every, steps_total - done)
        state = evolve_crank_nicolson(state, hamiltonian_at, grid, dt, chunk)
        done += chunk
        measure(state)
        capture(state)

    times_arr = np.asarray(times)
    exp_arr = np.asarray(expectation)
    norm_arr = np.asarray(norms)
    res_arr = np.asarray(residuals)
    bnd_arr = np.asarray(boundary)
    ref = exp_arr[0]
    drift = float(np.max(np.abs(exp_arr - ref)) / abs(ref))
    max_norm_drift = float(np.max(np.abs(norm_arr - norm_arr[0])))
    max_boundary = float(np.max(bnd_arr))
    return InvarianceCheck(
        times=times_arr, expectation=exp_arr, norm=norm_arr, residual=res_arr,
        boundary_amplitude=bnd_arr, n=grid.n, h=grid.h, dt=dt, drift=drift,
        max_norm_drift=max_norm_drift, max_boundary_amplitude=max_boundary,
        valid=bool(max_boundary < BOUNDARY_AMPLITUDE_LIMIT),
        runtime_seconds=time.perf_counter() - started,
        snapshots=tuple(snapshots),
    )


@dataclass(frozen=True)
class RefinementStudy:
    """Invariance checks on successively refined grids (coarsest first)."""

    checks: tuple[InvarianceCheck, ...]
    drifts: tuple[float, ...]
    pair_orders: tuple[float, ...]
    order: float


def convergence_order(values: Sequence[float], refinement: float = 2.0) -> tuple[tuple[float, ...], float]:
    """Per-pair convergence orders and their mean for values on h, h/r, h/r^2, ..."""
    vals = [float(v) for v in values]
    if len(vals) < 2 or any(v <= 0.0 for v in vals):
        raise ConfigError("order estimate needs at least two positive values")
    pairs = tuple(float(np.log(vals[i] / vals[i + 1]) / np.log(refinement))
                  for i in range(len(vals) - 1))
    return pairs, float(np.mean(pairs))


def run_refinement_study(model: CoefficientModel, grid: SpatialGrid, dt: float,
                         t_final: float, initial_state: GaussianSpec | None = None,
                         levels: int = 3, t_start: float = 0.0,
                         measure_every: int = 50,
                         compute_residual: bool = False,
                         snapshot_times: Sequence[float] = ()) -> RefinementStudy:
    """Repeat the invariance check on grids h * 2^(levels-1), ..., h.

    Snapshots, when requested, are captured on the finest level only.
    """
    if levels < 2:
        raise ConfigError("a refinement study needs at least two levels")
    spec = initial_state if initial_state is not None else GaussianSpec()
    checks = []
    for level in range(levels - 1, -1, -1):
        g = grid.coarsened(2 ** level) if level > 0 else grid
        checks.append(run_invariance_check(model, g, dt, t_final,
                                           initial_state=spec, t_start=t_start,
                                           measure_every=measure_every,
                                           compute_residual=compute_residual,
                                           snapshot_times=snapshot_times if level == 0 else ()))
    drifts = tuple(c.drift for c in checks)
    pair_orders, order = convergence_order(drifts, refinement=2.0)
    return RefinementStudy(checks=tuple(checks), drifts=drifts,
                           pair_orders=pair_orders, order=order)
