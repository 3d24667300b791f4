"""Explicit Runge-Kutta integration engines.

Two drivers are provided:

* ``integrate_dopri45`` -- embedded Dormand-Prince 4(5) pair with step-size
  control and the standard quartic dense-output interpolant, so solutions
  are sampled on an arbitrary user grid without constraining the step
  sequence.  The 5th-order solution is propagated (local extrapolation).
* ``integrate_rk4`` -- classical fixed-step RK4 marching exactly on the
  output grid; fully deterministic, used when byte-identical reruns matter.

Both drivers optionally watch one solution component for a positivity
floor and report the estimated crossing time when it is reached.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import SingularityError, StiffnessError

# Dormand-Prince 5(4) coefficients
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
# difference between the 5th- and embedded 4th-order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
               -17253 / 339200, 22 / 525, -1 / 40])
# dense-output weights for the quartic interpolant
_D = np.array([-12715105075 / 11282082432, 0.0, 87487479700 / 32700410799,
               -10690763975 / 1880347072, 701980252875 / 199316789632,
               -1453857185 / 822651844, 69997945 / 29380423])

_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_SAFETY = 0.9


@dataclass
class OdeResult:
    """Solution sampled on the requested output grid."""

    t: np.ndarray
    y: np.ndarray  # shape (len(t), dim)
    n_accepted: int
    n_rejected: int


class _DenseSegment:
    """Quartic interpolant over one accepted step [t0, t0 + h]."""

    def __init__(self, t0, h, y0, y1, k):
        ydiff = y1 - y0
        bspl = h * k[0] - ydiff
        self.t0 = t0
        self.h = h
        self.r1 = y0
        self.r2 = ydiff
        self.r3 = bspl
        self.r4 = ydiff - h * k[6] - bspl
        self.r5 = h * (_D @ k)

    def __call__(self, t):
        theta = (t - self.t0) / self.h
        theta1 = 1.0 - theta
        return self.r1 + theta * (self.r2 + theta1 * (self.r3 + theta * (self.r4 + theta1 * self.r5)))


def _error_norm(err, y0, y1, abs_tol, rel_tol):
    scale = abs_tol + rel_tol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(f, t0, y0, t_span, abs_tol, rel_tol):
    f0 = f(t0, y0)
    scale = abs_tol + rel_tol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 * t_span if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    return min(h0, 0.1 * t_span), f0


def _locate_floor_crossing(segment, t_lo, t_hi, index, floor):
    """Bisect the dense interpolant for the first floor crossing in (t_lo, t_hi]."""
    a, b = t_lo, t_hi
    for _ in range(80):
        mid = 0.5 * (a + b)
        if segment(mid)[index] > floor:
            a = mid
        else:
            b = mid
        if b - a <= 1e-14 * max(1.0, abs(b)):
            break
    return b


def integrate_dopri45(
    f: Callable[[float, np.ndarray], np.ndarray],
    t_eval: np.ndarray,
    y0: np.ndarray,
    abs_tol: float,
    rel_tol: float,
    positivity_index: int | None = None,
    positivity_floor: float = 0.0,
    max_steps: int = 5_000_000,
) -> OdeResult:
    """Integrate y' = f(t, y) from t_eval[0] to t_eval[-1], sampling at t_eval."""
    t_eval = np.asarray(t_eval, dtype=float)
    t0, t1 = float(t_eval[0]), float(t_eval[-1])
    span = t1 - t0
    h_min = 1e-14 * span
    y = np.array(y0, dtype=float)
    dim = y.size

    out = np.empty((len(t_eval), dim))
    out[0] = y
    next_out = 1

    t = t0
    h, f0 = _initial_step(f, t0, y, span, abs_tol, rel_tol)
    k = np.empty((7, dim))
    k[0] = f0
    n_accepted = 0
    n_rejected = 0

    while t < t1:
        if h < h_min:
            raise StiffnessError(
                f"adaptive step underflow at t={t:.6g} (dt={h:.3g} < {h_min:.3g})")
        if n_accepted + n_rejected > max_steps:
            raise StiffnessError(f"step budget exceeded near t={t:.6g}")
        h = min(h, t1 - t)

        for i in range(1, 7):
            yi = y + h * (_A[i] @ k[:i])
            k[i] = f(t + _C[i] * h, yi)
        y_new = yi  # stage 7 evaluates at the 5th-order solution (FSAL)
        err_vec = h * (_E @ k)

        if not np.all(np.isfinite(y_new)) or not np.all(np.isfinite(err_vec)):
            n_rejected += 1
            h *= _MIN_FACTOR
            continue

        err = _error_norm(err_vec, y, y_new, abs_tol, rel_tol)
        if err > 1.0:
            n_rejected += 1
            h *= max(_MIN_FACTOR, _SAFETY * err ** -0.2)
            continue

        n_accepted += 1
        t_new = t + h
        segment = _DenseSegment(t, h, y, y_new, k)

        while next_out < len(t_eval) and t_eval[next_out] <= t_new + 1e-15 * max(1.0, abs(t_new)):
            ts = min(t_eval[next_out], t_new)
            ys = segment(ts)
            if positivity_index is not None and ys[positivity_index] <= positivity_floor:
                t_cross = _locate_floor_crossing(segment, t, ts, positivity_index, positivity_floor)
                raise SingularityError(
                    f"solution reached the positivity floor {positivity_floor:g} "
                    f"near t={t_cross:.9g}", t_cross=t_cross)
            out[next_out] = ys
            next_out += 1

        if positivity_index is not None and y_new[positivity_index] <= positivity_floor:
            t_cross = _locate_floor_crossing(segment, t, t_new, positivity_index, positivity_floor)
            raise SingularityError(
                f"solution reached the positivity floor {positivity_floor:g} "
                f"near t={t_cross:.9g}", t_cross=t_cross)

        y = y_new
        t = t_new
        k[0] = k[6]  # FSAL: last stage is f at the accepted point
        factor = _MAX_FACTOR if err == 0.0 else min(_MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err ** -0.2))
        h *= factor

    return OdeResult(t=t_eval, y=out, n_accepted=n_accepted, n_rejected=n_rejected)


def integrate_rk4(
    f: Callable[[float, np.ndarray], np.ndarray],
    t_grid: np.ndarray,
    y0: np.ndarray,
    positivity_index: int | None = None,
    positivity_floor: float = 0.0,
) -> OdeResult:
    """Classical RK4 marching node-to-node on t_grid (one step per interval)."""
    t_grid = np.asarray(t_grid, dtype=float)
    y = np.array(y0, dtype=float)
    out = np.empty((len(t_grid), y.size))
    out[0] = y

    for j in range(len(t_grid) - 1):
        t = t_grid[j]
        h = t_grid[j + 1] - t
        k1 = f(t, y)
        k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = f(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise StiffnessError(f"fixed-step solution lost finiteness near t={t_grid[j + 1]:.6g}")
        if positivity_index is not None and y[positivity_index] <= positivity_floor:
            prev = out[j, positivity_index]
            frac = (prev - positivity_floor) / max(prev - y[positivity_index], 1e-300)
            t_cross = t + frac * h
            raise SingularityError(
                f"solution reached the positivity floor {positivity_floor:g} "
                f"near t={t_cross:.9g}", t_cross=t_cross)
        out[j + 1] = y

    return OdeResult(t=t_grid, y=out, n_accepted=len(t_grid) - 1, n_rejected=0)
