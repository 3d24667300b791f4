"""Delimited and JSON output with reproducible formatting.

All CSV files use comma separators, LF line endings, a header row and
17-significant-digit floats, so identical inputs produce byte-identical
files.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .ep_solver import ComplexSplitTrajectory, SigmaTrajectory
from .invariants import CoefficientTrajectory


def format_float(x: float) -> str:
    return f"{float(x):.17g}"


def write_csv(path: Path, header: Sequence[str], columns: Sequence[np.ndarray]) -> Path:
    path = Path(path)
    rows = zip(*columns)
    with path.open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_float(v) for v in row) + "\n")
    return path


def write_sigma_csv(path: Path, traj: SigmaTrajectory) -> Path:
    return write_csv(path, ("t", "sigma", "sigma_dot"),
                     (traj.t, traj.sigma, traj.sigma_dot))


def write_split_csv(path: Path, traj: ComplexSplitTrajectory) -> Path:
    return write_csv(path, ("t", "xi", "xi_dot", "eta", "eta_dot"),
                     (traj.t, traj.xi, traj.xi_dot, traj.eta, traj.eta_dot))


def write_coefficients_csv(path: Path, coeff: CoefficientTrajectory) -> Path:
    return write_csv(path, ("t", "alpha", "delta", "epsilon", "gamma", "E"),
                     (coeff.t, coeff.alpha, coeff.delta, coeff.epsilon,
                      coeff.gamma, coeff.efield))


def write_invariance_csv(path: Path, times, expectation, norm, residual) -> Path:
    return write_csv(path, ("t", "expectation_I", "norm", "residual"),
                     (times, expectation, norm, residual))


def omega_column_name(omega: float) -> str:
    return f"m_omega_{omega:g}"


def write_figure1_csv(path: Path, t: np.ndarray, omegas: Iterable[float],
                      curves: Sequence[np.ndarray]) -> Path:
    header = ["t"] + [omega_column_name(w) for w in omegas]
    return write_csv(path, header, [t, *curves])


def write_json(path: Path, payload: dict) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(json.dumps(payload, indent=2) + "\n")
    return path


def sha256_of(path: Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
