"""Matplotlib renderings written next to the delimited output."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_DPI = 150


def plot_figure1(path: Path, t: np.ndarray, omegas: Sequence[float],
                 curves: Sequence[np.ndarray]) -> Path:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for omega, m in zip(omegas, curves):
        ax.plot(t, m, label=rf"$\omega = {omega:g}$")
    ax.set_xlabel("t")
    ax.set_ylabel("m(t)")
    ax.set_title("Mass decay for the locked exponential family")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return Path(path)


def plot_sigma(path: Path, traj) -> Path:
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6.0, 5.0))
    ax1.plot(traj.t, traj.sigma, color="C0")
    ax1.set_ylabel(r"$\sigma(t)$")
    ax2.plot(traj.t, traj.sigma_dot, color="C1")
    ax2.set_ylabel(r"$\dot\sigma(t)$")
    ax2.set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return Path(path)


def plot_coefficients(path: Path, coeff) -> Path:
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    ax.plot(coeff.t, coeff.alpha, label=r"$\alpha$")
    ax.plot(coeff.t, coeff.delta, label=r"$\delta$")
    ax.plot(coeff.t, coeff.epsilon, label=r"$\varepsilon$")
    ax.plot(coeff.t, coeff.gamma, label=r"$\gamma$")
    ax.plot(coeff.t, coeff.efield, "--", label="E")
    ax.set_xlabel("t")
    ax.set_ylabel("coefficient value")
    ax.legend(ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return Path(path)


def plot_invariance(path: Path, check) -> Path:
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6.0, 5.5))
    ax1.plot(check.times, check.expectation, color="C0")
    ax1.axhline(check.expectation0, color="0.6", lw=0.8)
    ax1.set_ylabel(r"$\langle I(t) \rangle$")
    ref = abs(check.expectation0)
    rel = np.abs(check.expectation - check.expectation0) / ref
    ax2.semilogy(check.times, np.maximum(rel, 1e-18), color="C3")
    ax2.set_ylabel("relative drift")
    ax2.set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return Path(path)
