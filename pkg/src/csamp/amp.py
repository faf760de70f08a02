"""Soft-thresholding AMP baseline, run per part for complex problems.

The threshold at iteration t is lambda * sqrt(beta) with
beta = ||z||^2 / M, and the Onsager correction coefficient is the active-set
size divided by M (the soft threshold's derivative sums to ||x_hat||_0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ComplexVector, RecoveryError, RecoveryOutput, RecoverySettings, combine


@dataclass(frozen=True)
class AmpConfig:
    lam: float
    settings: RecoverySettings = RecoverySettings()

    def __post_init__(self):
        if not self.lam > 0.0:
            raise ValueError("lambda must be positive")


@dataclass(frozen=True)
class AmpPartResult:
    x_hat: np.ndarray
    u: np.ndarray
    beta: float
    iterations: int
    converged: bool
    diverged: bool


def soft_threshold(u, theta):
    """sign(u) * max(|u| - theta, 0); theta must be nonnegative."""
    if np.any(np.asarray(theta) < 0.0):
        raise ValueError("threshold must be nonnegative")
    u = np.asarray(u, dtype=float)
    out = np.sign(u) * np.maximum(np.abs(u) - theta, 0.0)
    return out if out.ndim else float(out)


def lambda_heuristic(k: int) -> float:
    """MSE-minimizing threshold multiplier 2.678 * K^(-0.181)."""
    if k < 1:
        raise ValueError("K must be >= 1")
    return 2.678 * float(k) ** -0.181


def amp_recover(A: np.ndarray, y_part: np.ndarray, cfg: AmpConfig) -> AmpPartResult:
    """Soft-thresholding AMP on one real part."""
    A = np.asarray(A, dtype=float)
    y = np.asarray(y_part, dtype=float)
    m, n = A.shape
    if y.shape != (m,):
        raise ValueError("y length must equal M")
    st = cfg.settings

    x = np.zeros(n)
    z = y.copy()
    initial_energy = float(z @ z)
    u = x.copy()
    beta = initial_energy / m
    converged = False
    diverged = False
    t = 0
    for t in range(1, st.t_max + 1):
        u = x + A.T @ z
        beta = float(z @ z) / m
        x_new = soft_threshold(u, cfg.lam * np.sqrt(beta))
        z_new = y - A @ x_new + (np.count_nonzero(x_new) / m) * z
        if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(z_new))):
            raise RecoveryError(f"AMP produced non-finite iterate at t={t}")
        x = x_new
        dz = z_new - z
        change = float(dz @ dz)
        prev_energy = float(z @ z)
        z = z_new
        if prev_energy == 0.0 or change <= st.eps_tol * prev_energy:
            converged = True
            break
        if float(z @ z) > st.divergence_factor * initial_energy:
            diverged = True
            break
    return AmpPartResult(x_hat=x, u=u, beta=beta, iterations=t,
                         converged=converged, diverged=diverged)


def camp_recover(A: np.ndarray, y: ComplexVector, cfg: AmpConfig) -> RecoveryOutput:
    """AMP on the real and imaginary parts independently."""
    part_r = amp_recover(A, y.re, cfg)
    part_i = amp_recover(A, y.im, cfg)
    return RecoveryOutput(
        x_hat=combine(part_r.x_hat, part_i.x_hat),
        u_r=part_r.u,
        u_i=part_i.u,
        beta_r=part_r.beta,
        beta_i=part_i.beta,
        gamma_r=None,
        gamma_i=None,
        iterations=max(part_r.iterations, part_i.iterations),
        converged=part_r.converged and part_i.converged,
        diverged=part_r.diverged or part_i.diverged,
    )
