"""Post-convergence support detection and support-comparison metrics.

Two rules: a prior-based comparison of the final working zero-probabilities,
and a single EM E-step that classifies each component's (u_r, u_i) pair as
effective noise versus signal plus effective noise.  Both resolve ties to
ZERO and are evaluated in the log domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .model import ComplexVector

_BETA_FLOOR = 1e-12


@dataclass(frozen=True)
class SupportEstimate:
    """Boolean activity mask over the N components."""

    active: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.active, dtype=bool)
        if mask.ndim != 1:
            raise ValueError("active mask must be 1-D")
        object.__setattr__(self, "active", mask)

    @property
    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    @classmethod
    def from_indices(cls, n: int, indices) -> "SupportEstimate":
        mask = np.zeros(n, dtype=bool)
        mask[np.asarray(indices, dtype=int)] = True
        return cls(mask)


@dataclass(frozen=True)
class SupportMetrics:
    exact_match: bool
    false_positives: int
    false_negatives: int


def detect_prior_based(gamma_r, gamma_i) -> SupportEstimate:
    """Declare a component zero iff g_r g_i >= (1-g_r)(1-g_i)."""
    g_r = np.asarray(gamma_r, dtype=float)
    g_i = np.asarray(gamma_i, dtype=float)
    if g_r.shape != g_i.shape or g_r.ndim != 1:
        raise ValueError("gamma vectors must be 1-D with equal length")
    if np.any((g_r < 0) | (g_r > 1) | (g_i < 0) | (g_i > 1)):
        raise ValueError("gamma entries must lie in [0, 1]")
    zero = g_r * g_i >= (1.0 - g_r) * (1.0 - g_i)
    return SupportEstimate(~zero)


def _log_normal(u, var):
    return -0.5 * (np.log(2.0 * np.pi * var) + u * u / var)


def detect_em(
    u_r, u_i, beta_r: float, beta_i: float, gamma_r, gamma_i, sigma_x2: float
) -> SupportEstimate:
    """Single E-step decision: zero iff sigma_00 >= sigma_11.

    The all-zero weight uses N(u; 0, beta) per part, the all-active weight
    N(u; 0, beta + sigma_x2/2); the mixed-activity weights cancel from the
    comparison.  Both sides are compared in the log domain so large |u|
    never underflows to a 0-vs-0 tie.
    """
    u_r = np.asarray(u_r, dtype=float)
    u_i = np.asarray(u_i, dtype=float)
    g_r = np.asarray(gamma_r, dtype=float)
    g_i = np.asarray(gamma_i, dtype=float)
    if not (u_r.shape == u_i.shape and u_r.ndim == 1):
        raise ValueError("u vectors must be 1-D with equal length")
    b_r = max(float(beta_r), _BETA_FLOOR)
    b_i = max(float(beta_i), _BETA_FLOOR)
    bbar_r = b_r + sigma_x2 / 2.0
    bbar_i = b_i + sigma_x2 / 2.0
    with np.errstate(divide="ignore"):
        log_zero = (
            np.log(g_r) + np.log(g_i) + _log_normal(u_r, b_r) + _log_normal(u_i, b_i)
        )
        log_active = (
            np.log(1.0 - g_r)
            + np.log(1.0 - g_i)
            + _log_normal(u_r, bbar_r)
            + _log_normal(u_i, bbar_i)
        )
    return SupportEstimate(~(log_zero >= log_active))


def detect_em_cbamp(
    u_r, u_i, beta_r: float, beta_i: float, gamma0, sigma_x2: float
) -> SupportEstimate:
    """EM rule with the prior zero-probabilities in both gamma slots."""
    gamma0 = np.asarray(gamma0, dtype=float)
    return detect_em(u_r, u_i, beta_r, beta_i, gamma0, gamma0, sigma_x2)


def em_responsibilities(
    u_r, u_i, beta_r: float, beta_i: float, gamma_r, gamma_i, sigma_x2: float
) -> tuple[np.ndarray, np.ndarray]:
    """Soft responsibilities (rho_zero, rho_active) over all four activity
    combinations; diagnostic only, the hard rule never consults the mixed
    terms."""
    u_r = np.asarray(u_r, dtype=float)
    u_i = np.asarray(u_i, dtype=float)
    g_r = np.asarray(gamma_r, dtype=float)
    g_i = np.asarray(gamma_i, dtype=float)
    b_r = max(float(beta_r), _BETA_FLOOR)
    b_i = max(float(beta_i), _BETA_FLOOR)
    bbar_r = b_r + sigma_x2 / 2.0
    bbar_i = b_i + sigma_x2 / 2.0
    with np.errstate(divide="ignore"):
        log_sigma = np.stack([
            np.log(g_r) + np.log(g_i) + _log_normal(u_r, b_r) + _log_normal(u_i, b_i),
            np.log(g_r) + np.log(1 - g_i) + _log_normal(u_r, b_r) + _log_normal(u_i, bbar_i),
            np.log(1 - g_r) + np.log(g_i) + _log_normal(u_r, bbar_r) + _log_normal(u_i, b_i),
            np.log(1 - g_r) + np.log(1 - g_i) + _log_normal(u_r, bbar_r) + _log_normal(u_i, bbar_i),
        ])
    log_total = logsumexp(log_sigma, axis=0)
    return np.exp(log_sigma[0] - log_total), np.exp(log_sigma[3] - log_total)


def apply_support(x_hat: ComplexVector, s: SupportEstimate) -> ComplexVector:
    """Zero both parts of every off-support component."""
    if len(x_hat) != s.active.size:
        raise ValueError("length mismatch")
    return ComplexVector(
        np.where(s.active, x_hat.re, 0.0), np.where(s.active, x_hat.im, 0.0)
    )


def support_metrics(true_x: ComplexVector, s: SupportEstimate) -> SupportMetrics:
    """False alarms and misses of the detected support against supp(x)."""
    if len(true_x) != s.active.size:
        raise ValueError("length mismatch")
    truth = true_x.support()
    fp = int(np.sum(s.active & ~truth))
    fn = int(np.sum(~s.active & truth))
    return SupportMetrics(exact_match=(fp == 0 and fn == 0),
                          false_positives=fp, false_negatives=fn)
