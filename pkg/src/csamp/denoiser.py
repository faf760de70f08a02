"""Scalar MMSE denoiser for the per-part Bernoulli-Gaussian prior.

Under the decoupled channel u = x + v with v ~ N(0, beta) and
x ~ gamma * delta(x) + (1 - gamma) * N(0, s2), the posterior mean is a
Wiener gain s2/(s2+beta) times u, weighted by the posterior probability
that x is nonzero.  denoise/denoise_deriv are the closed forms used in the
solver loops; denoise_numeric re-derives the same quantity by adaptive
quadrature and exists purely to validate them.  exact_mmse is the
full-vector oracle: the exact posterior mean over all 2^N supports,
feasible only for small N.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import expit

from .model import BernoulliGaussianPrior

BETA_FLOOR = 1e-12
GAMMA_CLAMP = 1e-12


@dataclass(frozen=True)
class DenoiserParams:
    """Channel noise variance beta, zero probability gamma, slab variance s2.

    gamma may be a scalar or a per-component vector; beta is floored so the
    Wiener gain and log-odds stay finite at exact convergence.
    """

    beta: float
    gamma: float | np.ndarray
    s2: float

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta < 0.0:
            raise ValueError("beta must be finite and nonnegative")
        object.__setattr__(self, "beta", max(float(self.beta), BETA_FLOOR))
        g = np.asarray(self.gamma, dtype=float)
        if np.any(g < 0.0) or np.any(g > 1.0):
            raise ValueError("gamma must lie in [0, 1]")
        if not self.s2 > 0.0:
            raise ValueError("s2 must be positive")
        object.__setattr__(self, "s2", float(self.s2))


def _active_posterior(u, p: DenoiserParams):
    """Posterior nonzero probability pi(u), evaluated in the log domain.

    The log-odds use gamma clamped away from {0, 1}; exact endpoint priors
    are restored afterwards so gamma=1 yields pi=0 and gamma=0 yields pi=1
    for every u.
    """
    g = np.clip(p.gamma, GAMMA_CLAMP, 1.0 - GAMMA_CLAMP)
    total = p.beta + p.s2
    log_odds_active = (
        np.log((1.0 - g) / g)
        + 0.5 * np.log(p.beta / total)
        + u * u * (p.s2 / (2.0 * p.beta * total))
    )
    pi = expit(log_odds_active)
    pi = np.where(np.asarray(p.gamma) <= 0.0, 1.0, pi)
    pi = np.where(np.asarray(p.gamma) >= 1.0, 0.0, pi)
    return pi


def _check_finite(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("non-finite pseudo-data u")
    return u


def denoise(u, p: DenoiserParams):
    """Posterior mean E[x | u]; elementwise over u (and vector gamma)."""
    u = _check_finite(u)
    gain = p.s2 / (p.s2 + p.beta)
    out = gain * u * _active_posterior(u, p)
    return out if out.ndim else float(out)


def denoise_deriv(u, p: DenoiserParams):
    """d/du of denoise; elementwise over u (and vector gamma)."""
    u = _check_finite(u)
    total = p.beta + p.s2
    gain = p.s2 / total
    pi = _active_posterior(u, p)
    slope = p.s2 / (p.beta * total)
    out = gain * pi * (1.0 + u * u * (1.0 - pi) * slope)
    return out if out.ndim else float(out)


def denoise_numeric(u: float, p: DenoiserParams, rel_tol: float = 1e-12) -> float:
    """Posterior mean by adaptive quadrature of the continuous branch.

    Both the numerator integral of x * N(u-x; 0, beta) * N(x; 0, s2) and the
    continuous evidence integral are computed numerically (log-rescaled so
    the integrand peaks near 1); only the spike evidence gamma * N(u; 0, beta)
    uses a density formula.  Slow; validation only.
    """
    u = float(u)
    if not np.isfinite(u):
        raise ValueError("non-finite pseudo-data u")
    beta, s2 = p.beta, p.s2
    gamma = float(np.asarray(p.gamma))
    if gamma >= 1.0:
        return 0.0

    total = beta + s2
    mu = u * s2 / total                  # continuous-branch posterior mean
    sig_post = np.sqrt(beta * s2 / total)
    radius = max(10.0 * np.sqrt(s2), abs(mu) + 12.0 * sig_post)

    # peak height of the joint density, used to rescale before integrating
    log_scale = (
        -u * u / (2.0 * total)
        - 0.5 * np.log(2.0 * np.pi * beta)
        - 0.5 * np.log(2.0 * np.pi * s2)
    )

    def scaled_joint(x):
        return np.exp(
            -((u - x) ** 2) / (2.0 * beta)
            - x * x / (2.0 * s2)
            - 0.5 * np.log(2.0 * np.pi * beta)
            - 0.5 * np.log(2.0 * np.pi * s2)
            - log_scale
        )

    eps = 1e-9 * radius
    breaks = sorted(set(np.clip([mu - 8 * sig_post, mu, mu + 8 * sig_post],
                                -radius + eps, radius - eps)))
    # the integrands are bounded by ~radius after rescaling, so this floor
    # lets quad terminate on integrals whose true value is (near) zero
    abs_floor = 1e-13 * radius

    def integrate(f, label):
        val, abserr, info, *rest = quad(
            f, -radius, radius, points=breaks,
            epsabs=abs_floor, epsrel=rel_tol, limit=200, full_output=1,
        )
        if rest:
            raise RuntimeError(f"quadrature for {label} did not converge: {rest[0]}")
        if abserr > max(5.0 * abs_floor, 1e-9 * abs(val)):
            raise RuntimeError(
                f"quadrature for {label} too inaccurate (abserr={abserr:.3e})"
            )
        return val

    evidence_cont = integrate(scaled_joint, "evidence")
    mean_cont = integrate(lambda x: x * scaled_joint(x), "conditional mean")

    # spike evidence, rescaled by the same factor as the integrals
    log_spike = -u * u / (2.0 * beta) - 0.5 * np.log(2.0 * np.pi * beta) - log_scale
    spike = gamma * np.exp(log_spike)

    num = (1.0 - gamma) * mean_cont
    den = spike + (1.0 - gamma) * evidence_cont
    return float(num / den)


def exact_mmse(
    A: np.ndarray,
    y_part: np.ndarray,
    prior: BernoulliGaussianPrior,
    sigma_w2_part: float,
) -> np.ndarray:
    """Exact posterior mean for one real part by support enumeration.

    Sums over all supports S: the posterior weight of S combines the prior
    activity probabilities with the Gaussian evidence of y under
    x_S ~ N(0, s2 I), and the per-support conditional mean is the ridge
    solve (A_S^T A_S + (sigma_w2/s2) I)^{-1} A_S^T y.  Cost is 2^N small
    solves, so N is capped at 14.  A zero noise variance is floored at
    BETA_FLOOR to keep the evidence proper.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y_part, dtype=float)
    m, n = A.shape
    if n > 14:
        raise ValueError(f"support enumeration infeasible for N={n} > 14")
    if y.shape != (m,):
        raise ValueError("y_part length must equal M")
    s2 = prior.s2
    gamma = prior.gamma0_vector(n)
    sw2 = max(float(sigma_w2_part), BETA_FLOOR)

    # components with degenerate priors are fixed, not enumerated
    forced_on = np.flatnonzero(gamma == 0.0)
    free = np.flatnonzero((gamma > 0.0) & (gamma < 1.0))

    gram = A.T @ A
    aty = A.T @ y
    yty = float(y @ y)
    base_const = -0.5 * (m * np.log(2.0 * np.pi) + m * np.log(sw2) + yty / sw2)

    log_g = np.log(np.where(gamma > 0.0, gamma, 1.0))       # excluded when 0
    log_1mg = np.log(np.where(gamma < 1.0, 1.0 - gamma, 1.0))
    base_prior = float(log_g[free].sum())                   # all free inactive
    prior_bonus = log_1mg - log_g                           # per activated component

    supports: list[np.ndarray] = []
    log_weights: list[np.ndarray] = []
    means: list[np.ndarray] = []
    for k_free in range(len(free) + 1):
        combos = list(itertools.combinations(free, k_free))
        idx = np.array(
            [np.concatenate((forced_on, np.array(c, dtype=int))) for c in combos],
            dtype=int,
        ).reshape(len(combos), len(forced_on) + k_free)
        k = idx.shape[1]
        if k == 0:
            supports.append(idx)
            log_weights.append(np.array([base_prior + base_const]))
            means.append(np.zeros((1, 0)))
            continue
        g_batch = gram[idx[:, :, None], idx[:, None, :]]
        b_batch = aty[idx]
        c_batch = g_batch + (sw2 / s2) * np.eye(k)
        sol = np.linalg.solve(c_batch, b_batch[:, :, None])[:, :, 0]
        sign, logdet_c = np.linalg.slogdet(c_batch)
        if np.any(sign <= 0):
            raise np.linalg.LinAlgError("non-positive-definite evidence matrix")
        # log N(y; 0, s2 A_S A_S^T + sw2 I) via determinant lemma + Woodbury
        logdet_sigma = m * np.log(sw2) + k * np.log(s2 / sw2) + logdet_c
        quad_form = (yty - np.einsum("ij,ij->i", b_batch, sol)) / sw2
        log_ev = -0.5 * (m * np.log(2.0 * np.pi) + logdet_sigma + quad_form)
        # prior_bonus is zero for forced-on components, so including them
        # in idx adds nothing
        lw = base_prior + prior_bonus[idx].sum(axis=1) + log_ev
        supports.append(idx)
        log_weights.append(lw)
        means.append(sol)

    all_lw = np.concatenate(log_weights)
    shift = all_lw.max()
    weights = np.exp(all_lw - shift)
    weights /= weights.sum()

    x_hat = np.zeros(n)
    pos = 0
    for idx, mean in zip(supports, means):
        w = weights[pos : pos + idx.shape[0]]
        pos += idx.shape[0]
        if idx.shape[1] == 0:
            continue
        np.add.at(x_hat, idx.ravel(), (w[:, None] * mean).ravel())
    return x_hat
