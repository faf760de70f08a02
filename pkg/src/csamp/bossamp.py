"""Coupled BAMP chains exchanging per-component activity likelihoods.

The real and imaginary chains run the same iteration as BAMP, but after
each sweep every component's evidence for being zero is extracted from one
part (likelihood_update), converted into a probability (prior_update) and
installed as the other part's working zero-probability for the next
denoiser call.  This couples the two estimates through the shared support
without ever mixing their amplitudes.

With exchange=False the working probabilities stay at the prior and each
chain stops on its own residual criterion, which reproduces cBAMP exactly
(same arithmetic, same iterates); with exchange=True the joint stopping
rule (summed relative residual change) is used.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .bamp import bamp_step
from .model import (
    BernoulliGaussianPrior,
    ComplexVector,
    RecoveryError,
    RecoveryOutput,
    RecoverySettings,
    combine,
)


def likelihood_update(u, beta: float, gamma0, s2: float, beta_floor: float = 1e-12,
                      gamma_clamp: float = 1e-12):
    """Log-likelihood ratio for a component being zero given pseudo-data u.

    l = log(g/(1-g)) + (log((beta+s2)/beta) - u^2 s2 / (beta (beta+s2))) / 2,
    with gamma0 clamped away from {0,1} so the log-odds stay finite.
    """
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("non-finite pseudo-data u")
    if not np.isfinite(beta):
        raise ValueError("non-finite beta")
    beta = max(float(beta), beta_floor)
    g = np.clip(np.asarray(gamma0, dtype=float), gamma_clamp, 1.0 - gamma_clamp)
    if not np.all(np.isfinite(g)):
        raise ValueError("non-finite gamma0")
    total = beta + s2
    out = np.log(g / (1.0 - g)) + 0.5 * (
        np.log(total / beta) - u * u * (s2 / (beta * total))
    )
    return out if out.ndim else float(out)


def prior_update(l, gamma_clamp: float = 1e-12):
    """Updated zero-probability 1/(1+exp(-l)), clamped into (0, 1)."""
    out = np.clip(expit(l), gamma_clamp, 1.0 - gamma_clamp)
    return out if np.ndim(out) else float(out)


class _Chain:
    """One part's loop state, advanced with the shared BAMP step."""

    def __init__(self, y: np.ndarray, gamma0: np.ndarray, beta_floor: float):
        self.y = y
        self.x = np.zeros_like(gamma0)
        self.z = y.copy()
        self.u = np.zeros_like(gamma0)
        self.gamma = gamma0.copy()
        self.initial_energy = float(y @ y)
        self.beta = beta_floor  # overwritten by the first step
        self.change = 0.0
        self.prev_energy = self.initial_energy
        self.stopped = False
        self.converged = False
        self.diverged = False
        self.iterations = 0

    def advance(self, A, s2: float, settings: RecoverySettings, t: int, label: str):
        x_new, z_new, self.u, self.beta = bamp_step(
            A, self.y, self.x, self.z, self.gamma, s2, settings.beta_floor
        )
        if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(z_new))):
            raise RecoveryError(f"non-finite iterate in {label} chain at t={t}")
        self.x = x_new
        dz = z_new - self.z
        self.change = float(dz @ dz)
        self.prev_energy = float(self.z @ self.z)
        self.z = z_new
        self.iterations = t

    def own_ratio_stop(self, settings: RecoverySettings) -> None:
        """Per-part stopping and divergence flags, as in bamp_recover."""
        if self.prev_energy == 0.0 or self.change <= settings.eps_tol * self.prev_energy:
            self.converged = True
            self.stopped = True
        elif float(self.z @ self.z) > settings.divergence_factor * self.initial_energy:
            self.diverged = True
            self.stopped = True

    def ratio(self) -> float:
        if self.prev_energy == 0.0:
            return 0.0 if self.change == 0.0 else np.inf
        return self.change / self.prev_energy


def cbossamp_recover(
    A: np.ndarray,
    y: ComplexVector,
    prior: BernoulliGaussianPrior,
    settings: RecoverySettings = RecoverySettings(),
    exchange: bool = True,
) -> RecoveryOutput:
    """Joint recovery of a complex signal through the likelihood exchange.

    Per iteration both chains take a BAMP step with their per-component
    working gamma; then each part's likelihood (from its own u and, per
    settings.likelihood_variant, its own or the other part's beta) updates
    the *other* part's gamma.  Stops on the summed relative residual
    criterion or t_max.  exchange=False freezes gamma at the prior and
    reduces to cbamp_recover.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    gamma0 = prior.gamma0_vector(n)
    s2 = prior.s2
    like_s2 = prior.s2 if settings.part_variance == "half" else prior.sigma_x2

    # no data: the estimate is the prior mean and gamma keeps its prior value
    if float(y.re @ y.re) == 0.0 and float(y.im @ y.im) == 0.0:
        zero = np.zeros(n)
        return RecoveryOutput(
            x_hat=combine(zero, zero), u_r=zero.copy(), u_i=zero.copy(),
            beta_r=settings.beta_floor, beta_i=settings.beta_floor,
            gamma_r=gamma0.copy(), gamma_i=gamma0.copy(),
            iterations=1, converged=True, diverged=False,
        )

    chain_r = _Chain(y.re, gamma0, settings.beta_floor)
    chain_i = _Chain(y.im, gamma0, settings.beta_floor)

    if not exchange:
        # two independent single-part loops run in lockstep
        for t in range(1, settings.t_max + 1):
            for label, chain in (("real", chain_r), ("imaginary", chain_i)):
                if not chain.stopped:
                    chain.advance(A, s2, settings, t, label)
                    chain.own_ratio_stop(settings)
            if chain_r.stopped and chain_i.stopped:
                break
        converged = chain_r.converged and chain_i.converged
        diverged = chain_r.diverged or chain_i.diverged
        iterations = max(chain_r.iterations, chain_i.iterations)
    else:
        converged = False
        diverged = False
        iterations = 0
        for t in range(1, settings.t_max + 1):
            chain_r.advance(A, s2, settings, t, "real")
            chain_i.advance(A, s2, settings, t, "imaginary")
            if settings.likelihood_variant == "own-beta":
                beta_for_r, beta_for_i = chain_r.beta, chain_i.beta
            else:
                beta_for_r, beta_for_i = chain_i.beta, chain_r.beta
            l_r = likelihood_update(chain_r.u, beta_for_r, gamma0, like_s2,
                                    settings.beta_floor, settings.gamma_clamp)
            l_i = likelihood_update(chain_i.u, beta_for_i, gamma0, like_s2,
                                    settings.beta_floor, settings.gamma_clamp)
            # each part's evidence drives the other part's working prior
            chain_i.gamma = prior_update(l_r, settings.gamma_clamp)
            chain_r.gamma = prior_update(l_i, settings.gamma_clamp)
            iterations = t
            if chain_r.ratio() + chain_i.ratio() <= settings.eps_tol:
                converged = True
                break
            if (
                float(chain_r.z @ chain_r.z)
                > settings.divergence_factor * chain_r.initial_energy
                or float(chain_i.z @ chain_i.z)
                > settings.divergence_factor * chain_i.initial_energy
            ):
                diverged = True
                break

    return RecoveryOutput(
        x_hat=combine(chain_r.x, chain_i.x),
        u_r=chain_r.u,
        u_i=chain_i.u,
        beta_r=chain_r.beta,
        beta_i=chain_i.beta,
        gamma_r=chain_r.gamma,
        gamma_i=chain_i.gamma,
        iterations=iterations,
        converged=converged,
        diverged=diverged,
    )
