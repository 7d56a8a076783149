"""CRM engine: posterior DLT-probability estimates and the next-dose rule.

The model is p_j = q_j^exp(alpha) with alpha ~ N(0, sigma^2). Posterior means
of p_j are the ratio of two alpha-integrals; the scalar path evaluates them
with adaptive Gauss-Kronrod quadrature on [-10 sigma, 10 sigma], the batch
path (used by the simulation engine for thousands of trials at once) uses a
fixed equispaced grid on the same interval, which is spectrally accurate for
this Gaussian-weighted integrand and shares its node arrays across trials.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .core import Decision, TrialState

__all__ = ["CrmModel", "posterior_means", "crm_next_dose", "CrmBatch"]

DEFAULT_NONINFORMATIVE_SIGMA2 = 2.0  # configuration, not a literature value
BATCH_GRID_SIZE = 201


@dataclass(frozen=True)
class CrmModel:
    skeleton: tuple[float, ...]
    sigma2: float

    def __init__(self, skeleton: Sequence[float], sigma2: float):
        q = tuple(float(x) for x in skeleton)
        if any(not (0.0 < x < 1.0) for x in q):
            raise ValueError("skeleton values must lie strictly inside (0, 1)")
        if any(b <= a for a, b in zip(q, q[1:])):
            raise ValueError("skeleton must be strictly increasing")
        if sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        object.__setattr__(self, "skeleton", q)
        object.__setattr__(self, "sigma2", float(sigma2))


def _log_posterior_factory(model: CrmModel, n: np.ndarray, y: np.ndarray):
    lnq = np.log(model.skeleton)
    inv2s2 = 0.5 / model.sigma2

    def log_post(alpha: float) -> float:
        lp = np.exp(alpha) * lnq                 # log p_j, strictly negative
        l1mp = np.log(-np.expm1(lp))             # log(1 - p_j), stable for p near 0 or 1
        return float(lp @ y + l1mp @ (n - y)) - alpha * alpha * inv2s2

    return log_post


def posterior_means(model: CrmModel, n: Sequence[int], y: Sequence[int]) -> np.ndarray:
    """Posterior mean of p_j for every dose, given per-dose counts.

    Integrates numerator and denominator over alpha in [-10 sigma, 10 sigma]
    by adaptive quadrature after shifting by the posterior log-maximum (the
    peak can sit far from zero once data accumulate, and an unshifted
    integrand underflows).
    """
    n = np.asarray(n, dtype=float)
    y = np.asarray(y, dtype=float)
    if n.shape != y.shape or len(n) != len(model.skeleton):
        raise ValueError("counts must have one entry per dose")
    if np.any(y < 0) or np.any(y > n):
        raise ValueError("need 0 <= y <= n at every dose")

    sig = np.sqrt(model.sigma2)
    lo, hi = -10.0 * sig, 10.0 * sig
    log_post = _log_posterior_factory(model, n, y)
    grid = np.linspace(lo, hi, 1001)
    shift = max(log_post(a) for a in grid)
    lnq = np.log(model.skeleton)

    def integral(extra_lnq: float) -> float:
        def f(alpha: float) -> float:
            return np.exp(np.exp(alpha) * extra_lnq + log_post(alpha) - shift)

        val, _ = integrate.quad(f, lo, hi, epsabs=1e-280, epsrel=1e-10, limit=500)
        return val

    denom = integral(0.0)
    if denom <= 0 or not np.isfinite(denom):
        raise RuntimeError("posterior quadrature failed to converge")
    means = np.array([integral(c) for c in lnq]) / denom
    if np.any(~np.isfinite(means)):
        raise RuntimeError("posterior quadrature produced non-finite estimates")
    return means


class CrmBatch:
    """Vectorized posterior means for many trials sharing one model.

    Node arrays over the alpha grid are built once; a batch evaluation is two
    matrix products and a softmax, so the simulation engine can update
    thousands of concurrent trials per cohort step.
    """

    def __init__(self, model: CrmModel, grid_size: int = BATCH_GRID_SIZE):
        self.model = model
        sig = np.sqrt(model.sigma2)
        alpha = np.linspace(-10.0 * sig, 10.0 * sig, grid_size)
        lp = np.exp(alpha)[:, None] * np.log(model.skeleton)[None, :]
        self._alpha = alpha
        self._lp = lp                                # G x J, log p
        self._l1mp = np.log(-np.expm1(lp))           # G x J, log(1-p)
        self._p = np.exp(lp)                         # G x J
        self._log_prior = -0.5 * alpha * alpha / model.sigma2

    def posterior_means(self, n: np.ndarray, y: np.ndarray) -> np.ndarray:
        """n, y: (T, J) count matrices; returns (T, J) posterior means."""
        n = np.asarray(n, dtype=float)
        y = np.asarray(y, dtype=float)
        logf = y @ self._lp.T + (n - y) @ self._l1mp.T + self._log_prior
        w = np.exp(logf - logf.max(axis=1, keepdims=True))
        return (w @ self._p) / w.sum(axis=1, keepdims=True)


def crm_next_dose(model: CrmModel, state: TrialState, phi: float,
                  batch: Optional[CrmBatch] = None) -> tuple[Decision, int]:
    """Next-dose decision: candidate = argmin |p_hat - phi| over admissible
    doses, movement clipped to one level in either direction.

    Ties go to the lower dose. Returns (decision, next 1-based dose).
    """
    if state.terminated:
        raise ValueError("trial already terminated")
    n = np.array([d.n for d in state.doses])
    y = np.array([d.y for d in state.doses])
    if batch is not None:
        phat = batch.posterior_means(n[None, :], y[None, :])[0]
    else:
        phat = posterior_means(model, n, y)
    dist = np.abs(phat - phi)
    if state.eliminated_from is not None:
        dist[state.eliminated_from - 1:] = np.inf
    candidate = int(np.argmin(dist)) + 1           # argmin keeps the lowest on ties
    step = max(-1, min(1, candidate - state.current_dose))
    nxt = state.current_dose + step
    if nxt > state.current_dose and not state.is_admissible(nxt):
        nxt = state.current_dose
    nxt = max(1, min(state.num_doses, nxt))
    if nxt > state.current_dose:
        return Decision.ESCALATE, nxt
    if nxt < state.current_dose:
        return Decision.DEESCALATE, nxt
    return Decision.STAY, nxt
