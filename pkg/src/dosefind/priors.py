"""Prior engine: turns (skeleton, PESS) into each design's prior objects.

The dose-toxicity model p = q^exp(alpha) with alpha ~ N(0, sigma^2) induces a
prior density on p whose first two moments are matched by a beta distribution;
a+b of that beta is the prior effective sample size (PESS). The same skeleton
feeds the interval designs through hypothesis probabilities (BOIN) and beta
hyperparameters (keyboard), with robust and mixture transforms on top.

All quadrature runs in alpha-space: the induced density is singular near
p = 0 and p = 1, the alpha integrand is a smooth Gaussian-weighted product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

__all__ = [
    "InducedBeta",
    "HypothesisPrior",
    "induced_density",
    "prior_moments",
    "moment_match",
    "calibrate_sigma",
    "hypothesis_prior",
    "mixture_hypothesis_prior",
    "robustify_pess",
    "keyboard_hyperparams",
]

SIGMA2_BRACKET = (1e-4, 25.0)


@dataclass(frozen=True)
class InducedBeta:
    """Beta(a, b) matched to the induced prior of p at one dose."""

    a: float
    b: float
    mu: float
    tau2: float

    @property
    def pess(self) -> float:
        return self.a + self.b


@dataclass(frozen=True)
class HypothesisPrior:
    """Prior probabilities (pi_1, pi_2, pi_3) of the stay/escalate/de-escalate
    point hypotheses at one dose."""

    pi: tuple[float, float, float]

    def __post_init__(self):
        if any(p < 0 for p in self.pi):
            raise ValueError("hypothesis probabilities must be non-negative")
        if abs(sum(self.pi) - 1.0) > 1e-12:
            raise ValueError(f"hypothesis probabilities sum to {sum(self.pi)!r}, not 1")


def induced_density(q: float, sigma2: float, p: float) -> float:
    """Density at p of the prior induced on p = q^exp(alpha), alpha ~ N(0, sigma2).

    Closed form: normal density of alpha = log(log p / log q) times |dalpha/dp|
    = -1/(p log p). Singular at p in {0, 1}, which is rejected.
    """
    if not (0.0 < q < 1.0):
        raise ValueError("q must lie in (0, 1)")
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    if not (0.0 < p < 1.0):
        raise ValueError("density is singular at p = 0 and p = 1")
    alpha = math.log(math.log(p) / math.log(q))
    gauss = math.exp(-alpha * alpha / (2.0 * sigma2)) / math.sqrt(2.0 * math.pi * sigma2)
    return gauss * (-1.0 / (p * math.log(p)))


def prior_moments(q: float, sigma2: float) -> tuple[float, float]:
    """(mean, variance) of the induced prior of p, by adaptive quadrature in
    standardized alpha-space. Relative error well below 1e-8."""
    if not (0.0 < q < 1.0):
        raise ValueError("q must lie in (0, 1)")
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    sig = math.sqrt(sigma2)
    lnq = math.log(q)
    norm_const = 1.0 / math.sqrt(2.0 * math.pi)

    def raw_moment(order: int) -> float:
        def f(z: float) -> float:
            return math.exp(order * math.exp(sig * z) * lnq - 0.5 * z * z) * norm_const

        # The transition region of q^(order*exp(sig z)) sits near z*, where the
        # exponent is O(1); passing it as a breakpoint keeps quad honest.
        zstar = math.log(-1.0 / (order * lnq)) / sig if -order * lnq < 1 else 0.0
        pts = sorted({max(-37.0, min(37.0, zstar)), 0.0})
        val, _ = integrate.quad(f, -38.0, 38.0, points=pts,
                                epsabs=1e-14, epsrel=1e-11, limit=400)
        return val

    mu = raw_moment(1)
    tau2 = raw_moment(2) - mu * mu
    return mu, tau2


def moment_match(q: float, sigma2: float) -> InducedBeta:
    """Beta(a, b) with the induced prior's first two moments.

    a = mu^2 (1-mu)/tau^2 - mu and b = a (1-mu)/mu. Degenerate (q, sigma2)
    combinations, where the matched beta would need a <= 0 or b <= 0, are
    rejected.
    """
    mu, tau2 = prior_moments(q, sigma2)
    a = mu * mu * (1.0 - mu) / tau2 - mu
    b = a * (1.0 - mu) / mu
    if a <= 0 or b <= 0 or not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError(
            f"no valid beta moment match for q={q}, sigma2={sigma2}: "
            f"mu={mu:.6g}, tau2={tau2:.6g} give a={a:.6g}, b={b:.6g}")
    return InducedBeta(a=a, b=b, mu=mu, tau2=tau2)


def calibrate_sigma(skeleton: Sequence[float], j_star: int, target_pess: float,
                    tol: float = 0.01) -> float:
    """sigma^2 such that the PESS at the prior MTD equals target_pess.

    Bisection over sigma^2 in [1e-4, 25]; PESS is monotone decreasing in
    sigma^2 over the bracket and the search errors out if an evaluation ever
    violates that, or if the target lies outside the bracket.
    """
    if target_pess <= 1.0:
        raise ValueError("target_pess must exceed 1")
    q = float(skeleton[j_star - 1])

    def pess_at(s2: float) -> float:
        return moment_match(q, s2).pess

    lo, hi = SIGMA2_BRACKET
    seen: list[tuple[float, float]] = []

    def record(s2: float, value: float) -> None:
        for other_s2, other_val in seen:
            if (s2 - other_s2) * (value - other_val) > 0:
                raise RuntimeError(
                    f"PESS not monotone decreasing in sigma^2 near {s2:.4g}")
        seen.append((s2, value))

    p_lo = pess_at(lo)
    p_hi = pess_at(hi)
    record(lo, p_lo)
    record(hi, p_hi)
    if target_pess > p_lo or target_pess < p_hi:
        raise ValueError(
            f"target PESS {target_pess} unattainable for q={q}: bracket covers "
            f"[{p_hi:.4g}, {p_lo:.4g}]")

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        p_mid = pess_at(mid)
        record(mid, p_mid)
        if abs(p_mid - target_pess) <= tol:
            return mid
        if p_mid > target_pess:
            lo = mid
        else:
            hi = mid
    raise RuntimeError("sigma^2 bisection failed to converge")


def hypothesis_prior(q: float, n0: float, phi: float, phi1: float, phi2: float
                     ) -> HypothesisPrior:
    """Prior probabilities of the three point hypotheses at one dose.

    n0 must effectively be a non-negative integer (the sum runs over
    pseudo-observation counts); values within 1e-9 of an integer are accepted,
    anything else must be rounded by the caller.
    """
    n0_int = int(round(n0))
    if n0 < 0 or abs(n0 - n0_int) > 1e-9:
        raise ValueError(f"hypothesis prior needs an integer PESS, got {n0!r}")
    if n0_int == 0:
        return HypothesisPrior(pi=(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0))
    hyp = (phi, phi1, phi2)
    pi = [0.0, 0.0, 0.0]
    for x in range(n0_int + 1):
        lik = [h ** x * (1.0 - h) ** (n0_int - x) for h in hyp]
        denom = sum(lik)
        binom = math.comb(n0_int, x) * q ** x * (1.0 - q) ** (n0_int - x)
        for k in range(3):
            pi[k] += lik[k] / denom * binom
    total = sum(pi)
    return HypothesisPrior(pi=tuple(p / total for p in pi))


def mixture_hypothesis_prior(informative: HypothesisPrior, w: float) -> HypothesisPrior:
    """w * informative + (1-w) * uniform, componentwise."""
    if not (0.0 <= w <= 1.0):
        raise ValueError("mixture weight must lie in [0, 1]")
    if w == 1.0:
        return informative
    third = (1.0 - w) / 3.0
    return HypothesisPrior(pi=tuple(w * p + third for p in informative.pi))


def robustify_pess(pess: Sequence[float], j_star: int, num_doses: int) -> tuple[float, ...]:
    """Zero the PESS above the prior MTD when j* sits in the upper half of the
    dose range (j* >= J/2); otherwise return the input unchanged."""
    pess = tuple(float(v) for v in pess)
    if j_star < num_doses / 2.0:
        return pess
    return pess[:j_star] + (0.0,) * (num_doses - j_star)


def keyboard_hyperparams(q: float, n0: float) -> tuple[float, float]:
    """Beta hyperparameters (a, b) = (n0*q, n0*(1-q)); n0 = 0 falls back to
    the uniform prior (1, 1)."""
    if n0 < 0:
        raise ValueError("PESS must be non-negative")
    if n0 == 0:
        return 1.0, 1.0
    return n0 * q, n0 * (1.0 - q)
