"""Design-agnostic trial conduct: elimination rule, cohort transitions,
weighted isotonic regression, and MTD selection.

The elimination rule always evaluates a beta-binomial posterior under the
uniform(0,1) prior, whatever prior the design itself carries: the rule
protects patients and must not inherit a possibly misspecified skeleton.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import betainc

from .core import Decision, DoseData, TrialSettings, TrialState

__all__ = [
    "EliminationRule",
    "MtdSelection",
    "check_elimination",
    "elimination_min_dlt",
    "apply_cohort",
    "pava",
    "select_mtd",
]

FLAT_PRIOR_COUNT = 0.05  # Beta(0.05, 0.05) shrinkage when a design brings no prior

# Deterministic tie-break for equal isotonic estimates: nudging estimate j by
# j*eps makes the higher dose win below the target and the lower dose win
# above it.
_TIE_EPS = 1e-10


@dataclass(frozen=True)
class EliminationRule:
    threshold: float = 0.95
    min_n: int = 3

    def __post_init__(self):
        if not (0.5 < self.threshold < 1.0):
            raise ValueError("elimination threshold must lie in (0.5, 1)")
        if self.min_n < 1:
            raise ValueError("min_n must be at least 1")


@dataclass(frozen=True)
class MtdSelection:
    selected_dose: Optional[int]          # 1-based, None when no admissible dose
    isotonic_estimates: tuple[float, ...]  # one entry per admissible dose
    admissible_doses: tuple[int, ...]      # 1-based, aligned with the estimates


def check_elimination(data: DoseData, phi: float,
                      rule: EliminationRule = EliminationRule()) -> bool:
    """True iff n >= min_n and Pr(p > phi | y, n) > threshold under the
    uniform-prior beta-binomial model, i.e. p | data ~ Beta(1+y, 1+n-y)."""
    if data.n < rule.min_n:
        return False
    upper_tail = 1.0 - betainc(1.0 + data.y, 1.0 + data.n - data.y, phi)
    return bool(upper_tail > rule.threshold)


def elimination_min_dlt(phi: float, n: int,
                        rule: EliminationRule = EliminationRule()) -> Optional[int]:
    """Smallest DLT count that triggers elimination at n patients, or None."""
    if n < rule.min_n:
        return None
    for y in range(n + 1):
        if check_elimination(DoseData(n=n, y=y), phi, rule):
            return y
    return None


def apply_cohort(settings: TrialSettings, state: TrialState, n_dlt: int,
                 decider: Callable[[TrialState], tuple[Decision, int]],
                 cohort_n: Optional[int] = None,
                 rule: EliminationRule = EliminationRule(),
                 audit_context: Optional[Callable[[TrialState], dict]] = None
                 ) -> tuple[TrialState, Decision]:
    """Apply one cohort's outcome at the current dose and transition.

    Order of business: update counts at the current dose, run the safety
    check (dose and everything above it eliminated when triggered, trial
    terminated when that is dose 1), then ask the design for its move, with
    elimination forcing de-escalation and escalation clipped away from
    eliminated or non-existent doses. Returns (new state, decision taken).

    audit_context, when given, is evaluated on the post-outcome state and
    stored in the history record as "boundaries_used" (the table row or
    posterior estimates the decision was read from).
    """
    cohort_n = settings.cohort_size if cohort_n is None else int(cohort_n)
    if state.terminated:
        raise ValueError("trial already terminated")
    if state.total_enrolled >= settings.max_n:
        raise ValueError("maximum sample size already reached")
    if cohort_n < 1 or state.total_enrolled + cohort_n > settings.max_n:
        raise ValueError(f"cohort of {cohort_n} overruns max_n={settings.max_n}")
    if not (0 <= n_dlt <= cohort_n):
        raise ValueError(f"n_dlt={n_dlt} outside 0..{cohort_n}")

    j = state.current_dose
    old = state.dose_data(j)
    updated = DoseData(n=old.n + cohort_n, y=old.y + n_dlt)
    doses = list(state.doses)
    doses[j - 1] = updated

    eliminated_from = state.eliminated_from
    eliminated_now = check_elimination(updated, settings.target, rule)
    if eliminated_now:
        eliminated_from = j if eliminated_from is None else min(eliminated_from, j)

    record = {
        "cohort_index": len(state.history) + 1,
        "dose": j,
        "n": cohort_n,
        "n_dlt": n_dlt,
    }
    if audit_context is not None:
        record["boundaries_used"] = audit_context(
            TrialState(doses=tuple(doses), current_dose=j))

    if eliminated_now and j == 1:
        new_state = TrialState(doses=tuple(doses), current_dose=j,
                               eliminated_from=1, terminated=True,
                               history=state.history + (dict(record, decision=Decision.TERMINATE_TRIAL.value),))
        return new_state, Decision.TERMINATE_TRIAL

    interim = TrialState(doses=tuple(doses), current_dose=j,
                         eliminated_from=None, terminated=False,
                         history=state.history)

    complete = interim.total_enrolled >= settings.max_n
    if eliminated_now:
        decision, next_dose = Decision.ELIMINATE_AND_DEESCALATE, j - 1
    elif complete:
        decision, next_dose = Decision.STAY, j   # no further cohorts; dose kept for audit
    else:
        decision, next_dose = decider(replace(interim, eliminated_from=eliminated_from))
        # clip against the freshly eliminated range and the dose ladder
        if next_dose > j and (next_dose > settings.num_doses or
                              (eliminated_from is not None and next_dose >= eliminated_from)):
            decision, next_dose = Decision.STAY, j
        next_dose = max(1, min(settings.num_doses, next_dose))

    record["decision"] = decision.value
    new_state = TrialState(doses=tuple(doses), current_dose=next_dose,
                           eliminated_from=eliminated_from, terminated=False,
                           history=state.history + (record,))
    return new_state, decision


def pava(values: Sequence[float], weights: Sequence[float]) -> np.ndarray:
    """Weighted least-squares projection onto the non-decreasing cone
    (pool-adjacent-violators). Idempotent; each pooled block keeps its
    weighted mean."""
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if v.shape != w.shape or v.ndim != 1:
        raise ValueError("values and weights must be equal-length vectors")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")

    means: list[float] = []
    wts: list[float] = []
    counts: list[int] = []
    for x, wt in zip(v, w):
        means.append(float(x))
        wts.append(float(wt))
        counts.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            total = wts[-2] + wts[-1]
            pooled = (means[-2] * wts[-2] + means[-1] * wts[-1]) / total
            means[-2:] = [pooled]
            wts[-2:] = [total]
            counts[-2:] = [counts[-2] + counts[-1]]
    out = np.empty_like(v)
    pos = 0
    for m, c in zip(means, counts):
        out[pos:pos + c] = m
        pos += c
    return out


def select_mtd(state: TrialState, phi: float,
               prior_counts: Optional[tuple[Sequence[float], Sequence[float]]] = None
               ) -> MtdSelection:
    """Isotonic MTD selection over tried, non-eliminated doses.

    Per-dose estimates are beta posterior means (y + a0)/(n + a0 + b0); the
    default prior counts a0 = b0 = 0.05 are the conventional near-flat
    shrinkage, and designs carrying real prior information pass their own
    pseudo-observations. PAVA weights are inverse posterior variances. Ties
    after isotonic pooling resolve toward the higher dose below the target
    and the lower dose above it.
    """
    J = state.num_doses
    if prior_counts is None:
        a0 = np.full(J, FLAT_PRIOR_COUNT)
        b0 = np.full(J, FLAT_PRIOR_COUNT)
    else:
        a0 = np.asarray(prior_counts[0], dtype=float)
        b0 = np.asarray(prior_counts[1], dtype=float)
    if state.eliminated_from == 1:
        return MtdSelection(selected_dose=None, isotonic_estimates=(), admissible_doses=())

    admissible = [j for j in range(1, J + 1)
                  if state.dose_data(j).n > 0 and state.is_admissible(j)]
    if not admissible:
        return MtdSelection(selected_dose=None, isotonic_estimates=(), admissible_doses=())

    a = np.array([state.dose_data(j).y + a0[j - 1] for j in admissible])
    b = np.array([state.dose_data(j).n - state.dose_data(j).y + b0[j - 1]
                  for j in admissible])
    post_mean = a / (a + b)
    post_var = a * b / ((a + b) ** 2 * (a + b + 1.0))
    iso = pava(post_mean, 1.0 / post_var)
    nudged = iso + np.arange(1, len(iso) + 1) * _TIE_EPS
    pick = int(np.argmin(np.abs(nudged - phi)))
    return MtdSelection(selected_dose=admissible[pick],
                        isotonic_estimates=tuple(float(x) for x in iso),
                        admissible_doses=tuple(admissible))
