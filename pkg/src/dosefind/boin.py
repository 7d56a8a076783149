"""BOIN engine: optimal escalation/de-escalation boundaries with informative
hypothesis priors, and full decision-table generation.

With a uniform hypothesis prior the boundaries collapse to the classic
constants (independent of dose and sample size); an informative prior adds a
log-odds term that decays like 1/n, so the boundaries drift back to the
noninformative ones as data accumulate.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional

from .core import Decision, PriorSpec, TrialSettings, TrialState, prior_mtd_index
from .conduct import EliminationRule, elimination_min_dlt
from .priors import HypothesisPrior, hypothesis_prior, mixture_hypothesis_prior, robustify_pess

__all__ = [
    "Boundaries",
    "DecisionTable",
    "boundaries",
    "escalate_max",
    "deescalate_min",
    "dose_hypothesis_priors",
    "decision_table",
    "boin_next_dose",
]

# Guard for "is n*lambda an exact integer": the boundary integers must not
# flip on the last ulp of the float product.
_EDGE_EPS = 1e-10


@dataclass(frozen=True)
class Boundaries:
    lambda_e: float
    lambda_d: float
    dose: int
    n: int


def boundaries(phi: float, phi1: float, phi2: float, pi: HypothesisPrior,
               n: int, dose: int = 0) -> Boundaries:
    """Escalation/de-escalation boundaries for one dose at n patients.

    lambda_e carries the prior log-odds of underdosing vs on-target scaled by
    1/n and is clamped at 0; lambda_d mirrors it with overdosing odds and a
    clamp at 1. Only ratios of the pi components enter, so any positive
    rescaling of pi leaves the boundaries unchanged.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    p1, p2, p3 = pi.pi
    num_e = math.log((1.0 - phi1) / (1.0 - phi)) + math.log(p2 / p1) / n
    den_e = math.log(phi * (1.0 - phi1) / (phi1 * (1.0 - phi)))
    num_d = math.log((1.0 - phi) / (1.0 - phi2)) + math.log(p1 / p3) / n
    den_d = math.log(phi2 * (1.0 - phi) / (phi * (1.0 - phi2)))
    raw_e = num_e / den_e
    raw_d = num_d / den_d
    if raw_e > raw_d:
        raise ValueError(
            f"escalation boundary {raw_e:.4f} exceeds de-escalation boundary "
            f"{raw_d:.4f} at dose {dose}, n={n}: prior too extreme for this "
            f"(phi1, phi2) configuration")
    return Boundaries(lambda_e=max(0.0, raw_e), lambda_d=min(1.0, raw_d),
                      dose=dose, n=n)


def escalate_max(b: Boundaries) -> int:
    """Largest DLT count that still escalates: max{y : y/n < lambda_e}.
    -1 means no count escalates."""
    return int(math.ceil(b.n * b.lambda_e - _EDGE_EPS)) - 1


def deescalate_min(b: Boundaries) -> int:
    """Smallest DLT count that de-escalates: min{y : y/n > lambda_d}.
    A value above n means no count de-escalates."""
    return int(math.floor(b.n * b.lambda_d + _EDGE_EPS)) + 1


def dose_hypothesis_priors(settings: TrialSettings, prior: PriorSpec
                           ) -> tuple[list[HypothesisPrior], list[str]]:
    """Per-dose hypothesis priors from a PriorSpec, applying the robust
    truncation and the mixture weight. Returns (priors, notes); notes carry
    surfaced warnings such as non-integer PESS rounding."""
    notes: list[str] = []
    j_star = prior_mtd_index(prior.skeleton, settings.target)
    pess = prior.pess
    if prior.robustify:
        pess = robustify_pess(pess, j_star, settings.num_doses)
        if pess != prior.pess:
            notes.append(f"robust prior: PESS zeroed above the prior MTD (dose {j_star})")
    out: list[HypothesisPrior] = []
    for j, (q, n0) in enumerate(zip(prior.skeleton, pess), start=1):
        n0_int = int(round(n0))
        if abs(n0 - n0_int) > 1e-9:
            notes.append(f"dose {j}: PESS {n0:g} rounded to {n0_int} for the "
                         "hypothesis prior (its sum runs over integer pseudo-counts)")
        hp = hypothesis_prior(q, n0_int, settings.target, settings.phi1, settings.phi2)
        if prior.mixture_weight is not None:
            hp = mixture_hypothesis_prior(hp, prior.mixture_weight)
        out.append(hp)
    return out, notes


@dataclass(frozen=True)
class DecisionTable:
    """Pre-tabulated escalate/de-escalate DLT-count boundaries plus the
    elimination column, on the cohort grid n = cohort, 2*cohort, ..., N."""

    phi: float
    phi1: float
    phi2: float
    n_grid: tuple[int, ...]
    escalate: tuple[tuple[int, ...], ...]       # [dose][col], -1 = never
    deescalate: tuple[tuple[int, ...], ...]     # [dose][col], > n = never
    eliminate: tuple[Optional[int], ...]        # [col], dose-independent
    dose_priors: tuple[HypothesisPrior, ...]
    notes: tuple[str, ...] = ()

    @property
    def num_doses(self) -> int:
        return len(self.escalate)

    def column(self, n: int) -> int:
        try:
            return self.n_grid.index(n)
        except ValueError:
            raise KeyError(f"n={n} is not a column of this table (grid {self.n_grid})")

    def decision(self, dose: int, n: int, y: int) -> Decision:
        """Raw boundary comparison at a grid point, before any clipping."""
        col = self.column(n)
        elim = self.eliminate[col]
        if elim is not None and y >= elim:
            return (Decision.TERMINATE_TRIAL if dose == 1
                    else Decision.ELIMINATE_AND_DEESCALATE)
        if y <= self.escalate[dose - 1][col]:
            return Decision.ESCALATE
        if y >= self.deescalate[dose - 1][col]:
            return Decision.DEESCALATE
        return Decision.STAY

    def to_json_dict(self) -> dict:
        return {
            "phi": self.phi,
            "phi1": self.phi1,
            "phi2": self.phi2,
            "n_grid": list(self.n_grid),
            "doses": [
                {
                    "dose": j + 1,
                    "escalate_max": list(self.escalate[j]),
                    "deescalate_min": list(self.deescalate[j]),
                    "eliminate_min": [e for e in self.eliminate],
                }
                for j in range(self.num_doses)
            ],
            "notes": list(self.notes),
        }

    def to_csv(self) -> str:
        """One escalate / de-escalate / eliminate row per dose,
        columns indexed by the number of patients treated. Cells that no DLT
        count can trigger are left blank."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dose", "action", *self.n_grid])
        for j in range(self.num_doses):
            esc = [e if e >= 0 else "" for e in self.escalate[j]]
            des = [d if d <= n else "" for d, n in zip(self.deescalate[j], self.n_grid)]
            eli = ["" if e is None else e for e in self.eliminate]
            w.writerow([j + 1, "escalate if DLT <=", *esc])
            w.writerow([j + 1, "deescalate if DLT >=", *des])
            w.writerow([j + 1, "eliminate if DLT >=", *eli])
        return buf.getvalue()


def decision_table(settings: TrialSettings, prior: PriorSpec,
                   rule: EliminationRule = EliminationRule()) -> DecisionTable:
    """Build the full decision table for validated settings."""
    if settings.phi1 is None or settings.phi2 is None:
        raise ValueError("settings must be validated (phi1/phi2 resolved) first")
    priors, notes = dose_hypothesis_priors(settings, prior)
    n_grid = tuple(range(settings.cohort_size, settings.max_n + 1, settings.cohort_size))
    esc_rows, des_rows = [], []
    for j, hp in enumerate(priors, start=1):
        esc, des = [], []
        for n in n_grid:
            b = boundaries(settings.target, settings.phi1, settings.phi2, hp, n, dose=j)
            esc.append(escalate_max(b))
            des.append(deescalate_min(b))
        esc_rows.append(tuple(esc))
        des_rows.append(tuple(des))
    elim = tuple(elimination_min_dlt(settings.target, n, rule) for n in n_grid)
    for j in range(settings.num_doses):
        for c in range(len(n_grid)):
            if not esc_rows[j][c] < des_rows[j][c]:
                raise RuntimeError(f"table inconsistency at dose {j+1}, n={n_grid[c]}")
    return DecisionTable(phi=settings.target, phi1=settings.phi1, phi2=settings.phi2,
                         n_grid=n_grid, escalate=tuple(esc_rows),
                         deescalate=tuple(des_rows), eliminate=elim,
                         dose_priors=tuple(priors), notes=tuple(notes))


def boin_next_dose(table: DecisionTable, state: TrialState) -> tuple[Decision, int]:
    """Decision for the current dose from its table row, with boundary
    clipping: no escalating past the top dose or into the eliminated range,
    no de-escalating below dose 1."""
    j = state.current_dose
    data = state.dose_data(j)
    if data.n <= 0:
        raise ValueError("no patients treated at the current dose yet")
    raw = table.decision(j, data.n, data.y)
    if raw == Decision.ESCALATE:
        nxt = j + 1
        if nxt > table.num_doses or not state.is_admissible(nxt):
            return Decision.STAY, j
        return Decision.ESCALATE, nxt
    if raw in (Decision.DEESCALATE, Decision.ELIMINATE_AND_DEESCALATE):
        if j == 1:
            return (Decision.TERMINATE_TRIAL, j) if raw == Decision.ELIMINATE_AND_DEESCALATE \
                else (Decision.STAY, j)
        return raw, j - 1
    if raw == Decision.TERMINATE_TRIAL:
        return raw, j
    return Decision.STAY, j
